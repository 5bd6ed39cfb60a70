"""Walk through one slot of the uplink: draw channels, then watch the iUE's
SINR fall as the pUEs and the jammer switch on.

    python3 demos/channel_walkthrough.py
"""
import numpy as np

from sclar import channel as ch
from sclar import JammingEnv, NetworkConfig, build_network
from sclar.mac import DISPATCH

cfg = NetworkConfig(num_cells=1, pue_count=2, jammer_count=1, antennas=4, master_seed=7)
env = JammingEnv(build_network(cfg))
env.reset()
ctx = env.peek()
draw = ctx.draw

# transmitter order inside a cell: pUEs, the iUE, then jammers
n_tx = len(draw.powers)
iue = int(np.flatnonzero(draw.is_ue)[-1])
print(f"{n_tx} transmitters, iUE index {iue}")
print("powers (mW):", np.round(draw.powers, 1))

active = np.zeros(n_tx, dtype=bool)
active[iue] = True
print(f"\nalone:            SINR {ch.sinr_mf_sic(iue, 0, active, draw):9.2f}"
      f"  rate {ch.achievable_rate(ch.sinr_mf_sic(iue, 0, active, draw)):.3f}")
for j in range(n_tx):
    if j == iue:
        continue
    active[j] = True
    s = ch.sinr_mf_sic(iue, 0, active, draw)
    who = "pUE" if draw.is_ue[j] else "jammer"
    print(f"+ {who:<6} {j}:      SINR {s:9.2f}  rate {ch.achievable_rate(s):.3f}")

# ordered SIC cancels stronger in-cell UEs first; jammers always stay
active[:] = True
plain = ch.sinr_mf_sic(iue, 0, active, draw)
sic = ch.sinr_mf_sic(iue, 0, active, draw, ordered_sic=True)
print(f"\neveryone on: plain {plain:.3f}, ordered SIC {sic:.3f}")

# what the env reports for the same slot
print("\nslot context: pUE flags", ctx.pue_flags[0], "jammer flags", ctx.jammer_flags[0])
hold_r, disp_r = env.slot_rewards()
print(f"reward if hold {hold_r:.2f}, if dispatch {disp_r:.2f}")
step = env.step(DISPATCH)
print("dispatched:", step.info.status.name, "ACKs", [a.name for a in step.info.acks],
      "SCLAR", round(step.info.sclar, 3))
