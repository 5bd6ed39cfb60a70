"""Environment seen by one cell's intelligent UE.

Every legitimate UE in the agent's cell contributes an 8-wide block to the
state: ``[last action, ACK one-hot (6), last CLAR]``, pUEs first and the iUE
last. Other cells only enter through interference terms.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import channel as ch
from .mac import (
    DISPATCH, HOLD, Ack, ChannelStatus, FrameClock, Outcome, pue_schedule_bit, resolve_slot,
)
from .topology import Kind, Network, RngSet

BLOCK = 8


@dataclass(frozen=True)
class UtilityRow:
    decision: str
    nu_pue: float
    nu_iue: float
    nu_net: float


def default_table() -> dict[tuple[ChannelStatus, int], UtilityRow]:
    return {
        (ChannelStatus.JAMMED, HOLD): UtilityRow("G", 0, 4, 5),
        (ChannelStatus.PUE_TX, HOLD): UtilityRow("G", 1, 4, 5),
        (ChannelStatus.UNUSED, HOLD): UtilityRow("W", 0, 1, -10),
        (ChannelStatus.JAMMED, DISPATCH): UtilityRow("W", 0, 1, -10),
        (ChannelStatus.PUE_TX, DISPATCH): UtilityRow("B", 0, 3, -5),
        (ChannelStatus.UNUSED, DISPATCH): UtilityRow("E", 0, 5, 10),
    }


@dataclass
class UtilityParams:
    rows: dict[tuple[ChannelStatus, int], UtilityRow] = field(default_factory=default_table)

    def __post_init__(self) -> None:
        expected = {(s, a) for s in ChannelStatus for a in (HOLD, DISPATCH)}
        if set(self.rows) != expected:
            raise ValueError("utility table must have exactly one row per (channel status, action)")

    def row(self, status: ChannelStatus, action: int) -> UtilityRow:
        try:
            return self.rows[(status, action)]
        except KeyError:
            raise LookupError(f"no utility row for ({status}, {action})") from None

    def scaled_net(self, c: float) -> "UtilityParams":
        return UtilityParams({
            k: UtilityRow(r.decision, r.nu_pue, r.nu_iue, r.nu_net * c) for k, r in self.rows.items()
        })


def pue_utility(outcome: Outcome, clar_value: float, nu_pue: float) -> float:
    if clar_value < 0:
        raise ValueError("CLAR must be non-negative")
    return nu_pue * clar_value if outcome is Outcome.SUCCESS else 0.0


def iue_utility(status: ChannelStatus, action: int, potential_rate: float, params: UtilityParams) -> float:
    """Scaled potential rate: what the iUE would achieve had it transmitted."""
    if potential_rate < 0:
        raise ValueError("rate must be non-negative")
    return params.row(status, action).nu_iue * potential_rate


def reward(status: ChannelStatus, action: int, iue_util: float, pue_utils, params: UtilityParams) -> float:
    return params.row(status, action).nu_net * (iue_util + float(np.sum(pue_utils)))


def assemble_state(actions, acks, clars) -> np.ndarray:
    """Concatenate per-UE ``[action, one-hot ACK, CLAR]`` blocks."""
    if not len(actions) == len(acks) == len(clars):
        raise ValueError("per-UE action, ACK and CLAR sequences differ in length")
    blocks = [np.concatenate(([float(a)], ack.one_hot, [float(r)])) for a, ack, r in zip(actions, acks, clars)]
    return np.concatenate(blocks) if blocks else np.zeros(0)


@dataclass
class SlotContext:
    """Draws for the upcoming slot, fixed before the iUE acts."""

    pue_flags: list[np.ndarray]      # per cell
    jammer_flags: list[np.ndarray]   # per cell
    draw: ch.ChannelDraw


@dataclass
class SlotDiagnostics:
    frame: int
    slot: int
    action: int
    status: ChannelStatus
    outcomes: list[Outcome]
    acks: list[Ack]
    sinr: np.ndarray        # 0 for UEs that did not transmit
    rates: np.ndarray       # achievable rate, 0 if idle
    clar: np.ndarray        # realized per-slot CLAR
    iue_potential_rate: float
    pue_flags: np.ndarray
    jammer_flags: np.ndarray

    @property
    def sclar(self) -> float:
        return float(self.clar.sum())


@dataclass
class StepResult:
    state: np.ndarray
    reward: float
    ack: Ack
    info: SlotDiagnostics


class JammingEnv:
    """Slot-by-slot environment for the iUE of ``agent_cell``."""

    def __init__(self, network: Network, agent_cell: int = 0, utilities: UtilityParams | None = None):
        self.network = network
        self.config = network.config
        self.agent_cell = agent_cell
        self.utilities = utilities or UtilityParams()
        self.cell = network.cells[agent_cell]
        self.n_ue = len(self.cell.legit)
        self.state_dim = BLOCK * self.n_ue
        self.clock = FrameClock(self.config.frame_slots)
        tx = network.transmitters
        self._cell_of = np.array([e.cell for e in tx])
        self._is_ue = np.array([e.kind is not Kind.JAMMER for e in tx])
        self._power_ranges = [network.power_range(e) for e in tx]
        self._legit_idx = [network.tx_index[e] for e in self.cell.legit]
        self.reset()

    @property
    def num_actions(self) -> int:
        return 2

    def reset(self) -> np.ndarray:
        rngs = RngSet(self.config.master_seed)
        tx = self.network.transmitters
        self._chan_rng = [rngs.stream("channel", e) for e in tx]
        self._power_rng = [rngs.stream("power", e) for e in tx]
        self._sched_rng = {e: rngs.stream("schedule", e) for c in self.network.cells for e in c.pues}
        self._noise_rng = rngs.stream("noise")
        self.clock.reset()
        self.state = np.zeros(self.state_dim)
        self.pending = self._draw_slot()
        return self.state.copy()

    def peek(self) -> SlotContext:
        return self.pending

    def _draw_slot(self) -> SlotContext:
        cfg, net = self.config, self.network
        s = self.clock.slot - 1
        pue_flags, jam_flags = [], []
        for c in net.cells:
            if net.pue_patterns is not None:
                pf = np.array([net.pue_patterns[p][s] for p in c.pues], dtype=bool)
            else:
                pf = np.array([pue_schedule_bit(self._sched_rng[p], cfg.pue_tx_prob) for p in c.pues], dtype=bool)
            pue_flags.append(pf)
            jam_flags.append(np.array([net.jammer_patterns[j][s] for j in c.jammers], dtype=bool))
        K, L = net.num_cells, cfg.antennas
        channels = np.stack([ch.draw_channel(r, L, size=(K,)) for r in self._chan_rng]) if self._chan_rng \
            else np.zeros((0, K, L), complex)
        powers = np.array([ch.draw_power(r, pr) for r, pr in zip(self._power_rng, self._power_ranges)])
        if cfg.noise_mode == "uniform_dbm":
            noise = float(ch.dbm_to_mw(self._noise_rng.uniform(*cfg.noise_dbm_range)))
        else:
            noise = cfg.noise_variance
        draw = ch.ChannelDraw(channels, powers, noise, self._cell_of, self._is_ue)
        return SlotContext(pue_flags, jam_flags, draw)

    def _activity(self, ctx: SlotContext, action: int) -> np.ndarray:
        active = np.zeros(len(self.network.transmitters), dtype=bool)
        idx = self.network.tx_index
        for c in self.network.cells:
            pf, jf = ctx.pue_flags[c.index], ctx.jammer_flags[c.index]
            for p, f in zip(c.pues, pf):
                active[idx[p]] = f
            for j, f in zip(c.jammers, jf):
                active[idx[j]] = f
            if c.index == self.agent_cell:
                active[idx[c.iue]] = bool(action)
            elif self.config.other_iue_policy == "oracle":
                active[idx[c.iue]] = not (pf.any() or jf.any())
        return active

    def step(self, action: int) -> StepResult:
        if action not in (HOLD, DISPATCH):
            raise ValueError(f"action must be 0 (hold) or 1 (dispatch), got {action!r}")
        ctx = self.pending
        k = self.agent_cell
        draw = ctx.draw
        active = self._activity(ctx, action)
        res = resolve_slot(ctx.pue_flags[k], action, ctx.jammer_flags[k])

        sinr = np.zeros(self.n_ue)
        for n, j in enumerate(self._legit_idx):
            if active[j]:
                sinr[n] = ch.sinr_mf_sic(j, k, active, draw, self.config.ordered_sic)
        rates = ch.achievable_rate(sinr)
        clar = np.where([o is Outcome.SUCCESS for o in res.outcomes], rates, 0.0)

        iue = self._legit_idx[-1]
        if action == DISPATCH:
            potential = float(rates[-1])
        else:
            hypo = active.copy()
            hypo[iue] = True
            potential = ch.achievable_rate(ch.sinr_mf_sic(iue, k, hypo, draw, self.config.ordered_sic))

        row = self.utilities.row(res.status, action)
        pue_utils = [pue_utility(o, c, row.nu_pue) for o, c in zip(res.outcomes[:-1], clar[:-1])]
        u_iue = iue_utility(res.status, action, potential, self.utilities)
        r = reward(res.status, action, u_iue, pue_utils, self.utilities)
        if not np.isfinite(r):
            raise FloatingPointError(f"non-finite reward at slot {self.clock.global_slot}")

        actions = np.append(ctx.pue_flags[k].astype(int), action)
        self.state = assemble_state(actions, res.acks, clar)
        info = SlotDiagnostics(
            self.clock.frame, self.clock.slot, action, res.status, res.outcomes, res.acks,
            sinr, rates, clar, potential, ctx.pue_flags[k].copy(), ctx.jammer_flags[k].copy(),
        )
        self.clock.advance()
        self.pending = self._draw_slot()
        return StepResult(self.state.copy(), r, res.iue_ack, info)

    def slot_rewards(self) -> tuple[float, float]:
        """Reward for (hold, dispatch) in the pending slot, without advancing."""
        out = []
        for a in (HOLD, DISPATCH):
            saved = (self.state, self.pending)
            clock = (self.clock.frame, self.clock.slot)
            rngs = self._snapshot_rngs()
            out.append(self.step(a).reward)
            self.state, self.pending = saved
            self.clock.frame, self.clock.slot = clock
            self._restore_rngs(rngs)
        return out[0], out[1]

    def _snapshot_rngs(self):
        gens = self._chan_rng + self._power_rng + list(self._sched_rng.values()) + [self._noise_rng]
        return [g.bit_generator.state for g in gens]

    def _restore_rngs(self, states) -> None:
        gens = self._chan_rng + self._power_rng + list(self._sched_rng.values()) + [self._noise_rng]
        for g, s in zip(gens, states):
            g.bit_generator.state = s
