"""Sweep the frame length with short runs and write one CSV per run plus a
sweep table. Equivalent to

    sclar sweep --axis frame_size --values 5,10,20 --episodes 300 --out runs/frames

    python3 demos/frame_sweep.py [out_dir]
"""
import sys

from sclar import ExperimentConfig, NetworkConfig, run_sweep

out = sys.argv[1] if len(sys.argv) > 1 else "runs/frames"
base = ExperimentConfig(network=NetworkConfig(pue_count=3, jammer_count=1, master_seed=3),
                        episodes=300, out_dir=out, write_slots=False)
for row in run_sweep(base, "frame_size", [5, 10, 20]):
    print(row)
