"""Train the residual DQN on a tiny single-cell network and compare it with
the oracle and with never transmitting.

The jammer is off for slots 0-1 of every 5-slot frame; pUE 0 uses slots 1-2
and pUE 1 uses slot 3, so slot 0 is the only free one. A trained agent should
learn to dispatch there and nowhere else.

    python3 demos/desk_training.py [episodes]
"""
import sys

import numpy as np

from sclar import ExperimentConfig, NetworkConfig, run_training
from sclar.harness import GreedyPolicy

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 1000
net = NetworkConfig(pue_count=2, jammer_count=1, frame_slots=5,
                    pue_patterns=[[0, 1, 1, 0, 0], [0, 0, 0, 1, 0]], jammer_off_slots=2)

runs = {}
for agent in ("resdqn", "oracle", "hold"):
    runs[agent] = run_training(ExperimentConfig(network=net, agent=agent, episodes=episodes))
    s = runs[agent].summary()
    print(f"{agent:>7}: reward/slot {s['first_average_reward']:8.2f} -> {s['final_average_reward']:8.2f}"
          f"   SCLAR {s['first_sclar']:.3f} -> {s['final_sclar']:.3f}")

ratio = runs["resdqn"].summary()["final_average_reward"] / runs["oracle"].summary()["final_average_reward"]
print(f"\nlast-100 reward, DQN / oracle: {ratio:.3f}")

actions = [r["actions"] for r in runs["resdqn"].episode_rows[-5:]]
print("last five frames of DQN actions:", actions)

loss = runs["resdqn"].column("loss")
k = max(1, len(loss) // 10)
print(f"mean loss, first 10%: {np.nanmean(loss[:k]):.1f}  last 10%: {np.nanmean(loss[-k:]):.1f}")

# the greedy policy the agent would deploy
policy = GreedyPolicy(runs["resdqn"].agent)
print("greedy action from the zero state:", policy.select_action(np.zeros(24)))
