"""Deep Q-learning agent: replay buffer, epsilon-greedy exploration, targets,
training step, plus a tabular Q-learning reference."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import neuralnet as nn
from .topology import RngSet


class Experience(NamedTuple):
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray


class ReplayBuffer:
    """Bounded FIFO of experiences; the oldest entry is evicted first."""

    def __init__(self, capacity: int = 1000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: deque = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def push(self, e: Experience) -> None:
        self._items.append(e)

    def sample(self, n: int, stream: np.random.Generator) -> list[Experience] | None:
        """``n`` distinct experiences, or ``None`` while fewer than ``n`` are stored."""
        if len(self._items) < n:
            return None
        idx = stream.choice(len(self._items), size=n, replace=False)
        return [self._items[i] for i in idx]


class EpsilonSchedule:
    """eps_t = max(eps_min, eps0 * decay**t), advanced once per action.

    Without an explicit ``decay`` the rate is chosen so that eps_min is
    reached after ``fraction * total_slots`` steps.
    """

    def __init__(self, eps0: float = 1.0, eps_min: float = 0.001, decay: float | None = None,
                 total_slots: int | None = None, fraction: float = 0.8):
        if not 0 <= eps_min <= eps0 <= 1:
            raise ValueError("need 0 <= eps_min <= eps0 <= 1")
        if decay is None:
            if not total_slots:
                raise ValueError("give either decay or total_slots")
            horizon = max(1.0, fraction * total_slots)
            decay = (eps_min / eps0) ** (1.0 / horizon) if eps_min > 0 and eps0 > 0 else 0.0
        if not 0 <= decay <= 1:
            raise ValueError(f"decay must lie in [0, 1], got {decay}")
        self.eps0, self.eps_min, self.decay = eps0, eps_min, decay
        self.t = 0

    @property
    def value(self) -> float:
        return max(self.eps_min, self.eps0 * self.decay**self.t)

    def step(self) -> float:
        self.t += 1
        return self.value


def greedy(q) -> int:
    # np.argmax returns the first maximum, i.e. ties go to hold
    return int(np.argmax(q))


@dataclass
class AgentConfig:
    gamma: float = 0.9
    lr: float = 1e-3
    batch_size: int = 32
    capacity: int = 1000
    tau: float = 0.1
    target_period: int = 10
    eps0: float = 1.0
    eps_min: float = 0.001
    eps_decay: float | None = None
    eps_fraction: float = 0.8
    bootstrap: str = "target"   # network evaluating max_a' Q(s', a')
    reward_scale: float = 1.0
    num_actions: int = 2

    def validate(self) -> None:
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if self.bootstrap not in ("target", "prediction"):
            raise ValueError(f"unknown bootstrap network {self.bootstrap!r}")
        if self.batch_size < 1 or self.target_period < 1:
            raise ValueError("batch_size and target_period must be >= 1")


class QAgent:
    """Prediction and target networks trained from replayed experience."""

    def __init__(self, arch: nn.Architecture, config: AgentConfig | None = None, seed: int = 0,
                 total_slots: int | None = None, name: str = "resdqn"):
        self.config = cfg = config or AgentConfig()
        cfg.validate()
        if arch.output_width < cfg.num_actions:
            raise nn.ShapeError("output layer narrower than the action set")
        self.name = name
        rngs = RngSet(seed)
        self.pred = nn.init_params(arch, rngs.stream("weight_init"))
        self.target = self.pred.copy()
        self.adam = nn.AdamState.for_params(self.pred, lr=cfg.lr)
        self.buffer = ReplayBuffer(cfg.capacity)
        self.epsilon = EpsilonSchedule(cfg.eps0, cfg.eps_min, cfg.eps_decay, total_slots or 1, cfg.eps_fraction)
        self.explore_rng = rngs.stream("exploration")
        self.replay_rng = rngs.stream("replay")
        self.t = 0
        self.last_loss: float | None = None

    @property
    def arch(self) -> nn.Architecture:
        return self.pred.arch

    def q_values(self, s, params: nn.ModelParams | None = None) -> np.ndarray:
        q = nn.model_forward(params or self.pred, s)
        return q[..., : self.config.num_actions]

    def select_action(self, s, context=None) -> int:
        eps = self.epsilon.value
        self.epsilon.step()
        if self.explore_rng.random() < eps:
            return int(self.explore_rng.integers(self.config.num_actions))
        return greedy(self.q_values(s))

    def q_targets(self, batch) -> np.ndarray:
        s_next = np.stack([e.s_next for e in batch])
        r = np.array([e.r for e in batch], dtype=float) * self.config.reward_scale
        net = self.target if self.config.bootstrap == "target" else self.pred
        q_next = np.atleast_2d(self.q_values(s_next, net))
        return r + self.config.gamma * q_next.max(axis=1)

    def train_step(self, batch) -> float:
        """One Adam step on the MSE between Q(s, a) and the bootstrapped targets."""
        y = self.q_targets(batch)
        s = np.stack([e.s for e in batch])
        a = np.array([e.a for e in batch], dtype=int)
        q, cache = nn.model_forward(self.pred, s, return_cache=True)
        rows = np.arange(len(batch))
        taken = q[rows, a]
        loss = nn.mse_loss(taken, y)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite training loss at step {self.t}")
        g = np.zeros_like(q)
        g[rows, a] = nn.mse_grad(taken, y)
        grads = nn.backward(self.pred, cache, g)
        self.pred, self.adam = nn.adam_step(self.pred, grads, self.adam)
        return loss

    def update_target(self) -> None:
        self.target = nn.soft_update(self.target, self.pred, self.config.tau)

    def observe(self, s, a, r, s_next) -> float | None:
        """Store a transition, refresh the target on schedule, train if the
        buffer holds a full batch. Returns the loss or ``None``."""
        self.buffer.push(Experience(np.asarray(s, float).copy(), int(a), float(r), np.asarray(s_next, float).copy()))
        self.t += 1
        if self.t % self.config.target_period == 0:
            self.update_target()
        batch = self.buffer.sample(self.config.batch_size, self.replay_rng)
        if batch is None:
            return None
        self.last_loss = self.train_step(batch)
        return self.last_loss

    def extract_policy(self) -> Callable[[np.ndarray], int]:
        params = self.pred.copy()
        n = self.config.num_actions
        return lambda s: greedy(nn.model_forward(params, s)[..., :n])

    def save(self, path) -> None:
        extra = {f"t{i:03d}": a for i, a in enumerate(self.target.arrays)}
        extra.update({f"m{i:03d}": a for i, a in enumerate(self.adam.m)})
        extra.update({f"v{i:03d}": a for i, a in enumerate(self.adam.v)})
        meta = {
            "kind": "qagent", "name": self.name, "t": self.t, "eps_t": self.epsilon.t,
            "eps": [self.epsilon.eps0, self.epsilon.eps_min, self.epsilon.decay],
            "adam_t": self.adam.t, "config": vars(self.config),
        }
        nn.save_checkpoint(path, self.pred, extra, meta)

    @classmethod
    def load(cls, path) -> "QAgent":
        pred, extra, meta = nn.load_checkpoint(path)
        if meta.get("kind") != "qagent":
            raise ValueError(f"{path}: not an agent checkpoint")
        agent = cls(pred.arch, AgentConfig(**meta["config"]), name=meta.get("name", "resdqn"))
        n = len(pred.arrays)
        agent.pred = pred
        agent.target = nn.ModelParams(pred.arch, [extra[f"t{i:03d}"] for i in range(n)])
        agent.adam = nn.AdamState([extra[f"m{i:03d}"] for i in range(n)], [extra[f"v{i:03d}"] for i in range(n)],
                                  meta["adam_t"], agent.config.lr)
        eps0, eps_min, decay = meta["eps"]
        agent.epsilon = EpsilonSchedule(eps0, eps_min, decay)
        agent.epsilon.t = meta["eps_t"]
        agent.t = meta["t"]
        return agent


def tabular_q_update(Q: np.ndarray, s: int, a: int, r: float, s_next: int, alpha: float, gamma: float) -> np.ndarray:
    """Q-learning step on a copy of ``Q``."""
    n_s, n_a = Q.shape
    if not (0 <= s < n_s and 0 <= s_next < n_s and 0 <= a < n_a):
        raise IndexError(f"state/action index out of range for table of shape {Q.shape}")
    out = np.array(Q, dtype=float)
    out[s, a] += alpha * (r + gamma * out[s_next].max() - out[s, a])
    return out


def value_iteration(next_state: np.ndarray, rewards: np.ndarray, gamma: float,
                    tol: float = 1e-13, max_iter: int = 100_000) -> np.ndarray:
    """Optimal Q of a deterministic MDP given ``next_state[s, a]`` and ``rewards[s, a]``."""
    Q = np.zeros(rewards.shape)
    for _ in range(max_iter):
        new = rewards + gamma * Q.max(axis=1)[next_state]
        if np.max(np.abs(new - Q)) < tol:
            return new
        Q = new
    return Q
