"""Experiment orchestration: training loop, metrics, sweeps and file output.

One episode is one frame of ``frame_slots`` slots. The environment is never
reset between episodes; the last state of a frame is the first state of the
next.

Slot metrics (``slots.csv`` / ``slots.jsonl``), one row per slot:

    episode, slot, action, ack, reward, cumulative_reward, average_reward,
    sclar, average_sclar, loss, epsilon

``cumulative_reward`` and ``average_reward`` run within the episode;
``average_sclar`` is a trailing mean over the last ``channel_realizations``
slots; ``loss`` is empty when no training step ran in that slot; ``epsilon``
is the exploration rate used for the slot's action.

Episode metrics (``episodes.csv`` / ``episodes.jsonl``), one row per episode:

    episode, reward, average_reward, cumulative_reward, sclar, average_sclar,
    loss, epoch_loss, epochs, dispatches, actions, epsilon

``reward`` is the episode total and ``average_reward`` its per-slot mean;
``cumulative_reward`` runs over the whole run; ``sclar`` is the mean
instantaneous SCLAR of the episode and ``average_sclar`` its trailing mean
over ``channel_realizations`` episodes; ``loss`` is the mean training loss of
the episode's gradient steps (its epochs), ``epoch_loss`` the last of them;
``actions`` is the iUE action string, e.g. ``"01000"``.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines as bl
from .dqn import AgentConfig, QAgent
from .env import JammingEnv
from .topology import ConfigError, NetworkConfig, build_network

AGENTS = ("resdqn", "fcdqn", "oracle", "random", "hold")
SLOT_FIELDS = ["episode", "slot", "action", "ack", "reward", "cumulative_reward", "average_reward",
               "sclar", "average_sclar", "loss", "epsilon"]
EPISODE_FIELDS = ["episode", "reward", "average_reward", "cumulative_reward", "sclar", "average_sclar",
                  "loss", "epoch_loss", "epochs", "dispatches", "actions", "epsilon"]


@dataclass
class ExperimentConfig:
    network: NetworkConfig = field(default_factory=NetworkConfig)
    agent_config: AgentConfig = field(default_factory=AgentConfig)
    agent: str = "resdqn"
    episodes: int = 3000
    channel_realizations: int = 100
    out_dir: str | None = None
    tag: str = "run"
    output_width: int = 2
    write_slots: bool = True

    def validate(self) -> None:
        self.network.validate()
        self.agent_config.validate()
        if self.agent not in AGENTS:
            raise ConfigError("agent", f"unknown agent {self.agent!r}; choose from {', '.join(AGENTS)}")
        if self.episodes < 1:
            raise ConfigError("episodes", "must be >= 1")
        if self.channel_realizations < 1:
            raise ConfigError("channel_realizations", "must be >= 1")
        if self.output_width < 2:
            raise ConfigError("output_width", "must be >= 2")

    @property
    def seed(self) -> int:
        return self.network.master_seed

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["network"] = self.network.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        net = NetworkConfig.from_dict(data.pop("network", {}))
        agent_fields = {f.name for f in dataclasses.fields(AgentConfig)}
        raw_agent = data.pop("agent_config", {})
        unknown = set(raw_agent) - agent_fields
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown agent configuration key")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration key")
        return cls(network=net, agent_config=AgentConfig(**raw_agent), **data)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{path} is not valid JSON: {exc}") from exc


def make_agent(cfg: ExperimentConfig, state_dim: int):
    total = cfg.episodes * cfg.network.frame_slots
    seed = cfg.seed
    if cfg.agent == "resdqn":
        return bl.build_res_dqn(state_dim, cfg.agent_config, seed, total, output_width=cfg.output_width)
    if cfg.agent == "fcdqn":
        return QAgent(bl.fc_architecture(state_dim, output_width=cfg.output_width), cfg.agent_config,
                      seed, total, name="fcdqn")
    if cfg.agent == "oracle":
        return bl.OraclePolicy()
    if cfg.agent == "random":
        return bl.RandomPolicy(seed)
    return bl.HoldPolicy()


def compute_sclar_metrics(clar_rows, window: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Instantaneous SCLAR per slot (sum of per-UE CLAR) and its trailing mean
    over ``window`` slots."""
    c = np.atleast_2d(np.asarray(clar_rows, dtype=float))
    inst = c.sum(axis=1) if c.size else np.zeros(0)
    return inst, trailing_mean(inst, window)


def trailing_mean(x, window: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    cs = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(0, idx - window)
    return (cs[idx] - cs[lo]) / (idx - lo)


@dataclass
class RunResult:
    config: ExperimentConfig
    slot_rows: list[dict]
    episode_rows: list[dict]
    agent: object
    files: dict[str, Path] = field(default_factory=dict)

    def column(self, name: str, episodes: bool = True) -> np.ndarray:
        rows = self.episode_rows if episodes else self.slot_rows
        return np.array([np.nan if r[name] is None else r[name] for r in rows], dtype=float)

    def summary(self, last: int = 100) -> dict:
        avg = self.column("average_reward")
        scl = self.column("sclar")
        loss = self.column("loss")
        n = min(last, len(avg))
        return {
            "agent": self.config.agent,
            "episodes": len(avg),
            "final_average_reward": float(avg[-n:].mean()),
            "first_average_reward": float(avg[:n].mean()),
            "final_sclar": float(scl[-n:].mean()),
            "first_sclar": float(scl[:n].mean()),
            "final_loss": float(np.nanmean(loss[-n:])) if np.any(np.isfinite(loss[-n:])) else None,
        }


def run_training(cfg: ExperimentConfig, agent=None, learn: bool = True) -> RunResult:
    """Run ``cfg.episodes`` frames. ``learn=False`` skips replay and training."""
    cfg.validate()
    env = JammingEnv(build_network(cfg.network))
    if agent is None:
        agent = make_agent(cfg, env.state_dim)
    S = cfg.network.frame_slots
    s = env.reset()
    slot_rows, episode_rows = [], []
    run_total = 0.0
    recent_sclar: list[float] = []
    for ep in range(1, cfg.episodes + 1):
        ep_reward, ep_sclar, losses, actions = 0.0, [], [], []
        eps = None
        for k in range(1, S + 1):
            eps = agent.epsilon.value if isinstance(agent, QAgent) else 0.0
            a = agent.select_action(s, env.peek())
            res = env.step(a)
            loss = agent.observe(s, a, res.reward, res.state) if learn else None
            s = res.state
            if loss is not None:
                losses.append(loss)
            ep_reward += res.reward
            sc = res.info.sclar
            ep_sclar.append(sc)
            recent_sclar.append(sc)
            if len(recent_sclar) > cfg.channel_realizations:
                recent_sclar.pop(0)
            actions.append(a)
            slot_rows.append({
                "episode": ep, "slot": k, "action": a, "ack": res.ack.short, "reward": res.reward,
                "cumulative_reward": ep_reward, "average_reward": ep_reward / k, "sclar": sc,
                "average_sclar": float(np.mean(recent_sclar)), "loss": loss, "epsilon": eps,
            })
        run_total += ep_reward
        ep_mean_sclar = float(np.mean(ep_sclar))
        window = [r["sclar"] for r in episode_rows[-(cfg.channel_realizations - 1):]] if cfg.channel_realizations > 1 else []
        episode_rows.append({
            "episode": ep, "reward": ep_reward, "average_reward": ep_reward / S,
            "cumulative_reward": run_total, "sclar": ep_mean_sclar,
            "average_sclar": float(np.mean(window + [ep_mean_sclar])),
            "loss": float(np.mean(losses)) if losses else None,
            "epoch_loss": losses[-1] if losses else None, "epochs": len(losses),
            "dispatches": int(sum(actions)), "actions": "".join(map(str, actions)), "epsilon": eps,
        })
    result = RunResult(cfg, slot_rows, episode_rows, agent)
    if cfg.out_dir:
        result.files = write_run(result)
    return result


def write_run(result: RunResult) -> dict[str, Path]:
    cfg = result.config
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    files = {}
    if cfg.write_slots:
        files.update(emit_metrics(result.slot_rows, out / "slots", SLOT_FIELDS))
    files.update(emit_metrics(result.episode_rows, out / "episodes", EPISODE_FIELDS))
    cfg_path = out / "config.json"
    cfg_path.write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    files["config"] = cfg_path
    if isinstance(result.agent, QAgent):
        ck = out / "checkpoint.npz"
        result.agent.save(ck)
        files["checkpoint"] = ck
    return files


def emit_metrics(rows: list[dict], stem, fields: list[str] | None = None, formats=("csv", "jsonl")) -> dict[str, Path]:
    """Write ``rows`` as ``<stem>.csv`` and/or ``<stem>.jsonl``. ``None`` is an
    empty CSV cell and JSON ``null``."""
    stem = Path(stem)
    fields = fields or (list(rows[0]) if rows else [])
    for r in rows:
        for k in fields:
            v = r.get(k)
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError(f"non-finite metric {k}={v} in row {r}")
    paths = {}
    try:
        if "csv" in formats:
            p = stem.with_suffix(".csv")
            with open(p, "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
                w.writeheader()
                for r in rows:
                    w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
            paths["csv"] = p
        if "jsonl" in formats:
            p = stem.with_suffix(".jsonl")
            with open(p, "w") as fh:
                for r in rows:
                    fh.write(json.dumps({k: r.get(k) for k in fields}) + "\n")
            paths["jsonl"] = p
    except OSError as exc:
        raise OSError(f"cannot write metrics to {stem}: {exc}") from exc
    return {f"{stem.name}.{k}": v for k, v in paths.items()}


def read_csv(path) -> list[dict]:
    """Parse a metrics CSV back into typed rows."""
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            row = {}
            for k, v in r.items():
                if v == "":
                    row[k] = None
                elif k in ("ack", "actions"):
                    row[k] = v
                else:
                    n = float(v)
                    row[k] = int(n) if k in ("episode", "slot", "action", "epochs", "dispatches") else n
            out.append(row)
    return out


class GreedyPolicy:
    """Frozen greedy policy wrapped for evaluation runs."""

    def __init__(self, agent: QAgent):
        self.name = agent.name
        self._act = agent.extract_policy()

    def select_action(self, s, context=None) -> int:
        return self._act(s)

    def observe(self, *args):
        return None


def run_evaluation(cfg: ExperimentConfig, checkpoint) -> RunResult:
    agent = QAgent.load(checkpoint)
    return run_training(cfg, GreedyPolicy(agent), learn=False)


def _apply(base: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    net = dataclasses.replace(base.network)
    cfg = dataclasses.replace(base, network=net, agent_config=dataclasses.replace(base.agent_config))
    if axis == "frame_size":
        net.frame_slots = int(value)
        if net.pue_patterns is not None and len(net.pue_patterns[0]) != net.frame_slots:
            raise ConfigError("pue_patterns", "explicit pUE patterns do not match the swept frame size")
    elif axis == "roster":
        net.pue_count, net.jammer_count = (int(v) for v in value)
    elif axis == "agent":
        cfg.agent = str(value)
    else:
        raise ConfigError("axis", f"unknown sweep axis {axis!r}")
    if base.out_dir:
        label = "x".join(map(str, value)) if isinstance(value, (tuple, list)) else str(value)
        cfg.out_dir = str(Path(base.out_dir) / f"{axis}-{label}")
    return cfg


def run_sweep(base: ExperimentConfig, axis: str, values) -> list[dict]:
    """One independent run per value; failures are recorded, not raised."""
    table = []
    for v in values:
        row = {"axis": axis, "value": v}
        try:
            row.update(run_training(_apply(base, axis, v)).summary(), status="ok", error="")
        except (ValueError, OSError, FloatingPointError) as exc:
            row.update(status="failed", error=str(exc))
        table.append(row)
    if base.out_dir and table:
        Path(base.out_dir).mkdir(parents=True, exist_ok=True)
        fields = ["axis", "value", "status", "agent", "episodes", "final_average_reward", "first_average_reward",
                  "final_sclar", "first_sclar", "final_loss", "error"]
        rows = [{**r, "value": json.dumps(r["value"]) if isinstance(r["value"], (tuple, list)) else r["value"]}
                for r in table]
        emit_metrics(rows, Path(base.out_dir) / "sweep", fields, formats=("csv",))
    return table
