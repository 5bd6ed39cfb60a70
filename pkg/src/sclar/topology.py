"""Static network structure and seeded random streams.

Every stochastic draw in a run descends from ``NetworkConfig.master_seed``
through :class:`RngSet`, keyed by purpose and entity, so that e.g. changing
the exploration draws never perturbs the channel draws.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .mac import jammer_schedule


class ConfigError(ValueError):
    """Invalid configuration value; the message names the offending field."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class Kind(str, Enum):
    PUE = "pUE"
    IUE = "iUE"
    JAMMER = "jammer"
    CLUSTER_HEAD = "cluster_head"


_KIND_CODE = {Kind.PUE: 0, Kind.IUE: 1, Kind.JAMMER: 2, Kind.CLUSTER_HEAD: 3}


class EntityId(NamedTuple):
    cell: int
    kind: Kind
    index: int

    def __str__(self) -> str:
        return f"c{self.cell}:{self.kind.value}{self.index}"


@dataclass
class NetworkConfig:
    """Network and simulation settings.

    Powers are dBm intervals; ``noise_variance`` is linear (mW). Counts are
    per cell. ``pue_patterns`` (one 0/1 row of length ``frame_slots`` per pUE)
    overrides the Bernoulli schedules with deterministic repeating ones, and
    ``jammer_off_slots`` fixes the inactive prefix of every periodic jammer;
    when left ``None`` each jammer draws its own from the schedule stream.
    """

    num_cells: int = 1
    pue_count: int = 2
    jammer_count: int = 1
    antennas: int = 4
    frame_slots: int = 5
    total_frames: int = 1000
    pue_tx_prob: float = 0.5
    pue_power_range: tuple[float, float] = (20.0, 25.0)
    jammer_power_range: tuple[float, float] = (20.0, 30.0)
    iue_power_range: tuple[float, float] = (20.0, 25.0)
    noise_variance: float = 1.0
    master_seed: int = 0
    jammer_pattern_mode: str = "periodic_onoff"
    pue_schedule_mode: str = "bernoulli"
    pue_patterns: list[list[int]] | None = None
    jammer_off_slots: int | None = None
    enforce_off_lt_on: bool = True
    noise_mode: str = "fixed"
    noise_dbm_range: tuple[float, float] = (2.0, 5.0)
    ordered_sic: bool = False
    other_iue_policy: str = "oracle"

    def validate(self) -> None:
        for name in ("num_cells", "frame_slots", "total_frames", "antennas"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)}")
        for name in ("pue_count", "jammer_count"):
            if getattr(self, name) < 0:
                raise ConfigError(name, f"must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.pue_tx_prob <= 1.0:
            raise ConfigError("pue_tx_prob", "must lie in [0, 1]")
        for name in ("pue_power_range", "jammer_power_range", "iue_power_range", "noise_dbm_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(name, f"inverted interval [{lo}, {hi}]")
        if not self.noise_variance > 0:
            raise ConfigError("noise_variance", "must be > 0")
        if self.jammer_pattern_mode not in ("periodic_onoff", "fixed_subset"):
            raise ConfigError("jammer_pattern_mode", f"unknown mode {self.jammer_pattern_mode!r}")
        if self.pue_schedule_mode not in ("bernoulli", "fixed"):
            raise ConfigError("pue_schedule_mode", f"unknown mode {self.pue_schedule_mode!r}")
        if self.noise_mode not in ("fixed", "uniform_dbm"):
            raise ConfigError("noise_mode", f"unknown mode {self.noise_mode!r}")
        if self.other_iue_policy not in ("oracle", "hold"):
            raise ConfigError("other_iue_policy", f"unknown policy {self.other_iue_policy!r}")
        if self.pue_patterns is not None:
            rows = np.asarray(self.pue_patterns)
            if rows.shape != (self.pue_count, self.frame_slots):
                raise ConfigError(
                    "pue_patterns",
                    f"expected shape ({self.pue_count}, {self.frame_slots}), got {rows.shape}",
                )
            if not np.isin(rows, (0, 1)).all():
                raise ConfigError("pue_patterns", "entries must be 0 or 1")
        if self.jammer_off_slots is not None:
            s_off = self.jammer_off_slots
            if not 0 <= s_off <= self.frame_slots:
                raise ConfigError("jammer_off_slots", f"must lie in [0, {self.frame_slots}]")
            if self.enforce_off_lt_on and not s_off < self.frame_slots - s_off:
                raise ConfigError("jammer_off_slots", "inactive period must be shorter than active period")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown configuration key")
        kwargs = dict(data)
        for name in ("pue_power_range", "jammer_power_range", "iue_power_range", "noise_dbm_range"):
            if name in kwargs:
                kwargs[name] = tuple(float(v) for v in kwargs[name])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "NetworkConfig":
        with open(path) as fh:
            data = json.load(fh)
        return cls.from_dict(data.get("network", data))


PURPOSES = ("channel", "power", "schedule", "noise", "exploration", "replay", "weight_init")


class RngSet:
    """Named, independent random substreams derived from one master seed.

    A stream is a pure function of ``(master_seed, purpose, entity)``; asking
    twice for the same key returns two generators producing the same sequence.
    """

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)

    def spawn_key(self, purpose: str, entity: EntityId | None = None) -> tuple[int, ...]:
        if purpose not in PURPOSES:
            raise ConfigError("purpose", f"unregistered stream purpose {purpose!r}")
        key = (PURPOSES.index(purpose),)
        if entity is not None:
            key += (entity.cell, _KIND_CODE[entity.kind], entity.index)
        return key

    def stream(self, purpose: str, entity: EntityId | None = None) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.spawn_key(purpose, entity))
        return np.random.Generator(np.random.PCG64(seq))


def derive_stream(rngs: RngSet, purpose: str, entity: EntityId | None = None) -> np.random.Generator:
    return rngs.stream(purpose, entity)


@dataclass
class Cell:
    index: int
    pues: list[EntityId]
    iue: EntityId
    jammers: list[EntityId]
    cluster_head: EntityId

    @property
    def legit(self) -> list[EntityId]:
        """Legitimate UEs in state-vector order: pUEs then the iUE."""
        return self.pues + [self.iue]


@dataclass
class Network:
    config: NetworkConfig
    cells: list[Cell]
    jammer_patterns: dict[EntityId, np.ndarray]
    pue_patterns: dict[EntityId, np.ndarray] | None
    transmitters: list[EntityId] = field(init=False)
    tx_index: dict[EntityId, int] = field(init=False)

    def __post_init__(self) -> None:
        self.transmitters = []
        for cell in self.cells:
            self.transmitters += cell.pues + [cell.iue] + cell.jammers
        self.tx_index = {e: i for i, e in enumerate(self.transmitters)}

    @property
    def num_cells(self) -> int:
        return len(self.cells)

    def power_range(self, entity: EntityId) -> tuple[float, float]:
        cfg = self.config
        return {
            Kind.PUE: cfg.pue_power_range,
            Kind.IUE: cfg.iue_power_range,
            Kind.JAMMER: cfg.jammer_power_range,
        }[entity.kind]

    def signature(self) -> dict:
        """Every drawn structural parameter, for equality checks."""
        return {
            "cells": [[str(e) for e in c.legit + c.jammers + [c.cluster_head]] for c in self.cells],
            "jammers": {str(k): v.tolist() for k, v in self.jammer_patterns.items()},
            "pues": None if self.pue_patterns is None
            else {str(k): v.tolist() for k, v in self.pue_patterns.items()},
        }


def build_network(config: NetworkConfig) -> Network:
    config.validate()
    rngs = RngSet(config.master_seed)
    S = config.frame_slots
    cells = []
    jammer_patterns = {}
    pue_patterns: dict[EntityId, np.ndarray] | None = None
    if config.pue_patterns is not None or config.pue_schedule_mode == "fixed":
        pue_patterns = {}

    for k in range(config.num_cells):
        pues = [EntityId(k, Kind.PUE, n) for n in range(config.pue_count)]
        jammers = [EntityId(k, Kind.JAMMER, m) for m in range(config.jammer_count)]
        cell = Cell(k, pues, EntityId(k, Kind.IUE, 0), jammers, EntityId(k, Kind.CLUSTER_HEAD, 0))
        cells.append(cell)

        for jam in jammers:
            rng = rngs.stream("schedule", jam)
            s_off = config.jammer_off_slots
            if s_off is None:
                s_off = _draw_off_slots(rng, S, config.enforce_off_lt_on)
            jammer_patterns[jam] = jammer_schedule(
                S, S - s_off, s_off, config.jammer_pattern_mode, rng=rng,
                enforce_off_lt_on=config.enforce_off_lt_on,
            )

        if pue_patterns is not None:
            for n, pue in enumerate(pues):
                if config.pue_patterns is not None:
                    pue_patterns[pue] = np.asarray(config.pue_patterns[n], dtype=np.int8)
                else:
                    rng = rngs.stream("schedule", pue)
                    pue_patterns[pue] = (rng.random(S) < config.pue_tx_prob).astype(np.int8)

    return Network(config, cells, jammer_patterns, pue_patterns)


def _draw_off_slots(rng: np.random.Generator, S: int, enforce: bool) -> int:
    upper = (S - 1) // 2 if enforce else S
    return int(rng.integers(0, upper + 1))
