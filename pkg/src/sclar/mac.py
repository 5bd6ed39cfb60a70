"""Slotted MAC machinery: frame clock, schedules, slot resolution, ACKs and
cross-layer rates."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Ack(Enum):
    """ACK labels with the bit position of their one-hot code."""

    JAMMED_HOLD = 0   # J_T: held while the channel was jammed
    BUSY = 1          # B: held while a pUE transmitted
    IDLE = 2          # I: held on an unused channel
    JAMMED_TX = 3     # J_A: transmitted and got jammed
    COLLISION = 4     # C
    SUCCESS = 5       # S

    @property
    def one_hot(self) -> np.ndarray:
        v = np.zeros(6)
        v[self.value] = 1.0
        return v

    @property
    def short(self) -> str:
        return _SHORT[self]


_SHORT = {
    Ack.JAMMED_HOLD: "J_T", Ack.BUSY: "B", Ack.IDLE: "I",
    Ack.JAMMED_TX: "J_A", Ack.COLLISION: "C", Ack.SUCCESS: "S",
}


class ChannelStatus(Enum):
    UNUSED = "unused"
    PUE_TX = "pue_transmitting"
    JAMMED = "jammed"


class Outcome(Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    JAMMED = "jammed"
    IDLE = "idle"


HOLD, DISPATCH = 0, 1


@dataclass
class FrameClock:
    """1-based frame/slot counters; ``global_slot`` is 1-based too."""

    slots_per_frame: int
    frame: int = 1
    slot: int = 1

    @property
    def global_slot(self) -> int:
        return (self.frame - 1) * self.slots_per_frame + self.slot

    def advance(self) -> None:
        if self.slot == self.slots_per_frame:
            self.frame += 1
            self.slot = 1
        else:
            self.slot += 1

    def reset(self) -> None:
        self.frame = self.slot = 1


def pue_schedule_bit(stream: np.random.Generator, tx_prob: float) -> int:
    # one uniform per call regardless of tx_prob keeps streams aligned across configs
    return int(stream.random() < tx_prob)


def jammer_schedule(
    S: int,
    s_on: int,
    s_off: int,
    mode: str = "periodic_onoff",
    rng: np.random.Generator | None = None,
    enforce_off_lt_on: bool = True,
) -> np.ndarray:
    """Per-slot activity bits of a random jammer for one frame.

    ``periodic_onoff`` sleeps for the first ``s_off`` slots and jams for the
    remaining ``s_on``; ``fixed_subset`` jams in ``s_on`` slots chosen by
    ``rng``. The same array is reused for every frame.
    """
    if s_on + s_off != S or s_on < 0 or s_off < 0:
        raise ValueError(f"s_on + s_off must equal S: {s_on} + {s_off} != {S}")
    if enforce_off_lt_on and not s_off < s_on:
        raise ValueError(f"inactive period must be shorter than active one (s_off={s_off}, s_on={s_on})")
    bits = np.zeros(S, dtype=np.int8)
    if mode == "periodic_onoff":
        bits[s_off:] = 1
    elif mode == "fixed_subset":
        if rng is None:
            raise ValueError("fixed_subset mode needs a random stream")
        bits[rng.choice(S, size=s_on, replace=False)] = 1
    else:
        raise ValueError(f"unknown jammer pattern mode {mode!r}")
    return bits


def channel_status(pue_flags, jammer_flags) -> ChannelStatus:
    """Channel status seen by the iUE, from pUE and jammer flags only."""
    if np.any(jammer_flags):
        return ChannelStatus.JAMMED
    if np.any(pue_flags):
        return ChannelStatus.PUE_TX
    return ChannelStatus.UNUSED


@dataclass
class SlotOutcome:
    outcomes: list[Outcome]      # per legitimate UE, pUEs first, iUE last
    acks: list[Ack]
    status: ChannelStatus

    @property
    def iue_ack(self) -> Ack:
        return self.acks[-1]


def resolve_slot(pue_flags, iue_action: int, jammer_flags) -> SlotOutcome:
    """Resolve one cell's slot.

    Jamming dominates collisions: with any in-cell jammer active no
    transmitter succeeds and every transmitter is reported jammed.
    """
    tx = np.append(np.asarray(pue_flags, dtype=bool), bool(iue_action))
    jammed = bool(np.any(jammer_flags))
    n_tx = int(tx.sum())
    outcomes, acks = [], []
    for n, sending in enumerate(tx):
        if sending:
            if jammed:
                outcomes.append(Outcome.JAMMED)
                acks.append(Ack.JAMMED_TX)
            elif n_tx > 1:
                outcomes.append(Outcome.COLLISION)
                acks.append(Ack.COLLISION)
            else:
                outcomes.append(Outcome.SUCCESS)
                acks.append(Ack.SUCCESS)
        else:
            outcomes.append(Outcome.IDLE)
            if jammed:
                acks.append(Ack.JAMMED_HOLD)
            elif n_tx > 0:
                acks.append(Ack.BUSY)
            else:
                acks.append(Ack.IDLE)
    return SlotOutcome(outcomes, acks, channel_status(pue_flags, jammer_flags))


def success_rate(outcomes) -> float:
    """Fraction of the frame's slots with a successful packet."""
    outcomes = list(outcomes)
    if not outcomes:
        return 0.0
    return sum(o is Outcome.SUCCESS for o in outcomes) / len(outcomes)


def clar(xi: float, rate: float) -> float:
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"success rate must lie in [0, 1], got {xi}")
    if rate < 0:
        raise ValueError(f"achievable rate must be >= 0, got {rate}")
    return xi * rate


def sclar(clar_vectors, actions) -> float:
    """Frame objective: sum over UEs of r_n . a_n, both shaped (N_UE, S)."""
    r = np.atleast_2d(np.asarray(clar_vectors, dtype=float))
    a = np.atleast_2d(np.asarray(actions, dtype=float))
    if r.shape != a.shape:
        raise ValueError(f"shape mismatch: CLAR {r.shape} vs actions {a.shape}")
    return float(np.sum(r * a))
