"""Per-slot physical layer: Rayleigh channel draws, transmit powers, matched
filter decoding, MF-SIC SINR and achievable rates.

All SINR arithmetic is linear (powers in mW). A :class:`ChannelDraw` holds one
L-antenna vector per (transmitter, cluster head) pair so inter-cell terms are
always available.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class DegenerateChannelError(ValueError):
    pass


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def draw_channel(stream: np.random.Generator, L: int, size: tuple[int, ...] = ()) -> np.ndarray:
    """Complex Gaussian vector(s) of length ``L``; each real and imaginary part
    has standard deviation 1/sqrt(2) so E|h_l|^2 = 1."""
    if L < 1:
        raise ValueError(f"antenna count must be >= 1, got {L}")
    shape = tuple(size) + (L,)
    scale = 1.0 / np.sqrt(2.0)
    re = stream.normal(0.0, scale, shape)
    im = stream.normal(0.0, scale, shape)
    return re + 1j * im


def draw_power(stream: np.random.Generator, dbm_range: tuple[float, float]) -> float:
    """Uniform draw in dBm, returned in mW."""
    lo, hi = dbm_range
    if lo > hi:
        raise ValueError(f"inverted power interval [{lo}, {hi}]")
    return float(dbm_to_mw(stream.uniform(lo, hi)))


def draw_powers(streams, ranges) -> np.ndarray:
    """One power per entity; ``streams`` and ``ranges`` are parallel sequences."""
    return np.array([draw_power(s, r) for s, r in zip(streams, ranges)])


def matched_filter(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if not np.any(h):
        raise DegenerateChannelError("matched filter undefined for a zero channel")
    return h.copy()


@dataclass
class ChannelDraw:
    """One slot's channels and powers.

    ``channels[j, k]`` is the vector from transmitter ``j`` to cluster head
    ``k``; ``cell_of[j]`` is the transmitter's own cell and ``is_ue[j]``
    marks legitimate UEs (pUEs and iUEs) as opposed to jammers.
    """

    channels: np.ndarray
    powers: np.ndarray
    noise_variance: float
    cell_of: np.ndarray
    is_ue: np.ndarray

    def __post_init__(self) -> None:
        n_tx = self.channels.shape[0]
        if self.powers.shape != (n_tx,) or self.cell_of.shape != (n_tx,) or self.is_ue.shape != (n_tx,):
            raise ValueError("per-transmitter arrays disagree with the channel tensor")
        if np.any(self.powers <= 0):
            raise ValueError("transmit powers must be positive")
        if not self.noise_variance > 0:
            raise ValueError("noise variance must be positive")


def _sic_removed(ue: int, cell: int, active: np.ndarray, draw: ChannelDraw) -> np.ndarray:
    """Intra-cell UEs decoded (and cancelled) before ``ue``: those with a
    strictly larger received power, ties broken by lower index."""
    H = draw.channels[:, cell, :]
    rx = draw.powers * np.sum(np.abs(H) ** 2, axis=1)
    cand = active & draw.is_ue & (draw.cell_of == cell)
    stronger = (rx > rx[ue]) | ((rx == rx[ue]) & (np.arange(len(rx)) < ue))
    return cand & stronger


def sinr_linear(v: np.ndarray, ue: int, cell: int, active: np.ndarray, draw: ChannelDraw) -> float:
    """SINR of ``ue`` at cluster head ``cell`` for an arbitrary decoding vector."""
    active = np.asarray(active, dtype=bool)
    H = draw.channels[:, cell, :]
    proj = np.abs(H @ np.conj(v)) ** 2
    signal = draw.powers[ue] * proj[ue]
    others = active.copy()
    others[ue] = False
    interference = np.sum(draw.powers[others] * proj[others])
    return float(signal / (interference + np.vdot(v, v).real * draw.noise_variance))


def sinr_mf_sic(
    ue: int, cell: int, active: np.ndarray, draw: ChannelDraw, ordered_sic: bool = False
) -> float:
    """MF-SIC SINR of transmitter ``ue`` at the cluster head of ``cell``.

    With ``ordered_sic`` intra-cell UEs stronger than ``ue`` are treated as
    already decoded and drop out of the interference sum.
    """
    active = np.asarray(active, dtype=bool)
    if not active[ue]:
        raise ValueError(f"SINR undefined for inactive transmitter {ue}")
    H = draw.channels[:, cell, :]
    h = H[ue]
    gain = np.vdot(h, h).real
    if gain == 0:
        raise DegenerateChannelError("zero desired channel")
    cross = np.abs(H @ np.conj(h)) ** 2
    interferers = active.copy()
    interferers[ue] = False
    if ordered_sic:
        interferers &= ~_sic_removed(ue, cell, active, draw)
    interference = np.sum(draw.powers[interferers] * cross[interferers])
    return float(draw.powers[ue] * gain**2 / (interference + gain * draw.noise_variance))


def achievable_rate(sinr):
    """log2(1 + SINR) in bits/slot/Hz; accepts scalars or arrays."""
    s = np.asarray(sinr, dtype=float)
    if np.any(s < 0):
        raise ValueError("SINR must be non-negative")
    out = np.log2(1.0 + s)
    return float(out) if out.ndim == 0 else out


class FrameRates(NamedTuple):
    per_ue: np.ndarray    # summed over the frame's slots
    per_slot: np.ndarray  # summed over UEs
    total: float


def frame_rates(rates) -> FrameRates:
    """``rates`` is (N_UE, S); idle slots must already hold 0."""
    r = np.atleast_2d(np.asarray(rates, dtype=float))
    per_ue = r.sum(axis=1)
    return FrameRates(per_ue, r.sum(axis=0), float(per_ue.sum()))
