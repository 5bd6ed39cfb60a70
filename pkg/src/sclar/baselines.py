"""Reference policies: the network-aware oracle, random and always-hold UEs,
and the fully connected DQN variant."""
from __future__ import annotations

import numpy as np

from . import neuralnet as nn
from .dqn import AgentConfig, QAgent
from .mac import DISPATCH, HOLD
from .topology import RngSet


def oracle_action(pue_flags, jammer_flags) -> int:
    """Dispatch iff no in-cell pUE transmits and no in-cell jammer is on."""
    return HOLD if np.any(pue_flags) or np.any(jammer_flags) else DISPATCH


class FixedPolicy:
    """Base for non-learning policies; ``observe`` is a no-op."""

    name = "fixed"
    needs_context = False

    def observe(self, s, a, r, s_next):
        return None

    def extract_policy(self):
        return lambda s: self.select_action(s)


class OraclePolicy(FixedPolicy):
    """Reads the upcoming slot's realised schedule flags before acting."""

    name = "oracle"
    needs_context = True

    def __init__(self, cell: int = 0):
        self.cell = cell

    def select_action(self, s, context=None) -> int:
        if context is None:
            raise ValueError("the oracle needs the slot context")
        return oracle_action(context.pue_flags[self.cell], context.jammer_flags[self.cell])

    def extract_policy(self):
        raise NotImplementedError("the oracle acts on slot context, not on the observed state")


class RandomPolicy(FixedPolicy):
    name = "random"

    def __init__(self, seed: int = 0, p_dispatch: float = 0.5):
        self.rng = RngSet(seed).stream("exploration")
        self.p = p_dispatch

    def select_action(self, s, context=None) -> int:
        return int(self.rng.random() < self.p)


class HoldPolicy(FixedPolicy):
    name = "hold"

    def select_action(self, s, context=None) -> int:
        return HOLD


def fc_architecture(input_dim: int, widths=(32, 128, 128), output_width: int = 2) -> nn.Architecture:
    widths = tuple(widths)
    if not widths:
        return nn.Architecture(input_dim, 0, 0, 1, (), output_width)
    return nn.Architecture(input_dim, widths[0], 0, 1, widths[1:], output_width)


def resnet_architecture(input_dim: int, output_width: int = 2, **kw) -> nn.Architecture:
    return nn.Architecture(input_dim, output_width=output_width, **kw)


def build_fc_dqn(input_dim: int, config: AgentConfig | None = None, seed: int = 0,
                 total_slots: int | None = None, widths=(32, 128, 128)) -> QAgent:
    """Same training machinery as the residual agent, plain dense network."""
    return QAgent(fc_architecture(input_dim, widths), config, seed, total_slots, name="fcdqn")


def build_res_dqn(input_dim: int, config: AgentConfig | None = None, seed: int = 0,
                  total_slots: int | None = None, **arch_kw) -> QAgent:
    return QAgent(resnet_architecture(input_dim, **arch_kw), config, seed, total_slots, name="resdqn")
