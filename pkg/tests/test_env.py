import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import desk_network
from sclar.env import (
    JammingEnv, UtilityParams, assemble_state, iue_utility, pue_utility, reward,
)
from sclar.mac import DISPATCH, HOLD, Ack, ChannelStatus, Outcome
from sclar.topology import NetworkConfig, build_network

U = UtilityParams()


def make_env(**kw):
    return JammingEnv(build_network(desk_network(**kw)))


def test_reset_zero_state():
    env = make_env()
    s = env.reset()
    assert s.shape == (24,) and not s.any()
    env.step(DISPATCH)
    s2 = env.reset()
    assert np.array_equal(s, s2) and (env.clock.frame, env.clock.slot) == (1, 1)
    assert env.reset().tolist() == s2.tolist()


def test_dispatch_into_free_slot_succeeds():
    env = make_env()
    res = env.step(DISPATCH)  # slot 1: no pUE, jammer off
    assert res.ack is Ack.SUCCESS
    assert res.info.status is ChannelStatus.UNUSED
    assert res.info.rates[-1] > 0


def test_hold_in_free_slot_is_idle():
    env = make_env()
    res = env.step(HOLD)
    assert res.ack is Ack.IDLE
    assert res.info.rates[-1] == 0 and res.info.clar[-1] == 0


def test_step_rejects_bad_action():
    with pytest.raises(ValueError):
        make_env().step(2)


def test_deterministic_streams():
    actions = [0, 1, 1, 0, 1, 0, 0, 1, 1, 1]
    a, b = make_env(seed=4), make_env(seed=4)
    for x in actions:
        ra, rb = a.step(x), b.step(x)
        assert ra.reward == rb.reward and np.array_equal(ra.state, rb.state) and ra.ack is rb.ack


def test_pue_utility_examples():
    assert pue_utility(Outcome.SUCCESS, 2.0, 1) == 2
    assert pue_utility(Outcome.COLLISION, 5.0, 1) == 0
    assert pue_utility(Outcome.SUCCESS, 0.0, 1) == 0


def test_iue_utility_examples():
    assert iue_utility(ChannelStatus.UNUSED, DISPATCH, 1.0, U) == 5
    assert iue_utility(ChannelStatus.JAMMED, HOLD, 1.0, U) == 4
    assert iue_utility(ChannelStatus.UNUSED, HOLD, 1.0, U) == 1
    assert iue_utility(ChannelStatus.PUE_TX, DISPATCH, 1.0, U) == 3


def test_reward_examples():
    assert reward(ChannelStatus.UNUSED, DISPATCH, 5, [], U) == 50
    assert reward(ChannelStatus.UNUSED, HOLD, 1, [], U) == -10
    assert reward(ChannelStatus.PUE_TX, HOLD, 4, [2], U) == 30


def test_utility_table_must_be_complete():
    rows = dict(U.rows)
    rows.pop((ChannelStatus.JAMMED, HOLD))
    with pytest.raises(ValueError):
        UtilityParams(rows)


def test_assemble_state_blocks():
    s = assemble_state([0, 0, 1], [Ack.IDLE, Ack.IDLE, Ack.SUCCESS], [0.0, 0.0, 1.5])
    assert s[16:].tolist() == [1, 0, 0, 0, 0, 0, 1, 1.5]
    assert s[:8].tolist() == [0, 0, 0, 1, 0, 0, 0, 0]
    with pytest.raises(ValueError):
        assemble_state([0], [Ack.IDLE, Ack.IDLE], [0.0])


def test_assemble_state_permutation_moves_blocks():
    acts, acks, clars = [1, 0, 0], [Ack.SUCCESS, Ack.BUSY, Ack.BUSY], [2.0, 0.0, 0.0]
    s = assemble_state(acts, acks, clars).reshape(3, 8)
    p = assemble_state(acts[::-1], acks[::-1], clars[::-1]).reshape(3, 8)
    assert np.array_equal(s[::-1], p)


@given(st.floats(0.01, 20), st.floats(0, 20))
def test_decision_ordering(rate, pue_rate):
    def r(status, a):
        row = U.row(status, a)
        return reward(status, a, iue_utility(status, a, rate, U), [row.nu_pue * pue_rate], U)
    E = r(ChannelStatus.UNUSED, DISPATCH)
    G = r(ChannelStatus.JAMMED, HOLD)
    B = r(ChannelStatus.PUE_TX, DISPATCH)
    W = r(ChannelStatus.UNUSED, HOLD)
    # positive decisions beat negative ones; with equal rates the table's
    # values make B (-5 * 3R) fall below W (-10 * 1R)
    assert E > G > 0 > max(B, W)
    assert B == pytest.approx(1.5 * W)


@pytest.mark.parametrize("c", [0.1, 2.0, 7.5])
def test_nu_net_homogeneity(c):
    base = JammingEnv(build_network(desk_network(seed=1)))
    scaled = JammingEnv(build_network(desk_network(seed=1)), utilities=U.scaled_net(c))
    for _ in range(10):
        rb, rs = base.slot_rewards(), scaled.slot_rewards()
        assert rs == pytest.approx(tuple(c * x for x in rb), rel=1e-12)
        assert np.argmax(rb) == np.argmax(rs)
        base.step(HOLD)
        scaled.step(HOLD)


def test_always_hold_has_no_iue_throughput():
    env = make_env(seed=2)
    for _ in range(50):
        res = env.step(HOLD)
        assert res.info.clar[-1] == 0 and res.ack is not Ack.SUCCESS


def test_state_invariants_over_random_actions():
    env = JammingEnv(build_network(NetworkConfig(pue_count=3, jammer_count=2, frame_slots=7, master_seed=3)))
    rng = np.random.default_rng(0)
    dim = env.reset().shape
    for _ in range(100):
        s = env.step(int(rng.integers(2))).state
        assert s.shape == dim
        blocks = s.reshape(-1, 8)
        assert np.all(blocks[:, 1:7].sum(axis=1) == 1)
        assert np.all(blocks[:, 7] >= 0)


def test_potential_rate_equals_dispatch_rate():
    a, b = make_env(seed=5), make_env(seed=5)
    for _ in range(15):
        ra, rb = a.step(HOLD), b.step(DISPATCH)
        assert ra.info.iue_potential_rate == pytest.approx(rb.info.rates[-1], rel=1e-12)


def test_slot_rewards_does_not_advance():
    a, b = make_env(seed=6), make_env(seed=6)
    for x in [1, 0, 0, 1, 1, 0]:
        a.slot_rewards()
        ra, rb = a.step(x), b.step(x)
        assert ra.reward == rb.reward


def test_uniform_dbm_noise_mode():
    env = make_env(seed=7, noise_mode="uniform_dbm")
    for _ in range(20):
        nv = env.peek().draw.noise_variance
        assert 10 ** 0.2 <= nv <= 10 ** 0.5
        env.step(HOLD)


def test_multi_cell_other_cells_interfere():
    cfg = NetworkConfig(num_cells=3, pue_count=2, jammer_count=1, master_seed=8)
    one = NetworkConfig(num_cells=1, pue_count=2, jammer_count=1, master_seed=8)
    e3, e1 = JammingEnv(build_network(cfg)), JammingEnv(build_network(one))
    assert e3.state_dim == e1.state_dim == 24
    for _ in range(10):
        e3.step(DISPATCH)
    assert len(e3.network.transmitters) == 3 * 4


def test_all_table_rows_reached_by_env():
    # desk schedule: slot 1 unused, slot 2 pUE only, slots 3-5 jammed
    seen = set()
    for a in (HOLD, DISPATCH):
        env = make_env()
        for _ in range(5):
            seen.add((env.step(a).info.status, a))
    assert seen == set(itertools.product(ChannelStatus, (HOLD, DISPATCH)))
