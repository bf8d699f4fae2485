import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from d2dsim.policy import PolicyContext
from d2dsim.simulator import (CUE_ONLY, D2B, D2D, NO_QUANT, CampaignConfig, ChannelSetup,
                              ChannelSlotState, Quantizer, cmp_setups, geo_setups, run_campaign,
                              run_channel, simulate_epoch, simulate_pair, simulate_slot,
                              simulate_topology)
from d2dsim.allocation import PowerPlan
from d2dsim.system import SystemParams, generate_topology
from d2dsim.throughput import DEFAULT_QUAD, analyze, lambda_star

from conftest import random_context

E1 = math.exp(-1.0)
seeds = st.integers(0, 2**32 - 1)


def within(est, se, exact, k=4.0):
    return abs(est - exact) <= k * se


@given(seeds, st.integers(1, 4), st.sampled_from([None, 0.01, 0.25]))
def test_slot_reference_matches_kernel(seed, W, step):
    rng = np.random.default_rng(seed)
    ctx = random_context(rng)
    params = SystemParams(blockage_W=W)
    quant = Quantizer(step=step, cap=3.0) if step else NO_QUANT
    fades = rng.exponential(1.0, (4, 400))
    for setup in (ChannelSetup(D2D, 0, ctx), ChannelSetup(D2D, 0, ctx, policy=False),
                  ChannelSetup(D2B, 0), ChannelSetup(CUE_ONLY)):
        cue_ok, due_ok, level, silent, trig = run_channel(setup, fades, params, quant)
        state = ChannelSlotState(setup.mode)
        for t in range(fades.shape[1]):
            (o,) = simulate_slot([state], [setup], params, fades=fades[:, t:t + 1], quant=quant)
            assert (o.cue_success, o.due_success, o.blockage_triggered, o.level) == \
                (bool(cue_ok[t]), bool(due_ok[t]), bool(trig[t]), int(level[t]))


def test_slot_draws_from_rng():
    params = SystemParams()
    states = [ChannelSlotState(CUE_ONLY), ChannelSlotState(D2B)]
    setups = [ChannelSetup(CUE_ONLY), ChannelSetup(D2B, 0)]
    a = simulate_slot(states, setups, params, rng=np.random.default_rng(1))
    assert len(a) == 2 and not a[1].due_success  # phase 0 belongs to the CUE
    assert states[1].tdma_phase == 1


def test_cue_alone_and_time_sharing_rates():
    params = SystemParams()
    fades = np.random.default_rng(3).exponential(1.0, (4, 200_000))
    cue, *_ = run_channel(ChannelSetup(CUE_ONLY), fades, params)
    assert within(cue.mean(), math.sqrt(E1 * (1 - E1) / cue.size), E1)
    cue, due, *_ = run_channel(ChannelSetup(D2B, 0), fades, params)
    half = 0.5 * E1
    for x in (cue, due):
        assert within(x.mean(), math.sqrt(half * (1 - half) / x.size), half)
    # never both in one slot
    assert not np.any(cue & due)


@given(seeds, st.integers(1, 6))
def test_blockage_silences_exactly_the_next_w_slots(seed, W):
    rng = np.random.default_rng(seed)
    ctx = random_context(rng, lam=float(rng.uniform(0.01, 0.5)))
    params = SystemParams(blockage_W=W)
    T = 3000
    _, due, level, silent, trig = run_channel(ChannelSetup(D2D, 0, ctx),
                                              rng.exponential(1.0, (4, T)), params, NO_QUANT)
    expected = np.zeros(T, bool)
    for t in np.flatnonzero(trig):
        # a trigger can only come from a transmitting slot
        assert level[t] > 0 and not silent[t]
        expected[t + 1:t + 1 + W] = True
    assert np.array_equal(silent.astype(bool), expected)
    assert not np.any(due[silent.astype(bool)])
    last = np.flatnonzero(trig)
    truncated = 0 if last.size == 0 else max(0, last[-1] + W - (T - 1))
    assert silent.sum() == W * trig.sum() - truncated


def test_unblocked_channel_never_silent():
    rng = np.random.default_rng(5)
    ctx = random_context(rng, n_levels=1)
    out = run_channel(ChannelSetup(D2D, 0, ctx, policy=False), rng.exponential(1.0, (4, 5000)),
                      SystemParams(blockage_W=6))
    assert out[3].sum() == 0 and out[4].sum() == 0 and np.all(out[2] == 1)


def test_quantizer():
    q = Quantizer(step=0.01, cap=5.0)
    assert q(0.014) == pytest.approx(0.01) and q(0.016) == pytest.approx(0.02)
    assert q(7.3) == 5.0 and q(0.0) == 0.0
    assert NO_QUANT(0.01234) == 0.01234
    assert NO_QUANT.kernel_args() == (-1.0, math.inf)
    for bad in (dict(step=0.0), dict(step=-1.0), dict(cap=0.0)):
        with pytest.raises(ValueError):
            Quantizer(**bad)


PAIRS = [
    (PolicyContext(5, 2, 3, 1, 1.0, 0.2), 2),
    (PolicyContext(20, 0.5, 8, 1, 1.0, 0.05), 1),
    (PolicyContext(9.7656, 4, 14.863, 9.645, 1.0, 1.5, 3), 3),
]


@pytest.mark.parametrize("ctx,W", PAIRS)
def test_pair_simulation_matches_analysis(ctx, W):
    params = SystemParams(blockage_W=W)
    est = simulate_pair(ctx, params, 200_000, np.random.default_rng(11))
    r = analyze(ctx, W, DEFAULT_QUAD)
    assert within(est.tau, est.tau_se, r.tau)
    assert within(est.sigma, est.sigma_se, r.sigma)


def test_decision_quantisation_costs_little():
    ctx, W = PAIRS[0]
    params = SystemParams(blockage_W=W)
    exact = simulate_pair(ctx, params, 200_000, np.random.default_rng(4))
    quant = simulate_pair(ctx, params, 200_000, np.random.default_rng(4), quant=Quantizer())
    assert abs(exact.tau - quant.tau) < 0.01 and abs(exact.sigma - quant.sigma) < 0.01


def small(**kw):
    base = dict(n_topologies=12, epoch_len=50, seed=9)
    base.update(kw)
    return CampaignConfig(**base)


def test_config_validation():
    for bad in (dict(W=0), dict(scheme="XYZ"), dict(n_levels=0), dict(quant_step=0.0),
                dict(kappa=-1.0), dict(workers=0)):
        with pytest.raises(ValueError):
            CampaignConfig(**bad)
    c = CampaignConfig(n_levels=20)
    assert c.power_plan.n_levels == 20 and c.power_plan.xi is None
    assert CampaignConfig(xi_db=10.0).power_plan.xi == pytest.approx(10.0)


@pytest.mark.parametrize("scheme", ["CMP", "GEO", "NONE"])
def test_campaign_invariants(scheme):
    m = run_campaign(small(scheme=scheme))
    assert 0 <= m.omega_c <= 1 and 0 <= m.omega_d <= 1
    assert m.omega_total == pytest.approx(m.omega_c + m.omega_d, abs=1e-15)
    assert m.n_topologies == 12 and m.n_slots == 600
    if scheme != "CMP":
        assert m.triggers == 0 and m.silent_slots == 0


def test_campaign_reproducible_and_worker_independent():
    c = small(scheme="CMP", W=2)
    a = run_campaign(c)
    assert run_campaign(c) == a
    assert run_campaign(replace(c, workers=2)) == a
    assert run_campaign(replace(c, seed=10)) != a


def test_no_reuse_rates():
    m = run_campaign(CampaignConfig(scheme="NONE", n_topologies=200, seed=1))
    assert within(m.omega_c, m.stderr_c, 0.5 * E1) and within(m.omega_d, m.stderr_d, 0.5 * E1)


def test_cmp_setups_follow_allocation():
    p = SystemParams(blockage_W=2)
    plan = PowerPlan(1, xi=6.0)
    t = generate_topology(np.random.default_rng(21), 4, 3, p)
    setups, a = cmp_setups(t, p, plan)
    for su, j, x in zip(setups, a.pairing, a.mode):
        if j is None:
            assert su.mode == CUE_ONLY
        elif x:
            assert su.mode == D2D and su.due == j and su.policy
            assert su.ctx.lam == pytest.approx(lambda_star(su.ctx, 2).lam)
        else:
            assert su.mode == D2B and su.due == j
    # 4 channels, 3 DUEs: at least one channel carries its CUE alone
    assert sum(su.mode == CUE_ONLY for su in setups) >= 1


def test_geo_setups_transmit_without_policy():
    p = SystemParams()
    t = generate_topology(np.random.default_rng(2), 5, 5, p)
    setups, a = geo_setups(t, p)
    for su in setups:
        if su.mode == D2D:
            assert not su.policy and su.ctx.gamma_sd == p.rho


def test_epoch_rates_shape():
    p = SystemParams(epoch_len=40)
    t = generate_topology(np.random.default_rng(0), 3, 2, p)
    setups = [ChannelSetup(D2B, 0), ChannelSetup(D2B, 1), ChannelSetup(CUE_ONLY)]
    r = simulate_epoch(t, setups, p, np.random.default_rng(1))
    assert r.cue_rates.shape == (3,) and r.due_rates.shape == (2,)
    assert np.all((r.cue_rates[:2] <= 0.5))


def test_halving_quantisation_step_is_within_noise():
    c = CampaignConfig(n_topologies=150, seed=3, W=2, xi_db=8.0)
    a = run_campaign(c)
    b = run_campaign(replace(c, quant_step=0.005))
    for x, y, se in ((a.omega_c, b.omega_c, a.stderr_c), (a.omega_d, b.omega_d, a.stderr_d),
                     (a.omega_total, b.omega_total, a.stderr_total)):
        assert abs(x - y) < se
