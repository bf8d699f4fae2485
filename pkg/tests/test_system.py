import numpy as np
import pytest
from hypothesis import given, strategies as st

from d2dsim.system import (SystemParams, cue_tx_power, db_to_linear, dbm_to_mw, dist,
                           generate_topology, link_gamma, sample_fading, sinr_at_receiver,
                           target_power)


def test_db_conversions():
    assert db_to_linear(0) == 1.0
    assert db_to_linear(10) == pytest.approx(10.0)
    assert db_to_linear(4) == pytest.approx(2.5118864315)
    assert dbm_to_mw(-90) == pytest.approx(1e-9)


def test_defaults_are_the_evaluation_cell():
    p = SystemParams()
    assert (p.alpha, p.rho, p.theta, p.noise_power) == (4.0, 1.0, 1.0, 1e-9)
    assert (p.cell_radius, p.d2d_max_len, p.epoch_len, p.blockage_W) == (200.0, 100.0, 100, 1)
    assert p.warning_threshold == p.theta
    assert p.cue_alone_rate == pytest.approx(np.exp(-1))


@pytest.mark.parametrize("kw", [dict(alpha=2.0), dict(rho=0.0), dict(blockage_W=0),
                                dict(blockage_W=1.5), dict(d2d_max_len=300.0), dict(vartheta=-1.0)])
def test_invalid_params_rejected(kw):
    with pytest.raises(ValueError):
        SystemParams(**kw)


def test_channel_inversion_hits_target():
    p = SystemParams()
    for d in (10.0, 57.3, 200.0):
        assert link_gamma(cue_tx_power(d, p), d, p) == pytest.approx(p.rho)
        assert link_gamma(target_power(7.5, d, p), d, p) == pytest.approx(7.5)


def test_link_gamma_by_hand():
    # 0.4 mW over 80 m with alpha 4 and -90 dBm noise: 0.4e9 / 80^4
    assert link_gamma(0.4, 80.0, SystemParams()) == pytest.approx(9.765625)


def test_sinr_and_distance():
    assert dist((0, 0), (3, 4)) == 5.0
    assert sinr_at_receiver(2.0, 1.5, 2.0) == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1), st.integers(0, 8), st.integers(0, 8))
def test_topology_geometry(seed, k, m):
    p = SystemParams()
    t = generate_topology(np.random.default_rng(seed), k, m, p)
    assert t.cues.shape == (k, 2) and t.sources.shape == (m, 2) and t.dests.shape == (m, 2)
    for pts in (t.cues, t.sources, t.dests):
        assert np.all(np.hypot(*pts.T) <= p.cell_radius + 1e-9)
    for j in range(m):
        assert t.d_sd(j) <= p.d2d_max_len + 1e-9


def test_topology_is_reproducible():
    p = SystemParams()
    a = generate_topology(np.random.default_rng(3), 5, 5, p)
    b = generate_topology(np.random.default_rng(3), 5, 5, p)
    assert np.array_equal(a.cues, b.cues) and np.array_equal(a.dests, b.dests)


def test_positions_uniform_over_the_disk():
    # area-uniform: P[r < R/2] = 1/4
    t = generate_topology(np.random.default_rng(0), 40000, 0, SystemParams())
    frac = np.mean(np.hypot(*t.cues.T) < 100.0)
    assert abs(frac - 0.25) < 4 * np.sqrt(0.25 * 0.75 / 40000)


def test_fading_is_unit_mean_exponential():
    h = sample_fading(np.random.default_rng(1), 200000)
    assert abs(h.mean() - 1) < 0.01
    assert abs(np.mean(h > 1) - np.exp(-1)) < 0.005
