import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from capx.channel import Identity, TanhClip
from capx.inputs import ContinuousFamily, ParticleSet, make_constellation, measure_cost, named_distribution
from capx.interference import (AdaptiveScaling, FixedInterferenceChannel, InterferenceChannel,
                               bound_limit, interference_offsets, interferer_distributions, primary_mi,
                               rescale_interferer, sample_users, theorem2_bound)
from capx.monotonicity import satellite_construct, timeshare_bound_check
from capx.quadrature import mutual_information


def test_rescale_examples():
    d = ParticleSet([-2.0, 2.0], [0.5, 0.5])
    r = rescale_interferer(d, 2.0)
    np.testing.assert_allclose(r.positions, [-1.0, 1.0])
    assert measure_cost(d) == 4.0 and measure_cost(r) == pytest.approx(1.0)
    assert rescale_interferer(d, 1.0) == d
    g = rescale_interferer(ContinuousFamily("gaussian", 8.0), 2.0)
    assert g.power == pytest.approx(2.0)
    with pytest.raises(ValueError):
        rescale_interferer(d, 0.0)


@given(st.integers(1, 8), st.floats(0.1, 10.0), st.integers(0, 1000))
def test_rescaled_cost_oracle(s, alpha, seed):
    rng = np.random.default_rng(seed)
    c, w = rng.normal(0, 5, s), rng.dirichlet(np.ones(s))
    d = ParticleSet(c, w)
    direct = sum(wi * (ci / alpha) ** 2 for ci, wi in zip(d.positions, d.weights))
    assert measure_cost(rescale_interferer(d, alpha)) == pytest.approx(direct, rel=1e-12)


def test_channel_validation():
    with pytest.raises(ValueError):
        InterferenceChannel(TanhClip(10.0), 1.0, ())
    with pytest.raises(ValueError):
        InterferenceChannel(TanhClip(10.0), 1.0, (math.inf,))
    with pytest.raises(ValueError):
        AdaptiveScaling((1.0, -1.0))
    ch = InterferenceChannel(TanhClip(10.0), 1.0, (0.5, 0.2))
    assert ch.k == 3
    with pytest.raises(ValueError):
        interferer_distributions(ch, make_constellation("bpsk", 1.0), AdaptiveScaling((1.0,)))


def test_zero_gain_matches_single_user():
    ich = InterferenceChannel(TanhClip(10.0), 1.0, (0.0,))
    for d in (named_distribution("pam4", 20.0), ContinuousFamily("gaussian", 10.0)):
        est = primary_mi(ich, d, AdaptiveScaling((1.0,)), 50_000, 2)
        ref = mutual_information(d, ich.single_user).mi_bits
        assert abs(est.estimate_bits - ref) <= 3 * est.std_error + 1e-12


@pytest.mark.parametrize("p", [1.0, 5.0, 20.0])
def test_gaussian_interference_closed_form(p):
    ich = InterferenceChannel(Identity(), 1.0, (1.0,))
    est = primary_mi(ich, ContinuousFamily("gaussian", p), AdaptiveScaling((1.0,)), 100_000, 7)
    expect = 0.5 * math.log2(1 + p / (1 + p))
    assert abs(est.estimate_bits - expect) <= 4 * est.std_error


def test_more_coupling_does_not_help():
    d = named_distribution("gaussian", 20.0)
    vals = []
    for g in (0.0, 0.25, 0.5, 1.0, 2.0):
        ich = InterferenceChannel(TanhClip(10.0), 1.0, (g,))
        vals.append(primary_mi(ich, d, AdaptiveScaling((1.0,)), 40_000, 5))
    for a, b in zip(vals, vals[1:]):
        assert b.estimate_bits <= a.estimate_bits + 3 * math.hypot(a.std_error, b.std_error)


def test_independent_user_streams():
    ich = InterferenceChannel(TanhClip(10.0), 1.0, (0.5, 0.3))
    n = 50_000
    xs = sample_users(ich, ContinuousFamily("gaussian", 4.0), AdaptiveScaling((1.0, 2.0)), n, 3)
    corr = np.corrcoef(xs.T)
    off = corr[~np.eye(3, dtype=bool)]
    assert np.all(np.abs(off) <= 3 / math.sqrt(n))
    assert np.var(xs[:, 2]) == pytest.approx(1.0, rel=0.05)


def test_primary_mi_deterministic_and_budget():
    ich = InterferenceChannel(TanhClip(10.0), 1.0, (0.5,))
    d = named_distribution("pam4", 10.0)
    a = primary_mi(ich, d, AdaptiveScaling((1.0,)), 2000, 4)
    b = primary_mi(ich, d, AdaptiveScaling((1.0,)), 2000, 4)
    assert (a.estimate_bits, a.std_error) == (b.estimate_bits, b.std_error)
    with pytest.raises(ValueError):
        primary_mi(ich, d, AdaptiveScaling((1.0,)), 50, 0)


def test_offsets_exact_and_sampled():
    ich = InterferenceChannel(TanhClip(10.0), 1.0, (0.5, 2.0))
    bpsk = make_constellation("bpsk", 1.0)
    v = interference_offsets(ich, [bpsk, bpsk], 0)
    np.testing.assert_allclose(v.positions, [-2.5, -1.5, 1.5, 2.5])
    np.testing.assert_allclose(v.weights, 0.25)
    big = ParticleSet(np.linspace(-3, 3, 200), np.ones(200))
    v = interference_offsets(ich, [big, big], 0)
    assert len(v) == 10_000 and abs(v.weights.sum() - 1.0) < 1e-12


def test_fixed_interference_reduces_to_single_user_without_offsets():
    ich = InterferenceChannel(TanhClip(10.0), 1.0, (0.0,))
    fixed = FixedInterferenceChannel.freeze(ich, [make_constellation("bpsk", 1.0)])
    d = named_distribution("pam4", 30.0)
    assert fixed.mutual_information(d).mi_bits == pytest.approx(mutual_information(d, ich.single_user).mi_bits,
                                                                 abs=1e-9)


def test_fixed_interference_timeshare_bound():
    ich = InterferenceChannel(TanhClip(10.0), 1.0, (0.5,))
    fixed = FixedInterferenceChannel.freeze(ich, [named_distribution("pam4", 20.0)])
    rep = timeshare_bound_check(fixed, named_distribution("pam8", 10.0), 1e3, [0.5, 0.1, 0.02])
    assert rep.passed


def test_fixed_interference_quadrature_matches_monte_carlo():
    # with alpha = 1 the adaptive interferer equals the frozen one
    ich = InterferenceChannel(TanhClip(10.0), 1.0, (0.7,))
    d = named_distribution("pam4", 20.0)
    fixed = FixedInterferenceChannel.freeze(ich, [d])
    est = primary_mi(ich, d, AdaptiveScaling((1.0,)), 100_000, 8)
    assert abs(fixed.mutual_information(d).mi_bits - est.estimate_bits) <= 4 * est.std_error


def test_bound_limit_and_single_user():
    assert bound_limit(1.3, 2, 1e-12) == pytest.approx(1.3, abs=1e-9)
    assert bound_limit(1.3, 1, 0.2) == pytest.approx(0.8 * 1.3)


def test_each_user_mixture_hits_target_cost():
    base = ContinuousFamily("gaussian", 50.0)
    mix = satellite_construct(base, 5000.0, 0.05).distribution
    assert measure_cost(mix) == pytest.approx(5000.0, rel=1e-12)
    for alpha in (1.0, 2.0):
        assert measure_cost(rescale_interferer(mix, alpha)) == pytest.approx(5000.0 / alpha ** 2, rel=1e-12)


def test_theorem2_small_budget():
    ich = InterferenceChannel(TanhClip(10.0), 1.0, (0.5,))
    rep = theorem2_bound(ich, named_distribution("pam4", 20.0), 500.0, [0.3, 0.1],
                         AdaptiveScaling((1.5,)), 20_000, 1)
    assert rep.passed and rep.k == 2
    assert rep.best_bound == max(r.bound_bits for r in rep.rows)
    assert all(abs(r.cost - 500.0) < 1e-9 for r in rep.rows)
