import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from capx.inputs import (ContinuousFamily, Mixture, ParticleSet, make_constellation, measure_cost,
                         named_distribution, point_mass)
from capx.monotonicity import (BoundViolation, binary_entropy, lemma1_gap, lemma1_suite,
                               monotonicity_audit, satellite_construct, satellite_cost,
                               timeshare_bound, timeshare_bound_check)
from capx.quadrature import mutual_information

H2_011 = 0.49991595816452799564


def test_binary_entropy_values():
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.11) == pytest.approx(H2_011, abs=1e-15)
    for bad in (-0.1, 1.1):
        with pytest.raises(ValueError):
            binary_entropy(bad)


def test_satellite_bpsk_example():
    mix = satellite_construct(make_constellation("bpsk", 1.0), 10.0, 0.1)
    assert mix.satellite.positions[0] == pytest.approx(math.sqrt(91.0), rel=1e-15)
    assert mix.cost == pytest.approx(10.0, abs=1e-12)
    d = mix.distribution
    assert isinstance(d, ParticleSet)
    assert measure_cost(d) == pytest.approx(10.0, abs=1e-12)


def test_satellite_degenerate_split():
    base = named_distribution("pam4", 3.0)
    for eps in (0.2, 1.0):
        mix = satellite_construct(base, 3.0, eps)
        assert measure_cost(mix.satellite) == pytest.approx(3.0)
        assert mix.cost == pytest.approx(3.0, abs=1e-12)


def test_satellite_errors():
    base = make_constellation("bpsk", 4.0)
    with pytest.raises(ValueError):
        satellite_construct(base, 10.0, 0.0)
    with pytest.raises(ValueError):
        satellite_construct(base, 1.0, 0.5)


@given(st.floats(0.01, 100.0), st.floats(0.0, 1e4), st.floats(1e-3, 1.0))
def test_mixture_cost_linearity(base_cost, extra, eps):
    target = base_cost + extra
    assert satellite_cost(base_cost, target, eps) >= target - 1e-9 * target
    for base in (ContinuousFamily("gaussian", base_cost), named_distribution("pam3", base_cost)):
        mix = satellite_construct(base, target, eps)
        assert abs(measure_cost(mix.distribution) - target) <= 1e-9 * target
        assert abs(mix.cost - target) <= 1e-9 * target


def test_continuous_base_gives_mixture():
    mix = satellite_construct(ContinuousFamily("gaussian", 1.0), 100.0, 0.5)
    assert isinstance(mix.distribution, Mixture)


@pytest.mark.parametrize("base", [make_constellation("bpsk", 1.0), ContinuousFamily("gaussian", 4.0),
                                  named_distribution("pam4", 20.0)])
def test_timeshare_bound_holds(tanh_ch, base):
    rep = timeshare_bound_check(tanh_ch, base, 1e4, [0.5, 0.1, 0.01])
    assert rep.passed
    bounds = [r.bound_bits for r in rep.rows]
    assert bounds == sorted(bounds)
    assert rep.bound == pytest.approx(0.99 * rep.mi_base_bits)
    assert rep.certified_lower_bound >= rep.bound - max(r.tolerance_bits for r in rep.rows)


def test_timeshare_degenerate_base(tanh_ch):
    rep = timeshare_bound_check(tanh_ch, point_mass(0.0), 100.0, [0.5, 0.1])
    assert rep.passed and all(abs(r.bound_bits) < 1e-9 for r in rep.rows)


def test_bound_with_one_user_is_point_to_point():
    for eps in (0.5, 0.1, 0.02):
        assert timeshare_bound(1.7, eps, 1) == (1 - eps) * 1.7
    assert timeshare_bound(1.7, 0.1, 2) == pytest.approx(0.81 * 1.7 - binary_entropy(0.1))


def test_lemma1_special_cases(rng):
    pxy = rng.dirichlet(np.ones(6)).reshape(3, 2)
    pz = np.array([0.3, 0.7])
    lhs, rhs = lemma1_gap(pxy[:, :, None] * pz[None, None, :])
    assert lhs < 1e-12 and rhs == pytest.approx(-(0.3 * math.log2(0.3) + 0.7 * math.log2(0.7)))
    lhs, rhs = lemma1_gap(pxy[:, :, None])
    assert lhs < 1e-12 and rhs == 0.0


def test_lemma1_tight_case():
    # X = Y = Z uniform bit: I(X;Y) = 1, I(X;Y|Z) = 0, H(Z) = 1
    joint = np.zeros((2, 2, 2))
    joint[0, 0, 0] = joint[1, 1, 1] = 0.5
    lhs, rhs = lemma1_gap(joint)
    assert lhs == pytest.approx(1.0) and rhs == pytest.approx(1.0)


def test_lemma1_invalid_pmf():
    with pytest.raises(ValueError):
        lemma1_gap(np.ones((2, 2, 2)))
    with pytest.raises(ValueError):
        lemma1_gap(np.ones((2, 2)) / 4)


@given(st.integers(0, 2**31), st.sampled_from([(2, 2, 2), (3, 3, 2), (4, 2, 3), (2, 5, 4)]))
def test_lemma1_random_joints(seed, shape):
    rng = np.random.default_rng(seed)
    joint = rng.dirichlet(np.full(int(np.prod(shape)), 0.5)).reshape(shape)
    lhs, rhs = lemma1_gap(joint)
    assert lhs <= rhs + 1e-12


def test_lemma1_suite_reports():
    res = lemma1_suite(200, (3, 3, 2), seed=4)
    assert res["passed"] and res["violations"] == [] and res["n"] == 200


def test_bound_violation_is_raised_for_bad_joint(monkeypatch):
    import capx.monotonicity as mono
    monkeypatch.setattr(mono, "entropy_bits", lambda p: -1.0)
    with pytest.raises(BoundViolation):
        mono.lemma1_gap(np.full((2, 2, 2), 1 / 8))


def test_audit_constant_curve():
    rep = monotonicity_audit([(p, 1.0) for p in (1, 2, 3, 4)], 0.02)
    assert rep.passed and rep.violations == [] and rep.corollary1_max_gap_bits == 0.0


def test_audit_injected_dip():
    curve = [(1, 1.0), (2, 1.2), (3, 1.1), (4, 1.3)]
    rep = monotonicity_audit(curve, 0.02)
    assert not rep.passed and len(rep.violations) == 1
    v = rep.violations[0]
    assert (v["p_lo"], v["p_hi"]) == (2, 3) and v["drop_bits"] == pytest.approx(0.1)
    assert rep.corollary1_max_gap_bits == pytest.approx(0.1)
    out = rep.to_dict()
    assert set(out) >= {"pass", "violations", "corollary1_max_gap_bits"}


def test_audit_diagnosis_unconverged():
    rep = monotonicity_audit([(1, 1.0, True), (2, 0.5, False)], 0.02)
    assert "under-converged" in rep.violations[0]["diagnosis"]


def test_audit_small_dips_within_slack():
    rep = monotonicity_audit([(1, 1.0), (2, 0.99), (3, 1.5)], 0.02)
    assert rep.passed


def test_audit_requires_sorted_costs():
    with pytest.raises(ValueError):
        monotonicity_audit([(2, 1.0), (1, 1.0)])
