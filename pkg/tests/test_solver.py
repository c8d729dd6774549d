import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from capx.channel import ScalarChannel
from capx.inputs import ContinuousFamily, ParticleSet, measure_cost, point_mass
from capx.quadrature import DEFAULT_QUAD, mutual_information
from capx.solver import (INV_PHI, EntropyModel, InfeasibleError, SolverConfig, alternating_ascent,
                         feasible_weights, golden_bracket, golden_section_linesearch, grad_positions,
                         grad_weights, initial_point, lagrangian, optimize_positions, optimize_weights,
                         project_gradient, solve_capacity, sweep_capacity_curve, warm_starts)

from .oracles import fd_gradients, random_feasible_set, weight_segment_scan


def test_lagrangian_feasible_equals_entropy(tanh_ch):
    d = ParticleSet([-2.0, 0.5, 3.0], [0.3, 0.4, 0.3])
    p = measure_cost(d)
    h = mutual_information(d, tanh_ch).h_y_bits
    assert lagrangian(d, tanh_ch, 0.7, -1.3, p) == pytest.approx(h, abs=1e-9)


def test_lagrangian_without_multipliers_ignores_feasibility(tanh_ch):
    d = ParticleSet([-2.0, 0.5, 3.0], [0.3, 0.4, 0.3])
    raw_w = np.array([0.5, 0.4, 0.3])
    a = lagrangian(d, tanh_ch, 0.0, 0.0, 123.0, weights=raw_w)
    b = EntropyModel(tanh_ch).entropy(d.positions, raw_w)
    assert a == b


def test_lagrangian_weight_perturbation(tanh_ch):
    d = ParticleSet([-2.0, 0.5, 3.0], [0.3, 0.4, 0.3])
    p = measure_cost(d)
    g = grad_weights(d, tanh_ch)
    delta = 1e-6
    for i in range(3):
        wp, wm = d.weights.copy(), d.weights.copy()
        wp[i] += delta
        wm[i] -= delta
        fd = (lagrangian(d, tanh_ch, 1.0, 0.0, p, weights=wp)
              - lagrangian(d, tanh_ch, 1.0, 0.0, p, weights=wm)) / (2 * delta)
        assert fd == pytest.approx(g[i] + 1.0, abs=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_gradients_match_finite_differences(tanh_ch, seed):
    c, w, p = random_feasible_set(np.random.default_rng(seed))
    model = EntropyModel(tanh_ch)
    gw, gc = model.grad_weights(c, w), model.grad_positions(c, w)
    fw, fc = fd_gradients(model.entropy, c, w)
    assert np.all(np.abs(gw - fw) <= max(1e-5, 1e-3 * np.linalg.norm(gw)))
    assert np.all(np.abs(gc - fc) <= max(1e-5, 1e-3 * np.linalg.norm(gc)))


def test_symmetric_input_gives_antisymmetric_position_gradient(tanh_ch):
    c = np.array([-7.0, -2.0, -0.5, 0.5, 2.0, 7.0])
    w = np.array([0.1, 0.25, 0.15, 0.15, 0.25, 0.1])
    g = grad_positions(ParticleSet(c, w), tanh_ch)
    np.testing.assert_allclose(g, -g[::-1], atol=1e-12)


def test_single_particle(tanh_ch):
    d = point_mass(2.0)
    model = EntropyModel(tanh_ch)
    y = np.linspace(-20, 20, 40001)
    f = np.exp(-0.5 * (y - tanh_ch.distortion(2.0)) ** 2) / math.sqrt(2 * math.pi)
    expect = -trapezoid(f * np.log2(math.e * f), y)
    assert grad_weights(d, tanh_ch)[0] == pytest.approx(expect, abs=1e-6)
    g = np.array([model.grad_weights(d.positions, d.weights)[0]])
    assert np.all(project_gradient(g, [np.ones(1), d.positions ** 2]) == 0)


def test_project_gradient_examples(rng):
    row = np.array([1.0, 2.0, -1.0])
    assert np.allclose(project_gradient(3.5 * row, [row]), 0, atol=1e-15)
    orth = np.array([1.0, 0.0, 1.0])
    np.testing.assert_allclose(project_gradient(orth, [row]), orth, atol=1e-15)
    for _ in range(20):
        c = rng.normal(size=5)
        rows = [np.ones(5), c * c]
        g = rng.normal(size=5)
        out = project_gradient(g, rows)
        for r in rows:
            assert abs(out @ r) <= 1e-12 * max(1.0, np.linalg.norm(g) * np.linalg.norm(r))
        # independent oracle: least-squares residual
        A = np.vstack(rows).T
        resid = g - A @ np.linalg.lstsq(A, g, rcond=None)[0]
        np.testing.assert_allclose(out, resid, atol=1e-12)


def test_project_gradient_dependent_rows():
    g = np.array([1.0, -2.0, 0.5])
    ones = np.ones(3)
    np.testing.assert_allclose(project_gradient(g, [ones, 2 * ones]), project_gradient(g, [ones]), atol=1e-15)
    assert np.all(project_gradient(np.array([1.0, 2.0]), [[1.0, 0.0], [0.0, 1.0]]) == 0)


def test_golden_quadratic_and_monotone():
    t, f = golden_section_linesearch(lambda t: -(t - 0.3) ** 2, 1.0, tol=1e-8)
    assert abs(t - 0.3) < 1e-6 and f >= -(0.3 - 0.3) ** 2 - 1e-12
    t, f = golden_section_linesearch(lambda t: -t, 1.0)
    assert t == 0.0 and f == 0.0


@given(st.floats(0.01, 0.99), st.floats(0.1, 10.0))
def test_golden_returns_improvement(t0, t_max):
    phi = lambda t: -abs(t - t0 * t_max) ** 1.5
    t, f = golden_section_linesearch(phi, t_max, tol=1e-6)
    assert f >= phi(0.0) and f == phi(t)
    assert abs(t - t0 * t_max) <= 2e-6 * t_max


def test_golden_interval_shrinks_by_inverse_phi():
    lengths = [b - a for a, b, _ in golden_bracket(lambda t: math.sin(3 * t), 0.0, 2.0, 1e-6)]
    for k, length in enumerate(lengths, start=1):
        assert length == pytest.approx(2.0 * INV_PHI ** k, rel=1e-9)
    assert INV_PHI == pytest.approx(0.6180339887498949)


def test_optimize_weights_symmetric():
    ch = ScalarChannel.awgn()
    d = optimize_weights(ParticleSet([-1.0, 1.0], [0.3, 0.7]), ch, 1.0)
    np.testing.assert_allclose(d.weights, [0.5, 0.5], atol=1e-6)


def test_optimize_weights_forced_by_power(tanh_ch):
    d = optimize_weights(ParticleSet([0.0, 3.0], [0.9, 0.1]), tanh_ch, 4.5)
    np.testing.assert_allclose(d.weights, [0.5, 0.5], atol=1e-12)


def test_optimize_weights_infeasible(tanh_ch):
    with pytest.raises(InfeasibleError):
        optimize_weights(ParticleSet([1.0, 2.0], [0.5, 0.5]), tanh_ch, 10.0)
    with pytest.raises(InfeasibleError):
        feasible_weights(np.array([3.0, 4.0]), 1.0)


@pytest.mark.parametrize("c,p", [([-4.0, 0.5, 6.0], 9.0), ([-15.0, -1.0, 2.0], 30.0), ([0.0, 2.0, 12.0], 20.0)])
def test_optimize_weights_three_particles_vs_scan(tanh_ch, c, p):
    d = optimize_weights(ParticleSet(c, np.ones(3)), tanh_ch, p)
    best = weight_segment_scan(tanh_ch, np.array(c), p, step=0.005)
    got = mutual_information(d, tanh_ch).mi_bits
    assert got >= best - 1e-3


def test_optimize_positions_symmetric_start_is_stationary():
    ch = ScalarChannel.tanh()
    d = optimize_positions(ParticleSet([-2.0, 2.0], [0.5, 0.5]), ch, 4.0)
    np.testing.assert_allclose(np.sort(d.positions), [-2.0, 2.0], atol=1e-9)


def test_single_particle_pinned(tanh_ch):
    d = optimize_positions(point_mass(1.0), tanh_ch, 9.0)
    assert abs(abs(d.positions[0]) - 3.0) < 1e-12


def test_optimize_positions_two_particles_vs_scan(tanh_ch):
    p = 4.0
    d = optimize_positions(ParticleSet([-0.5, 1.0], [0.5, 0.5]), tanh_ch, p)
    got = mutual_information(d, tanh_ch).mi_bits
    # c2 determined by the power constraint; scan c1 and the sign of c2
    best = -np.inf
    for c1 in np.linspace(-math.sqrt(2 * p), math.sqrt(2 * p), 801):
        r = math.sqrt(max(2 * p - c1 * c1, 0.0))
        for c2 in (r, -r):
            best = max(best, mutual_information(ParticleSet([c1, c2], [0.5, 0.5]), tanh_ch).mi_bits)
    assert abs(got - best) < 1e-3
    assert abs(measure_cost(d) - p) <= 1e-8 * p


def test_ascent_history_nondecreasing_and_feasible(tanh_ch):
    rng = np.random.default_rng(3)
    c0, w0 = initial_point(tanh_ch, 50.0, 8, 4, rng)
    run = alternating_ascent(tanh_ch, 50.0, c0, w0, DEFAULT_QUAD, SolverConfig(s=8, max_iters=150))
    assert np.all(np.diff(run.history) >= -1e-12)
    assert abs(run.w.sum() - 1.0) <= 1e-12
    assert abs(run.w @ run.c ** 2 - 50.0) <= 1e-8 * 50.0
    assert np.all(run.w >= 0)


def test_awgn_capacity_with_discrete_input():
    ch = ScalarChannel.awgn()
    pt = solve_capacity(ch, 3.0, cfg=SolverConfig(restarts=2))
    assert 1.0 - 0.05 <= pt.capacity_bits <= 1.0 + 1e-6
    assert abs(measure_cost(pt.achiever) - 3.0) <= 1e-8 * 3.0


def test_restart_dominance(tanh_ch):
    one = solve_capacity(tanh_ch, 2.0, cfg=SolverConfig(s=6, restarts=1))
    three = solve_capacity(tanh_ch, 2.0, cfg=SolverConfig(s=6, restarts=3))
    assert three.capacity_bits >= one.capacity_bits


def test_capacity_point_invariants(tanh_ch):
    pt = solve_capacity(tanh_ch, 1.0, cfg=SolverConfig(restarts=2))
    assert abs(pt.capacity_bits - 0.5) < 0.05
    assert abs(pt.achiever.weights.sum() - 1.0) <= 1e-12
    assert abs(measure_cost(pt.achiever) - 1.0) <= 1e-8
    mi = mutual_information(pt.achiever, tanh_ch)
    assert abs(pt.capacity_bits - mi.mi_bits) <= 10 * mi.quadrature_error_estimate + 1e-12
    assert pt.capacity_bits >= mutual_information(ContinuousFamily("gaussian", 1.0), tanh_ch).mi_bits - 0.01


def test_solver_deterministic(tanh_ch):
    cfg = SolverConfig(s=6, restarts=3, seed=11)
    a = solve_capacity(tanh_ch, 5.0, cfg=cfg)
    b = solve_capacity(tanh_ch, 5.0, cfg=cfg)
    assert a.capacity_bits == b.capacity_bits and a.achiever == b.achiever


def test_executor_matches_serial(tanh_ch):
    class SerialMap:
        def map(self, fn, jobs):
            return [fn(j) for j in reversed(list(jobs))][::-1]

    cfg = SolverConfig(s=6, restarts=3, seed=2)
    a = solve_capacity(tanh_ch, 5.0, cfg=cfg)
    b = solve_capacity(tanh_ch, 5.0, cfg=cfg, executor=SerialMap())
    assert a.capacity_bits == b.capacity_bits and a.achiever == b.achiever


def test_sweep_validation(tanh_ch):
    with pytest.raises(ValueError):
        sweep_capacity_curve(tanh_ch, [1.0, 1.0])
    with pytest.raises(ValueError):
        sweep_capacity_curve(tanh_ch, [2.0, 1.0])
    with pytest.raises(ValueError):
        solve_capacity(tanh_ch, 0.0)


def test_warm_starts_hit_new_power():
    prev = ParticleSet([-3.0, -1.0, 1.0, 3.0], [0.2, 0.3, 0.3, 0.2])
    for c, w in warm_starts(prev, 40.0, 6):
        assert len(c) == 6
        assert abs(np.asarray(w) @ np.asarray(c) ** 2 - 40.0) <= 1e-8 * 40.0


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(s=1)
    with pytest.raises(ValueError):
        SolverConfig(step_tol=0.0)


def test_high_power_achiever_is_bulk_plus_outliers(capacity_sweep):
    # moderate-power bulk in the near-linear range, the power carried by a few
    # far particles in the saturated range
    pt = next(pt for pt in capacity_sweep.points if pt.cost == 1000.0)
    c, w = pt.achiever.positions, pt.achiever.weights
    a_max = 10.0
    far = np.abs(c) > a_max
    assert 1 <= far.sum() <= 3
    assert (w[far] * c[far] ** 2).sum() >= 0.9 * pt.cost
    assert w[~far].sum() >= 0.5
    assert (w[~far] * c[~far] ** 2).sum() / w[~far].sum() <= a_max ** 2
    # dropping the outliers lowers the cost below p/2
    assert measure_cost(ParticleSet(c[~far], w[~far])) < pt.cost / 2
    # the outliers sit in saturation: pushing them further out leaves MI unchanged
    pushed = ParticleSet(np.where(far, 1.5 * c, c), w)
    ch = capacity_sweep.channel
    assert abs(mutual_information(pushed, ch).mi_bits - pt.capacity_bits) < 1e-3
