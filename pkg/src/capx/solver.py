"""Power-constrained capacity of a scalar channel over particle inputs.

h(Y) is maximized over positions c and weights w subject to sum(w) = 1 and
sum(w c^2) = p.  Weight and position steps alternate; each follows the
gradient projected onto the constraint tangent space, with the step length
picked by golden-section search and the constraints repaired exactly after
the step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .channel import LOG2E, SQRT_2PI, ScalarChannel
from .inputs import POWER, CostFunction, ParticleSet, measure_cost
from .quadrature import (DEFAULT_QUAD, PDF_FLOOR, QuadratureConfig, gauss_legendre,
                         mutual_information, support_intervals)

log = logging.getLogger(__name__)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    s: int = 16
    restarts: int = 8
    max_iters: int = 5000
    step_tol: float = 1e-7
    stall_iters: int = 10
    golden_tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.s < 2:
            raise ValueError("need at least two particles")
        for name in ("restarts", "max_iters", "stall_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not (self.step_tol > 0 and self.golden_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class CapacityPoint:
    cost: float
    capacity_bits: float
    achiever: ParticleSet
    converged: bool
    iterations: int
    restart: int = 0


@dataclass
class CapacityCurve:
    points: list
    channel: ScalarChannel
    config: SolverConfig
    quad: QuadratureConfig = field(default=DEFAULT_QUAD)

    @property
    def costs(self) -> np.ndarray:
        return np.array([pt.cost for pt in self.points])

    @property
    def capacities(self) -> np.ndarray:
        return np.array([pt.capacity_bits for pt in self.points])

    def snapshot(self) -> dict:
        return {"channel": self.channel.to_dict(), "solver": asdict(self.config),
                "quadrature": asdict(self.quad)}


# ---------------------------------------------------------------------------
# output entropy of a particle input on a fixed Gauss-Legendre grid


class EntropyModel:
    """h(Y) and its gradients for particle inputs to one channel.

    Uses composite Gauss-Legendre (8 nodes per noise standard deviation)
    covering every occupied output +- y_margin_sigmas; this agrees with the
    adaptive integrator to ~1e-11 and is much cheaper inside line searches.
    """

    def __init__(self, ch: ScalarChannel, q: QuadratureConfig = DEFAULT_QUAD, order: int = 8):
        self.ch = ch
        self.q = q
        self.sigma = ch.sigma_z
        self.order = order
        self._cache = {}

    def _grid(self, centers):
        # panels sit on a fixed lattice of width sigma so grids can be cached
        width = self.sigma
        margin = self.q.y_margin_sigmas * self.sigma
        cs = np.sort(centers)
        cut = np.nonzero(np.diff(cs) > 2.0 * margin)[0]
        los = np.floor((cs[np.concatenate(([0], cut + 1))] - margin) / width).astype(int)
        his = np.ceil((cs[np.concatenate((cut, [cs.size - 1]))] + margin) / width).astype(int)
        key = (los.tobytes(), his.tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        x, w = gauss_legendre(self.order)
        edges = np.concatenate([np.arange(i, j) for i, j in zip(los, his)]) * width
        y = (edges[:, None] + 0.5 * width * (x + 1.0)).ravel()
        gw = np.tile(0.5 * width * w, edges.size)
        if len(self._cache) > 4096:
            self._cache.clear()
        self._cache[key] = (y, gw)
        return y, gw

    def _kernel(self, c, w):
        centers = np.asarray(self.ch.distortion(c), dtype=float)
        y, gw = self._grid(centers[w > 0])
        u = np.subtract.outer(y, centers)
        if self.sigma != 1.0:
            u /= self.sigma
        K = np.exp(-0.5 * u * u)
        K *= 1.0 / (SQRT_2PI * self.sigma)
        f = np.maximum(K @ w, PDF_FLOOR)
        return y, gw, u, K, f, np.log2(f)

    def entropy(self, c, w) -> float:
        _, gw, _, _, f, lf = self._kernel(c, w)
        return float(-(gw * f) @ lf)

    def grad_weights(self, c, w) -> np.ndarray:
        """dh/dw_i = -int f(y|c_i) log2(e f_Y(y)) dy."""
        _, gw, _, K, _, lf = self._kernel(c, w)
        return -((gw * (lf + LOG2E)) @ K)

    def grad_positions(self, c, w) -> np.ndarray:
        """dh/dc_i = -w_i a'(c_i) int f(y|c_i) (y - a(c_i)) / sigma^2 log2 f_Y(y) dy."""
        _, gw, u, K, _, lf = self._kernel(c, w)
        inner = (gw * lf) @ (K * u) / self.sigma
        return -w * np.asarray(self.ch.distortion.derivative(c), dtype=float) * inner


# ---------------------------------------------------------------------------
# public building blocks


def lagrangian(d: ParticleSet, ch: ScalarChannel, lam1: float, lam2: float, p: float,
               q: QuadratureConfig = DEFAULT_QUAD, *, positions=None, weights=None) -> float:
    """h(Y) + lam1 (sum w - 1) + lam2 (sum w c^2 - p), in bits.

    Raw (possibly unnormalized) positions/weights may be passed to evaluate
    off the feasible set; a ParticleSet is always normalized.
    """
    c = np.asarray(d.positions if positions is None else positions, dtype=float)
    w = np.asarray(d.weights if weights is None else weights, dtype=float)
    h = EntropyModel(ch, q).entropy(c, w)
    return h + lam1 * (w.sum() - 1.0) + lam2 * (w @ (c * c) - p)


def grad_weights(d: ParticleSet, ch: ScalarChannel, q: QuadratureConfig = DEFAULT_QUAD):
    return EntropyModel(ch, q).grad_weights(d.positions, d.weights)


def grad_positions(d: ParticleSet, ch: ScalarChannel, q: QuadratureConfig = DEFAULT_QUAD):
    return EntropyModel(ch, q).grad_positions(d.positions, d.weights)


def project_gradient(g, constraint_rows) -> np.ndarray:
    """Remove from g its component in the span of the constraint rows.

    Rows that are (numerically) dependent on earlier ones are dropped.
    """
    g = np.asarray(g, dtype=float)
    rows = [np.asarray(r, dtype=float) for r in np.atleast_2d(constraint_rows)]
    basis = []
    for r in rows:
        v = r.copy()
        for _ in range(2):  # re-orthogonalize once for stability
            for b in basis:
                v -= (b @ v) * b
        n = np.linalg.norm(v)
        if n > 1e-10 * max(np.linalg.norm(r), 1e-300):
            basis.append(v / n)
    if len(basis) >= g.size:
        return np.zeros_like(g)
    out = g.copy()
    for _ in range(2):
        for b in basis:
            out -= (b @ out) * b
    return out


def golden_bracket(phi, a: float, b: float, tol: float):
    """Golden-section maximization of phi on [a, b].

    Yields (a, b, evaluations) after each bracket reduction, so the interval
    length after k reductions is (b - a) * INV_PHI**k.
    """
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = phi(c), phi(d)
    evals = {c: fc, d: fd}
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = phi(c)
            evals[c] = fc
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = phi(d)
            evals[d] = fd
        yield a, b, evals


def golden_section_linesearch(phi, t_max: float, tol: float = 1e-8, phi0: float | None = None,
                              shrink: int = 3):
    """Step length on [0, t_max] maximizing phi by golden-section search.

    Returns (t, phi(t)) with phi(t) >= phi(0) and >= both final bracket ends.
    If no improvement over phi(0) is found after shrinking the bracket
    `shrink` times (by 1/100 each), returns (0, phi(0)).
    """
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    f0 = phi(0.0) if phi0 is None else phi0
    for _ in range(shrink + 1):
        best_t, best_f = 0.0, f0
        f_end = phi(t_max)
        if f_end > best_f:
            best_t, best_f = t_max, f_end
        evals = {}
        for _, _, evals in golden_bracket(phi, 0.0, t_max, tol * t_max):
            pass
        for t, f in evals.items():
            if f > best_f:
                best_t, best_f = t, f
        if best_t > 0:
            return best_t, best_f
        t_max *= 1e-2
    return 0.0, f0


# ---------------------------------------------------------------------------
# constrained steps


def _weight_rows(c):
    return np.vstack((np.ones_like(c), c * c))


def _repair_weights(c, w, p):
    """Least-norm correction on the positive weights restoring both constraints."""
    w = np.where(w < 0, 0.0, w)
    for _ in range(3):
        free = w > 0
        R = _weight_rows(c[free])
        resid = np.array([1.0, p]) - _weight_rows(c) @ w
        if np.all(np.abs(resid) <= [1e-15, 1e-15 * max(p, 1.0)]):
            break
        try:
            delta = R.T @ np.linalg.lstsq(R @ R.T, resid, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
        w = w.copy()
        w[free] += delta
        w = np.where(w < 0, 0.0, w)
    return w


def _weight_direction(model, c, w):
    g = model.grad_weights(c, w)
    free = w > 0
    rows = _weight_rows(c)
    while True:
        d = np.zeros_like(w)
        d[free] = project_gradient(g[free], rows[:, free])
        # multipliers from the free-set projection decide releases
        coef = np.linalg.lstsq(rows[:, free].T, g[free] - d[free], rcond=None)[0]
        reduced = g - coef @ rows
        release = (~free) & (reduced > 1e-12 * max(1.0, np.abs(g).max()))
        if not release.any():
            return d
        free = free | release


def weight_step(model: EntropyModel, c, w, p, tol, h0=None):
    d = _weight_direction(model, c, w)
    if np.abs(d).max() <= 1e-14:
        return w, (model.entropy(c, w) if h0 is None else h0)
    neg = d < 0
    if not neg.any():
        return w, (model.entropy(c, w) if h0 is None else h0)
    t_max = float(np.min(-w[neg] / d[neg]))
    if t_max <= 0:
        return w, (model.entropy(c, w) if h0 is None else h0)
    phi = lambda t: model.entropy(c, np.maximum(w + t * d, 0.0))  # noqa: E731
    t, f = golden_section_linesearch(phi, t_max, tol, phi0=h0)
    if t == 0:
        return w, f
    w_new = w + t * d
    w_new[w_new < 1e-15] = 0.0
    w_new = _repair_weights(c, w_new, p)
    return w_new, model.entropy(c, w_new)


def _radial_repair(c, w, p):
    cur = w @ (c * c)
    return c * math.sqrt(p / cur) if cur > 0 else c


def position_step(model: EntropyModel, c, w, p, tol, radius, h0=None):
    """One projected position step; returns (c, h, t_over_tmax)."""
    g = model.grad_positions(c, w)
    d = project_gradient(g, [2.0 * w * c]) if np.any(w * c) else g
    h_cur = model.entropy(c, w) if h0 is None else h0
    dmax = np.abs(d).max()
    if dmax <= 1e-14:
        return c, h_cur, 0.0
    t_max = radius / dmax
    phi = lambda t: model.entropy(_radial_repair(c + t * d, w, p), w)  # noqa: E731
    t, f = golden_section_linesearch(phi, t_max, tol, phi0=h_cur)
    if t == 0:
        return c, h_cur, 0.0
    return _radial_repair(c + t * d, w, p), f, t / t_max


# ---------------------------------------------------------------------------
# initialization


def _check_feasible(c, p):
    c2 = c * c
    if not (c2.min() - 1e-12 * p <= p <= c2.max() * (1 + 1e-12)):
        raise InfeasibleError(f"power {p} outside [min c^2, max c^2] = [{c2.min()}, {c2.max()}]")


def feasible_weights(c, p, w0=None):
    """A feasible weight vector for fixed positions, close to w0 (default uniform)."""
    c = np.asarray(c, dtype=float)
    _check_feasible(c, p)
    w = np.full(c.size, 1.0 / c.size) if w0 is None else np.asarray(w0, dtype=float)
    c2 = c * c
    cur = w @ c2
    if abs(cur - p) <= 1e-14 * max(p, 1.0):
        return w
    # blend with the two-point solution on the extreme of c^2 on the needed side
    lo, hi = np.argmin(c2), np.argmax(c2)
    j = hi if cur < p else lo
    if abs(c2[j] - cur) < 1e-300:
        return w
    lam = (p - cur) / (c2[j] - cur)
    out = (1.0 - lam) * w
    out[j] += lam
    return _repair_weights(c, out, p)


def _quantile_positions(s, power):
    u = (np.arange(s) + 0.5) / s
    z = stats.norm.ppf(u)
    m2 = np.mean(z * z)
    # a single quantile is the median, 0, and cannot carry power
    return z * math.sqrt(power / m2) if m2 > 0 else z


def initial_point(ch: ScalarChannel, p: float, s: int, restart: int, rng: np.random.Generator):
    """Restart 0: Gaussian quantiles at power p.  Restart 1: quantiles at a
    moderate power plus one satellite of weight 0.01.  Others: random bulk
    with 0-2 satellites."""
    scale = ch.distortion.linear_scale
    if restart == 0:
        return _quantile_positions(s, p), np.full(s, 1.0 / s)
    if restart == 1:
        pb = min(p / 2.0, scale * scale)
        c = np.append(_quantile_positions(s - 1, pb), 0.0)
        w = np.append(np.full(s - 1, 0.99 / (s - 1)), 0.01)
        c[-1] = math.sqrt((p - 0.99 * pb) / 0.01)
        return c, w
    n_sat = int(rng.integers(0, 3)) if s >= 4 else 0
    width = min(math.sqrt(p), 0.5 * scale) * rng.uniform(0.5, 1.5)
    bulk = np.sort(rng.normal(0.0, width, s - n_sat))
    wb = rng.dirichlet(np.full(s - n_sat, 2.0))
    if n_sat:
        ws = rng.uniform(0.005, 0.2, n_sat)
        w = np.concatenate((wb * (1.0 - ws.sum()), ws))
        pb = (w[:s - n_sat] @ (bulk * bulk))
        need = p - pb
        if need > 0:
            signs = rng.choice([-1.0, 1.0], n_sat)
            share = rng.dirichlet(np.ones(n_sat)) if n_sat > 1 else np.ones(1)
            sats = signs * np.sqrt(need * share / ws)
            return np.concatenate((bulk, sats)), w
        sats = rng.normal(0.0, width, n_sat)
        c = np.concatenate((bulk, sats))
    else:
        c, w = bulk, wb
    return _radial_repair(c, w, p), w


# ---------------------------------------------------------------------------
# optimizers


def _require_power(p):
    if not (p > 0 and math.isfinite(p)):
        raise ValueError(f"power must be positive, got {p}")


def optimize_weights(d: ParticleSet, ch: ScalarChannel, p: float,
                     q: QuadratureConfig = DEFAULT_QUAD, cfg: SolverConfig = SolverConfig()):
    """Maximize h(Y) over weights for fixed positions; concave, so the result is global."""
    _require_power(p)
    c = np.array(d.positions, dtype=float)
    w = feasible_weights(c, p, d.weights)
    model = EntropyModel(ch, q)
    h = model.entropy(c, w)
    stall = 0
    for _ in range(cfg.max_iters):
        w, h_new = weight_step(model, c, w, p, cfg.golden_tol, h)
        stall = stall + 1 if h_new - h < cfg.step_tol else 0
        h = h_new
        if stall >= cfg.stall_iters:
            break
    return ParticleSet(c, w)


def optimize_positions(d: ParticleSet, ch: ScalarChannel, p: float,
                       q: QuadratureConfig = DEFAULT_QUAD, cfg: SolverConfig = SolverConfig()):
    """Ascend h(Y) over positions for fixed weights, keeping sum(w c^2) = p."""
    _require_power(p)
    w = np.array(d.weights, dtype=float)
    c = _radial_repair(np.array(d.positions, dtype=float), w, p)
    model = EntropyModel(ch, q)
    h = model.entropy(c, w)
    radius = _initial_radius(ch, p)
    stall = 0
    for _ in range(cfg.max_iters):
        c, h_new, frac = position_step(model, c, w, p, cfg.golden_tol, radius, h)
        radius = _update_radius(radius, frac, ch, p)
        stall = stall + 1 if h_new - h < cfg.step_tol else 0
        h = h_new
        if stall >= cfg.stall_iters:
            break
    return ParticleSet(c, w)


def _initial_radius(ch, p):
    return min(ch.sigma_z, math.sqrt(p))


def _update_radius(radius, frac, ch, p):
    hi = 10.0 * max(math.sqrt(p), ch.sigma_z)
    lo = 1e-6 * ch.sigma_z
    if frac > 0.5:
        return min(2.0 * radius, hi)
    if frac < 0.05:
        return max(0.5 * radius, lo)
    return radius


@dataclass
class _RunResult:
    c: np.ndarray
    w: np.ndarray
    h: float
    converged: bool
    iterations: int
    history: list


def alternating_ascent(ch: ScalarChannel, p: float, c0, w0, q: QuadratureConfig,
                       cfg: SolverConfig) -> _RunResult:
    """One weight step then one position step per outer iteration."""
    model = EntropyModel(ch, q)
    c = np.array(c0, dtype=float)
    w = feasible_weights(c, p, w0)
    h = model.entropy(c, w)
    history = [h]
    radius = _initial_radius(ch, p)
    stall = 0
    it = 0
    converged = False
    for it in range(1, cfg.max_iters + 1):
        h_start = h
        w, h = weight_step(model, c, w, p, cfg.golden_tol, h)
        c, h, frac = position_step(model, c, w, p, cfg.golden_tol, radius, h)
        radius = _update_radius(radius, frac, ch, p)
        history.append(h)
        stall = stall + 1 if h - h_start < cfg.step_tol else 0
        if stall >= cfg.stall_iters:
            converged = True
            break
    return _RunResult(c, w, h, converged, it, history)


def _point_from_run(ch, p, run: _RunResult, q, restart: int) -> CapacityPoint:
    achiever = ParticleSet(run.c, run.w).canonical()
    mi = mutual_information(achiever, ch, q).mi_bits
    return CapacityPoint(p, float(mi), achiever, run.converged, run.iterations, restart)


def _best(points):
    # max capacity, ties broken by lower restart index
    return max(points, key=lambda pt: (pt.capacity_bits, -pt.restart))


def _solve_start(job) -> CapacityPoint:
    ch, p, c0, w0, q, cfg, idx = job
    return _point_from_run(ch, p, alternating_ascent(ch, p, c0, w0, q, cfg), q, idx)


def solve_capacity(ch: ScalarChannel, p: float, b: CostFunction = POWER,
                   q: QuadratureConfig = DEFAULT_QUAD, cfg: SolverConfig = SolverConfig(),
                   starts=None, executor=None) -> CapacityPoint:
    """Best-of-restarts alternating ascent at exact power p.

    `starts` optionally prepends extra (positions, weights) initial points.
    Starts run through `executor.map` when one is given; all initial points
    are drawn beforehand, so the result does not depend on the executor.
    The reported capacity is the MI of the final feasible achiever.
    """
    if b is not POWER:
        raise ValueError(f"unsupported cost function {b}")
    _require_power(p)
    candidates = list(starts or [])
    rng = np.random.default_rng([cfg.seed, int(round(math.log10(p) * 1000)) & 0xFFFFFFFF])
    for r in range(cfg.restarts):
        candidates.append(initial_point(ch, p, cfg.s, r, rng))
    jobs = [(ch, p, c0, w0, q, cfg, idx) for idx, (c0, w0) in enumerate(candidates)]
    points = list(executor.map(_solve_start, jobs)) if executor is not None else [_solve_start(j) for j in jobs]
    for pt in points:
        log.debug("p=%g start %d: %.6f bits, converged=%s after %d iterations",
                  p, pt.restart, pt.capacity_bits, pt.converged, pt.iterations)
    best = _best(points)
    best.converged = any(pt.converged for pt in points if pt.capacity_bits >= best.capacity_bits - 1e-6)
    return best


def warm_starts(prev: ParticleSet, p: float, s: int):
    """Previous achiever adapted to power p: radially rescaled, and with the
    extra power pushed into its outermost particle (satellite extension)."""
    c = np.array(prev.positions, dtype=float)
    w = np.array(prev.weights, dtype=float)
    if c.size < s:
        # pad with zero-weight particles spread over the bulk
        extra = s - c.size
        c = np.concatenate((c, np.linspace(c.min(), c.max(), extra + 2)[1:-1]))
        w = np.concatenate((w, np.zeros(extra)))
    starts = [(_radial_repair(c, w, p), w)]
    cur = w @ (c * c)
    j = int(np.argmax(np.abs(c) * (w > 0)))
    rest = cur - w[j] * c[j] ** 2
    if p > cur and w[j] > 0:
        cs = c.copy()
        cs[j] = math.copysign(math.sqrt((p - rest) / w[j]), c[j] if c[j] != 0 else 1.0)
        starts.append((cs, w))
    return starts


def sweep_capacity_curve(ch: ScalarChannel, powers, b: CostFunction = POWER,
                         q: QuadratureConfig = DEFAULT_QUAD, cfg: SolverConfig = SolverConfig(),
                         progress=None, executor=None) -> CapacityCurve:
    powers = [float(p) for p in powers]
    if any(p <= 0 for p in powers) or any(b2 <= a2 for a2, b2 in zip(powers, powers[1:])):
        raise ValueError("powers must be positive and strictly ascending")
    points = []
    prev = None
    for p in powers:
        starts = warm_starts(prev.achiever, p, cfg.s) if prev is not None else None
        pt = solve_capacity(ch, p, b, q, cfg, starts=starts, executor=executor)
        if progress is not None:
            progress(pt)
        points.append(pt)
        prev = pt
    return CapacityCurve(points, ch, cfg, q)


def capacity_point_check(pt: CapacityPoint) -> float:
    return abs(measure_cost(pt.achiever) - pt.cost)
