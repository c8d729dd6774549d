"""Output densities, output entropy and mutual information.

The output density of a particle input is an exact Gaussian mixture.  Continuous
inputs are turned into a fine particle proxy (Gauss-Legendre nodes on panels
bounded by input quantiles and by output resolution) before the same path is
used.  h(Y) is integrated by adaptive bisection with a Gauss-Legendre rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import LOG2E, SQRT_2PI, ScalarChannel, conditional_entropy_bits
from .inputs import ContinuousFamily, Family, InputDistribution, Mixture, ParticleSet

PDF_FLOOR = 1e-300
KERNEL_CUTOFF = 12.0  # in noise standard deviations
_CHUNK = 512


class QuadratureError(RuntimeError):
    def __init__(self, message: str, partial: "MIResult | None" = None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class QuadratureConfig:
    y_margin_sigmas: float = 10.0
    x_tail_mass: float = 1e-10
    x_nodes: int = 2048
    abs_tol: float = 1e-9
    rel_tol: float = 1e-8
    max_panels: int = 200_000

    def __post_init__(self):
        for name in ("y_margin_sigmas", "x_tail_mass", "abs_tol", "rel_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.x_nodes < 16:
            raise ValueError("x_nodes must be at least 16")


DEFAULT_QUAD = QuadratureConfig()


@dataclass(frozen=True)
class MIResult:
    mi_bits: float
    h_y_bits: float
    h_y_given_x_bits: float
    quadrature_error_estimate: float


@lru_cache(maxsize=None)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _panel_nodes(edges: np.ndarray, order: int):
    """Composite Gauss-Legendre nodes/weights over consecutive panels."""
    x, w = gauss_legendre(order)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    return (a + half * (x + 1.0)).ravel(), (half * w).ravel()


# ---------------------------------------------------------------------------
# Gaussian mixtures


def mixture_pdf(y, centers, weights, sigma):
    """sum_j w_j f_G((y - m_j) / sigma) / sigma, evaluated in sorted windows."""
    y = np.asarray(y, dtype=float)
    shape = y.shape
    y = y.ravel()
    centers = np.asarray(centers, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if y.size * centers.size <= 4_000_000:
        u = (y[:, None] - centers[None, :]) / sigma
        return (np.exp(-0.5 * u * u) @ weights / (SQRT_2PI * sigma)).reshape(shape)
    order = np.argsort(centers)
    cs, ws = centers[order], weights[order]
    yorder = np.argsort(y)
    out = np.empty_like(y)
    cut = KERNEL_CUTOFF * sigma
    for start in range(0, y.size, _CHUNK):
        idx = yorder[start:start + _CHUNK]
        yc = y[idx]
        lo = np.searchsorted(cs, yc[0] - cut)
        hi = np.searchsorted(cs, yc[-1] + cut, side="right")
        u = (yc[:, None] - cs[None, lo:hi]) / sigma
        out[idx] = np.exp(-0.5 * u * u) @ ws[lo:hi]
    return (out / (SQRT_2PI * sigma)).reshape(shape)


def support_intervals(centers, half_width: float):
    """Union of [m - hw, m + hw] over centers, as a list of disjoint (lo, hi)."""
    cs = np.sort(np.asarray(centers, dtype=float))
    gaps = np.nonzero(np.diff(cs) > 2.0 * half_width)[0]
    starts = np.concatenate(([0], gaps + 1))
    stops = np.concatenate((gaps, [cs.size - 1]))
    return [(cs[i] - half_width, cs[j] + half_width) for i, j in zip(starts, stops)]


def _initial_edges(intervals, panel_width: float):
    edges = []
    for lo, hi in intervals:
        n = max(1, int(math.ceil((hi - lo) / panel_width)))
        edges.append(np.linspace(lo, hi, n + 1))
    return edges


def adaptive_integrate(f, intervals, panel_width, abs_tol, order=10, max_panels=200_000):
    """Integrate f over a union of intervals by recursive bisection.

    Each panel is accepted once its single-panel and two-half-panel estimates
    differ by less than its share of abs_tol.  Returns (value, error_estimate,
    converged).
    """
    total_width = sum(hi - lo for lo, hi in intervals)
    lo_list, hi_list = [], []
    for e in _initial_edges(intervals, panel_width):
        lo_list.append(e[:-1])
        hi_list.append(e[1:])
    lo = np.concatenate(lo_list)
    hi = np.concatenate(hi_list)
    x, w = gauss_legendre(order)
    value = 0.0
    err = 0.0
    n_panels = lo.size
    while lo.size:
        mid = 0.5 * (lo + hi)
        a = np.concatenate((lo, lo, mid))
        b = np.concatenate((hi, mid, hi))
        half = 0.5 * (b - a)
        nodes = a[:, None] + half[:, None] * (x + 1.0)
        vals = (f(nodes.ravel()).reshape(nodes.shape) @ w) * half
        m = lo.size
        whole, halves = vals[:m], vals[m:2 * m] + vals[2 * m:]
        diff = np.abs(whole - halves)
        ok = diff <= abs_tol * (hi - lo) / total_width
        value += halves[ok].sum()
        err += diff[ok].sum()
        lo = np.concatenate((lo[~ok], mid[~ok]))
        hi = np.concatenate((mid[~ok], hi[~ok]))
        n_panels += lo.size
        if n_panels > max_panels and lo.size:
            # leftover panels: take the refined estimate, count the residual as error
            mid = 0.5 * (lo + hi)
            rest = 0.0
            for aa, bb in ((lo, mid), (mid, hi)):
                hh = 0.5 * (bb - aa)
                nn = aa[:, None] + hh[:, None] * (x + 1.0)
                rest += float(((f(nn.ravel()).reshape(nn.shape) @ w) * hh).sum())
            return value + rest, err + float(np.abs(diff[~ok]).sum()), False
    return value, err, True


def entropy_integrand(pdf_fn):
    def g(y):
        f = np.maximum(pdf_fn(y), PDF_FLOOR)
        return -f * np.log2(f)
    return g


# ---------------------------------------------------------------------------
# continuous inputs


def continuous_proxy(fam: ContinuousFamily, ch: ScalarChannel,
                     q: QuadratureConfig = DEFAULT_QUAD) -> ParticleSet:
    """Particle proxy of a continuous family for marginalization over x.

    The x-range is truncated at q.x_tail_mass per tail.  Panels are bounded by
    quantiles (x_nodes / 16 of them) and further split until a(x) moves by at
    most one noise standard deviation across a panel; 16 Gauss-Legendre nodes
    per panel, weighted by the pdf.
    """
    order = 16
    lo, hi = fam.support(q.x_tail_mass)
    n_quant = max(1, q.x_nodes // order)
    frozen = fam.frozen
    if fam.kind is Family.UNIFORM:
        edges = np.linspace(lo, hi, n_quant + 1)
    else:
        tail = 0.0 if fam.kind is Family.EXPONENTIAL else q.x_tail_mass
        u = np.linspace(tail, 1.0 - q.x_tail_mass, n_quant + 1)
        edges = frozen.ppf(u)
        edges[0], edges[-1] = lo, hi
    a_edges = np.asarray(ch.distortion(edges), dtype=float)
    pieces = []
    for i in range(edges.size - 1):
        n_sub = max(1, int(math.ceil(abs(a_edges[i + 1] - a_edges[i]) / ch.sigma_z)))
        pieces.append(np.linspace(edges[i], edges[i + 1], n_sub + 1)[:-1])
    fine = np.concatenate(pieces + [[edges[-1]]])
    x, gw = _panel_nodes(fine, order)
    w = frozen.pdf(x) * gw
    keep = w > 0
    return ParticleSet(x[keep], w[keep])


def as_particles(d: InputDistribution, ch: ScalarChannel,
                 q: QuadratureConfig = DEFAULT_QUAD) -> ParticleSet:
    """The particle set itself, or a quadrature proxy for anything continuous."""
    if isinstance(d, ParticleSet):
        return d
    if isinstance(d, Mixture):
        parts = [as_particles(comp, ch, q) for comp in d.components]
        return ParticleSet(np.concatenate([ps.positions for ps in parts]),
                           np.concatenate([pr * ps.weights for pr, ps in zip(d.probs, parts)]))
    return continuous_proxy(d, ch, q)


def has_continuous_part(d: InputDistribution) -> bool:
    if isinstance(d, Mixture):
        return any(has_continuous_part(comp) for comp in d.components)
    return isinstance(d, ContinuousFamily)


# ---------------------------------------------------------------------------
# public operations


def output_pdf(d: InputDistribution, ch: ScalarChannel, y, q: QuadratureConfig = DEFAULT_QUAD):
    """f_Y(y) = sum_i w_i f_G((y - a(c_i)) / sigma) / sigma (exact for particles)."""
    ps = as_particles(d, ch, q)
    return mixture_pdf(y, ch.distortion(ps.positions), ps.weights, ch.sigma_z)


def output_range(d: InputDistribution, ch: ScalarChannel, q: QuadratureConfig = DEFAULT_QUAD):
    ps = as_particles(d, ch, q)
    return support_intervals(ch.distortion(ps.positions), q.y_margin_sigmas * ch.sigma_z)


def entropy_of_mixture(centers, weights, sigma, q: QuadratureConfig = DEFAULT_QUAD):
    """(h_bits, error_estimate, converged) for a Gaussian mixture with common sigma."""
    k = q.y_margin_sigmas
    intervals = support_intervals(centers, k * sigma)
    pdf = lambda y: mixture_pdf(y, centers, weights, sigma)  # noqa: E731
    h, err, ok = adaptive_integrate(entropy_integrand(pdf), intervals, 0.5 * sigma,
                                    q.abs_tol, max_panels=q.max_panels)
    # mass beyond k sigma of every component, times a bound on -log2 f there
    tail = math.erfc(k / math.sqrt(2.0)) * (0.5 * k * k * LOG2E + abs(math.log2(SQRT_2PI * sigma)) + 1.0)
    return h, err + tail, ok


def mutual_information(d: InputDistribution, ch: ScalarChannel,
                       q: QuadratureConfig = DEFAULT_QUAD) -> MIResult:
    """I(X;Y) = h(Y) - h(Y|X) by adaptive quadrature of the output entropy."""
    ps = as_particles(d, ch, q)
    centers = np.asarray(ch.distortion(ps.positions), dtype=float)
    h_y, err, ok = entropy_of_mixture(centers, ps.weights, ch.sigma_z, q)
    if has_continuous_part(d):
        err += 2.0 * q.x_tail_mass * (abs(h_y) + 0.5 * q.y_margin_sigmas ** 2 * LOG2E + 1.0)
    hyx = conditional_entropy_bits(ch)
    res = MIResult(h_y - hyx, h_y, hyx, err)
    if not ok:
        raise QuadratureError("output-entropy quadrature exceeded its panel budget", res)
    return res


def mutual_information_mc(d: InputDistribution, ch: ScalarChannel, n_samples: int, seed: int,
                          q: QuadratureConfig = DEFAULT_QUAD) -> tuple[float, float]:
    """Monte Carlo I(X;Y) in bits with its standard error.

    Averages log2 f(Y|X) - log2 f_Y(Y) over ancestral samples; the first term is
    the sample version of -h(Y|X), which removes the noise-entropy fluctuation.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    rng = np.random.default_rng(seed)
    x = d.sample(rng, n_samples)
    z = rng.standard_normal(n_samples)
    y = ch.distortion(x) + ch.sigma_z * z
    log_cond = -0.5 * z * z * LOG2E - math.log2(SQRT_2PI * ch.sigma_z)
    f_y = np.maximum(output_pdf(d, ch, y, q), PDF_FLOOR)
    terms = log_cond - np.log2(f_y)
    return float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(n_samples))


def mi_discrete_bruteforce(p_x, p_y_given_x) -> float:
    """Exact I(X;Y) in bits for a finite channel matrix (rows = inputs)."""
    p_x = np.asarray(p_x, dtype=float)
    P = np.asarray(p_y_given_x, dtype=float)
    if P.ndim != 2 or P.shape[0] != p_x.size:
        raise ValueError(f"dimension mismatch: p_x has {p_x.size} entries, channel is {P.shape}")
    if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > 1e-12):
        raise ValueError("channel rows must be probability vectors")
    if np.any(p_x < 0) or abs(p_x.sum() - 1.0) > 1e-12:
        raise ValueError("p_x must be a probability vector")
    p_y = p_x @ P
    total = 0.0
    for i in range(p_x.size):
        for j in range(P.shape[1]):
            pxy = p_x[i] * P[i, j]
            if pxy > 0:
                total += pxy * math.log2(P[i, j] / p_y[j])
    return total


def entropy_bits(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())
