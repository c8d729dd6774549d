"""k-user interference seen from the primary user.

Receiver 1 observes Y1 = a(X1 + sum_i g_i X_i) + Z and treats the other users
as noise.  Interferers either use frozen distributions or linearly rescaled
copies of the primary distribution, f_Xi(x) = alpha_i f_X1(alpha_i x).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import LOG2E, SQRT_2PI, ScalarChannel
from .inputs import InputDistribution, ParticleSet, measure_cost, scale_positions
from .monotonicity import binary_entropy, satellite_construct, timeshare_bound
from .quadrature import (DEFAULT_QUAD, PDF_FLOOR, MIResult, QuadratureConfig, as_particles,
                         entropy_of_mixture, mixture_pdf)

MAX_EXACT_COMBINATIONS = 10_000
# bin width, in noise standard deviations, for the marginal output density
MARGINAL_BIN = 1.0 / 64.0
INTERFERENCE_QUAD = QuadratureConfig(x_nodes=256)


@dataclass(frozen=True)
class InterferenceChannel:
    """Additive coupling before the distortion; gains[j] multiplies user j + 2."""

    distortion: object
    sigma_z: float
    gains: tuple

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(float(g) for g in self.gains))
        if len(self.gains) < 1:
            raise ValueError("an interference channel needs k >= 2 users")
        if not all(math.isfinite(g) for g in self.gains):
            raise ValueError("coupling gains must be finite")
        if not self.sigma_z > 0:
            raise ValueError("sigma_z must be positive")

    @property
    def k(self) -> int:
        return len(self.gains) + 1

    @property
    def single_user(self) -> ScalarChannel:
        return ScalarChannel(self.distortion, self.sigma_z)

    def to_dict(self) -> dict:
        return {"distortion": self.distortion.to_dict(), "sigma_z": self.sigma_z,
                "gains": list(self.gains)}


@dataclass(frozen=True)
class AdaptiveScaling:
    alphas: tuple

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if any(not (a > 0 and math.isfinite(a)) for a in self.alphas):
            raise ValueError("scaling constants must be positive")


def rescale_interferer(f1: InputDistribution, alpha: float) -> InputDistribution:
    """Distribution alpha * f1(alpha * x), i.e. X1 / alpha; cost scales by 1 / alpha^2."""
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValueError(f"alpha must be positive, got {alpha}")
    return scale_positions(f1, 1.0 / alpha)


def interferer_distributions(ch: InterferenceChannel, f1: InputDistribution,
                             scaling: AdaptiveScaling):
    if len(scaling.alphas) != ch.k - 1:
        raise ValueError(f"need {ch.k - 1} scaling constants, got {len(scaling.alphas)}")
    return [rescale_interferer(f1, a) for a in scaling.alphas]


# ---------------------------------------------------------------------------
# interference offsets V = sum_i g_i X_i


def interference_offsets(ch: InterferenceChannel, interferers, seed: int,
                         q: QuadratureConfig = INTERFERENCE_QUAD) -> ParticleSet:
    """Distribution of V = sum_i g_i X_i as particles.

    Exact (all combinations of per-user particles or quadrature proxies) when
    the combination count is at most MAX_EXACT_COMBINATIONS, otherwise
    MAX_EXACT_COMBINATIONS equally weighted samples.
    """
    single = ch.single_user
    parts = []
    for g, d in zip(ch.gains, interferers):
        if g == 0.0:
            continue
        scaled = scale_positions(d, abs(g))
        ps = as_particles(scaled, single, q)
        if g < 0:
            ps = ParticleSet(-ps.positions, ps.weights)
        parts.append(ps.canonical())
    if not parts:
        return ParticleSet([0.0], [1.0])
    count = int(np.prod([len(ps) for ps in parts], dtype=float))
    if count <= MAX_EXACT_COMBINATIONS:
        c, w = np.zeros(1), np.ones(1)
        for ps in parts:
            c = np.add.outer(c, ps.positions).ravel()
            w = np.multiply.outer(w, ps.weights).ravel()
        return ParticleSet(c, w).canonical()
    rng = np.random.default_rng([seed, 0x1F])
    v = np.zeros(MAX_EXACT_COMBINATIONS)
    for g, d in zip(ch.gains, interferers):
        if g != 0.0:
            v += g * d.sample(rng, MAX_EXACT_COMBINATIONS)
    return ParticleSet(v, np.full(v.size, 1.0 / v.size))


def conditional_output_pdf(ch: InterferenceChannel, offsets: ParticleSet, y, x1):
    """f(y1 | x1) = sum_v P(v) f_G((y1 - a(x1 + v)) / sigma) / sigma, elementwise in (y, x1)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x1 = np.broadcast_to(np.asarray(x1, dtype=float), y.shape)
    out = np.empty_like(y)
    step = max(1, 2_000_000 // len(offsets))
    for s in range(0, y.size, step):
        u = (y[s:s + step, None] - ch.distortion(np.add.outer(x1[s:s + step], offsets.positions)))
        u /= ch.sigma_z
        out[s:s + step] = np.exp(-0.5 * u * u) @ offsets.weights
    return out / (SQRT_2PI * ch.sigma_z)


def _marginal_centers(ch: InterferenceChannel, f1: InputDistribution, offsets: ParticleSet,
                      q: QuadratureConfig):
    """Histogram of a(X1 + V) in bins of MARGINAL_BIN * sigma, keeping each bin's mean."""
    p1 = as_particles(f1, ch.single_user, q)
    centers = ch.distortion(np.add.outer(p1.positions, offsets.positions).ravel())
    weights = np.multiply.outer(p1.weights, offsets.weights).ravel()
    if centers.size <= MAX_EXACT_COMBINATIONS:
        return centers, weights
    width = MARGINAL_BIN * ch.sigma_z
    idx = np.floor(centers / width).astype(np.int64)
    uniq, inv = np.unique(idx, return_inverse=True)
    mass = np.bincount(inv, weights=weights)
    first = np.bincount(inv, weights=weights * centers)
    keep = mass > 0
    return first[keep] / mass[keep], mass[keep]


# ---------------------------------------------------------------------------
# mutual information of the primary user


def sample_users(ch: InterferenceChannel, f1: InputDistribution, scaling: AdaptiveScaling,
                 n: int, seed: int) -> np.ndarray:
    """Independent draws (n, k) of X1..Xk, one RNG stream per user."""
    dists = [f1] + interferer_distributions(ch, f1, scaling)
    return np.column_stack([d.sample(np.random.default_rng([seed, j]), n)
                            for j, d in enumerate(dists)])


@dataclass
class PrimaryMI:
    estimate_bits: float
    std_error: float
    offsets_exact: bool

    def __iter__(self):
        yield self.estimate_bits
        yield self.std_error


def primary_mi(ch: InterferenceChannel, f1: InputDistribution, scaling: AdaptiveScaling,
               n_samples: int = 100_000, seed: int = 0,
               q: QuadratureConfig = INTERFERENCE_QUAD) -> PrimaryMI:
    """Monte Carlo I(X1;Y1) with the interferers marginalized out.

    Averages log2 f(Y1|X1) - log2 f(Y1) over independent draws of all users
    and the noise.
    """
    if n_samples < 100:
        raise ValueError("sample budget too small: need at least 100 samples")
    interferers = interferer_distributions(ch, f1, scaling)
    offsets = interference_offsets(ch, interferers, seed, q)
    exact = len(offsets) < MAX_EXACT_COMBINATIONS or all(g == 0 for g in ch.gains)
    xs = sample_users(ch, f1, scaling, n_samples, seed)
    z = np.random.default_rng([seed, ch.k]).standard_normal(n_samples)
    pre = xs[:, 0] + xs[:, 1:] @ np.asarray(ch.gains)
    y = ch.distortion(pre) + ch.sigma_z * z
    f_cond = conditional_output_pdf(ch, offsets, y, xs[:, 0])
    centers, weights = _marginal_centers(ch, f1, offsets, q)
    f_marg = mixture_pdf(y, centers, weights, ch.sigma_z)
    terms = np.log2(np.maximum(f_cond, PDF_FLOOR)) - np.log2(np.maximum(f_marg, PDF_FLOOR))
    return PrimaryMI(float(terms.mean()), float(terms.std(ddof=1) / math.sqrt(n_samples)), exact)


@dataclass(frozen=True)
class FixedInterferenceChannel:
    """Primary channel with the interferer distributions frozen.

    For a particle input the output is a Gaussian mixture over (c_i, v_j), so
    I(X1;Y1) = h(Y1) - sum_i w_i h(Y1 | X1 = c_i) is computed by quadrature.
    """

    channel: InterferenceChannel
    offsets: ParticleSet

    @classmethod
    def freeze(cls, ch: InterferenceChannel, interferers, seed: int = 0,
               q: QuadratureConfig = INTERFERENCE_QUAD):
        return cls(ch, interference_offsets(ch, interferers, seed, q))

    def mutual_information(self, d: InputDistribution, q: QuadratureConfig = DEFAULT_QUAD) -> MIResult:
        ch = self.channel
        ps = as_particles(d, ch.single_user, q)
        v = self.offsets
        centers = ch.distortion(np.add.outer(ps.positions, v.positions))
        h_y, err, _ = entropy_of_mixture(centers.ravel(), np.multiply.outer(ps.weights, v.weights).ravel(),
                                         ch.sigma_z, q)
        h_cond = 0.0
        for i in range(len(ps)):
            h_i, e_i, _ = entropy_of_mixture(centers[i], v.weights, ch.sigma_z, q)
            h_cond += ps.weights[i] * h_i
            err += ps.weights[i] * e_i
        return MIResult(h_y - h_cond, h_y, h_cond, err)


# ---------------------------------------------------------------------------
# time-sharing lower bound with k users


@dataclass
class Theorem2Row:
    epsilon: float
    cost: float
    estimate_bits: float
    std_error: float
    bound_bits: float
    tolerance_bits: float
    ok: bool


@dataclass
class Theorem2Report:
    k: int
    base_cost: float
    target_cost: float
    mi_base_bits: float
    mi_base_std_error: float
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.rows)

    @property
    def best_bound(self) -> float:
        return max((r.bound_bits for r in self.rows), default=-math.inf)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(passed=self.passed, best_bound=self.best_bound)
        return out


def theorem2_bound(ch: InterferenceChannel, base: InputDistribution, target: float, eps_list,
                   scaling: AdaptiveScaling, n_samples: int = 100_000, seed: int = 0,
                   n_sigma: float = 4.0, q: QuadratureConfig = INTERFERENCE_QUAD) -> Theorem2Report:
    """Check I(X1;Y1) >= (1-eps)^k I_base - (k-1) H2(eps) with every user time sharing.

    Each user mixes its rescaled base with its rescaled satellite; the
    rescaling of the mixture does exactly that.  The tolerance is n_sigma
    combined standard errors of the two Monte Carlo estimates.
    """
    base_est = primary_mi(ch, base, scaling, n_samples, seed, q)
    report = Theorem2Report(ch.k, measure_cost(base), float(target),
                            base_est.estimate_bits, base_est.std_error)
    for j, eps in enumerate(eps_list):
        mix = satellite_construct(base, target, eps).distribution
        est = primary_mi(ch, mix, scaling, n_samples, seed + 1 + j, q)
        bound = timeshare_bound(base_est.estimate_bits, eps, ch.k)
        se = math.hypot(est.std_error, (1.0 - eps) ** ch.k * base_est.std_error)
        tol = n_sigma * se
        report.rows.append(Theorem2Row(eps, measure_cost(mix), est.estimate_bits, est.std_error,
                                       bound, tol, est.estimate_bits >= bound - tol))
    return report


def bound_limit(mi_base: float, k: int, eps: float) -> float:
    """The bound expression itself, for checking its eps -> 0 limit."""
    return (1.0 - eps) ** k * mi_base - (k - 1) * binary_entropy(eps)
