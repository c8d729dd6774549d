"""Input distributions: continuous families, particle sets, cost evaluation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

import numpy as np
from scipy import stats

WEIGHT_SUM_TOL = 1e-12
MERGE_RTOL = 1e-9


class CostFunction(Enum):
    POWER = "power"

    def __call__(self, x):
        return np.square(np.asarray(x, dtype=float))


POWER = CostFunction.POWER


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class ContinuousFamily:
    """Zero-mean Gaussian, zero-mean uniform or one-sided exponential with E[X^2] = power."""

    kind: Family
    power: float

    def __post_init__(self):
        object.__setattr__(self, "kind", Family(self.kind))
        if not (self.power > 0 and math.isfinite(self.power)):
            raise ValueError(f"power must be positive, got {self.power}")

    @property
    def frozen(self):
        p = self.power
        if self.kind is Family.GAUSSIAN:
            return stats.norm(scale=math.sqrt(p))
        if self.kind is Family.UNIFORM:
            half = math.sqrt(3.0 * p)
            return stats.uniform(loc=-half, scale=2.0 * half)
        # E[X^2] = 2 * scale^2 for the exponential
        return stats.expon(scale=math.sqrt(p / 2.0))

    @property
    def mean(self) -> float:
        return math.sqrt(self.power / 2.0) if self.kind is Family.EXPONENTIAL else 0.0

    def support(self, tail_mass: float = 0.0) -> tuple[float, float]:
        if self.kind is Family.UNIFORM:
            half = math.sqrt(3.0 * self.power)
            return -half, half
        lo = 0.0 if self.kind is Family.EXPONENTIAL else float(self.frozen.ppf(tail_mass))
        return lo, float(self.frozen.isf(tail_mass))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        p = self.power
        if self.kind is Family.GAUSSIAN:
            return rng.normal(0.0, math.sqrt(p), n)
        if self.kind is Family.UNIFORM:
            half = math.sqrt(3.0 * p)
            return rng.uniform(-half, half, n)
        return rng.exponential(math.sqrt(p / 2.0), n)

    def to_dict(self) -> dict:
        return {"family": self.kind.value, "power": self.power}


@dataclass(frozen=True, eq=False)
class ParticleSet:
    """Discrete input sum_i w_i delta(x - c_i)."""

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        c = np.array(self.positions, dtype=float).reshape(-1)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if c.shape != w.shape or c.size == 0:
            raise ValueError("positions and weights must be nonempty and of equal length")
        if not np.all(np.isfinite(c)):
            raise ValueError("particle positions must be finite")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("particle weights must be nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("particle weights sum to zero")
        # leave already-normalized weights bit-identical (serialization round trips)
        if abs(total - 1.0) > 4e-16 * w.size:
            w = w / total
        c.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "positions", c)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.positions.size

    def __eq__(self, other):
        return (isinstance(other, ParticleSet)
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.weights, other.weights))

    @property
    def mean(self) -> float:
        return float(self.weights @ self.positions)

    def entropy_bits(self) -> float:
        w = self.canonical().weights
        w = w[w > 0]
        return float(-(w * np.log2(w)).sum())

    def canonical(self) -> "ParticleSet":
        """Sorted, zero weights dropped, near-duplicate positions merged."""
        keep = self.weights > 0
        c, w = self.positions[keep], self.weights[keep]
        order = np.argsort(c, kind="stable")
        c, w = c[order], w[order]
        out_c, out_w = [c[0]], [w[0]]
        for ci, wi in zip(c[1:], w[1:]):
            if abs(ci - out_c[-1]) <= MERGE_RTOL * max(1.0, abs(ci), abs(out_c[-1])):
                out_c[-1] = (out_c[-1] * out_w[-1] + ci * wi) / (out_w[-1] + wi)
                out_w[-1] += wi
            else:
                out_c.append(ci)
                out_w.append(wi)
        return ParticleSet(np.array(out_c), np.array(out_w))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.choice(self.positions.size, size=n, p=self.weights)
        return self.positions[idx]

    def to_dict(self) -> dict:
        return {"positions": self.positions.tolist(), "weights": self.weights.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ParticleSet":
        obj = json.loads(text)
        return cls(obj["positions"], obj["weights"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["c", "w"])
        for c, w in zip(self.positions, self.weights):
            writer.writerow([repr(float(c)), repr(float(w))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ParticleSet":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls([float(r["c"]) for r in rows], [float(r["w"]) for r in rows])


@dataclass(frozen=True, eq=False)
class Mixture:
    """Probabilistic mixture of input distributions (time sharing)."""

    components: tuple
    probs: tuple

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if len(self.components) != probs.size or probs.size == 0:
            raise ValueError("need one probability per component")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("mixture probabilities must form a probability vector")
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "probs", tuple(float(x) for x in probs))

    @property
    def mean(self) -> float:
        return sum(pr * comp.mean for pr, comp in zip(self.probs, self.components))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        which = rng.choice(len(self.components), size=n, p=self.probs)
        out = np.empty(n)
        for j, comp in enumerate(self.components):
            sel = which == j
            if sel.any():
                out[sel] = comp.sample(rng, int(sel.sum()))
        return out

    def to_dict(self) -> dict:
        return {"mixture": [{"prob": pr, **comp.to_dict()}
                            for pr, comp in zip(self.probs, self.components)]}


InputDistribution = Union[ContinuousFamily, ParticleSet, Mixture]


def point_mass(x: float = 0.0) -> ParticleSet:
    return ParticleSet([x], [1.0])


def measure_cost(d: InputDistribution, b: CostFunction = POWER) -> float:
    """Exact E[b(X)]."""
    if b is not POWER:
        raise ValueError(f"unsupported cost function {b}")
    if isinstance(d, ContinuousFamily):
        return d.power
    if isinstance(d, Mixture):
        return sum(pr * measure_cost(comp, b) for pr, comp in zip(d.probs, d.components))
    return float(d.weights @ np.square(d.positions))


def rescale_to_power(base: InputDistribution, p: float) -> InputDistribution:
    """Map a unit-power distribution g to alpha * g(alpha * x), alpha = 1/sqrt(p)."""
    if not (p > 0 and math.isfinite(p)):
        raise ValueError(f"target power must be positive, got {p}")
    unit = measure_cost(base)
    if abs(unit - 1.0) > 1e-9:
        raise ValueError(f"base distribution must have unit power, has {unit}")
    return scale_positions(base, math.sqrt(p))


def scale_positions(d: InputDistribution, k: float) -> InputDistribution:
    """Distribution of k * X; E[b] scales by k^2 for the power cost."""
    if not (k > 0 and math.isfinite(k)):
        raise ValueError(f"scale factor must be positive, got {k}")
    if isinstance(d, ContinuousFamily):
        return ContinuousFamily(d.kind, d.power * k * k)
    if isinstance(d, Mixture):
        return Mixture(tuple(scale_positions(comp, k) for comp in d.components), d.probs)
    return ParticleSet(d.positions * k, d.weights)


def make_constellation(kind: str, p: float, m: int | None = None) -> ParticleSet:
    """Equally spaced, equiprobable OOK / BPSK / m-PAM at average power p.

    OOK uses the points {0, sqrt(2p)}, so that its mean is sqrt(p/2).
    """
    if not (p > 0 and math.isfinite(p)):
        raise ValueError(f"power must be positive, got {p}")
    kind = kind.lower()
    if kind == "ook":
        return ParticleSet([0.0, math.sqrt(2.0 * p)], [0.5, 0.5])
    if kind == "bpsk":
        m = 2
    elif kind != "pam":
        raise ValueError(f"unknown constellation {kind!r}")
    if m is None or int(m) != m or m < 2:
        raise ValueError(f"PAM order must be an integer >= 2, got {m}")
    m = int(m)
    # spacing d with d^2 (m^2 - 1) / 12 = p
    d = math.sqrt(12.0 * p / (m * m - 1))
    pts = d * (np.arange(m) - (m - 1) / 2.0)
    return ParticleSet(pts, np.full(m, 1.0 / m))


NAMED = ("gaussian", "uniform", "exponential", "ook", "bpsk", "pam3", "pam4", "pam8", "pam16", "pam64")


def named_distribution(name: str, p: float) -> InputDistribution:
    """Distributions by short name at power p, e.g. "gaussian", "ook", "pam4"."""
    key = name.lower()
    if key in ("gaussian", "uniform", "exponential"):
        return ContinuousFamily(Family(key), p)
    if key in ("ook", "bpsk"):
        return make_constellation(key, p)
    if key.startswith("pam") and key[3:].isdigit():
        return make_constellation("pam", p, int(key[3:]))
    raise ValueError(f"unknown distribution {name!r}; valid names: {', '.join(NAMED)} (pamN for any N >= 2)")


def pdf_at(d: InputDistribution, x):
    if not isinstance(d, ContinuousFamily):
        raise TypeError("particle sets have no density; use positions and weights")
    return d.frozen.pdf(x)


def sample(d: InputDistribution, rng: np.random.Generator, n: int) -> np.ndarray:
    return d.sample(rng, n)


def distribution_from_dict(spec: dict) -> InputDistribution:
    """Parse {"family": ..., "power": p}, {"constellation": ..., "power": p, "m": m}
    or {"positions": [...], "weights": [...]}."""
    if "mixture" in spec:
        parts = spec["mixture"]
        return Mixture(tuple(distribution_from_dict({k: v for k, v in part.items() if k != "prob"})
                             for part in parts), tuple(part["prob"] for part in parts))
    if "positions" in spec:
        return ParticleSet(spec["positions"], spec["weights"])
    if "family" in spec:
        return ContinuousFamily(Family(spec["family"]), float(spec["power"]))
    if "constellation" in spec:
        return make_constellation(spec["constellation"], float(spec["power"]), spec.get("m"))
    raise ValueError(f"cannot parse input distribution from {spec!r}")


def distribution_to_dict(d: InputDistribution) -> dict:
    return d.to_dict()
