"""Memoryless scalar channels Y = a(X) + Z with Gaussian noise Z."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

LOG2E = math.log2(math.e)
SQRT_2PI = math.sqrt(2.0 * math.pi)


def _check_finite(x):
    if not np.all(np.isfinite(x)):
        raise ValueError("distortion input must be finite")


@dataclass(frozen=True)
class Identity:
    """a(x) = x; the channel reduces to plain AWGN."""

    kind = "identity"

    def __call__(self, x):
        _check_finite(x)
        return np.asarray(x, dtype=float) * 1.0 if np.ndim(x) else float(x)

    def derivative(self, x):
        return np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else 1.0

    @property
    def linear_scale(self) -> float:
        return math.inf

    def to_dict(self) -> dict:
        return {"kind": "identity"}


@dataclass(frozen=True)
class TanhClip:
    """Smooth clipper a(x) = a_max * tanh(x / a_max)."""

    a_max: float
    kind = "tanh"

    def __post_init__(self):
        if not (self.a_max > 0 and math.isfinite(self.a_max)):
            raise ValueError(f"a_max must be positive and finite, got {self.a_max}")

    def __call__(self, x):
        _check_finite(x)
        return self.a_max * np.tanh(np.asarray(x, dtype=float) / self.a_max)

    def derivative(self, x):
        c = np.cosh(np.clip(np.asarray(x, dtype=float) / self.a_max, -700.0, 700.0))
        return 1.0 / (c * c)

    @property
    def linear_scale(self) -> float:
        return self.a_max

    def to_dict(self) -> dict:
        return {"kind": "tanh", "a_max": self.a_max}


@dataclass(frozen=True, eq=False)
class GridDistortion:
    """User-supplied nondecreasing map given as (x, a(x)) samples.

    Monotone cubic (PCHIP) interpolation inside the grid, clamped to the end
    values outside it.
    """

    x: tuple
    ax: tuple
    kind = "grid"
    _interp: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        xs = np.asarray(self.x, dtype=float)
        ys = np.asarray(self.ax, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("grid distortion needs matching 1-D x and a(x) of length >= 2")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("grid x values must be strictly increasing")
        if np.any(np.diff(ys) < 0):
            raise ValueError("grid distortion must be nondecreasing")
        object.__setattr__(self, "x", tuple(xs))
        object.__setattr__(self, "ax", tuple(ys))
        object.__setattr__(self, "_interp", PchipInterpolator(xs, ys, extrapolate=False))

    def __call__(self, x):
        _check_finite(x)
        xs = np.clip(np.asarray(x, dtype=float), self.x[0], self.x[-1])
        out = self._interp(xs)
        return out if np.ndim(x) else float(out)

    def derivative(self, x):
        xa = np.asarray(x, dtype=float)
        inside = (xa > self.x[0]) & (xa < self.x[-1])
        d = np.where(inside, self._interp.derivative()(np.clip(xa, self.x[0], self.x[-1])), 0.0)
        return d if np.ndim(x) else float(d)

    @property
    def linear_scale(self) -> float:
        return max(abs(self.x[0]), abs(self.x[-1]))

    def to_dict(self) -> dict:
        return {"kind": "grid", "x": list(self.x), "ax": list(self.ax)}


def distortion_from_dict(spec: dict):
    kind = spec.get("kind")
    if kind == "identity":
        return Identity()
    if kind == "tanh":
        return TanhClip(float(spec["a_max"]))
    if kind == "grid":
        return GridDistortion(tuple(spec["x"]), tuple(spec["ax"]))
    raise ValueError(f"unknown distortion kind {kind!r} (expected identity, tanh, grid)")


@dataclass(frozen=True)
class ScalarChannel:
    distortion: object
    sigma_z: float = 1.0

    def __post_init__(self):
        if not (self.sigma_z > 0 and math.isfinite(self.sigma_z)):
            raise ValueError(f"sigma_z must be positive, got {self.sigma_z}")

    @classmethod
    def tanh(cls, a_max: float = 10.0, sigma_z: float = 1.0) -> "ScalarChannel":
        return cls(TanhClip(a_max), sigma_z)

    @classmethod
    def awgn(cls, sigma_z: float = 1.0) -> "ScalarChannel":
        return cls(Identity(), sigma_z)

    @classmethod
    def from_dict(cls, spec: dict) -> "ScalarChannel":
        return cls(distortion_from_dict(spec["distortion"]), float(spec.get("sigma_z", 1.0)))

    def to_dict(self) -> dict:
        return {"distortion": self.distortion.to_dict(), "sigma_z": self.sigma_z}


def apply_distortion(ch: ScalarChannel, x):
    return ch.distortion(x)


def gaussian_pdf(u):
    return np.exp(-0.5 * np.square(u)) / SQRT_2PI


def conditional_pdf(ch: ScalarChannel, y, x):
    """f(y|x) = f_G((y - a(x)) / sigma) / sigma."""
    _check_finite(y)
    s = ch.sigma_z
    return gaussian_pdf((np.asarray(y, dtype=float) - ch.distortion(x)) / s) / s


def conditional_entropy_bits(ch: ScalarChannel) -> float:
    """h(Y|X) = 0.5 * log2(2 pi e sigma^2), whatever the input distribution."""
    return 0.5 * math.log2(2.0 * math.pi * math.e * ch.sigma_z ** 2)


def bits_to_nats(bits: float) -> float:
    """Display conversion; everything else in the package is in bits."""
    return bits * math.log(2.0)
