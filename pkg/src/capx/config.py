"""Experiment configuration: JSON schema, defaults and validation."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .channel import ScalarChannel
from .inputs import NAMED, InputDistribution, distribution_from_dict, named_distribution
from .quadrature import QuadratureConfig
from .solver import SolverConfig

KINDS = ("mi-curve", "capacity-sweep", "timeshare-audit", "lemma1-suite", "interference")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PowerGrid:
    """Log-spaced grid start..stop with a fixed number of points per decade,
    or an explicit ascending list of powers."""

    start: float = 0.1
    stop: float = 1e5
    points_per_decade: int = 8
    values: tuple | None = None

    def powers(self) -> list[float]:
        if self.values is not None:
            vals = [float(v) for v in self.values]
        else:
            if not (0 < self.start <= self.stop) or self.points_per_decade < 1:
                raise ConfigError("power grid needs 0 < start <= stop and points_per_decade >= 1")
            lo, hi = math.log10(self.start), math.log10(self.stop)
            n = int(math.floor((hi - lo) * self.points_per_decade + 1e-9))
            # exponents built from integers so that whole decades come out exact
            vals = [10.0 ** (lo + i / self.points_per_decade) for i in range(n + 1)]
        if not vals:
            raise ConfigError("power grid is empty")
        if any(not (v > 0 and math.isfinite(v)) for v in vals):
            raise ConfigError("powers must be positive and finite")
        if len(set(vals)) != len(vals):
            raise ConfigError("power grid contains duplicate powers")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ConfigError("powers must be strictly ascending")
        return vals

    @classmethod
    def from_json(cls, spec) -> "PowerGrid":
        if isinstance(spec, list):
            return cls(values=tuple(spec))
        unknown = set(spec) - {"start", "stop", "points_per_decade", "values"}
        if unknown:
            raise ConfigError(f"unknown power grid keys: {sorted(unknown)}")
        vals = spec.get("values")
        return cls(float(spec.get("start", 0.1)), float(spec.get("stop", 1e5)),
                   int(spec.get("points_per_decade", 8)), tuple(vals) if vals is not None else None)

    def to_json(self):
        if self.values is not None:
            return list(self.values)
        return {"start": self.start, "stop": self.stop, "points_per_decade": self.points_per_decade}


@dataclass(frozen=True)
class TimeshareSpec:
    bases: tuple = ({"name": "gaussian", "power": 1.0}, {"name": "gaussian", "power": 100.0})
    targets: tuple = (1e3, 1e4)
    epsilons: tuple = (0.5, 0.1, 0.02)
    curve: str | None = None  # optional capacity CSV to audit for monotonicity
    slack: float = 0.02


@dataclass(frozen=True)
class Lemma1Spec:
    n: int = 1000
    shape: tuple = (3, 3, 2)


@dataclass(frozen=True)
class InterferenceSpec:
    gains: tuple = (0.5,)
    alphas: tuple = (1.0,)
    base: dict = field(default_factory=lambda: {"name": "gaussian", "power": 50.0})
    target: float = 5000.0
    epsilons: tuple = (0.2, 0.05)
    n_samples: int = 100_000


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "mi-curve"
    channel: dict = field(default_factory=lambda: ScalarChannel.tanh().to_dict())
    powers: PowerGrid = PowerGrid()
    distributions: tuple = ("gaussian", "uniform", "exponential", "ook", "bpsk", "pam3", "pam4")
    solver: dict = field(default_factory=dict)
    quadrature: dict = field(default_factory=dict)
    out: str = "out"
    seed: int = 0
    achiever_powers: tuple = (10.0, 100.0, 1000.0)
    timeshare: TimeshareSpec = TimeshareSpec()
    lemma1: Lemma1Spec = Lemma1Spec()
    interference: InterferenceSpec = InterferenceSpec()

    # -- derived objects --------------------------------------------------

    def scalar_channel(self) -> ScalarChannel:
        try:
            return ScalarChannel.from_dict(self.channel)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid channel: {exc}") from exc

    def solver_config(self) -> SolverConfig:
        return _override(SolverConfig(seed=self.seed), self.solver, "solver")

    def quad_config(self) -> QuadratureConfig:
        return _override(QuadratureConfig(), self.quadrature, "quadrature")

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; valid kinds: {', '.join(KINDS)}")
        self.scalar_channel()
        self.solver_config()
        self.quad_config()
        if self.kind in ("mi-curve", "capacity-sweep"):
            self.powers.powers()
        if self.kind == "mi-curve":
            if not self.distributions:
                raise ConfigError("distribution list is empty")
            for name in self.distributions:
                parse_distribution(name, 1.0)
        if self.kind == "timeshare-audit":
            ts = self.timeshare
            if not ts.epsilons or any(not 0 < e <= 1 for e in ts.epsilons):
                raise ConfigError("timeshare epsilons must lie in (0, 1]")
            for b in ts.bases:
                parse_distribution(b)
        if self.kind == "lemma1-suite" and self.lemma1.n < 1:
            raise ConfigError("lemma1 suite needs n >= 1")
        if self.kind == "interference":
            it = self.interference
            if len(it.alphas) != len(it.gains):
                raise ConfigError("need one scaling constant per interferer gain")
            if it.n_samples < 100:
                raise ConfigError("sample budget too small: need at least 100 samples")
            parse_distribution(it.base)
        return self

    # -- JSON -------------------------------------------------------------

    def to_json(self) -> dict:
        out = asdict(self)
        out["powers"] = self.powers.to_json()
        out["experiment"] = out.pop("kind")
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        known = {f.name for f in fields(cls)} - {"kind"} | {"experiment"}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        if "experiment" in obj:
            kw["kind"] = obj.pop("experiment")
        if "powers" in obj:
            kw["powers"] = PowerGrid.from_json(obj.pop("powers"))
        for key, sub in (("timeshare", TimeshareSpec), ("lemma1", Lemma1Spec),
                         ("interference", InterferenceSpec)):
            if key in obj:
                kw[key] = _sub_spec(sub, obj.pop(key), key)
        for key in ("distributions", "achiever_powers"):
            if key in obj:
                kw[key] = tuple(obj.pop(key))
        kw.update(obj)
        return cls(**kw)


def _sub_spec(cls, spec: dict, name: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigError(f"unknown {name} keys: {sorted(unknown)}")
    return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in spec.items()})


def _override(base, overrides: dict, name: str):
    allowed = {f.name for f in fields(base)}
    unknown = set(overrides) - allowed
    if unknown:
        raise ConfigError(f"unknown {name} settings: {sorted(unknown)}")
    try:
        return replace(base, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name} settings: {exc}") from exc


def parse_distribution(spec, power: float | None = None) -> InputDistribution:
    """A distribution from a short name (with power) or a JSON-style dict.

    Dicts may use {"name": ..., "power": ...}, any form accepted by
    distribution_from_dict, or {"file": path} for a particle-set JSON.
    """
    try:
        if isinstance(spec, str):
            return named_distribution(spec, 1.0 if power is None else power)
        if "name" in spec:
            return named_distribution(spec["name"], float(spec["power"]))
        if "file" in spec:
            with open(spec["file"]) as fh:
                return distribution_from_dict(json.load(fh))
        return distribution_from_dict(spec)
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return ExperimentConfig.from_json(obj)
    except TypeError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def ensure_out_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {path} is not writable")
    return path


def valid_distribution_names() -> str:
    return ", ".join(NAMED) + " (pamN for any N >= 2)"


def grid_contains(powers, value: float) -> float | None:
    arr = np.asarray(powers)
    hit = np.flatnonzero(np.abs(arr - value) <= 1e-9 * value)
    return float(arr[hit[0]]) if hit.size else None
