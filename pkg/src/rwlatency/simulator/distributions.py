"""Service-time distributions sampled by inverse transform."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from rwlatency.errors import DomainError


def _positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be positive, got {value}")


def _non_negative(name, value):
    if not (math.isfinite(value) and value >= 0):
        raise DomainError(f"{name} must be non-negative, got {value}")


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        _positive("rate", self.rate)

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def inverse_cdf(self, u):
        return -np.log(u) / self.rate


@dataclass(frozen=True)
class ShiftedExponential:
    rate: float
    shift: float

    def __post_init__(self):
        _positive("rate", self.rate)
        _non_negative("shift", self.shift)

    @property
    def mean(self) -> float:
        return self.shift + 1.0 / self.rate

    def inverse_cdf(self, u):
        return self.shift - np.log(u) / self.rate


@dataclass(frozen=True)
class Pareto:
    shape: float
    scale: float

    def __post_init__(self):
        _positive("scale", self.scale)
        if not (math.isfinite(self.shape) and self.shape > 1):
            raise DomainError(f"Pareto shape must exceed 1 for a finite mean, got {self.shape}")

    @property
    def mean(self) -> float:
        return self.shape * self.scale / (self.shape - 1.0)

    def inverse_cdf(self, u):
        return self.scale * np.power(u, -1.0 / self.shape)


@dataclass(frozen=True)
class Weibull:
    shape: float
    scale: float
    location: float = 0.0

    def __post_init__(self):
        _positive("shape", self.shape)
        _positive("scale", self.scale)
        _non_negative("location", self.location)

    @property
    def mean(self) -> float:
        return self.location + self.scale * math.gamma(1.0 + 1.0 / self.shape)

    def inverse_cdf(self, u):
        return self.location + self.scale * np.power(-np.log(u), 1.0 / self.shape)


@dataclass(frozen=True)
class Empirical:
    """Resamples a fixed list of observed service times (seconds)."""

    samples: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.samples)
        if not values:
            raise DomainError("an empirical distribution needs at least one sample")
        if not all(math.isfinite(v) and v > 0 for v in values):
            raise DomainError("empirical samples must be positive")
        object.__setattr__(self, "samples", values)

    @property
    def mean(self) -> float:
        return math.fsum(self.samples) / len(self.samples)

    def inverse_cdf(self, u):
        data = np.asarray(self.samples)
        idx = np.minimum((np.asarray(u) * len(data)).astype(np.int64), len(data) - 1)
        return data[idx]

    @classmethod
    def from_file(cls, path) -> Empirical:
        return cls(tuple(load_samples(path)))


ServiceDistribution = Union[Exponential, ShiftedExponential, Pareto, Weibull, Empirical]


def sample(dist: ServiceDistribution, u):
    """Inverse-transform draw(s) from ``dist`` for uniforms ``u`` in (0, 1)."""
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr <= 0) | (u_arr > 1)):
        raise DomainError("uniform draws must lie in (0, 1]")
    out = dist.inverse_cdf(u_arr)
    return float(out) if np.ndim(out) == 0 else out


def draw(dist: ServiceDistribution, rng: np.random.Generator, size) -> np.ndarray:
    """``size`` independent service times; uniforms are taken in (0, 1]."""
    u = 1.0 - rng.random(size)
    return np.asarray(dist.inverse_cdf(u), dtype=float)


def load_samples(path) -> list[float]:
    """Read one positive decimal per line; blank lines and '#' comments are skipped."""
    values = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            v = float(line)
        except ValueError:
            raise DomainError(f"{path}:{lineno}: not a number: {line!r}") from None
        if not (math.isfinite(v) and v > 0):
            raise DomainError(f"{path}:{lineno}: samples must be positive, got {v}")
        values.append(v)
    if not values:
        raise DomainError(f"{path}: no samples found")
    return values
