"""Sampling of multiplicative uncertainty parameters.

Training uses deterministic grids over each parameter's support; testing
draws fresh samples (uniform or truncated Gaussian) from a seeded PCG64
generator so reports are bit-reproducible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

GRID = "grid"
UNIFORM = "uniform"
TRUNCATED_GAUSSIAN = "truncated_gaussian"


@dataclass(frozen=True)
class UncertaintyChannelSpec:
    """Support and distribution for one free uncertainty parameter.

    The support is [center - halfwidth, center + halfwidth]. The nominal
    center is 1.0 for multiplicative scale factors and 0.0 for the
    cosine-modulation amplitudes. A truncated Gaussian is centered on its
    mean with support cut at three standard deviations.
    """

    kind: str
    halfwidth: float
    center: float = 1.0
    points: int = 1
    stddev: float = 0.0

    def __post_init__(self):
        if self.kind not in (GRID, UNIFORM, TRUNCATED_GAUSSIAN):
            raise ValueError(f"unknown sampling kind {self.kind!r}")
        if not 0.0 <= self.halfwidth <= 1.0:
            raise ValueError("halfwidth must lie in [0, 1]")
        if self.kind == GRID and self.points < 1:
            raise ValueError("grid needs at least one point")
        if self.kind == TRUNCATED_GAUSSIAN and self.stddev <= 0.0:
            raise ValueError("truncated Gaussian needs stddev > 0")

    @classmethod
    def grid(cls, halfwidth: float, points: int, center: float = 1.0) -> "UncertaintyChannelSpec":
        return cls(kind=GRID, halfwidth=halfwidth, center=center, points=points)

    @classmethod
    def uniform(cls, halfwidth: float, center: float = 1.0) -> "UncertaintyChannelSpec":
        return cls(kind=UNIFORM, halfwidth=halfwidth, center=center)

    @classmethod
    def truncated_gaussian(cls, stddev: float, mean: float = 1.0) -> "UncertaintyChannelSpec":
        return cls(kind=TRUNCATED_GAUSSIAN, halfwidth=3.0 * stddev, center=mean, stddev=stddev)

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.halfwidth, self.center + self.halfwidth)

    def grid_values(self) -> np.ndarray:
        """The grid center - E + (2n - 1) E / N for n = 1..N."""
        if self.kind != GRID:
            raise ValueError("grid_values requires a grid spec")
        n = np.arange(1, self.points + 1)
        return self.center - self.halfwidth + (2 * n - 1) * self.halfwidth / self.points


@dataclass(frozen=True)
class ThetaSample:
    """One joint draw of all free uncertainty parameters."""

    values: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SampleSet:
    """An ordered collection of parameter draws plus their provenance."""

    samples: tuple[ThetaSample, ...]
    provenance: str
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.samples)

    def as_array(self) -> np.ndarray:
        """(N, K) array of parameter values, one row per sample."""
        return np.array([s.values for s in self.samples], dtype=np.float64)


def _check_support(values: np.ndarray, specs) -> None:
    for j, spec in enumerate(specs):
        lo, hi = spec.support
        col = values[:, j]
        if col.min() < lo - 1e-12 or col.max() > hi + 1e-12:
            raise AssertionError(f"sampled value outside support [{lo}, {hi}] on channel {j}")


def grid_samples(specs) -> SampleSet:
    """Cartesian product of per-channel uniform grids."""
    specs = list(specs)
    axes = [spec.grid_values() for spec in specs]
    combos = tuple(ThetaSample(values=tuple(float(v) for v in combo)) for combo in itertools.product(*axes))
    out = SampleSet(samples=combos, provenance=GRID)
    _check_support(out.as_array(), specs)
    return out


def random_uniform_samples(specs, count: int, seed: int) -> SampleSet:
    """count i.i.d. draws, uniform over each channel's support."""
    if count < 1:
        raise ValueError("count must be >= 1")
    specs = list(specs)
    rng = np.random.Generator(np.random.PCG64(seed))
    cols = []
    for spec in specs:
        lo, hi = spec.support
        cols.append(rng.uniform(lo, hi, size=count) if hi > lo else np.full(count, lo))
    values = np.column_stack(cols)
    _check_support(values, specs)
    samples = tuple(ThetaSample(values=tuple(row)) for row in values.tolist())
    return SampleSet(samples=samples, provenance=UNIFORM, seed=seed)


def truncated_gaussian_samples(specs, count: int, seed: int) -> SampleSet:
    """Gaussian draws restricted to mean +- 3 stddev by rejection sampling."""
    if count < 1:
        raise ValueError("count must be >= 1")
    specs = list(specs)
    rng = np.random.Generator(np.random.PCG64(seed))
    cols = []
    for spec in specs:
        if spec.kind != TRUNCATED_GAUSSIAN:
            raise ValueError("truncated_gaussian_samples requires truncated Gaussian specs")
        lo, hi = spec.support
        vals = np.empty(count)
        filled = 0
        while filled < count:
            draw = rng.normal(spec.center, spec.stddev, size=count - filled)
            keep = draw[(draw >= lo) & (draw <= hi)]
            vals[filled:filled + keep.size] = keep
            filled += keep.size
        cols.append(vals)
    values = np.column_stack(cols)
    _check_support(values, specs)
    samples = tuple(ThetaSample(values=tuple(row)) for row in values.tolist())
    return SampleSet(samples=samples, provenance=TRUNCATED_GAUSSIAN, seed=seed)


def nominal_sample(specs) -> SampleSet:
    """The single sample sitting at every channel's center (the nominal system)."""
    values = tuple(float(spec.center) for spec in specs)
    return SampleSet(samples=(ThetaSample(values=values),), provenance=GRID)


def truncated_gaussian_mean(spec: UncertaintyChannelSpec, n: int = 200_001) -> float:
    """Quadrature mean of the truncated Gaussian (equals the center by symmetry).

    Kept as an independent cross-check for tests; plain midpoint rule over
    the support.
    """
    lo, hi = spec.support
    x = np.linspace(lo, hi, n)
    pdf = np.exp(-0.5 * ((x - spec.center) / spec.stddev) ** 2)
    z = np.trapezoid(pdf, x)
    return float(np.trapezoid(x * pdf, x) / z)
