"""Uncertain controlled Hamiltonians and piecewise-constant propagation.

A model is a sum of drift terms and control terms. Every term carries a
Hermitian matrix, a multiplicative uncertainty form, and the index of the
uncertainty parameter it reads (terms sharing an index are tied). The
controls are held constant on each of the W equal subintervals of [0, T];
time-dependent quantities are evaluated at interval midpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import DimensionMismatch, NonHermitianInput, UnknownWaveform
from .uncertainty import ThetaSample

IDENTITY = "identity"
CONSTANT_SCALE = "constant_scale"
COSINE_MODULATED = "cosine_modulated"


@dataclass(frozen=True)
class TimeGrid:
    """W equal subintervals of [0, duration]; dt is always derived as T/W."""

    duration: float
    intervals: int

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")
        if self.intervals < 1:
            raise ValueError("need at least one interval")

    @property
    def dt(self) -> float:
        return self.duration / self.intervals

    def edges(self) -> np.ndarray:
        return np.arange(self.intervals + 1) * (self.duration / self.intervals)

    def midpoints(self) -> np.ndarray:
        return (np.arange(self.intervals) + 0.5) * (self.duration / self.intervals)


@dataclass(frozen=True)
class UncertaintyForm:
    """Multiplicative factor f(theta, t) on one Hamiltonian term.

    identity:         f = 1 (theta unused)
    constant_scale:   f = theta
    cosine_modulated: f = 1 - theta cos(t)
    """

    kind: str

    def __post_init__(self):
        if self.kind not in (IDENTITY, CONSTANT_SCALE, COSINE_MODULATED):
            raise ValueError(f"unknown uncertainty form {self.kind!r}")

    @property
    def time_dependent(self) -> bool:
        return self.kind == COSINE_MODULATED

    def factor(self, theta: float, t: float) -> float:
        if self.kind == IDENTITY:
            return 1.0
        if self.kind == CONSTANT_SCALE:
            return float(theta)
        return 1.0 - float(theta) * float(np.cos(t))

    def factor_array(self, theta: np.ndarray, t: np.ndarray) -> np.ndarray:
        """Factors on the (t, theta) product grid, shape (len(t), len(theta))."""
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if self.kind == IDENTITY:
            return np.ones((t.size, theta.size))
        if self.kind == CONSTANT_SCALE:
            return np.broadcast_to(theta[None, :], (t.size, theta.size)).copy()
        return 1.0 - np.cos(t)[:, None] * theta[None, :]


IDENTITY_FORM = UncertaintyForm(IDENTITY)
CONSTANT_SCALE_FORM = UncertaintyForm(CONSTANT_SCALE)
COSINE_MODULATED_FORM = UncertaintyForm(COSINE_MODULATED)


def clip_to_bounds(values: np.ndarray, bounds) -> np.ndarray:
    """Saturate each control row at its bounds; rows with bounds None pass through."""
    out = np.array(values, dtype=np.float64, copy=True)
    if bounds is not None:
        for m, b in enumerate(bounds):
            if b is not None:
                np.clip(out[m], b[0], b[1], out=out[m])
    return out


@dataclass(frozen=True)
class ControlField:
    """Piecewise-constant controls on a time grid.

    values has shape (M, W). bounds, when present, is one (lo, hi) pair or
    None per control; construction rejects out-of-bounds values.
    """

    grid: TimeGrid
    values: np.ndarray
    bounds: tuple | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 2:
            raise DimensionMismatch("control values must be a 2-d (controls x intervals) array")
        if v.shape[1] != self.grid.intervals:
            raise DimensionMismatch(
                f"{v.shape[1]} control intervals vs grid with {self.grid.intervals}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("control values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if self.bounds is not None:
            bounds = tuple(None if b is None else (float(b[0]), float(b[1])) for b in self.bounds)
            if len(bounds) != v.shape[0]:
                raise DimensionMismatch("need one bounds entry per control")
            for m, b in enumerate(bounds):
                if b is None:
                    continue
                lo, hi = b
                if lo > hi:
                    raise ValueError(f"bounds for control {m} are inverted")
                if v[m].min() < lo or v[m].max() > hi:
                    raise ValueError(f"control {m} violates its bounds [{lo}, {hi}]")
            object.__setattr__(self, "bounds", bounds)

    @property
    def n_controls(self) -> int:
        return self.values.shape[0]

    @property
    def n_intervals(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray, clip: bool = True) -> "ControlField":
        """Same grid and bounds, new values (clipped into bounds by default)."""
        v = clip_to_bounds(values, self.bounds) if clip else values
        return ControlField(grid=self.grid, values=v, bounds=self.bounds)


@dataclass(frozen=True)
class HamiltonianTerm:
    """One Hermitian term, its uncertainty form, and the parameter index it reads.

    theta_class is None exactly when the form is the identity; tied channels
    share an index.
    """

    matrix: np.ndarray
    form: UncertaintyForm = IDENTITY_FORM
    theta_class: int | None = None

    def __post_init__(self):
        m = linalg.as_complex_matrix(self.matrix).copy()
        if not linalg.is_hermitian(m):
            raise NonHermitianInput("Hamiltonian term is not Hermitian")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)
        if self.form.kind == IDENTITY:
            if self.theta_class is not None:
                raise ValueError("identity forms take no uncertainty parameter")
        elif self.theta_class is None:
            raise ValueError(f"form {self.form.kind!r} needs a theta_class index")


@dataclass(frozen=True)
class HamiltonianModel:
    """H(theta, t) = sum_d f_d(theta_d, t) H_d + sum_m f_m(theta_m, t) u_m(t) H_m."""

    dim: int
    drift_terms: tuple[HamiltonianTerm, ...] = ()
    control_terms: tuple[HamiltonianTerm, ...] = ()
    n_theta_classes: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "drift_terms", tuple(self.drift_terms))
        object.__setattr__(self, "control_terms", tuple(self.control_terms))
        for term in (*self.drift_terms, *self.control_terms):
            if term.matrix.shape != (self.dim, self.dim):
                raise DimensionMismatch("term dimension does not match the model")
            if term.theta_class is not None and not 0 <= term.theta_class < self.n_theta_classes:
                raise ValueError("theta_class index out of range")

    @property
    def n_controls(self) -> int:
        return len(self.control_terms)

    def theta_values(self, theta: ThetaSample) -> np.ndarray:
        vals = np.asarray(theta.values, dtype=np.float64)
        if vals.size != self.n_theta_classes:
            raise DimensionMismatch(
                f"sample has {vals.size} parameters, model has {self.n_theta_classes} classes"
            )
        return vals


def term_factor(term: HamiltonianTerm, theta_vals: np.ndarray, t: float) -> float:
    theta = 0.0 if term.theta_class is None else float(theta_vals[term.theta_class])
    return term.form.factor(theta, t)


def hamiltonian_at(model: HamiltonianModel, theta: ThetaSample, u: ControlField, w: int) -> np.ndarray:
    """The Hermitian generator on interval w, evaluated at the interval midpoint."""
    if not 0 <= w < u.n_intervals:
        raise DimensionMismatch(f"interval index {w} outside [0, {u.n_intervals})")
    if u.n_controls != model.n_controls:
        raise DimensionMismatch(f"{u.n_controls} controls vs model with {model.n_controls}")
    theta_vals = model.theta_values(theta)
    t_mid = float(u.grid.midpoints()[w])
    h = np.zeros((model.dim, model.dim), dtype=np.complex128)
    for term in model.drift_terms:
        h += term_factor(term, theta_vals, t_mid) * term.matrix
    for m, term in enumerate(model.control_terms):
        h += term_factor(term, theta_vals, t_mid) * u.values[m, w] * term.matrix
    return h


@dataclass(frozen=True)
class Trajectory:
    """Propagators U(t_w) and states psi(t_w) on the grid edges, w = 0..W."""

    grid: TimeGrid
    propagators: tuple[np.ndarray, ...]
    states: tuple[np.ndarray, ...]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_propagator(self) -> np.ndarray:
        return self.propagators[-1]


def propagate(model: HamiltonianModel, theta: ThetaSample, u: ControlField,
              psi0: np.ndarray) -> Trajectory:
    """Evolve psi0 across the control grid with one exponential per interval.

    This is the plain reference propagator; the training loop uses the
    vectorized engine, which is cross-checked against this in the tests.
    """
    psi0 = linalg.as_state_vector(psi0)
    if psi0.size != model.dim:
        raise DimensionMismatch("initial state dimension does not match the model")
    nrm = np.linalg.norm(psi0)
    if abs(nrm - 1.0) > linalg.TOL.state_norm:
        raise ValueError(f"initial state norm {nrm} is not 1")
    dt = u.grid.dt
    unitary = np.eye(model.dim, dtype=np.complex128)
    propagators = [unitary]
    states = [psi0]
    for w in range(u.n_intervals):
        step = linalg.expm_unitary(hamiltonian_at(model, theta, u, w), dt)
        unitary = step @ unitary
        propagators.append(unitary)
        states.append(unitary @ psi0)
    return Trajectory(grid=u.grid, propagators=tuple(propagators), states=tuple(states))


WAVEFORMS = ("sin", "constant")


@dataclass(frozen=True)
class WaveformSpec:
    """amplitude * sin(t) + offset, or a constant offset."""

    name: str
    amplitude: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.name not in WAVEFORMS:
            raise UnknownWaveform(f"unknown waveform {self.name!r}; known: {WAVEFORMS}")

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        if self.name == "constant":
            return np.full_like(np.asarray(t, dtype=np.float64), self.offset)
        return self.amplitude * np.sin(np.asarray(t, dtype=np.float64)) + self.offset


def sample_initial_control(shape_fn: str, grid: TimeGrid, amplitude: float = 1.0,
                           offset: float = 0.0, bounds=None) -> ControlField:
    """Single-control field sampled from a named waveform at interval midpoints."""
    wave = WaveformSpec(name=shape_fn, amplitude=amplitude, offset=offset)
    values = wave.evaluate(grid.midpoints())[None, :]
    return ControlField(grid=grid, values=clip_to_bounds(values, bounds), bounds=bounds)


def initial_controls(waves, grid: TimeGrid, bounds=None) -> ControlField:
    """Stack one waveform per control into a single field, clipping into bounds."""
    rows = [WaveformSpec(name=w.name, amplitude=w.amplitude, offset=w.offset).evaluate(grid.midpoints())
            for w in waves]
    values = clip_to_bounds(np.vstack(rows), bounds)
    return ControlField(grid=grid, values=values, bounds=bounds)
