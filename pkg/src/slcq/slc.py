"""Sampling-based learning control: train on a sampled augmented system,
then test the learned pulses on fresh uncertainty draws.

The training cost is the sample mean of squared target overlaps. Updates
follow the analytic gradient density with a constant learning rate,
projected onto the control bounds by saturation. Training stops when the
cost changes by less than epsilon across a patience window, or at the
iteration cap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine, linalg, metrics
from .dynamics import ControlField, HamiltonianModel, clip_to_bounds
from .errors import DimensionMismatch, NonFiniteCost
from .metrics import SubsystemSplit
from .uncertainty import SampleSet, ThetaSample


@dataclass(frozen=True)
class TargetSpec:
    """Pure target in the propagation space, with optional two-atom reduction.

    For plain state transfer the vector is the target itself. For the
    cavity system the two-atom target is lifted to the invariant subspace
    (both lifted basis vectors share one field label, so the squared
    overlap with the lifted vector equals the squared Uhlmann fidelity of
    the reduced state; construction enforces that identity).
    """

    vector: np.ndarray
    atom_state: np.ndarray | None = None
    split: SubsystemSplit | None = None

    def __post_init__(self):
        vec = linalg.as_state_vector(self.vector).copy()
        if abs(np.linalg.norm(vec) - 1.0) > linalg.TOL.state_norm:
            raise ValueError("target vector must be normalized")
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)
        if (self.atom_state is None) != (self.split is None):
            raise ValueError("lifted targets need both the atom state and the split")
        if self.atom_state is not None:
            atom = linalg.as_state_vector(self.atom_state).copy()
            if atom.size != 4:
                raise DimensionMismatch("two-atom target must be a 4-vector")
            atom.flags.writeable = False
            object.__setattr__(self, "atom_state", atom)
            reduced = metrics.partial_trace_field(vec, self.split)
            fid = metrics.uhlmann_fidelity(reduced, metrics.density_matrix(atom))
            if abs(fid - 1.0) > 1e-10:
                raise ValueError("lifted vector does not reduce to the two-atom target")

    @classmethod
    def pure(cls, vector) -> "TargetSpec":
        return cls(vector=np.asarray(vector, dtype=np.complex128))

    @classmethod
    def lifted_subsystem_pure(cls, vector, atom_state, split: SubsystemSplit) -> "TargetSpec":
        return cls(vector=np.asarray(vector, dtype=np.complex128),
                   atom_state=np.asarray(atom_state, dtype=np.complex128), split=split)

    @property
    def two_qubit(self) -> bool:
        """Whether final states have a two-qubit reduction to score."""
        return self.split is not None or self.vector.size == 4

    def reduced_state(self, psi: np.ndarray) -> np.ndarray | None:
        """4x4 two-qubit density matrix of a final state, if one exists."""
        if self.split is not None:
            return metrics.partial_trace_field(psi, self.split)
        if self.vector.size == 4:
            return metrics.density_matrix(psi)
        return None


@dataclass(frozen=True)
class AugmentedSystem:
    """Training setup: model, sampled parameters, initial state, target."""

    model: HamiltonianModel
    samples: SampleSet
    psi0: np.ndarray
    target: TargetSpec

    def __post_init__(self):
        if len(self.samples) < 1:
            raise ValueError("need at least one training sample")
        psi0 = linalg.as_state_vector(self.psi0).copy()
        if psi0.size != self.model.dim:
            raise DimensionMismatch("initial state dimension does not match the model")
        if abs(np.linalg.norm(psi0) - 1.0) > linalg.TOL.state_norm:
            raise ValueError("initial state must be normalized")
        psi0.flags.writeable = False
        object.__setattr__(self, "psi0", psi0)
        if self.target.vector.size != self.model.dim:
            raise DimensionMismatch("target dimension does not match the model")
        if self.samples.as_array().shape[1] != self.model.n_theta_classes:
            raise DimensionMismatch("sample set width does not match the model's parameter classes")


@dataclass(frozen=True)
class TrainConfig:
    eta: float
    epsilon: float = 1e-4
    patience: int = 100
    max_iter: int = 20000
    bounds_mode: str = "clip"

    def __post_init__(self):
        if self.eta <= 0 or self.epsilon <= 0 or self.patience < 1 or self.max_iter < 0:
            raise ValueError("invalid training configuration")
        if self.bounds_mode not in ("clip", "none"):
            raise ValueError("bounds_mode must be 'clip' or 'none'")


@dataclass(frozen=True)
class TrainRecord:
    j_history: np.ndarray          # J_N at iterate k = 0..iterations
    eta_history: np.ndarray        # learning rate used for update k
    final_controls: ControlField
    iterations: int
    terminated_by: str             # "patience" | "max_iter"
    step_halvings: int = 0

    @property
    def final_cost(self) -> float:
        return float(self.j_history[-1])


@dataclass(frozen=True)
class TestReport:
    fidelities: np.ndarray
    concurrences: np.ndarray | None
    mean_fidelity: float
    min_fidelity: float
    max_fidelity: float
    std_fidelity: float
    mean_concurrence: float | None
    min_concurrence: float | None
    histogram_counts: np.ndarray
    histogram_edges: np.ndarray
    seed: int | None


def performance(aug: AugmentedSystem, u: ControlField) -> float:
    """Mean squared target overlap over the training samples."""
    sys = engine.compile_system(aug.model, u.grid, aug.psi0, aug.target.vector)
    res = engine.evaluate_batch(sys, aug.samples.as_array(), u.values)
    return float(np.mean(res.costs))


def sample_gradient(model: HamiltonianModel, theta: ThetaSample, u: ControlField,
                    psi0: np.ndarray, target: TargetSpec,
                    method: str = "exact") -> np.ndarray:
    """Gradient density of one sample's squared overlap: shape (M, W).

    Entry (m, w) approximates d J / d u_m(t) at the midpoint of interval w;
    the derivative with respect to the discrete value u_m[w] is entry * dt.
    """
    sys = engine.compile_system(model, u.grid, psi0, target.vector)
    thetas = model.theta_values(theta)[None, :]
    res = engine.evaluate_batch(sys, thetas, u.values, want_gradient=True, method=method)
    return res.gradient[:, :, 0]


def augmented_gradient(aug: AugmentedSystem, u: ControlField, method: str = "exact") -> np.ndarray:
    """Sample mean of the per-sample gradient densities, in fixed sample order."""
    sys = engine.compile_system(aug.model, u.grid, aug.psi0, aug.target.vector)
    res = engine.evaluate_batch(sys, aug.samples.as_array(), u.values,
                                want_gradient=True, method=method)
    return res.gradient.mean(axis=2)


def train(aug: AugmentedSystem, u0: ControlField, cfg: TrainConfig,
          method: str = "exact", threads: int | None = None,
          progress=None) -> TrainRecord:
    """Projected gradient ascent on the augmented cost.

    Iterates u <- clip(u + eta * delta) with delta the mean gradient
    density. If the cost ever drops by more than 0.1 in one iteration the
    learning rate is halved (recorded in the result) and the run continues.
    progress, when given, is called as progress(iteration, cost).
    """
    if u0.n_controls != aug.model.n_controls:
        raise DimensionMismatch("control count does not match the model")
    sys = engine.compile_system(aug.model, u0.grid, aug.psi0, aug.target.vector)
    bounds = u0.bounds if cfg.bounds_mode == "clip" else None
    eta = cfg.eta
    halvings = 0
    u = np.array(u0.values, copy=True)
    j_hist: list[float] = []
    eta_hist: list[float] = []
    with engine.SampleEvaluator(sys, aug.samples.as_array(), threads=threads) as ev:
        k = 0
        while True:
            res = ev.evaluate(u, want_gradient=True, method=method)
            cost = float(np.mean(res.costs))
            if not np.isfinite(cost):
                raise NonFiniteCost(f"cost became non-finite at iteration {k}")
            if cost > 1.0 + 1e-9 or cost < -1e-12:
                raise NonFiniteCost(f"cost {cost} escaped [0, 1] at iteration {k}")
            if j_hist and cost < j_hist[-1] - 0.1:
                eta *= 0.5
                halvings += 1
            j_hist.append(cost)
            if progress is not None:
                progress(k, cost)
            if k >= cfg.patience and abs(j_hist[k] - j_hist[k - cfg.patience]) < cfg.epsilon:
                terminated = "patience"
                break
            if k >= cfg.max_iter:
                terminated = "max_iter"
                break
            delta = res.gradient.mean(axis=2)
            u = clip_to_bounds(u + eta * delta, bounds)
            if bounds is not None:
                for m, b in enumerate(bounds):
                    if b is not None:
                        assert u[m].min() >= b[0] and u[m].max() <= b[1]
            eta_hist.append(eta)
            k += 1
    final = ControlField(grid=u0.grid, values=u, bounds=bounds)
    return TrainRecord(
        j_history=np.asarray(j_hist),
        eta_history=np.asarray(eta_hist),
        final_controls=final,
        iterations=k,
        terminated_by=terminated,
        step_halvings=halvings,
    )


def test(model: HamiltonianModel, u: ControlField, test_samples: SampleSet,
         psi0: np.ndarray, target: TargetSpec, histogram_bins: int = 50,
         threads: int | None = None) -> TestReport:
    """Score the learned control on fresh samples.

    Per-sample fidelity is |<target|psi(T)>| in the propagation space; the
    concurrence of the final (reduced) two-qubit state is added when the
    target has one.
    """
    sys = engine.compile_system(model, u.grid, psi0, target.vector)
    thetas = test_samples.as_array()
    with engine.SampleEvaluator(sys, thetas, threads=threads) as ev:
        res = ev.evaluate(u.values)
    fidelities = np.abs(res.overlaps)
    concurrences = None
    if target.two_qubit:
        values = np.empty(len(test_samples))
        for i, psi in enumerate(res.final_states):
            values[i] = metrics.concurrence(target.reduced_state(psi))
        concurrences = values
    if fidelities.max() - fidelities.min() < 1e-12:
        lo = fidelities.min() - 5e-4
        hi = fidelities.max() + 5e-4
    else:
        lo, hi = fidelities.min(), fidelities.max()
    counts, edges = np.histogram(fidelities, bins=histogram_bins, range=(lo, hi))
    return TestReport(
        fidelities=fidelities,
        concurrences=concurrences,
        mean_fidelity=float(fidelities.mean()),
        min_fidelity=float(fidelities.min()),
        max_fidelity=float(fidelities.max()),
        std_fidelity=float(fidelities.std()),
        mean_concurrence=None if concurrences is None else float(concurrences.mean()),
        min_concurrence=None if concurrences is None else float(concurrences.min()),
        histogram_counts=counts,
        histogram_edges=edges,
        seed=test_samples.seed,
    )
