"""Sampling-based learning control for quantum systems with Hamiltonian uncertainty."""

__version__ = "0.1.0"

from .dynamics import (
    ControlField,
    HamiltonianModel,
    HamiltonianTerm,
    TimeGrid,
    Trajectory,
    UncertaintyForm,
    WaveformSpec,
    hamiltonian_at,
    initial_controls,
    propagate,
    sample_initial_control,
)
from .metrics import SubsystemSplit, concurrence, fidelity_pure, partial_trace_field, uhlmann_fidelity
from .slc import (
    AugmentedSystem,
    TargetSpec,
    TestReport,
    TrainConfig,
    TrainRecord,
    augmented_gradient,
    performance,
    sample_gradient,
    test,
    train,
)
from .uncertainty import (
    SampleSet,
    ThetaSample,
    UncertaintyChannelSpec,
    grid_samples,
    nominal_sample,
    random_uniform_samples,
    truncated_gaussian_samples,
)

__all__ = [
    "AugmentedSystem",
    "ControlField",
    "HamiltonianModel",
    "HamiltonianTerm",
    "SampleSet",
    "SubsystemSplit",
    "TargetSpec",
    "TestReport",
    "ThetaSample",
    "TimeGrid",
    "TrainConfig",
    "TrainRecord",
    "Trajectory",
    "UncertaintyChannelSpec",
    "UncertaintyForm",
    "WaveformSpec",
    "augmented_gradient",
    "concurrence",
    "fidelity_pure",
    "grid_samples",
    "hamiltonian_at",
    "initial_controls",
    "nominal_sample",
    "partial_trace_field",
    "performance",
    "propagate",
    "random_uniform_samples",
    "sample_gradient",
    "sample_initial_control",
    "test",
    "train",
    "truncated_gaussian_samples",
    "uhlmann_fidelity",
]
