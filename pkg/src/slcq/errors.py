"""Exception types shared across the package."""


class DimensionMismatch(ValueError):
    """Operands have incompatible shapes or Hilbert-space dimensions."""


class NonHermitianInput(ValueError):
    """A matrix required to be Hermitian is not, within tolerance."""


class NotPositiveSemidefinite(ValueError):
    """A matrix required to be PSD has an eigenvalue below tolerance."""


class NoConvergence(RuntimeError):
    """An iterative eigenvalue routine did not converge."""


class UnknownWaveform(ValueError):
    """Initial-control waveform name is not recognized."""


class NonFiniteCost(RuntimeError):
    """The training cost became NaN or infinite."""


class InvalidPhotonNumber(ValueError):
    """Cavity photon number must be a non-negative integer."""


class SubspaceNotInvariant(RuntimeError):
    """The cavity Hamiltonian couples the working subspace to the rest of the Fock space."""


class ConfigError(ValueError):
    """A run configuration failed schema validation."""


class GridMismatch(ValueError):
    """A controls table does not match the configured time grid."""
