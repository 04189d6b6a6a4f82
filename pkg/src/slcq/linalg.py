"""Dense complex linear algebra for small Hilbert spaces (dim <= ~16).

Everything operates on plain complex128 ndarrays. Matrix exponentials of
Hermitian generators go through the eigendecomposition, which keeps the
result unitary to rounding and is exact for the matrix sizes used here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NonHermitianInput, NotPositiveSemidefinite


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances used throughout the package."""

    hermitian: float = 1e-10
    unitary: float = 1e-10
    psd: float = 1e-9
    state_norm: float = 1e-9
    eig_imag: float = 1e-8
    eig_clamp: float = 1e-8
    # eigenvalues this far below the dominant one are rounding noise; square
    # roots would otherwise amplify them to ~1e-8
    noise_floor: float = 1e-14
    subspace: float = 1e-12


TOL = Tolerances()


def as_complex_matrix(a) -> np.ndarray:
    """Coerce to a square complex128 matrix with finite entries."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains NaN or Inf entries")
    return m


def as_state_vector(v) -> np.ndarray:
    """Coerce to a complex128 1-d state vector with finite entries."""
    psi = np.asarray(v, dtype=np.complex128).reshape(-1)
    if psi.size == 0:
        raise DimensionMismatch("empty state vector")
    if not np.all(np.isfinite(psi)):
        raise ValueError("state vector contains NaN or Inf entries")
    return psi


def dag(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return a.conj().T


def frobenius(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def is_hermitian(a: np.ndarray, tol: float = TOL.hermitian) -> bool:
    a = np.asarray(a)
    return a.shape[0] == a.shape[1] and frobenius(a - dag(a)) <= tol


def is_unitary(a: np.ndarray, tol: float = TOL.unitary) -> bool:
    a = np.asarray(a)
    if a.shape[0] != a.shape[1]:
        return False
    return frobenius(dag(a) @ a - np.eye(a.shape[0])) <= tol


def kron(a, b) -> np.ndarray:
    """Kronecker (tensor) product of two matrices."""
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (descending for Hermitian input) and optional eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None


def eig_hermitian(h) -> Spectrum:
    """Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.

    The eigenvector columns satisfy V diag(w) V^dag = h to rounding.
    """
    h = as_complex_matrix(h)
    if not is_hermitian(h):
        raise NonHermitianInput(f"matrix deviates from Hermitian by more than {TOL.hermitian}")
    w, v = np.linalg.eigh(h)
    order = np.argsort(w)[::-1]
    return Spectrum(eigenvalues=w[order], eigenvectors=v[:, order])


def eig_general_4x4(m) -> Spectrum:
    """All eigenvalues of a general (possibly non-Hermitian) 4x4 matrix.

    Backed by LAPACK's QR iteration. Used on products like rho * rho_tilde,
    which are similar to PSD matrices, so callers may discard small
    imaginary parts.
    """
    m = as_complex_matrix(m)
    if m.shape != (4, 4):
        raise DimensionMismatch(f"expected a 4x4 matrix, got {m.shape}")
    try:
        w = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence("QR iteration failed to converge") from exc
    order = np.argsort(w.real)[::-1]
    return Spectrum(eigenvalues=w[order], eigenvectors=None)


def expm_unitary(h, dt: float) -> np.ndarray:
    """exp(-i h dt) for Hermitian h, via eigendecomposition.

    Unitary to rounding for any dt.
    """
    spec = eig_hermitian(h)
    v = spec.eigenvectors
    phases = np.exp(-1j * dt * spec.eigenvalues)
    return (v * phases) @ dag(v)


def psd_sqrt(m) -> np.ndarray:
    """Hermitian square root of a PSD matrix.

    Eigenvalues in [-psd_tol, 0) are clamped to zero; anything lower raises.
    """
    spec = eig_hermitian(m)
    w = spec.eigenvalues.real
    if np.any(w < -TOL.psd):
        raise NotPositiveSemidefinite(f"minimum eigenvalue {w.min():.3e} below -{TOL.psd}")
    w = np.clip(w, 0.0, None)
    if w.max() > 0.0:
        w[w < TOL.noise_floor * w.max()] = 0.0
    v = spec.eigenvectors
    return (v * np.sqrt(w)) @ dag(v)
