"""State-overlap and entanglement measures.

Basis convention used project-wide: single qubit |e> -> (1, 0)^T and
|g> -> (0, 1)^T, so sigma_z = diag(1, -1) gives sigma_z|e> = +|e>. Two-qubit
basis order is (|ee>, |eg>, |ge>, |gg>) via kron(qubit1, qubit2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DimensionMismatch, NotPositiveSemidefinite

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

KET_E = np.array([1.0, 0.0], dtype=np.complex128)
KET_G = np.array([0.0, 1.0], dtype=np.complex128)

_SIGMA_YY = np.kron(SIGMA_Y, SIGMA_Y)


def density_matrix(psi: np.ndarray) -> np.ndarray:
    """|psi><psi| for a normalized pure state."""
    psi = linalg.as_state_vector(psi)
    return np.outer(psi, psi.conj())


def check_density_matrix(rho: np.ndarray, tol: float = linalg.TOL.state_norm) -> np.ndarray:
    """Validate Hermiticity, unit trace, and positivity; returns the matrix."""
    rho = linalg.as_complex_matrix(rho)
    if not linalg.is_hermitian(rho, tol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError(f"density matrix trace {np.trace(rho).real} is not 1")
    w = np.linalg.eigvalsh(rho)
    if w.min() < -tol:
        raise NotPositiveSemidefinite(f"density matrix eigenvalue {w.min():.3e} below -{tol}")
    return rho


def fidelity_pure(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>| for normalized pure states."""
    a = linalg.as_state_vector(a)
    b = linalg.as_state_vector(b)
    if a.size != b.size:
        raise DimensionMismatch(f"state dimensions {a.size} vs {b.size}")
    for psi in (a, b):
        if abs(np.linalg.norm(psi) - 1.0) > linalg.TOL.state_norm:
            raise ValueError("states must be normalized")
    return float(abs(np.vdot(a, b)))


@dataclass(frozen=True)
class SubsystemSplit:
    """Map from composite basis indices to (field label, two-qubit index) pairs.

    field_labels[i] and atom_indices[i] identify which field Fock label and
    which two-qubit basis slot (0..3 in (ee, eg, ge, gg) order) composite
    basis vector i carries. This covers both full tensor-product spaces and
    embedded invariant subspaces whose basis vectors are single products.
    """

    field_labels: tuple[int, ...]
    atom_indices: tuple[int, ...]

    def __post_init__(self):
        if len(self.field_labels) != len(self.atom_indices):
            raise DimensionMismatch("label arrays differ in length")
        if any(not 0 <= a < 4 for a in self.atom_indices):
            raise ValueError("atom indices must lie in 0..3")

    @property
    def dim(self) -> int:
        return len(self.field_labels)

    @classmethod
    def full_tensor(cls, n_field: int) -> "SubsystemSplit":
        """Field tensor two qubits, composite index f*4 + a."""
        labels = []
        atoms = []
        for f in range(n_field):
            for a in range(4):
                labels.append(f)
                atoms.append(a)
        return cls(field_labels=tuple(labels), atom_indices=tuple(atoms))


def partial_trace_field(psi: np.ndarray, split: SubsystemSplit) -> np.ndarray:
    """Two-atom density matrix after tracing out the field.

    rho_A[a, a'] = sum over field labels f of psi[(f, a)] conj(psi[(f, a')]).
    """
    psi = linalg.as_state_vector(psi)
    if psi.size != split.dim:
        raise DimensionMismatch(f"state dim {psi.size} vs split dim {split.dim}")
    rho = np.zeros((4, 4), dtype=np.complex128)
    labels = np.asarray(split.field_labels)
    atoms = np.asarray(split.atom_indices)
    for f in np.unique(labels):
        block = np.zeros(4, dtype=np.complex128)
        sel = labels == f
        block[atoms[sel]] = psi[sel]
        rho += np.outer(block, block.conj())
    return rho


def uhlmann_fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """Tr sqrt(sqrt(rho) target sqrt(rho)) for density matrices."""
    rho = check_density_matrix(rho)
    target = check_density_matrix(target)
    if rho.shape != target.shape:
        raise DimensionMismatch("density matrices differ in dimension")
    s = linalg.psd_sqrt(rho)
    inner = s @ target @ s
    # rounding can leave the sandwich very slightly non-Hermitian
    inner = (inner + linalg.dag(inner)) / 2.0
    return float(np.trace(linalg.psd_sqrt(inner)).real)


def spin_flipped(rho: np.ndarray) -> np.ndarray:
    """(sigma_y x sigma_y) rho^* (sigma_y x sigma_y)."""
    return _SIGMA_YY @ rho.conj() @ _SIGMA_YY


def concurrence(rho: np.ndarray) -> float:
    """Two-qubit concurrence max(0, l1 - l2 - l3 - l4).

    The l_i are the descending square roots of the eigenvalues of
    rho * rho_tilde, which coincide with the eigenvalues of
    sqrt(sqrt(rho) rho_tilde sqrt(rho)).
    """
    rho = check_density_matrix(rho)
    if rho.shape != (4, 4):
        raise DimensionMismatch("concurrence is defined for 4x4 density matrices")
    product = rho @ spin_flipped(rho)
    eigs = linalg.eig_general_4x4(product).eigenvalues
    if np.max(np.abs(eigs.imag)) > linalg.TOL.eig_imag:
        raise ValueError("eigenvalues of rho * rho_tilde have a large imaginary part")
    real = eigs.real
    if real.min() < -linalg.TOL.eig_clamp:
        raise ValueError(f"eigenvalue {real.min():.3e} of rho * rho_tilde is too negative")
    real = np.clip(real, 0.0, None)
    # |rho rho_tilde| <= 1 for density matrices, so anything at the noise
    # floor is pure rounding and would pollute the square roots
    real[real < linalg.TOL.noise_floor] = 0.0
    lam = np.sort(np.sqrt(real))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence_pure(psi: np.ndarray) -> float:
    """Closed form 2 |ad - bc| for a pure two-qubit state (a, b, c, d).

    Independent oracle for concurrence(); kept separate from the eigenvalue
    route on purpose.
    """
    psi = linalg.as_state_vector(psi)
    if psi.size != 4:
        raise DimensionMismatch("pure-state concurrence needs a 4-vector")
    return float(2.0 * abs(psi[0] * psi[3] - psi[1] * psi[2]))
