"""Dense complex linear-algebra kernel.

Matrix exponential/logarithm, SVD-based subspace extraction and oblique
projectors, at the small dimensions (D <= ~32) this package targets.
Everything here is pure and operates on plain complex ndarrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

__all__ = [
    "BranchCutError",
    "SubspaceBasis",
    "require_matrix",
    "expm",
    "logm_principal",
    "null_space",
    "oblique_projector",
    "frob",
]

DEFAULT_TOL = 1e-9

# expm overflow guard: exp of a matrix with 1-norm beyond this is rejected
# (double precision overflows near exp(709); keep a margin).
EXPM_NORM_BOUND = 600.0

# eigenvector-matrix condition number beyond which a matrix is treated as
# defective and logm falls back to inverse scaling-and-squaring
DIAGONALIZABLE_COND = 1e8


class BranchCutError(ValueError):
    """Principal logarithm does not exist: spectrum touches the branch cut."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


def frob(M) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(np.asarray(M)))


def require_matrix(M, name: str = "matrix", square: bool = False) -> np.ndarray:
    """Validate and coerce to a finite complex 2-d array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        raise ValueError(f"{name}: expected a 2-d array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name}: entries must be finite (no NaN/Inf)")
    if square and A.shape[0] != A.shape[1]:
        raise ValueError(f"{name}: expected a square matrix, got shape {A.shape}")
    return A


@dataclass
class SubspaceBasis:
    """Orthonormal basis of a subspace of C^n, stored as matrix columns."""

    dim_ambient: int
    vectors: np.ndarray  # (dim_ambient, k) with orthonormal columns
    tol_used: float = 0.0

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=complex)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != self.dim_ambient:
            raise ValueError("basis vectors must be columns of ambient length")
        k = self.vectors.shape[1]
        if k:
            gram = self.vectors.conj().T @ self.vectors
            if np.linalg.norm(gram - np.eye(k)) > 1e-10 * max(1, k):
                raise ValueError("basis columns are not orthonormal")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def expm(M, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a Pade core.

    tol is the acceptable backward error on well-conditioned inputs; the
    underlying core achieves machine-level accuracy, so any tol in
    (0, 1e-6] is honoured.
    """
    A = require_matrix(M, "expm input", square=True)
    if not (0 < tol <= 1e-6):
        raise ValueError(f"expm: tol must lie in (0, 1e-6], got {tol}")
    if np.linalg.norm(A, 1) > EXPM_NORM_BOUND:
        raise ValueError(
            f"expm: 1-norm {np.linalg.norm(A, 1):.3g} exceeds the overflow "
            f"bound {EXPM_NORM_BOUND}"
        )
    out = sla.expm(A)
    if not np.all(np.isfinite(out)):
        raise ValueError("expm: overflow in result")
    return out


def logm_principal(M) -> np.ndarray:
    """Principal matrix logarithm.

    Uses an eigendecomposition when the matrix is diagonalizable to working
    precision (eigenvector condition number <= 1e8) and inverse
    scaling-and-squaring otherwise.  Raises on singular input or when an
    eigenvalue lies on the closed negative real axis.
    """
    A = require_matrix(M, "logm input", square=True)
    w, V = np.linalg.eig(A)
    scale = max(np.abs(w).max(), 1e-300)
    if np.abs(w).min() <= 1e-13 * scale:
        raise ValueError(f"logm: matrix is singular (|lambda|_min = {np.abs(w).min():.3g})")
    on_cut = np.abs(np.angle(w) - np.pi) < 1e-9
    on_cut |= np.abs(np.angle(w) + np.pi) < 1e-9
    if np.any(on_cut):
        bad = w[on_cut][0]
        raise BranchCutError(
            f"logm: eigenvalue {bad} lies on the negative real axis", eigenvalue=bad
        )
    if np.linalg.cond(V) <= DIAGONALIZABLE_COND:
        L = (V * np.log(w)) @ np.linalg.inv(V)
    else:
        L = sla.logm(A)
    if not np.all(np.isfinite(L)):
        raise ValueError("logm: non-finite result")
    err = frob(expm(L) - A) / max(1.0, frob(A))
    if err > 1e-8:
        raise ValueError(f"logm: round-trip residual {err:.3g} exceeds 1e-8")
    return L


def null_space(M, tol: float = DEFAULT_TOL, scale: float | None = None) -> SubspaceBasis:
    """Orthonormal basis of the numerical null space of M.

    Right singular vectors whose singular value is <= tol * sigma_max are
    returned.  `scale`, when given, acts as an absolute floor on the
    reference (threshold tol * max(sigma_max, scale)); pass the natural
    norm of the problem when M itself may be numerically zero.
    """
    A = require_matrix(M, "null_space input")
    _, s, Vh = np.linalg.svd(A)
    smax = s[0] if s.size else 0.0
    ref = max(smax, scale) if scale is not None else smax
    cut = tol * ref
    rank = int(np.sum(s > cut))
    basis = Vh[rank:, :].conj().T
    return SubspaceBasis(A.shape[1], basis, tol_used=tol)


def range_space(M, tol: float = DEFAULT_TOL) -> SubspaceBasis:
    """Orthonormal basis of the numerical column space of M."""
    A = require_matrix(M, "range_space input")
    U, s, _ = np.linalg.svd(A)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax))
    return SubspaceBasis(A.shape[0], U[:, :rank], tol_used=tol)


def oblique_projector(range_basis: SubspaceBasis, kernel_basis: SubspaceBasis,
                      cond_threshold: float = 1e10) -> np.ndarray:
    """Projector onto span(range_basis) along span(kernel_basis).

    The two subspaces must be complementary; near-degeneracy is detected via
    the condition number of the stacked basis.
    """
    if range_basis.dim_ambient != kernel_basis.dim_ambient:
        raise ValueError("ambient dimensions differ")
    n = range_basis.dim_ambient
    r = range_basis.dim
    if r + kernel_basis.dim != n:
        raise ValueError(
            f"defective: no oblique projector (dim {r} + {kernel_basis.dim} != {n})"
        )
    B = np.hstack([range_basis.vectors, kernel_basis.vectors])
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    if np.linalg.cond(B) > cond_threshold:
        raise ValueError("defective: no oblique projector (subspaces are not complementary)")
    sel = np.zeros((n, n), dtype=complex)
    sel[:r, :r] = np.eye(r)
    return B @ sel @ np.linalg.inv(B)
