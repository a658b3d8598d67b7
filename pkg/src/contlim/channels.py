"""Quantum channels: Kraus lists, superoperator matrices, Choi matrices.

This module fixes the vectorization convention used by the whole package:

    |X>  =  sum_ij X_ij |i>|j>          (row-major),

so a map  rho -> A rho B^dag  has matrix  kron(A, conj(B)),  a channel with
Kraus operators {A_i} becomes  E = sum_i kron(A_i, conj(A_i)),  and trace
preservation is the left-fixed-vector condition  <<I| E = <<I|.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import DEFAULT_TOL, frob, require_matrix

__all__ = [
    "vec",
    "unvec",
    "trace_vector",
    "conjugation",
    "choi_matrix",
    "choi_to_superop_matrix",
    "KrausChannel",
    "SuperOp",
    "ChoiMatrix",
    "CptpVerdict",
    "kraus_to_superop",
    "superop_to_kraus",
    "is_cptp",
    "is_projector_channel",
    "compose",
    "identity_channel",
    "pinching_channel",
    "depolarizing_channel",
    "builtin",
]


def vec(X) -> np.ndarray:
    """Row-major vectorization |X> = sum X_ij |i>|j>."""
    return np.asarray(X, dtype=complex).reshape(-1)


def unvec(v) -> np.ndarray:
    """Inverse of vec for square matrices."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise ValueError(f"unvec: length {v.size} is not a perfect square")
    return v.reshape(d, d)


def trace_vector(dim: int) -> np.ndarray:
    """<<I| as a row vector: contracting it against |rho> gives tr(rho)."""
    return vec(np.eye(dim))


def conjugation(A, B=None) -> np.ndarray:
    """Matrix of rho -> A rho B^dag (B defaults to A)."""
    A = np.asarray(A, dtype=complex)
    B = A if B is None else np.asarray(B, dtype=complex)
    return np.kron(A, B.conj())


def choi_matrix(E) -> np.ndarray:
    """Choi matrix of a superoperator matrix (index reshuffle).

    C[(k,i),(l,j)] = E[(k,l),(i,j)]; the reshuffle is an involution, so the
    same routine converts back.
    """
    E = np.asarray(E, dtype=complex)
    D = int(round(np.sqrt(E.shape[0])))
    return E.reshape(D, D, D, D).transpose(0, 2, 1, 3).reshape(D * D, D * D)


# the reshuffle is its own inverse
choi_to_superop_matrix = choi_matrix

def maximally_entangled(dim: int) -> np.ndarray:
    """Unit vector (1/sqrt(D)) sum_i |ii> in the Choi index convention."""
    return vec(np.eye(dim)) / np.sqrt(dim)


@dataclass
class KrausChannel:
    """A channel given by its Kraus operators."""

    dim: int
    kraus: list

    def __post_init__(self):
        if not self.kraus:
            raise ValueError("KrausChannel: empty Kraus list")
        self.kraus = [require_matrix(A, "Kraus operator", square=True) for A in self.kraus]
        for A in self.kraus:
            if A.shape != (self.dim, self.dim):
                raise ValueError(
                    f"KrausChannel: operator shape {A.shape} != ({self.dim}, {self.dim})"
                )

    def trace_preserving_defect(self) -> float:
        S = sum(A.conj().T @ A for A in self.kraus)
        return frob(S - np.eye(self.dim))

    def to_dict(self) -> dict:
        from .encoding import matrix_to_json
        return {"dim": self.dim, "kraus": [matrix_to_json(A) for A in self.kraus]}

    @classmethod
    def from_dict(cls, data: dict) -> "KrausChannel":
        from .encoding import matrix_from_json
        return cls(dim=int(data["dim"]), kraus=[matrix_from_json(m) for m in data["kraus"]])


@dataclass
class SuperOp:
    """A superoperator as a D^2 x D^2 matrix in the vec convention above."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = require_matrix(self.matrix, "SuperOp matrix", square=True)
        if self.matrix.shape[0] != self.dim ** 2:
            raise ValueError(
                f"SuperOp: matrix size {self.matrix.shape[0]} != dim^2 = {self.dim ** 2}"
            )

    @classmethod
    def from_matrix(cls, M) -> "SuperOp":
        M = require_matrix(M, "SuperOp matrix", square=True)
        dim = int(round(np.sqrt(M.shape[0])))
        return cls(dim=dim, matrix=M)

    def apply(self, rho) -> np.ndarray:
        """Apply the map to a density-matrix-like input."""
        return unvec(self.matrix @ vec(rho))


@dataclass
class ChoiMatrix:
    """Choi matrix of a map; Hermitian iff the map preserves Hermiticity."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = require_matrix(self.matrix, "Choi matrix", square=True)

    def hermiticity_defect(self) -> float:
        return frob(self.matrix - self.matrix.conj().T)


def _superop_matrix(E) -> np.ndarray:
    """Accept a SuperOp or a bare matrix."""
    if isinstance(E, SuperOp):
        return E.matrix
    return require_matrix(E, "superoperator", square=True)


def kraus_to_superop(ch: KrausChannel) -> SuperOp:
    """E = sum_i kron(A_i, conj(A_i))."""
    M = sum(conjugation(A) for A in ch.kraus)
    return SuperOp(dim=ch.dim, matrix=M)


def superop_to_kraus(E, tol: float = DEFAULT_TOL) -> KrausChannel:
    """Kraus operators from the eigendecomposition of the Choi matrix.

    The returned list has length equal to the Kraus rank (Choi rank at
    tol), the operators are Hilbert-Schmidt orthogonal, and eigenvalues are
    taken in descending order.  Raises when the Choi matrix is not
    Hermitian or has an eigenvalue below -tol * lambda_max.
    """
    M = _superop_matrix(E)
    D = int(round(np.sqrt(M.shape[0])))
    C = choi_matrix(M)
    herm_defect = frob(C - C.conj().T)
    if herm_defect > tol * max(1.0, frob(C)):
        raise ValueError(f"superop_to_kraus: Choi matrix not Hermitian (defect {herm_defect:.3g})")
    lam, V = np.linalg.eigh((C + C.conj().T) / 2)
    lam = lam[::-1]
    V = V[:, ::-1]
    lmax = max(lam[0], 0.0)
    if lam[-1] < -tol * max(1.0, lmax):
        raise ValueError(
            f"superop_to_kraus: not completely positive (Choi eigenvalue {lam[-1]:.3g})"
        )
    ops = [np.sqrt(l) * unvec(V[:, i]) for i, l in enumerate(lam) if l > tol * max(1.0, lmax)]
    if not ops:
        ops = [np.zeros((D, D), dtype=complex)]
    return KrausChannel(dim=D, kraus=ops)


@dataclass
class CptpVerdict:
    """Separate complete-positivity and trace-preservation reports."""

    cp: bool
    tp: bool
    min_choi_eigenvalue: float
    tp_defect: float
    hermiticity_defect: float

    @property
    def ok(self) -> bool:
        return self.cp and self.tp


def is_cptp(E, tol: float = DEFAULT_TOL) -> CptpVerdict:
    """Check complete positivity (Choi PSD) and trace preservation."""
    M = _superop_matrix(E)
    D = int(round(np.sqrt(M.shape[0])))
    C = choi_matrix(M)
    herm = frob(C - C.conj().T)
    lam_min = float(np.linalg.eigvalsh((C + C.conj().T) / 2).min())
    scale = max(1.0, frob(C))
    cp = herm <= tol * scale and lam_min >= -tol * scale
    tp_defect = frob(trace_vector(D) @ M - trace_vector(D))
    tp = tp_defect <= tol * np.sqrt(D)
    return CptpVerdict(cp=cp, tp=tp, min_choi_eigenvalue=lam_min,
                       tp_defect=float(tp_defect), hermiticity_defect=float(herm))


def is_projector_channel(E, tol: float = DEFAULT_TOL) -> bool:
    """True iff E is CPTP and idempotent (E^2 = E) at tolerance tol."""
    M = _superop_matrix(E)
    idem = frob(M @ M - M) <= tol * max(1.0, frob(M))
    return bool(idem and is_cptp(M, tol).ok)


def compose(E1, E2) -> SuperOp:
    """Composition of channels: matrix product E1 @ E2."""
    M1, M2 = _superop_matrix(E1), _superop_matrix(E2)
    if M1.shape != M2.shape:
        raise ValueError(f"compose: dimension mismatch {M1.shape} vs {M2.shape}")
    return SuperOp.from_matrix(M1 @ M2)


def identity_channel(dim: int) -> KrausChannel:
    return KrausChannel(dim=dim, kraus=[np.eye(dim, dtype=complex)])


def pinching_channel(basis) -> KrausChannel:
    """rho -> sum_i |v_i><v_i| rho |v_i><v_i| for an orthonormal basis.

    `basis` is either an integer (computational basis of that dimension) or
    a unitary matrix whose columns are the basis vectors.
    """
    if np.isscalar(basis):
        B = np.eye(int(basis), dtype=complex)
    else:
        B = require_matrix(basis, "pinching basis", square=True)
        if frob(B.conj().T @ B - np.eye(B.shape[0])) > 1e-10 * B.shape[0]:
            raise ValueError("pinching_channel: basis columns are not orthonormal")
    D = B.shape[0]
    return KrausChannel(dim=D, kraus=[np.outer(B[:, i], B[:, i].conj()) for i in range(D)])


def depolarizing_channel(sigma) -> KrausChannel:
    """rho -> tr(rho) sigma for a positive definite density matrix sigma.

    Kraus operators are sqrt(lam_j) |w_j><v_i| over the eigenpairs of sigma
    and the computational basis {v_i}.
    """
    S = require_matrix(sigma, "sigma", square=True)
    D = S.shape[0]
    if frob(S - S.conj().T) > 1e-10 * max(1.0, frob(S)):
        raise ValueError("depolarizing_channel: sigma must be Hermitian")
    lam, W = np.linalg.eigh((S + S.conj().T) / 2)
    if lam.min() <= 0:
        raise ValueError("depolarizing_channel: sigma must be positive definite")
    if abs(np.trace(S).real - 1.0) > 1e-9:
        raise ValueError("depolarizing_channel: sigma must have unit trace")
    ops = []
    for j in range(D):
        for i in range(D):
            e = np.zeros(D, dtype=complex)
            e[i] = 1.0
            ops.append(np.sqrt(lam[j]) * np.outer(W[:, j], e.conj()))
    return KrausChannel(dim=D, kraus=ops)


def builtin(kind: str, *, dim: int = 2, basis=None, sigma=None) -> KrausChannel:
    """Named channel constructors: 'identity', 'pinching', 'depolarize'."""
    if kind == "identity":
        return identity_channel(dim)
    if kind == "pinching":
        return pinching_channel(basis if basis is not None else dim)
    if kind == "depolarize":
        if sigma is None:
            sigma = np.eye(dim, dtype=complex) / dim
        return depolarizing_channel(sigma)
    raise ValueError(f"builtin: unknown channel kind {kind!r}")


def pauli_basis_matrix() -> np.ndarray:
    """Columns vec(I), vec(sx), vec(sy), vec(sz), each normalized by 1/sqrt(2).

    Conjugating a qubit superoperator matrix with this unitary expresses it
    in the Pauli operator basis.
    """
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    cols = [vec(np.eye(2)) / np.sqrt(2), vec(sx) / np.sqrt(2),
            vec(sy) / np.sqrt(2), vec(sz) / np.sqrt(2)]
    return np.array(cols).T
