"""Lindblad generators and Markovianity.

Builds Q = -iH - (1/2) sum_a R_a^dag R_a, assembles the Liouvillian matrix
L = kron(Q, I) + kron(I, conj(Q)) + sum_a kron(R_a, conj(R_a)), exponentiates
it, tests whether a matrix is a valid generator (trace annihilation plus
conditional complete positivity), and decides Markovianity of a channel on
the principal logarithm branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .channels import (
    SuperOp,
    _superop_matrix,
    choi_matrix,
    choi_to_superop_matrix,
    conjugation,
    maximally_entangled,
    trace_vector,
    unvec,
    vec,
)
from .numerics import DEFAULT_TOL, BranchCutError, frob, require_matrix

__all__ = [
    "Lindblad",
    "LiouvillianMatrix",
    "q_from",
    "liouvillian_matrix",
    "channel_at",
    "GeneratorVerdict",
    "is_generator",
    "MarkovianVerdict",
    "markovian_test",
    "split_generator",
]


@dataclass
class Lindblad:
    """Hamiltonian plus jump operators; q = 0 encodes a purely Hamiltonian
    (or zero) generator."""

    dim: int
    hamiltonian: np.ndarray
    jumps: list = field(default_factory=list)

    def __post_init__(self):
        self.hamiltonian = require_matrix(self.hamiltonian, "H", square=True)
        if self.hamiltonian.shape[0] != self.dim:
            raise ValueError("Lindblad: H has wrong dimension")
        if frob(self.hamiltonian - self.hamiltonian.conj().T) > 1e-10 * max(
            1.0, frob(self.hamiltonian)
        ):
            raise ValueError("Lindblad: H must be Hermitian")
        self.jumps = [require_matrix(R, "jump operator", square=True) for R in self.jumps]
        for R in self.jumps:
            if R.shape[0] != self.dim:
                raise ValueError("Lindblad: jump operator has wrong dimension")

    @property
    def q(self) -> int:
        """Number of jump operators as given (no minimization is attempted)."""
        return len(self.jumps)

    def q_matrix(self) -> np.ndarray:
        return q_from(self.hamiltonian, self.jumps)

    def to_dict(self) -> dict:
        from .encoding import matrix_to_json
        return {
            "dim": self.dim,
            "H": matrix_to_json(self.hamiltonian),
            "jumps": [matrix_to_json(R) for R in self.jumps],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Lindblad":
        from .encoding import matrix_from_json
        return cls(
            dim=int(data["dim"]),
            hamiltonian=matrix_from_json(data["H"]),
            jumps=[matrix_from_json(R) for R in data.get("jumps", [])],
        )


@dataclass
class LiouvillianMatrix:
    """D^2 x D^2 matrix form of a Lindblad generator."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = require_matrix(self.matrix, "Liouvillian matrix", square=True)
        if self.matrix.shape[0] != self.dim ** 2:
            raise ValueError("LiouvillianMatrix: size != dim^2")


def q_from(h, jumps) -> np.ndarray:
    """Q = -iH - (1/2) sum_a R_a^dag R_a."""
    H = require_matrix(h, "H", square=True)
    if frob(H - H.conj().T) > 1e-10 * max(1.0, frob(H)):
        raise ValueError("q_from: H must be Hermitian")
    Q = -1j * H
    for R in jumps:
        R = require_matrix(R, "jump", square=True)
        Q = Q - 0.5 * (R.conj().T @ R)
    return Q


def liouvillian_matrix(g: Lindblad) -> LiouvillianMatrix:
    """L = kron(Q, I) + kron(I, conj(Q)) + sum_a kron(R_a, conj(R_a))."""
    D = g.dim
    Q = g.q_matrix()
    I = np.eye(D, dtype=complex)
    L = np.kron(Q, I) + np.kron(I, Q.conj())
    for R in g.jumps:
        L = L + conjugation(R)
    return LiouvillianMatrix(dim=D, matrix=L)


def _liouvillian(L) -> np.ndarray:
    if isinstance(L, LiouvillianMatrix):
        return L.matrix
    if isinstance(L, Lindblad):
        return liouvillian_matrix(L).matrix
    return require_matrix(L, "Liouvillian", square=True)


def channel_at(g, t: float) -> SuperOp:
    """expm(t L) as a superoperator; t must be nonnegative."""
    if t < 0:
        raise ValueError(f"channel_at: t must be nonnegative, got {t}")
    L = _liouvillian(g)
    return SuperOp.from_matrix(numerics.expm(t * L))


def conditional_cp_matrix(L) -> np.ndarray:
    """Choi of L compressed off the maximally entangled direction.

    For a Lindblad generator this equals the positive dissipative part
    sum_a |vec R_a><vec R_a| (projected), so positivity of this matrix plus
    trace annihilation characterizes valid generators.
    """
    M = _liouvillian(L)
    D = int(round(np.sqrt(M.shape[0])))
    C = choi_matrix(M)
    w = maximally_entangled(D)
    Pp = np.eye(D * D) - np.outer(w, w.conj())
    out = Pp @ C @ Pp
    return (out + out.conj().T) / 2


@dataclass
class GeneratorVerdict:
    ok: bool
    trace_defect: float
    hermiticity_defect: float
    min_conditional_eigenvalue: float


def is_generator(L, tol: float = DEFAULT_TOL) -> GeneratorVerdict:
    """GKLS test: Hermiticity preservation, trace annihilation, and
    positivity of the conditionally projected Choi matrix."""
    M = _liouvillian(L)
    D = int(round(np.sqrt(M.shape[0])))
    scale = max(1.0, frob(M))
    C = choi_matrix(M)
    herm = frob(C - C.conj().T)
    tr_defect = frob(trace_vector(D) @ M)
    lam_min = float(np.linalg.eigvalsh(conditional_cp_matrix(M)).min())
    ok = herm <= tol * scale and tr_defect <= tol * scale and lam_min >= -tol * scale
    return GeneratorVerdict(
        ok=bool(ok),
        trace_defect=float(tr_defect),
        hermiticity_defect=float(herm),
        min_conditional_eigenvalue=lam_min,
    )


@dataclass
class MarkovianVerdict:
    """Outcome of the principal-branch Markovianity test.

    status is 'yes' (with the recovered generator), 'no' (definitive: the
    channel is singular, or its restricted determinant is negative so no
    Hermiticity-preserving logarithm on any branch can exist), or
    'inconclusive' (branch-cut or failed generator test on the principal
    branch only; other branches are out of scope).
    """

    status: str
    generator: LiouvillianMatrix | None = None
    reason: str = ""


def markovian_test(E, tol: float = DEFAULT_TOL) -> MarkovianVerdict:
    """Decide whether a channel is of the form expm(L) for a Lindblad L."""
    M = _superop_matrix(E)
    D = int(round(np.sqrt(M.shape[0])))
    w = np.linalg.eigvals(M)
    scale = max(np.abs(w).max(), 1e-300)
    if np.abs(w).min() <= 1e-12 * scale:
        return MarkovianVerdict("no", reason="channel is singular; Markovian channels are invertible")
    det = np.linalg.det(M)
    if abs(det.imag) <= 1e-9 * max(1.0, abs(det)) and det.real < 0:
        return MarkovianVerdict(
            "no",
            reason=(
                "determinant is negative; det expm(L) = exp(tr L) > 0 for every "
                "Hermiticity-preserving L"
            ),
        )
    near_cut = np.abs(np.abs(np.angle(w)) - np.pi) < 1e-6
    if np.any(near_cut):
        return MarkovianVerdict(
            "inconclusive",
            reason=f"eigenvalue {w[near_cut][0]} is on or near the branch cut of the principal logarithm",
        )
    try:
        L = numerics.logm_principal(M)
    except BranchCutError as exc:
        return MarkovianVerdict("inconclusive", reason=str(exc))
    except ValueError as exc:
        return MarkovianVerdict("inconclusive", reason=f"principal logarithm failed: {exc}")
    verdict = is_generator(L, tol)
    if verdict.ok:
        return MarkovianVerdict("yes", generator=LiouvillianMatrix(dim=D, matrix=L))
    return MarkovianVerdict(
        "inconclusive",
        reason=(
            "principal logarithm is not a valid Lindblad generator "
            f"(min conditional eigenvalue {verdict.min_conditional_eigenvalue:.3g}); "
            "other logarithm branches are not searched"
        ),
    )


def split_generator(L, tol: float = DEFAULT_TOL) -> Lindblad:
    """Recover (H, {R_a}) from a Liouvillian matrix.

    Jump operators come from the eigendecomposition of the dissipative
    (conditionally projected) Choi block, so their number is minimal; the
    Hamiltonian is the anti-Hermitian part of the remaining drift.  The
    gauge is fixed by traceless jumps and tr H contributions dropped.
    """
    M = _liouvillian(L)
    D = int(round(np.sqrt(M.shape[0])))
    scale = max(1.0, frob(M))
    Cc = conditional_cp_matrix(M)
    lam, V = np.linalg.eigh(Cc)
    lam = lam[::-1]
    V = V[:, ::-1]
    if lam.size and lam[-1] < -tol * scale:
        raise ValueError(
            f"split_generator: not conditionally completely positive (eigenvalue {lam[-1]:.3g})"
        )
    jumps = [np.sqrt(l) * unvec(V[:, i]) for i, l in enumerate(lam) if l > tol * scale]
    I = np.eye(D, dtype=complex)
    Mdiss = np.zeros_like(M)
    for R in jumps:
        Mdiss += conjugation(R)
        S = R.conj().T @ R
        Mdiss += -0.5 * (np.kron(S, I) + np.kron(I, S.conj()))
    rem = (M - Mdiss).reshape(D, D, D, D)
    T = np.einsum("klil->ki", rem)
    trT = np.trace(T).real
    Q = (T - (trT / (2 * D)) * np.eye(D)) / D
    H = (Q - Q.conj().T) * (0.5j)
    H = (H + H.conj().T) / 2
    out = Lindblad(dim=D, hamiltonian=H, jumps=jumps)
    resid = frob(liouvillian_matrix(out).matrix - M)
    if resid > max(1e-8, 100 * tol) * scale:
        raise ValueError(f"split_generator: reconstruction residual {resid:.3g}")
    return out
