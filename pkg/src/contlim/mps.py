"""Translationally invariant MPS tensors and their transfer matrices.

Provides the dense small-N state (the brute-force oracle), discrete
expectation values by transfer-matrix contraction, and the continuum-limit
verdict, which delegates to the divisibility pipeline on the transfer
matrix.  Physical indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import SuperOp, conjugation, unvec, vec
from .divisibility import DivisibilityVerdict, is_infinitely_divisible
from .numerics import DEFAULT_TOL, frob, require_matrix

__all__ = [
    "MpsTensor",
    "transfer_matrix",
    "tp_normalized",
    "dense_state",
    "discrete_two_point",
    "has_continuum_limit",
    "preset",
    "PRESET_NAMES",
]

DENSE_STATE_GUARD = 10 ** 7


@dataclass
class MpsTensor:
    """Site tensor {A_i} of a translationally invariant MPS.

    d physical matrices of size D x D plus the lattice spacing the family
    is defined over.
    """

    d: int
    D: int
    matrices: list
    spacing: float = 1.0

    def __post_init__(self):
        if self.d < 1 or self.D < 1:
            raise ValueError("MpsTensor: d and D must be at least 1")
        if len(self.matrices) != self.d:
            raise ValueError("MpsTensor: expected d matrices")
        self.matrices = [require_matrix(A, "A_i", square=True) for A in self.matrices]
        for A in self.matrices:
            if A.shape != (self.D, self.D):
                raise ValueError("MpsTensor: matrices must be D x D")
        if not self.spacing > 0:
            raise ValueError("MpsTensor: spacing must be positive")

    def to_dict(self) -> dict:
        from .encoding import matrix_to_json
        return {
            "d": self.d,
            "D": self.D,
            "a": self.spacing,
            "matrices": [matrix_to_json(A) for A in self.matrices],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MpsTensor":
        from .encoding import matrix_from_json
        return cls(
            d=int(data["d"]),
            D=int(data["D"]),
            matrices=[matrix_from_json(A) for A in data["matrices"]],
            spacing=float(data.get("a", 1.0)),
        )


def transfer_matrix(t: MpsTensor) -> SuperOp:
    """E = sum_i kron(A_i, conj(A_i))."""
    M = sum(conjugation(A) for A in t.matrices)
    return SuperOp(dim=t.D, matrix=M)


def tp_normalized(t: MpsTensor) -> MpsTensor:
    """Rescale the tensor so its transfer matrix is trace preserving.

    Uses the dominant left fixed point sigma of E: A_i are replaced by
    X A_i X^{-1} / sqrt(lambda) with X = sigma^{1/2}.  Never applied
    silently anywhere in the package.  Requires the dominant left fixed
    point to be positive definite.
    """
    E = transfer_matrix(t).matrix
    w, VL = np.linalg.eig(E.conj().T)
    k = int(np.argmax(np.abs(w)))
    lam = w[k].real if abs(w[k].imag) < 1e-10 * abs(w[k]) else None
    if lam is None or lam <= 0:
        raise ValueError("tp_normalized: dominant transfer eigenvalue is not real positive")
    sigma = unvec(VL[:, k].conj())
    sigma = (sigma + sigma.conj().T) / 2
    if np.trace(sigma).real < 0:
        sigma = -sigma
    evals, evecs = np.linalg.eigh(sigma)
    if evals.min() <= 1e-12 * max(1.0, evals.max()):
        raise ValueError("tp_normalized: dominant left fixed point is not positive definite")
    X = (evecs * np.sqrt(evals)) @ evecs.conj().T
    Xinv = (evecs / np.sqrt(evals)) @ evecs.conj().T
    mats = [X @ A @ Xinv / np.sqrt(lam) for A in t.matrices]
    return MpsTensor(d=t.d, D=t.D, matrices=mats, spacing=t.spacing)


def _site_products(mats: np.ndarray, n: int) -> np.ndarray:
    """All n-fold ordered products, shape (d^n, D, D), leftmost site most
    significant."""
    if n == 1:
        return mats
    h = n // 2
    left = _site_products(mats, h)
    right = _site_products(mats, n - h)
    d1, D, _ = left.shape
    out = np.einsum("iab,jbc->ijac", left, right)
    return out.reshape(d1 * right.shape[0], D, D)


def dense_state(t: MpsTensor, N: int) -> np.ndarray:
    """Coefficient vector of the N-site state, unnormalized.

    Entry at index (i_1 ... i_N) in base d is tr(A_{i_1} ... A_{i_N}).
    Guarded to d^N <= 10^7 entries.
    """
    if N < 1:
        raise ValueError("dense_state: N must be at least 1")
    if t.d ** N > DENSE_STATE_GUARD:
        raise ValueError(f"dense_state: d^N = {t.d ** N} exceeds the guard {DENSE_STATE_GUARD}")
    mats = np.stack(t.matrices)
    if N == 1:
        return np.einsum("iaa->i", mats)
    h = N // 2
    left = _site_products(mats, h)
    right = _site_products(mats, N - h)
    out = np.einsum("iab,jba->ij", left, right)
    return out.reshape(-1)


def _operator_transfer(t: MpsTensor, O: np.ndarray) -> np.ndarray:
    """Transfer matrix with a single-site operator insertion:
    sum_{i,i'} O_{i',i} kron(A_i, conj(A_{i'}))."""
    M = np.zeros((t.D ** 2, t.D ** 2), dtype=complex)
    for ip in range(t.d):
        for i in range(t.d):
            if O[ip, i] != 0:
                M += O[ip, i] * np.kron(t.matrices[i], t.matrices[ip].conj())
    return M


def discrete_two_point(t: MpsTensor, N: int, op1, site1: int, op2, site2: int) -> complex:
    """<V_N| O1(site1) O2(site2) |V_N> / <V_N|V_N> on the N-site ring.

    Evaluated by transfer-matrix contraction with operator insertions;
    coincident sites insert the operator product O1 O2.
    """
    O1 = require_matrix(op1, "op1", square=True)
    O2 = require_matrix(op2, "op2", square=True)
    if O1.shape[0] != t.d or O2.shape[0] != t.d:
        raise ValueError("discrete_two_point: operators must be d x d")
    for s in (site1, site2):
        if not 0 <= s < N:
            raise ValueError(f"discrete_two_point: site {s} out of range [0, {N})")
    E = transfer_matrix(t).matrix
    chain = [E] * N
    if site1 == site2:
        chain[site1] = _operator_transfer(t, O1 @ O2)
    else:
        chain[site1] = _operator_transfer(t, O1)
        chain[site2] = _operator_transfer(t, O2)
    num = np.eye(t.D ** 2, dtype=complex)
    for M in chain:
        num = num @ M
    den = np.trace(np.linalg.matrix_power(E, N))
    if abs(den) < 1e-300:
        raise ValueError("discrete_two_point: state has zero norm")
    return complex(np.trace(num) / den)


def has_continuum_limit(t: MpsTensor, tol: float = DEFAULT_TOL) -> DivisibilityVerdict:
    """Continuum-limit verdict: divisibility of the transfer matrix at the
    tensor's lattice spacing."""
    return is_infinitely_divisible(transfer_matrix(t), a=t.spacing, tol=tol)


PRESET_NAMES = ("ferro", "antiferro", "depolarizing", "bracket", "aklt", "identity")


def preset(name: str, gamma: float = 1.0, spacing: float = 1.0) -> MpsTensor:
    """Named fixtures.

    ferro: |0..0> + |1..1>;  antiferro: |0101..> + |1010..>;
    depolarizing: the four (1/sqrt 2)|i><j| matrices; bracket: the
    matched-bracket state at decay gamma (p = (1+e^{-2 gamma})/2 on the
    ferro component); aklt: the spin-1 AKLT tensor; identity: d = 1 with
    A = I (Markovian identity transfer).
    """
    z = np.zeros((2, 2), dtype=complex)
    ket = lambda i, j: np.array(
        [[1 if (r, c) == (i, j) else 0 for c in range(2)] for r in range(2)], dtype=complex
    )
    if name == "ferro":
        return MpsTensor(d=2, D=2, matrices=[ket(0, 0), ket(1, 1)], spacing=spacing)
    if name == "antiferro":
        return MpsTensor(d=2, D=2, matrices=[ket(0, 1), ket(1, 0)], spacing=spacing)
    if name == "depolarizing":
        s = 1 / np.sqrt(2)
        return MpsTensor(
            d=4, D=2,
            matrices=[s * ket(0, 0), s * ket(0, 1), s * ket(1, 0), s * ket(1, 1)],
            spacing=spacing,
        )
    if name == "bracket":
        p = (1 + np.exp(-2 * gamma)) / 2
        q = (1 - np.exp(-2 * gamma)) / 2
        return MpsTensor(
            d=4, D=2,
            matrices=[
                np.sqrt(p) * ket(0, 0), np.sqrt(p) * ket(1, 1),
                np.sqrt(q) * ket(0, 1), np.sqrt(q) * ket(1, 0),
            ],
            spacing=spacing,
        )
    if name == "aklt":
        sz = np.array([[1, 0], [0, -1]], dtype=complex)
        return MpsTensor(
            d=3, D=2,
            matrices=[
                sz / np.sqrt(3),
                np.sqrt(2 / 3) * ket(1, 0),
                -np.sqrt(2 / 3) * ket(0, 1),
            ],
            spacing=spacing,
        )
    if name == "identity":
        return MpsTensor(d=1, D=2, matrices=[np.eye(2, dtype=complex)], spacing=spacing)
    raise ValueError(f"preset: unknown name {name!r}; choose from {PRESET_NAMES}")
