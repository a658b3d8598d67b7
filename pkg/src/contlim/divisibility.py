"""Infinite divisibility of quantum channels.

A channel E is infinitely divisible exactly when E = P expm(a L) for a
projector quantum channel P and a Lindblad generator L with P L = P L P.
The projector is forced (it projects onto ran E along ker E, since expm(L)
is invertible); the generator is determined only on the range of P, and the
completion on the kernel is free.  This module extracts P, recovers the
pinned part of L from the principal logarithm, and searches the completion
freedom for a valid generator: first the cheap completion (identity on
ker P), then a Douglas-Rachford projection onto the intersection of the
affine set {generator candidates with the pinned P L} with the cone of
conditionally completely positive maps.  When the search fails the verdict
is inconclusive, never a false negative: only the principal logarithm
branch is examined.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .channels import (
    SuperOp,
    _superop_matrix,
    choi_matrix,
    choi_to_superop_matrix,
    is_cptp,
    is_projector_channel,
    maximally_entangled,
    trace_vector,
    unvec,
    vec,
)
from .lindblad import LiouvillianMatrix, conditional_cp_matrix, is_generator, markovian_test
from .numerics import DEFAULT_TOL, BranchCutError, frob

log = logging.getLogger("contlim.divisibility")

__all__ = [
    "DivisibilityVerdict",
    "CoarseDivisibility",
    "extract_projector",
    "GeneratorExtraction",
    "extract_generator",
    "check_plp",
    "is_infinitely_divisible",
    "coarse_divisibility",
]


@dataclass
class DivisibilityVerdict:
    """Decision record for E = P expm(a L).

    status: 'divisible' | 'markovian' | 'not_divisible' | 'inconclusive'.
    When divisible, projector and generator satisfy the reconstruction,
    idempotency and P L = P L P identities at the stated tolerance; when
    markovian the projector is the identity.
    """

    status: str
    spacing: float
    projector: np.ndarray | None = None
    generator: np.ndarray | None = None
    diagnostics: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status in ("divisible", "markovian")

    def to_dict(self) -> dict:
        from .encoding import matrix_to_json
        return {
            "status": self.status,
            "spacing": self.spacing,
            "projector": None if self.projector is None else matrix_to_json(self.projector),
            "generator": None if self.generator is None else matrix_to_json(self.generator),
            "diagnostics": list(self.diagnostics),
        }


@dataclass
class CoarseDivisibility:
    p: int
    generator: np.ndarray  # log of E^p (unnormalized by p or spacing)


def extract_projector(E, tol: float = DEFAULT_TOL) -> SuperOp:
    """Oblique projector onto ran(E) along ker(E).

    For an invertible channel this is the identity.  The caller validates
    the result as a projector quantum channel; complementarity failure
    (defective E) raises, which the pipeline reports as not divisible.
    """
    M = _superop_matrix(E)
    rng_basis = numerics.range_space(M, tol=tol)
    ker_basis = numerics.null_space(M, tol=tol)
    return SuperOp.from_matrix(numerics.oblique_projector(rng_basis, ker_basis))


def check_plp(P, L, tol: float = DEFAULT_TOL) -> bool:
    """||P L - P L P||_F <= tol * max(1, ||P L||_F)."""
    Pm = _superop_matrix(P)
    Lm = L.matrix if isinstance(L, LiouvillianMatrix) else np.asarray(L, dtype=complex)
    PL = Pm @ Lm
    return bool(frob(PL - PL @ Pm) <= tol * max(1.0, frob(PL)))


def _principal_log(M):
    """Principal log, or (None, reason) when the branch is obstructed."""
    w = np.linalg.eigvals(M)
    scale = max(np.abs(w).max(), 1e-300)
    if np.abs(w).min() <= 1e-12 * scale:
        return None, "matrix is singular"
    near_cut = np.abs(np.abs(np.angle(w)) - np.pi) < 1e-6
    if np.any(near_cut):
        return None, f"eigenvalue {w[near_cut][0]} on or near the negative real axis"
    try:
        return numerics.logm_principal(M), ""
    except (BranchCutError, ValueError) as exc:
        return None, str(exc)


class _CompletionSearch:
    """Douglas-Rachford search for a Lindblad completion.

    Works in Choi coordinates over the real space of Hermitian matrices.
    The affine set pins P L (hence the action on ran P and the zero block
    above the diagonal) and trace annihilation; the cone demands positivity
    of the Choi matrix compressed off the maximally entangled direction.
    The iteration is deterministic; its fixed point, projected onto the
    affine set, is a valid generator whenever the intersection is nonempty
    and the iteration budget suffices.
    """

    def __init__(self, P: np.ndarray, L_pinned: np.ndarray, dim: int):
        n = dim * dim
        self.n = n
        self.basis = self._hermitian_basis(n)
        tvec = trace_vector(dim).reshape(1, -1)
        target = P @ L_pinned
        cols = []
        for B in self.basis:
            LB = choi_to_superop_matrix(B)
            z = np.concatenate([(P @ LB).reshape(-1), (tvec @ LB).reshape(-1)])
            cols.append(np.concatenate([z.real, z.imag]))
        T = np.array(cols).T
        z0 = np.concatenate([target.reshape(-1), np.zeros(n, dtype=complex)])
        b = np.concatenate([z0.real, z0.imag])
        Tp = np.linalg.pinv(T, rcond=1e-12)
        self._affine_mat = np.eye(n * n) - Tp @ T
        self._affine_off = Tp @ b
        w = maximally_entangled(dim)
        self._perp = np.eye(n) - np.outer(w, w.conj())
        self._bstack = np.array(self.basis)

    @staticmethod
    def _hermitian_basis(n):
        mats = []
        for i in range(n):
            E = np.zeros((n, n), dtype=complex)
            E[i, i] = 1
            mats.append(E)
        for i in range(n):
            for j in range(i + 1, n):
                E = np.zeros((n, n), dtype=complex)
                E[i, j] = E[j, i] = 1 / np.sqrt(2)
                mats.append(E)
                E = np.zeros((n, n), dtype=complex)
                E[i, j] = -1j / np.sqrt(2)
                E[j, i] = 1j / np.sqrt(2)
                mats.append(E)
        return mats

    def _coords(self, C):
        return np.real(np.einsum("bij,ij->b", self._bstack.conj(), C))

    def _mat(self, x):
        return np.einsum("b,bij->ij", x, self._bstack)

    def _proj_affine(self, C):
        return self._mat(self._affine_mat @ self._coords(C) + self._affine_off)

    def _proj_cone(self, C):
        B = self._perp @ C @ self._perp
        B = (B + B.conj().T) / 2
        lam, V = np.linalg.eigh(B)
        Bp = (V * np.clip(lam, 0, None)) @ V.conj().T
        return C - B + Bp

    def run(self, C_init, max_iter: int = 5000, step_tol: float = 1e-12):
        Z = (C_init + C_init.conj().T) / 2
        scale = max(1.0, frob(Z))
        for _ in range(max_iter):
            X = self._proj_affine(Z)
            Y = self._proj_cone(2 * X - Z)
            Z_next = Z + Y - X
            delta = frob(Z_next - Z)
            Z = Z_next
            if delta < step_tol * scale:
                break
        X = self._proj_affine(Z)
        infeasibility = frob(self._proj_cone(X) - X)
        if infeasibility < 1e-8 * scale:
            return choi_to_superop_matrix(X)
        return None


@dataclass
class GeneratorExtraction:
    generator: np.ndarray | None
    reason: str = ""
    method: str = ""

    @property
    def ok(self) -> bool:
        return self.generator is not None


def extract_generator(E, P, a: float, tol: float = DEFAULT_TOL) -> GeneratorExtraction:
    """Candidate Lindblad L with E = P expm(a L) and P L = P L P.

    Forms the completion G = E + (I - P), which satisfies P G = E and acts
    as the identity on ker P, and takes L = logm(G) / a.  When that L fails
    the generator test, the completion freedom below the range of P is
    searched with the Douglas-Rachford projection; structural failures
    (P E != E) raise, branch obstructions and a failed search return an
    inconclusive record.
    """
    if a <= 0:
        raise ValueError("extract_generator: spacing a must be positive")
    Em = _superop_matrix(E)
    Pm = _superop_matrix(P)
    D2 = Em.shape[0]
    dim = int(round(np.sqrt(D2)))
    scale = max(1.0, frob(Em))
    if frob(Pm @ Em - Em) > max(1e-8, tol) * scale:
        raise ValueError("extract_generator: structural failure, P E != E")
    G = Em + np.eye(D2) - Pm
    det = np.linalg.det(G)
    if abs(det.imag) <= 1e-9 * max(1.0, abs(det)) and det.real < 0:
        return GeneratorExtraction(
            None,
            reason=(
                "restricted determinant of E is negative; no Hermiticity-preserving "
                "logarithm exists on any branch"
            ),
            method="determinant",
        )
    LG, why = _principal_log(G)
    if LG is None:
        return GeneratorExtraction(None, reason=f"principal logarithm obstructed: {why}",
                                   method="log")
    L = LG / a
    if is_generator(L, max(tol, 1e-7)).ok:
        return GeneratorExtraction(L, method="identity-completion")
    log.debug("cheap completion rejected; entering completion search")
    search = _CompletionSearch(Pm, L, dim)
    Lfix = search.run(choi_matrix(L))
    if Lfix is not None and is_generator(Lfix, max(tol, 1e-7)).ok:
        return GeneratorExtraction(Lfix, method="completion-search")
    return GeneratorExtraction(
        None,
        reason=(
            "no valid Lindblad completion found on the principal branch; an "
            "alternative logarithm branch might still succeed"
        ),
        method="completion-search",
    )


def is_infinitely_divisible(E, a: float = 1.0, tol: float = DEFAULT_TOL) -> DivisibilityVerdict:
    """Full divisibility pipeline: P extraction, validation, L extraction.

    Invertible channels take the Markovian route (P = I).  A negative
    verdict is returned only on definitive obstructions (defective
    range/kernel pair, extracted projector not a channel, singular or
    negative-determinant restrictions); branch-cut limitations surface as
    inconclusive.
    """
    Em = _superop_matrix(E)
    D2 = Em.shape[0]
    verdict_cptp = is_cptp(Em, max(tol, 1e-8))
    if not verdict_cptp.ok:
        raise ValueError(
            f"is_infinitely_divisible: input is not CPTP (cp={verdict_cptp.cp}, "
            f"tp={verdict_cptp.tp})"
        )
    ker = numerics.null_space(Em, tol=tol)
    if ker.dim == 0:
        mk = markovian_test(Em, tol)
        if mk.status == "yes":
            L = mk.generator.matrix / a
            return DivisibilityVerdict(
                status="markovian", spacing=a, projector=np.eye(D2), generator=L,
                diagnostics=["invertible channel with a valid principal-branch generator"],
            )
        if mk.status == "no":
            return DivisibilityVerdict(
                status="not_divisible", spacing=a,
                diagnostics=[f"invertible channel is not Markovian: {mk.reason}"],
            )
        return DivisibilityVerdict(status="inconclusive", spacing=a, diagnostics=[mk.reason])
    try:
        P = extract_projector(Em, tol=tol)
    except ValueError as exc:
        return DivisibilityVerdict(
            status="not_divisible", spacing=a,
            diagnostics=[f"range and kernel of E are not complementary: {exc}"],
        )
    if not is_projector_channel(P.matrix, max(tol, 1e-8)):
        return DivisibilityVerdict(
            status="not_divisible", spacing=a, projector=P.matrix,
            diagnostics=["projector onto ran E along ker E is not a projector quantum channel"],
        )
    try:
        ext = extract_generator(Em, P.matrix, a, tol)
    except ValueError as exc:
        return DivisibilityVerdict(
            status="not_divisible", spacing=a, projector=P.matrix, diagnostics=[str(exc)]
        )
    if not ext.ok:
        if ext.method == "determinant":
            return DivisibilityVerdict(
                status="not_divisible", spacing=a, projector=P.matrix,
                diagnostics=[ext.reason],
            )
        return DivisibilityVerdict(
            status="inconclusive", spacing=a, projector=P.matrix, diagnostics=[ext.reason]
        )
    L = ext.generator
    recon = frob(P.matrix @ numerics.expm(a * L) - Em)
    idem = frob(P.matrix @ P.matrix - P.matrix)
    plp = check_plp(P.matrix, L, max(tol, 1e-7))
    if recon > max(1e-7, tol) * max(1.0, frob(Em)) or idem > max(1e-9, tol) or not plp:
        return DivisibilityVerdict(
            status="inconclusive", spacing=a, projector=P.matrix, generator=L,
            diagnostics=[
                f"re-verification failed (reconstruction {recon:.3g}, idempotency {idem:.3g}, "
                f"PLP {plp}) via {ext.method}"
            ],
        )
    return DivisibilityVerdict(
        status="divisible", spacing=a, projector=P.matrix, generator=L,
        diagnostics=[f"generator obtained via {ext.method}"],
    )


def coarse_divisibility(E, p_max: int = 8, tol: float = DEFAULT_TOL) -> CoarseDivisibility | None:
    """Smallest p in [2, p_max] with E^p Markovian, with the generator of E^p."""
    if p_max < 2:
        raise ValueError("coarse_divisibility: p_max must be at least 2")
    Em = _superop_matrix(E)
    power = Em.copy()
    for p in range(2, p_max + 1):
        power = power @ Em
        mk = markovian_test(power, tol)
        if mk.status == "yes":
            return CoarseDivisibility(p=p, generator=mk.generator.matrix)
    return None
