"""Projector quantum channels: canonical block form and limits.

A projector channel acts, in a suitable basis, as a direct sum of blocks
C^{D_k} (x) C^{m_k}: the identity on the D_k factor and trace-against-sigma_k
replacement on the m_k factor, possibly padded by a d0-dimensional subspace
on which all fixed points vanish.  This module builds the channel from that
block data, extracts the block data back from the channel, and constructs a
Lindblad generator whose semigroup converges to the channel at large times.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .channels import SuperOp, _superop_matrix, conjugation, is_projector_channel, unvec, vec
from .lindblad import Lindblad, LiouvillianMatrix, channel_at, liouvillian_matrix
from .numerics import DEFAULT_TOL, frob, require_matrix

log = logging.getLogger("contlim.projectors")

__all__ = [
    "ProjectorBlock",
    "ProjectorCanonicalForm",
    "build_projector",
    "canonical_form",
    "thermo_liouvillian",
    "ThermoConvergenceReport",
    "verify_thermo_limit",
]

CLUSTER_GAP = 1e-7


@dataclass
class ProjectorBlock:
    Dk: int
    mk: int
    sigma: np.ndarray  # positive definite, unit trace, mk x mk

    def __post_init__(self):
        self.sigma = require_matrix(self.sigma, "sigma", square=True)
        if self.sigma.shape[0] != self.mk:
            raise ValueError("ProjectorBlock: sigma has wrong dimension")
        if frob(self.sigma - self.sigma.conj().T) > 1e-9 * max(1.0, frob(self.sigma)):
            raise ValueError("ProjectorBlock: sigma must be Hermitian")
        lam = np.linalg.eigvalsh((self.sigma + self.sigma.conj().T) / 2)
        if lam.min() <= 0:
            raise ValueError("ProjectorBlock: sigma must be positive definite")
        if abs(np.trace(self.sigma).real - 1.0) > 1e-9:
            raise ValueError("ProjectorBlock: sigma must have unit trace")


@dataclass
class ProjectorCanonicalForm:
    """Block data (U, d0, {(D_k, m_k, sigma_k)}) of a projector channel.

    The columns of the unitary U list first a d0-dimensional subspace
    carrying no fixed points, then each block's D_k*m_k columns in order
    (D_k-major within a block).
    """

    dim: int
    basis_change: np.ndarray
    d0: int
    blocks: list

    def __post_init__(self):
        self.basis_change = require_matrix(self.basis_change, "U", square=True)
        U = self.basis_change
        if U.shape[0] != self.dim:
            raise ValueError("ProjectorCanonicalForm: U has wrong dimension")
        if frob(U.conj().T @ U - np.eye(self.dim)) > 1e-10 * self.dim:
            raise ValueError("ProjectorCanonicalForm: U is not unitary")
        self.blocks = [
            b if isinstance(b, ProjectorBlock) else ProjectorBlock(*b) for b in self.blocks
        ]
        total = self.d0 + sum(b.Dk * b.mk for b in self.blocks)
        if total != self.dim:
            raise ValueError(
                f"ProjectorCanonicalForm: d0 + sum Dk*mk = {total} != dim = {self.dim}"
            )

    def block_isometry(self, k: int) -> np.ndarray:
        """Columns of U spanning block k (after the d0 columns)."""
        off = self.d0
        for i, b in enumerate(self.blocks):
            size = b.Dk * b.mk
            if i == k:
                return self.basis_change[:, off:off + size]
            off += size
        raise IndexError(k)

    def to_dict(self) -> dict:
        from .encoding import matrix_to_json
        return {
            "dim": self.dim,
            "U": matrix_to_json(self.basis_change),
            "d0": self.d0,
            "blocks": [
                {"Dk": b.Dk, "mk": b.mk, "sigma": matrix_to_json(b.sigma)}
                for b in self.blocks
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProjectorCanonicalForm":
        from .encoding import matrix_from_json
        return cls(
            dim=int(data["dim"]),
            basis_change=matrix_from_json(data["U"]),
            d0=int(data["d0"]),
            blocks=[
                ProjectorBlock(int(b["Dk"]), int(b["mk"]), matrix_from_json(b["sigma"]))
                for b in data["blocks"]
            ],
        )


def build_projector(cf: ProjectorCanonicalForm) -> SuperOp:
    """Superoperator acting blockwise as (identity (x) trace-replacement).

    Built directly as a linear map from Kraus operators
    W_k (I_{D_k} (x) sqrt(lam_j) |w_j><g|) W_k^dag over the eigenpairs of
    sigma_k.  With d0 = 0 the result is trace preserving; a nonzero d0
    block is annihilated (the map is then only trace non-increasing).
    """
    D = cf.dim
    P = np.zeros((D * D, D * D), dtype=complex)
    for k, b in enumerate(cf.blocks):
        W = cf.block_isometry(k)
        lam, V = np.linalg.eigh((b.sigma + b.sigma.conj().T) / 2)
        for j in range(b.mk):
            if lam[j] <= 0:
                continue
            for g in range(b.mk):
                unit = np.zeros(b.mk, dtype=complex)
                unit[g] = 1.0
                K = np.kron(np.eye(b.Dk), np.sqrt(lam[j]) * np.outer(V[:, j], unit.conj()))
                B = W @ K @ W.conj().T
                P += conjugation(B)
    return SuperOp(dim=D, matrix=P)


def _hermitize(X):
    return (X + X.conj().T) / 2


def _cluster(values: np.ndarray, gap: float = CLUSTER_GAP) -> list:
    """Group sorted real values into clusters separated by more than gap."""
    groups = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[i - 1] > gap:
            groups.append([])
        groups[-1].append(i)
    return groups


def _random_hermitian_combo(rng, mats) -> np.ndarray:
    out = np.zeros_like(mats[0])
    for M in mats:
        out += rng.normal() * _hermitize(M) + rng.normal() * ((M - M.conj().T) / 2j)
    return out


def _factor_block(Nblk, b, rng):
    """Split C^b as C^Dk (x) C^mk given a basis of the block algebra.

    The algebra is a full matrix factor acting as (x (x) I_mk); a generic
    Hermitian element has Dk eigenvalue clusters of size mk, and a generic
    algebra element provides the partial isometries aligning the
    multiplicity bases of the clusters.
    """
    stack = np.array([vec(M) for M in Nblk]).T
    u, sv, _ = np.linalg.svd(stack, full_matrices=False)
    dimA = int(np.sum(sv > 1e-10 * max(1.0, sv[0])))
    Dk = int(round(np.sqrt(dimA)))
    if Dk * Dk != dimA or b % Dk != 0:
        raise ValueError(f"block algebra dimension {dimA} is not a perfect square fitting {b}")
    mk = b // Dk
    if Dk == 1:
        return np.eye(b, dtype=complex), Dk, mk
    basis = [unvec(u[:, i]) for i in range(dimA)]
    for attempt in range(8):
        X = _random_hermitian_combo(rng, basis)
        lx, vx = np.linalg.eigh(X)
        groups = _cluster(lx)
        if len(groups) != Dk or any(len(g) != mk for g in groups):
            continue
        Qs = [vx[:, g] for g in groups]
        g_el = sum((rng.normal() + 1j * rng.normal()) * B for B in basis)
        cols = [Qs[0]]
        ok = True
        for i in range(1, Dk):
            M = Qs[i].conj().T @ g_el @ Qs[0]
            uu, ss, vv = np.linalg.svd(M)
            if ss.min() <= 1e-8 * max(1.0, ss.max()):
                ok = False
                break
            cols.append(Qs[i] @ (uu @ vv))
        if ok:
            return np.hstack(cols), Dk, mk
    raise ValueError("failed to split block into tensor factors")


def canonical_form(P, tol: float = DEFAULT_TOL, seed: int = 0) -> ProjectorCanonicalForm:
    """Recover (U, d0, {(D_k, m_k, sigma_k)}) from a projector channel.

    Algorithm: the fixed-point space F of P is computed from its
    eigenvalue-1 eigenspace; rho* = P(I/D) is positive definite exactly on
    the complement of the d0 subspace; on that support, F * rho*^{-1} is a
    multi-factor *-algebra whose center separates the blocks, and each
    factor is split into (identity) x (multiplicity) tensor factors by a
    randomized eigenbasis construction (seeded, retried deterministically).
    sigma_k is read off from P applied to the block identity.  The result
    is verified by rebuilding the channel; blocks are ordered by
    (D_k, m_k, spectrum of sigma_k).
    """
    M = _superop_matrix(P)
    D = int(round(np.sqrt(M.shape[0])))
    if not is_projector_channel(M, max(tol, 1e-8)):
        raise ValueError("canonical_form: input is not a projector quantum channel")
    rng = np.random.default_rng(seed)

    fixed = numerics.null_space(M - np.eye(D * D), tol=1e-9, scale=1.0)
    if fixed.dim == 0:
        raise ValueError("canonical_form: channel has no fixed points")

    rho = _hermitize(unvec(M @ vec(np.eye(D, dtype=complex) / D)))
    lam, V = np.linalg.eigh(rho)
    keep = lam > tol * max(1.0, lam.max())
    s = int(np.sum(keep))
    d0 = D - s
    W = V[:, ~keep], V[:, keep]
    kerW, supW = W

    rho_s = _hermitize(supW.conj().T @ rho @ supW)
    rinv = np.linalg.inv(rho_s)
    alg = [supW.conj().T @ unvec(fixed.vectors[:, j]) @ supW @ rinv for j in range(fixed.dim)]
    stack = np.array([vec(A) for A in alg]).T
    u, sv, _ = np.linalg.svd(stack, full_matrices=False)
    r = int(np.sum(sv > 1e-10 * max(1.0, sv[0])))
    Nbasis = [unvec(u[:, i]) for i in range(r)]

    # center of the algebra: solutions of [Z, N_j] = 0 within the algebra
    rows = [
        np.array([vec(Nbasis[i] @ Nbasis[j] - Nbasis[j] @ Nbasis[i]) for i in range(r)]).T
        for j in range(r)
    ]
    K = np.vstack(rows)
    center = numerics.null_space(K, tol=1e-9, scale=1.0)
    n = center.dim
    if n == 0:
        raise ValueError("canonical_form: could not locate the block structure (empty center)")

    central = [sum(center.vectors[i, j] * Nbasis[i] for i in range(r)) for j in range(n)]
    blocks = []
    isometries = []
    for attempt in range(8):
        Zr = _random_hermitian_combo(rng, central)
        lz, vz = np.linalg.eigh(Zr)
        groups = _cluster(lz)
        if len(groups) == n:
            break
    else:
        raise ValueError("canonical_form: central element failed to separate blocks")

    for grp in groups:
        Q = vz[:, grp]
        b = Q.shape[1]
        Nblk = [Q.conj().T @ N @ Q for N in Nbasis]
        Ublk, Dk, mk = _factor_block(Nblk, b, rng)
        Qfull = Q @ Ublk
        glob = supW @ Qfull  # D x (Dk*mk), columns ordered (i, mu)
        pi_k = glob @ glob.conj().T
        img = _hermitize(unvec(M @ vec(pi_k)))
        Sk = (glob.conj().T @ img @ glob).reshape(Dk, mk, Dk, mk)
        sigma = _hermitize(sum(Sk[i, :, i, :] for i in range(Dk)))
        sigma = sigma / np.trace(sigma).real
        blocks.append(ProjectorBlock(Dk, mk, sigma))
        isometries.append(glob)

    order = sorted(
        range(len(blocks)),
        key=lambda i: (
            blocks[i].Dk,
            blocks[i].mk,
            tuple(np.round(np.linalg.eigvalsh(blocks[i].sigma), 8)),
        ),
    )
    U = np.hstack([kerW] + [isometries[i] for i in order])
    cf = ProjectorCanonicalForm(dim=D, basis_change=U, d0=d0,
                                blocks=[blocks[i] for i in order])
    resid = frob(build_projector(cf).matrix - M)
    if resid > max(1e-8, 10 * tol) * max(1.0, frob(M)):
        raise ValueError(
            f"canonical_form: rebuilt channel deviates by {resid:.3g}; the input is not "
            "of the separable block form this extraction covers"
        )
    return cf


def thermo_liouvillian(cf: ProjectorCanonicalForm) -> Lindblad:
    """Lindblad generator whose semigroup converges to the projector.

    H = 0; each block with m_k >= 2 contributes a ladder pair
    R_1 = sum_i theta_i |v_i><v_{i+1}|, R_2 = sum_i theta_{i+1} |v_{i+1}><v_i|
    (theta_i the square roots of the sigma_k eigenvalues, descending, in the
    sigma_k eigenbasis), embedded into the block; blocks with m_k = 1 carry
    no ladder and instead contribute the block projector itself as a jump,
    which pins the block and suppresses cross-block coherences.
    """
    if cf.d0 != 0:
        raise ValueError(
            "thermo_liouvillian: unsupported d0 != 0 (the construction covers the "
            "trace-preserving block form only)"
        )
    D = cf.dim
    jumps = []
    for k, b in enumerate(cf.blocks):
        W = cf.block_isometry(k)
        if b.mk == 1:
            jumps.append(W @ W.conj().T)
            continue
        lam, V = np.linalg.eigh(_hermitize(b.sigma))
        lam = lam[::-1]
        V = V[:, ::-1]
        theta = np.sqrt(lam)
        R1 = sum(
            theta[i] * np.outer(V[:, i], V[:, i + 1].conj()) for i in range(b.mk - 1)
        )
        R2 = sum(
            theta[i + 1] * np.outer(V[:, i + 1], V[:, i].conj()) for i in range(b.mk - 1)
        )
        jumps.append(W @ np.kron(np.eye(b.Dk), R1) @ W.conj().T)
        jumps.append(W @ np.kron(np.eye(b.Dk), R2) @ W.conj().T)
    return Lindblad(dim=D, hamiltonian=np.zeros((D, D), dtype=complex), jumps=jumps)


@dataclass
class ThermoConvergenceReport:
    t_grid: list
    distances: list
    passed: bool
    tol: float

    def rows(self):
        return list(zip(self.t_grid, self.distances))


def verify_thermo_limit(P, g: Lindblad, t_grid, tol: float = 1e-8) -> ThermoConvergenceReport:
    """Tabulate d(t) = ||expm(t L) - P||_F over an increasing t grid.

    Passes iff d(t_max) <= tol and d is non-increasing over the last three
    grid points (small slack for rounding).
    """
    t_grid = [float(t) for t in t_grid]
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise ValueError("verify_thermo_limit: t_grid must be strictly increasing")
    M = _superop_matrix(P)
    dist = [frob(channel_at(g, t).matrix - M) for t in t_grid]
    tail = dist[-3:]
    monotone = all(b <= a + 1e-12 for a, b in zip(tail, tail[1:]))
    passed = bool(dist[-1] <= tol and monotone)
    return ThermoConvergenceReport(t_grid=t_grid, distances=dist, passed=passed, tol=tol)
