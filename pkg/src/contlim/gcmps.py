"""The generalised continuum ansatz built from a divisible MPS.

A state is specified by K boundary operators {B_i} (Kraus operators of the
projector part of the transfer matrix), each tagged by an orthonormal
ancilla vector, together with a drift Q derived from (H, {R_a}) and one
particle species per jump operator.  Segment transfer matrices, norms,
densities and two-point functions are evaluated in closed matrix form;
finite-particle truncations on a grid stand in for the continuum state
itself.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .channels import SuperOp, conjugation, superop_to_kraus
from .divisibility import is_infinitely_divisible
from .lindblad import Lindblad, liouvillian_matrix, q_from, split_generator
from .mps import MpsTensor, transfer_matrix
from .numerics import DEFAULT_TOL, frob, require_matrix

__all__ = [
    "Segment",
    "GeneralizedCmps",
    "TruncatedState",
    "from_mps",
    "transfer",
    "norm_squared",
    "correlation",
    "density",
    "truncated_state",
    "density_rows",
    "correlation_rows",
]

MAX_PARTICLES_GUARD = 4


@dataclass
class Segment:
    x: float
    y: float

    def __post_init__(self):
        if not self.x < self.y:
            raise ValueError(f"Segment: need x < y, got [{self.x}, {self.y}]")

    @property
    def length(self) -> float:
        return self.y - self.x


@dataclass
class GeneralizedCmps:
    """Boundary Kraus operators, drift data and particle statistics.

    statistics[a] is +1 for a bosonic and -1 for a fermionic species; the
    pair sign eta(a, b) is -1 exactly when both species are fermionic.
    """

    ancilla_dim: int
    boundary: list
    hamiltonian: np.ndarray
    jumps: list = field(default_factory=list)
    statistics: list = field(default_factory=list)

    def __post_init__(self):
        if self.ancilla_dim != len(self.boundary) or not self.boundary:
            raise ValueError("GeneralizedCmps: ancilla_dim must equal the boundary count")
        self.boundary = [require_matrix(B, "boundary operator", square=True) for B in self.boundary]
        D = self.boundary[0].shape[0]
        self.hamiltonian = require_matrix(self.hamiltonian, "H", square=True)
        self.jumps = [require_matrix(R, "jump", square=True) for R in self.jumps]
        for M in self.boundary + self.jumps + [self.hamiltonian]:
            if M.shape != (D, D):
                raise ValueError("GeneralizedCmps: inconsistent dimensions")
        if not self.statistics:
            self.statistics = [1] * len(self.jumps)
        if len(self.statistics) != len(self.jumps):
            raise ValueError("GeneralizedCmps: one statistics sign per jump required")
        if any(s not in (1, -1) for s in self.statistics):
            raise ValueError("GeneralizedCmps: statistics signs must be +1 or -1")
        P = self.projector()
        if frob(P @ P - P) > 1e-8 * max(1.0, frob(P)):
            raise ValueError("GeneralizedCmps: boundary operators do not sum to a projector")

    @property
    def dim(self) -> int:
        return self.boundary[0].shape[0]

    @property
    def q(self) -> int:
        return len(self.jumps)

    def projector(self) -> np.ndarray:
        return sum(conjugation(B) for B in self.boundary)

    def q_matrix(self) -> np.ndarray:
        return q_from(self.hamiltonian, self.jumps)

    def eta(self, a: int, b: int) -> int:
        return -1 if (self.statistics[a] == -1 and self.statistics[b] == -1) else 1

    def liouvillian(self) -> np.ndarray:
        g = Lindblad(dim=self.dim, hamiltonian=self.hamiltonian, jumps=self.jumps)
        return liouvillian_matrix(g).matrix

    def _twisted_liouvillian(self, signs) -> np.ndarray:
        D = self.dim
        Q = self.q_matrix()
        I = np.eye(D, dtype=complex)
        L = np.kron(Q, I) + np.kron(I, Q.conj())
        for s, R in zip(signs, self.jumps):
            L = L + s * conjugation(R)
        return L

    def species_liouvillian(self, a: int) -> np.ndarray:
        """Propagator generator between a single open creation line and the
        closed side: jump g is weighted by eta(a, g)."""
        return self._twisted_liouvillian([self.eta(a, g) for g in range(self.q)])

    def pair_liouvillian(self, a: int, b: int) -> np.ndarray:
        """Propagator generator left of both insertions: weights
        eta(a, g) * eta(b, g); equals the plain Liouvillian when a == b."""
        return self._twisted_liouvillian(
            [self.eta(a, g) * self.eta(b, g) for g in range(self.q)]
        )

    def to_dict(self) -> dict:
        from .encoding import matrix_to_json
        return {
            "K": self.ancilla_dim,
            "boundary": [matrix_to_json(B) for B in self.boundary],
            "H": matrix_to_json(self.hamiltonian),
            "jumps": [matrix_to_json(R) for R in self.jumps],
            "eta": [int(s) for s in self.statistics],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeneralizedCmps":
        from .encoding import matrix_from_json
        return cls(
            ancilla_dim=int(data["K"]),
            boundary=[matrix_from_json(B) for B in data["boundary"]],
            hamiltonian=matrix_from_json(data["H"]),
            jumps=[matrix_from_json(R) for R in data.get("jumps", [])],
            statistics=[int(s) for s in data.get("eta", [])],
        )


def from_mps(t: MpsTensor, tol: float = DEFAULT_TOL) -> GeneralizedCmps:
    """Continuum representation of a tensor with a continuum limit.

    Runs the divisibility pipeline, Kraus-decomposes the projector into the
    boundary operators (K = Kraus rank; for a Markovian transfer K = 1 and
    B = I), and splits the generator into (H, {R_a}) with a minimal jump
    count.  All species default to bosonic.
    """
    verdict = is_infinitely_divisible(transfer_matrix(t), a=t.spacing, tol=tol)
    if verdict.status == "markovian":
        boundary = [np.eye(t.D, dtype=complex)]
    elif verdict.status == "divisible":
        boundary = superop_to_kraus(verdict.projector, tol=max(tol, 1e-10)).kraus
    else:
        raise ValueError(
            f"from_mps: tensor has no continuum limit (status {verdict.status}: "
            f"{'; '.join(verdict.diagnostics)})"
        )
    g = split_generator(verdict.generator, tol=max(tol, 1e-10))
    return GeneralizedCmps(
        ancilla_dim=len(boundary),
        boundary=boundary,
        hamiltonian=g.hamiltonian,
        jumps=g.jumps,
        statistics=[1] * len(g.jumps),
    )


def transfer(g: GeneralizedCmps, length: float) -> SuperOp:
    """P expm(length L) with P rebuilt from the boundary operators."""
    if not length > 0:
        raise ValueError("transfer: length must be positive")
    M = g.projector() @ numerics.expm(length * g.liouvillian())
    return SuperOp(dim=g.dim, matrix=M)


def norm_squared(g: GeneralizedCmps, length: float) -> float:
    """Squared norm of the segment state: the trace closure of transfer."""
    val = np.trace(transfer(g, length).matrix)
    if abs(val.imag) > 1e-9 * max(1.0, abs(val)):
        raise ValueError(f"norm_squared: trace has a large imaginary part ({val})")
    out = val.real
    if out < -1e-10:
        raise ValueError(f"norm_squared: negative value {out}")
    return float(max(out, 0.0))


def correlation(g: GeneralizedCmps, length: float, alpha: int, beta: int,
                x: float, y: float) -> complex:
    """Two-point function of creation(alpha, x) annihilation(beta, y) on
    [0, length], normalized by the squared norm.

    The propagator between the insertions is twisted by the species signs
    (species_liouvillian), and left of both insertions by the pair signs
    (pair_liouvillian).  Coincident points are not defined here; use
    density for the on-site observable.
    """
    if g.q == 0:
        return 0.0 + 0.0j
    for name, v in (("x", x), ("y", y)):
        if not 0 <= v <= length:
            raise ValueError(f"correlation: {name} = {v} outside segment [0, {length}]")
    if x == y:
        raise ValueError("correlation: coincident points; use density instead")
    for s in (alpha, beta):
        if not 0 <= s < g.q:
            raise ValueError(f"correlation: species {s} out of range [0, {g.q})")
    P = g.projector()
    L = g.liouvillian()
    I = np.eye(g.dim, dtype=complex)
    Ra, Rb = g.jumps[alpha], g.jumps[beta]
    if x > y:
        M = (
            P
            @ numerics.expm(y * g.pair_liouvillian(alpha, beta))
            @ np.kron(Rb, I)
            @ numerics.expm((x - y) * g.species_liouvillian(alpha))
            @ np.kron(I, Ra.conj())
            @ numerics.expm((length - x) * L)
        )
    else:
        M = (
            P
            @ numerics.expm(x * g.pair_liouvillian(beta, alpha))
            @ np.kron(I, Ra.conj())
            @ numerics.expm((y - x) * g.species_liouvillian(beta))
            @ np.kron(Rb, I)
            @ numerics.expm((length - y) * L)
        )
    return complex(np.trace(M) / norm_squared(g, length))


def density(g: GeneralizedCmps, length: float, alpha: int, x: float) -> float:
    """Particle density of species alpha at position x on [0, length]."""
    if g.q == 0:
        return 0.0
    if not 0 <= x <= length:
        raise ValueError(f"density: x = {x} outside segment [0, {length}]")
    if not 0 <= alpha < g.q:
        raise ValueError(f"density: species {alpha} out of range [0, {g.q})")
    P = g.projector()
    L = g.liouvillian()
    R = g.jumps[alpha]
    M = P @ numerics.expm(x * L) @ conjugation(R) @ numerics.expm((length - x) * L)
    val = np.trace(M) / norm_squared(g, length)
    if abs(val.imag) > 1e-8 * max(1.0, abs(val)):
        raise ValueError(f"density: value has a large imaginary part ({val})")
    out = val.real
    if out < -1e-10:
        raise ValueError(f"density: negative value {out}")
    return float(max(out, 0.0))


def total_density(g: GeneralizedCmps, length: float, x: float) -> float:
    """Density summed over all species."""
    return sum(density(g, length, a, x) for a in range(g.q))


@dataclass
class TruncatedState:
    """Finite-particle grid truncation of the continuum state.

    amplitudes maps (ancilla index, config) to a complex amplitude, where
    config is a tuple of (species, position) pairs with strictly increasing
    positions on the midpoint grid.
    """

    segment: Segment
    grid_points: int
    max_particles: int
    amplitudes: dict

    def sector_weight(self, n: int) -> float:
        """Sum of squared amplitude moduli over the n-particle sector."""
        return float(
            sum(abs(a) ** 2 for (_, cfg), a in self.amplitudes.items() if len(cfg) == n)
        )

    def total_weight(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))


def truncated_state(g: GeneralizedCmps, seg: Segment, grid: int,
                    max_particles: int) -> TruncatedState:
    """Expand the path-ordered segment state to a few-particle truncation.

    The amplitude of ancilla branch i with particles (a_1, x_1) .. (a_n, x_n),
    x_1 < .. < x_n on the midpoint grid of step h, is
    tr[B_i e^{t_1 Q} R_{a_1} e^{t_2 Q} ... R_{a_n} e^{t_{n+1} Q}] h^{n/2},
    the t_j being the gaps between consecutive insertions (midpoint
    quadrature of the ordered-integral expansion).
    """
    if grid < 1:
        raise ValueError("truncated_state: grid must be at least 1")
    if not 0 <= max_particles <= MAX_PARTICLES_GUARD:
        raise ValueError(
            f"truncated_state: max_particles must lie in [0, {MAX_PARTICLES_GUARD}]"
        )
    h = seg.length / grid
    Q = g.q_matrix()
    Ehalf = numerics.expm((h / 2) * Q)
    Eh = numerics.expm(h * Q)
    powers = [np.eye(g.dim, dtype=complex)]
    for _ in range(grid):
        powers.append(powers[-1] @ Eh)
    positions = [seg.x + (j + 0.5) * h for j in range(grid)]
    amplitudes = {}
    for n in range(0, max_particles + 1):
        if n > 0 and g.q == 0:
            break
        for sites in itertools.combinations(range(grid), n):
            for species in itertools.product(range(g.q), repeat=n) if n else [()]:
                # transfer across the segment with insertions at the sites
                M = Ehalf @ powers[sites[0]] if n else powers[grid]
                for idx in range(n):
                    M = M @ g.jumps[species[idx]]
                    if idx + 1 < n:
                        M = M @ powers[sites[idx + 1] - sites[idx] - 1] @ Eh
                    else:
                        M = M @ powers[grid - 1 - sites[idx]] @ Ehalf
                weight = h ** (n / 2.0)
                cfg = tuple((species[k], positions[sites[k]]) for k in range(n))
                for i, B in enumerate(g.boundary):
                    amp = np.trace(B @ M) * weight
                    if abs(amp) > 1e-14:
                        amplitudes[(i, cfg)] = complex(amp)
    return TruncatedState(
        segment=seg, grid_points=grid, max_particles=max_particles, amplitudes=amplitudes
    )


def density_rows(g: GeneralizedCmps, length: float, grid: int):
    """(x, y, re, im) rows of the total density sampled on [0, length];
    the coincident-point observable is reported with y = x."""
    xs = np.linspace(0.0, length, grid)
    rows = []
    for x in xs:
        val = total_density(g, length, float(x))
        rows.append((float(x), float(x), val, 0.0))
    return rows


def correlation_rows(g: GeneralizedCmps, length: float, grid: int, alpha: int, beta: int):
    """(x, y, re, im) rows of the two-point function on the off-diagonal
    grid pairs."""
    xs = np.linspace(0.0, length, grid)
    rows = []
    for x in xs:
        for y in xs:
            if x == y:
                continue
            val = correlation(g, length, alpha, beta, float(x), float(y))
            rows.append((float(x), float(y), float(val.real), float(val.imag)))
    return rows
