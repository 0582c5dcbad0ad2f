"""Finite-difference truncations of the half-line operators, used as an
independent check on the Floquet band computation and the channel reduction.

The truncated operator on [s0, s0 + L] is a symmetric tridiagonal matrix;
its eigenvalues are computed by Sturm-sequence bisection (LAPACK stebz).
Truncation introduces finitely many spurious eigenvalues inside spectral
gaps, which gap_audit counts rather than hides.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.linalg import eigh_tridiagonal

from .errors import DomainError
from .floquet import BandStructure
from .reduction import Dirichlet, Robin, SchrodingerPotential

_EIG_TOL = 1e-11


@dataclass(frozen=True)
class Grid:
    """Uniform grid of N cells over [s0, s0 + length]; node spacing h = length / N."""

    s0: float
    length: float
    npoints: int

    def __post_init__(self):
        if self.npoints < 16:
            raise DomainError(f"grid needs at least 16 points, got {self.npoints}")
        if not self.length > 0.0:
            raise DomainError(f"grid length must be positive, got {self.length}")

    @property
    def h(self):
        return self.length / self.npoints

    def nodes(self, include_left=False):
        """Interior nodes s0 + i h; the left boundary node is kept for Robin conditions."""
        first = 0 if include_left else 1
        return self.s0 + self.h * np.arange(first, self.npoints)


@dataclass(eq=False)
class TridiagonalOperator:
    """Symmetric tridiagonal matrix with its generating grid and boundary condition."""

    diagonal: np.ndarray
    off_diagonal: np.ndarray
    grid: Grid
    bc: object

    def __post_init__(self):
        self.diagonal = np.asarray(self.diagonal, dtype=float)
        self.off_diagonal = np.asarray(self.off_diagonal, dtype=float)
        if self.off_diagonal.size != max(0, self.diagonal.size - 1):
            raise DomainError("off-diagonal length must be diagonal length - 1")
        if not (np.all(np.isfinite(self.diagonal)) and np.all(np.isfinite(self.off_diagonal))):
            raise DomainError("operator entries must be finite")

    @property
    def dim(self):
        return self.diagonal.size


def _potential_callable(W):
    if isinstance(W, SchrodingerPotential):
        return W.func, W.boundary
    if callable(W):
        return W, None
    raise DomainError(f"potential must be a SchrodingerPotential or callable, got {W!r}")


def discretize_schrodinger(W, grid: Grid, bc=None) -> TridiagonalOperator:
    """Central-difference truncation of -d^2/ds^2 + W on [s0, s0 + L].

    The far boundary is always Dirichlet (plain truncation). At s0, Dirichlet
    eliminates the boundary node; Robin(beta) keeps it and folds the ghost
    node through k'(s0) = -beta k(s0) into the first diagonal entry.
    """
    func, default_bc = _potential_callable(W)
    if bc is None:
        bc = default_bc
    if bc is None:
        raise DomainError("a boundary condition is required for bare callables")
    h = grid.h
    if isinstance(bc, Dirichlet):
        s = grid.nodes(include_left=False)
        diag = 2.0 / h ** 2 + np.asarray(func(s), dtype=float)
    elif isinstance(bc, Robin):
        s = grid.nodes(include_left=True)
        diag = 2.0 / h ** 2 + np.asarray(func(s), dtype=float)
        diag[0] = (1.0 - h * bc.beta) / h ** 2 + float(func(grid.s0))
    else:
        raise DomainError(f"unsupported boundary condition {bc!r}")
    off = np.full(diag.size - 1, -1.0 / h ** 2)
    return TridiagonalOperator(diagonal=diag, off_diagonal=off, grid=grid, bc=bc)


def discretize_weighted(rho, grid: Grid):
    """Discrete weighted derivative A: L^2(rho ds) -> L^2(rho ds) midpoints, plus A*A and AA*.

    A is the forward difference with Dirichlet values at both ends, expressed
    in the symmetrizing node/midpoint scalings, so A*A and AA* come out as
    genuinely symmetric tridiagonal matrices sharing their nonzero spectrum
    (they are T(A) A and A T(A) for the same rectangular A). Half-node weight
    samples keep the scheme second-order accurate.
    """
    h = grid.h
    n = grid.npoints
    node_s = grid.nodes(include_left=False)               # N - 1 interior nodes
    edge_s = grid.s0 + h * (np.arange(n) + 0.5)           # N midpoints
    rho_n = np.asarray(rho(node_s), dtype=float)
    rho_e = np.asarray(rho(edge_s), dtype=float)
    if np.any(rho_n <= 0.0) or np.any(rho_e <= 0.0):
        raise DomainError("weight must be strictly positive on the grid")

    upper = np.sqrt(rho_e[:-1] / rho_n) / h               # edge j -> node j+1, j = 0..N-2
    lower = -np.sqrt(rho_e[1:] / rho_n) / h               # edge j -> node j,   j = 1..N-1
    a = scipy.sparse.diags(
        [upper, lower], offsets=[0, -1], shape=(n, n - 1), format="csr"
    )

    astar_a_diag = (rho_e[:-1] + rho_e[1:]) / (rho_n * h ** 2)
    astar_a_off = -rho_e[1:-1] / (np.sqrt(rho_n[:-1] * rho_n[1:]) * h ** 2)
    astar_a = TridiagonalOperator(astar_a_diag, astar_a_off, grid, Dirichlet())

    inv_left = np.zeros(n)
    inv_left[1:] = 1.0 / rho_n                            # node j exists for edge j >= 1
    inv_right = np.zeros(n)
    inv_right[:-1] = 1.0 / rho_n                          # node j+1 exists for edge j <= N-2
    aastar_diag = rho_e * (inv_left + inv_right) / h ** 2
    aastar_off = -np.sqrt(rho_e[:-1] * rho_e[1:]) / (rho_n * h ** 2)
    a_astar = TridiagonalOperator(aastar_diag, aastar_off, grid, Dirichlet())
    return a, astar_a, a_astar


def eigenvalues_below(op: TridiagonalOperator, lambda_max):
    """All eigenvalues <= lambda_max, each located by Sturm bisection, sorted."""
    lower_bound = float(np.min(op.diagonal) - 2.0 * np.max(np.abs(op.off_diagonal), initial=0.0) - 1.0)
    if lower_bound > lambda_max:
        return np.empty(0)
    vals = eigh_tridiagonal(
        op.diagonal,
        op.off_diagonal,
        eigvals_only=True,
        select="v",
        select_range=(lower_bound, float(lambda_max)),
        lapack_driver="stebz",
        tol=_EIG_TOL,
    )
    return np.sort(vals)


@dataclass(frozen=True)
class GapAudit:
    """Eigenvalues found deeper than `margin` inside each gap of a band structure.

    gap_counts is aligned with bands.gaps; below_first_band counts eigenvalues
    more than `margin` below the bottom of the spectrum.
    """

    gap_counts: tuple
    below_first_band: int
    margin: float

    @property
    def total_deep(self):
        return int(sum(self.gap_counts)) + self.below_first_band

    @property
    def max_per_gap(self):
        return max(self.gap_counts, default=0)


def gap_audit(eigs, bands: BandStructure, margin) -> GapAudit:
    """Count eigenvalues lying deeper than `margin` inside each spectral gap."""
    if not margin > 0.0:
        raise DomainError(f"margin must be positive, got {margin}")
    ev = np.asarray(eigs, dtype=float)
    counts = tuple(
        int(np.count_nonzero((ev > g.lower + margin) & (ev < g.upper - margin)))
        for g in bands.gaps
    )
    below = 0
    if bands.bands:
        below = int(np.count_nonzero(ev < bands.bands[0].lower - margin))
    return GapAudit(gap_counts=counts, below_first_band=below, margin=float(margin))
