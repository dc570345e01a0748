"""Band-structured Markov kernels on the nonnegative integers.

A kernel is stored as a finite list of boundary rows (indices ``0..i0-1``)
followed by a tail rule valid for every ``i >= i0``.  The tail is either a
homogeneous increment law (a random walk with identically distributed
bounded increments) or an arbitrary deterministic row generator that must
declare its limiting increments.  Only finitely many rows are ever
materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .bounds import IncrementLaw
from .errors import (
    BandViolation,
    DegenerateIncrements,
    MissingBoundaryRow,
    NegativeEntry,
    NonStochasticRow,
    ZeroMass,
)

ROW_SUM_TOL = 1e-12

Row = Mapping[int, float]


def _as_row(row, where: str) -> dict[int, float]:
    """Normalize a dense list or a sparse mapping into ``{column: prob}``."""
    if isinstance(row, Mapping):
        items = ((int(j), float(p)) for j, p in row.items())
    else:
        items = ((j, float(p)) for j, p in enumerate(row))
    out = {}
    for j, p in items:
        if j < 0:
            raise BandViolation(f"{where}: negative column index {j}")
        if p != 0.0:
            out[j] = out.get(j, 0.0) + p
    return out


def check_row(row: Row, where: str) -> None:
    """Raise if ``row`` is not a probability row."""
    for j, p in row.items():
        if not (p >= 0.0):
            raise NegativeEntry(f"{where}: P[{j}] = {p!r} < 0")
        if p > 1.0:
            raise NonStochasticRow(f"{where}: P[{j}] = {p!r} > 1")
    s = math.fsum(row.values())
    if abs(s - 1.0) > ROW_SUM_TOL:
        raise NonStochasticRow(f"{where}: row sums to {s!r}")


@dataclass(frozen=True)
class HomogeneousTail:
    """Tail rows ``P(i, i+m) = a_m`` for all ``i >= i0``."""

    law: IncrementLaw

    @property
    def limit_law(self) -> IncrementLaw:
        return self.law

    def row(self, i: int) -> dict[int, float]:
        return {i + m: a for m, a in self.law.items() if a != 0.0}


@dataclass(frozen=True)
class VaryingTail:
    """Tail given by a pure rule ``i -> row``; ``limit_law`` holds the limits a_m."""

    rule: Callable[[int], Row]
    limit_law: IncrementLaw

    def row(self, i: int) -> dict[int, float]:
        return _as_row(self.rule(i), f"tail row {i}")


TailSpec = Union[HomogeneousTail, VaryingTail]


@dataclass(frozen=True)
class BandKernel:
    """Transition kernel with boundary rows ``0..i0-1`` and a band tail.

    Parameters
    ----------
    i0 : int
        First row governed by the tail rule.
    N : int
        Half-bandwidth; ``P(i, j) = 0`` when ``i >= i0`` and ``|i - j| > N``.
    boundary_rows : tuple of dict
        Sparse probability rows for ``i < i0``.
    tail : HomogeneousTail or VaryingTail
    g, d : int, optional
        Maximal down/up jump of a homogeneous random walk.
    """

    i0: int
    N: int
    boundary_rows: tuple
    tail: TailSpec
    g: int | None = None
    d: int | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.N < 1:
            raise BandViolation(f"half-bandwidth N must be positive, got {self.N}")
        if len(self.boundary_rows) != self.i0:
            raise MissingBoundaryRow(
                f"expected {self.i0} boundary rows, got {len(self.boundary_rows)}"
            )
        for i, r in enumerate(self.boundary_rows):
            check_row(r, f"boundary row {i}")
        law = self.tail.limit_law
        if law.g > self.N or law.d > self.N:
            raise BandViolation(f"limit increments exceed half-bandwidth N={self.N}")
        if isinstance(self.tail, HomogeneousTail) and self.i0 < law.g:
            # a tail row i < g would need columns below zero
            raise MissingBoundaryRow(
                f"rows {self.i0}..{law.g - 1} need boundary rows (i - g < 0)"
            )
        if isinstance(self.tail, HomogeneousTail):
            check_row(self.tail.row(self.i0), f"tail row {self.i0}")

    @property
    def limit_law(self) -> IncrementLaw:
        return self.tail.limit_law

    @property
    def homogeneous(self) -> bool:
        return isinstance(self.tail, HomogeneousTail)

    def row(self, i: int) -> dict[int, float]:
        """Row ``i`` of P as ``{column: probability}``."""
        if i < 0:
            raise IndexError(f"row index {i} < 0")
        if i < self.i0:
            return dict(self.boundary_rows[i])
        r = self.tail.row(i)
        if not self.homogeneous:
            check_row(r, f"tail row {i}")
            bad = [j for j in r if abs(j - i) > self.N or j < 0]
            if bad:
                raise BandViolation(f"tail row {i} has columns {bad} outside the band")
        return r

    def entry(self, i: int, j: int) -> float:
        return self.row(i).get(j, 0.0)


def build_homogeneous_rw(g: int, d: int, increments: Mapping[int, float],
                         boundary_rows: Sequence, name: str = "") -> BandKernel:
    """Random walk with i.d. bounded increments on ``{-g..d}`` above ``g``.

    ``boundary_rows`` must hold exactly the rows ``0..g-1`` (dense lists or
    sparse mappings).  The result has ``i0 = g`` and ``N = max(g, d)``.
    """
    if g < 1 or d < 1:
        raise DegenerateIncrements(f"g and d must be positive, got g={g}, d={d}")
    incs = {int(m): float(a) for m, a in increments.items()}
    outside = [m for m in incs if m < -g or m > d]
    if outside:
        raise DegenerateIncrements(f"increments {outside} outside {{-{g}..{d}}}")
    for m, a in incs.items():
        if a < 0.0:
            raise NegativeEntry(f"increment a[{m}] = {a!r} < 0")
    s = math.fsum(incs.values())
    if abs(s - 1.0) > ROW_SUM_TOL:
        raise NonStochasticRow(f"increments sum to {s!r}")
    if incs.get(-g, 0.0) <= 0.0 or incs.get(d, 0.0) <= 0.0:
        raise DegenerateIncrements(f"need a[-{g}] > 0 and a[{d}] > 0")
    if len(boundary_rows) < g:
        raise MissingBoundaryRow(f"rows {len(boundary_rows)}..{g - 1} are missing")
    if len(boundary_rows) > g:
        raise MissingBoundaryRow(f"expected exactly {g} boundary rows, got {len(boundary_rows)}")
    rows = tuple(_as_row(r, f"boundary row {i}") for i, r in enumerate(boundary_rows))
    return BandKernel(i0=g, N=max(g, d), boundary_rows=rows,
                      tail=HomogeneousTail(IncrementLaw(incs)), g=g, d=d, name=name)


def band_kernel(i0: int, N: int, boundary_rows: Sequence, tail: TailSpec,
                name: str = "") -> BandKernel:
    """General band kernel; boundary rows are normalized and validated."""
    rows = tuple(_as_row(r, f"boundary row {i}") for i, r in enumerate(boundary_rows))
    return BandKernel(i0=i0, N=N, boundary_rows=rows, tail=tail, name=name)


def truncate_augment(kernel: BandKernel, k: int) -> np.ndarray:
    """Order ``k+1`` northwest corner with each row's lost mass folded into column k."""
    if k < kernel.i0 + kernel.N:
        raise ValueError(f"k={k} must be >= i0 + N = {kernel.i0 + kernel.N}")
    P = np.zeros((k + 1, k + 1))
    for i in range(k + 1):
        lost = []
        for j, p in kernel.row(i).items():
            if j < k:
                P[i, j] = p
            else:
                lost.append(p)
        # fold the mass outside {0..k-1}; fsum keeps the row sum at 1 to rounding
        P[i, k] = math.fsum(lost)
    return P


@dataclass(frozen=True)
class AdjointKernel:
    """Time reversal ``P*(i,j) = pi(j) P(j,i) / pi(i)`` on ``{0..k}``.

    Rows ``0..exact_upto`` are exact: every predecessor ``j`` of such a row
    lies inside ``{0..k}``.
    """

    matrix: np.ndarray
    k: int
    N: int
    exact_upto: int


def adjoint(kernel: BandKernel, pi, k: int) -> AdjointKernel:
    """Adjoint of ``kernel`` with respect to the stationary prefix ``pi`` on ``{0..k}``."""
    prefix = np.asarray(pi.prefix if hasattr(pi, "prefix") else pi, dtype=float)
    if len(prefix) < k + kernel.N + 1:
        raise ValueError(f"pi covers 0..{len(prefix) - 1}, need 0..{k + kernel.N}")
    w = prefix[: k + 1]
    if np.any(w <= 0.0):
        raise ZeroMass(f"pi vanishes at indices {np.flatnonzero(w <= 0.0)[:10].tolist()}")
    A = np.zeros((k + 1, k + 1))
    for j in range(k + 1):
        for i, p in kernel.row(j).items():
            if i <= k:
                A[i, j] = w[j] * p / w[i]
    # predecessors of i are boundary rows (< i0 <= k) or tail rows j <= i + N
    return AdjointKernel(matrix=A, k=k, N=kernel.N, exact_upto=k - kernel.N)


def adjoint_matrix(P: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Adjoint of a finite stochastic matrix in ``l2(pi)``."""
    pi = np.asarray(pi, dtype=float)
    if np.any(pi <= 0.0):
        raise ZeroMass("pi has zero entries")
    return (P.T * pi[None, :]) / pi[:, None]


def is_reversible(kernel: BandKernel, pi, k: int, tol: float = 1e-10) -> bool:
    """True when ``P* == P`` entrywise on the exact rows of ``{0..k}``."""
    adj = adjoint(kernel, pi, k)
    n = adj.exact_upto + 1
    P = np.zeros((n, k + 1))
    for i in range(n):
        for j, p in kernel.row(i).items():
            if j <= k:
                P[i, j] = p
    return bool(np.max(np.abs(adj.matrix[:n] - P)) <= tol)


@dataclass
class StructureDiagnostics:
    """Graph diagnostics of a finite truncation.

    Irreducibility and aperiodicity of the infinite chain cannot be decided
    from finitely many rows; these flags describe the truncation only.
    """

    k: int
    irreducible: bool
    aperiodic: bool
    period: int
    n_components: int
    augmented_aperiodic: bool
    band_violations: list = field(default_factory=list)
    notes: str = "checked on the level-k truncation only"

    @property
    def ok(self) -> bool:
        return self.irreducible and self.aperiodic and not self.band_violations

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "irreducible": self.irreducible,
            "aperiodic": self.aperiodic,
            "period": self.period,
            "n_components": self.n_components,
            "augmented_aperiodic": self.augmented_aperiodic,
            "band_violations": list(self.band_violations),
            "notes": self.notes,
        }


def _period(adj: np.ndarray) -> int:
    """Period of a strongly connected digraph (gcd of level differences along edges)."""
    n = adj.shape[0]
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    for u, v in zip(*np.nonzero(adj)):
        if level[u] >= 0 and level[v] >= 0:
            g = math.gcd(g, int(level[u] + 1 - level[v]))
    return g


def validate_structure(kernel: BandKernel, k: int) -> StructureDiagnostics:
    """Connectivity, period and band checks on the level-``k`` truncation.

    Irreducibility is tested on the augmented matrix ``P_k``.  The period is
    computed on the plain northwest corner (true entries of P only), since
    augmentation adds self-loops at the last state that the infinite chain
    does not have.
    """
    if k < kernel.i0 + 2 * kernel.N:
        raise ValueError(f"k={k} must be >= i0 + 2N = {kernel.i0 + 2 * kernel.N}")
    violations = []
    for i in range(kernel.i0, k + 1):
        try:
            r = kernel.row(i)
        except BandViolation as exc:
            violations.append(str(exc))
            continue
        bad = [j for j, p in r.items() if p > 0 and abs(j - i) > kernel.N]
        if bad:
            violations.append(f"row {i}: columns {bad} outside band")
    Pk = truncate_augment(kernel, k)
    n_comp, _ = connected_components(csr_matrix(Pk > 0), directed=True, connection="strong")
    corner = np.zeros_like(Pk, dtype=bool)
    for i in range(k + 1):
        for j, p in kernel.row(i).items():
            if j <= k and p > 0:
                corner[i, j] = True
    n_corner, _ = connected_components(csr_matrix(corner), directed=True, connection="strong")
    period = _period(corner) if n_corner == 1 else 0
    aug_period = _period(Pk > 0) if n_comp == 1 else 0
    return StructureDiagnostics(
        k=k,
        irreducible=n_comp == 1,
        aperiodic=period == 1,
        period=period,
        n_components=int(n_comp),
        augmented_aperiodic=aug_period == 1,
        band_violations=violations,
    )
