"""Betti numbers of finite simplicial complexes over the two-element field.

beta_k = S_k - rank(d_k) - rank(d_{k+1}), with ranks computed by sparse
column elimination on bit-packed boundary matrices. Also: a union-find
component counter used as an independent beta_0 oracle, the exact
Euler-Poincare cross-check, and the Betti-difference bound for nested
complexes (the inequality |beta_k(K1) - beta_k(K2)| bounded by the
simplices of K2 \\ K1 in dimensions k and k+1).
"""

from __future__ import annotations

from dataclasses import dataclass

from betti_thermo.cech import NeighborGrid, SimplicialComplex
from betti_thermo.pointproc import PointCloud


class HomologyError(ValueError):
    """Invalid homology computation request."""


@dataclass(frozen=True)
class BoundaryMatrix:
    """Sparse GF(2) boundary matrix: one sorted row-index tuple per column."""

    rows: int
    cols: int
    columns: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class BettiVector:
    """Betti numbers beta_0 .. beta_maxk."""

    values: tuple[int, ...]
    max_k: int

    def __getitem__(self, k: int) -> int:
        return self.values[k]

    def __iter__(self):
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)


def boundary_matrix(complex: SimplicialComplex, j: int) -> BoundaryMatrix:
    """Boundary map from j-chains to (j-1)-chains.

    Column c lists the indices of the j+1 facets of the c-th j-simplex,
    referring to the complex's own (j-1)-simplex ordering.
    """
    if not 1 <= j <= complex.max_dim:
        raise HomologyError(f"boundary dimension {j} outside 1..{complex.max_dim}")
    faces = complex.simplices_of(j - 1)
    index = {s: i for i, s in enumerate(faces)}
    columns = []
    for s in complex.simplices_of(j):
        facets = sorted(index[s[:i] + s[i + 1:]] for i in range(len(s)))
        columns.append(tuple(facets))
    return BoundaryMatrix(rows=len(faces), cols=len(columns), columns=tuple(columns))


def _rank_bit_columns(columns) -> int:
    # eliminate against pivots keyed by each column's highest set bit
    pivots: dict[int, int] = {}
    rank = 0
    for col in columns:
        while col:
            key = col.bit_length() - 1
            other = pivots.get(key)
            if other is None:
                pivots[key] = col
                rank += 1
                break
            col ^= other
    return rank


def rank_gf2(matrix: BoundaryMatrix) -> int:
    """Rank over GF(2) by column elimination with bit-packed columns."""
    cols = []
    for rows in matrix.columns:
        bits = 0
        for i in rows:
            bits |= 1 << i
        cols.append(bits)
    return _rank_bit_columns(cols)


def betti_numbers(complex: SimplicialComplex, max_k: int) -> BettiVector:
    """Betti numbers beta_0 .. beta_maxk of the complex.

    Requires the complex to have been built with max_dim >= max_k + 1;
    truncating the (k+1)-simplices away would silently inflate beta_k,
    so a too-shallow complex is a hard error.
    """
    if max_k < 0:
        raise HomologyError("max_k must be non-negative")
    if complex.max_dim < max_k + 1:
        raise HomologyError(
            f"complex built to max_dim {complex.max_dim}; "
            f"beta_{max_k} needs max_dim >= {max_k + 1}"
        )
    ranks = [0] * (max_k + 2)
    for j in range(1, max_k + 2):
        if complex.simplices_of(j):
            ranks[j] = rank_gf2(boundary_matrix(complex, j))
    values = []
    for k in range(max_k + 1):
        s_k = len(complex.simplices_of(k))
        values.append(s_k - ranks[k] - ranks[k + 1])
    return BettiVector(values=tuple(values), max_k=max_k)


def connected_components(cloud: PointCloud, r: float,
                         period: float | None = None) -> int:
    """Components of the geometric graph with edges at distance <= r.

    Union-find with path halving; agrees with beta_0 of the Cech (or
    Rips) complex at the same radius.
    """
    if r <= 0:
        raise HomologyError("radius must be positive")
    n = len(cloud)
    if n == 0:
        return 0
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    grid = NeighborGrid(cloud.points, cell_size=r, period=period)
    u, v = grid.pairs_within(r)
    count = n
    for a, b in zip(u.tolist(), v.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            count -= 1
    return count


def euler_check(complex: SimplicialComplex, betti: BettiVector) -> bool:
    """Exact Euler-Poincare identity: alternating simplex and Betti sums match.

    Only meaningful when the complex holds all of its dimensions and the
    Betti vector reaches the top nonempty dimension.
    """
    chi_simplices = complex.euler_characteristic()
    chi_betti = sum((-1) ** k * b for k, b in enumerate(betti.values))
    return chi_simplices == chi_betti


def _level_sets(complex: SimplicialComplex) -> list[set]:
    return [set(level) for level in complex.simplices]


def betti_diff_bound_check(k1: SimplicialComplex, k2: SimplicialComplex,
                           k: int) -> bool:
    """Betti-difference bound for nested complexes.

    Verifies K1 is a subcomplex of K2 (simplex by simplex; non-nested
    inputs are rejected), then checks
    |beta_k(K1) - beta_k(K2)| <= #k-simplices + #(k+1)-simplices of K2 \\ K1.
    Both complexes must have been built with max_dim >= k + 1.
    """
    if k < 1:
        raise HomologyError("the difference bound is stated for k >= 1")
    sets2 = _level_sets(k2)
    for j, level in enumerate(k1.simplices):
        if not level:
            continue
        if j >= len(sets2) or not set(level) <= sets2[j]:
            raise HomologyError("first complex is not contained in the second")
    b1 = betti_numbers(k1, k)[k]
    b2 = betti_numbers(k2, k)[k]
    extra = 0
    for j in (k, k + 1):
        extra += len(k2.simplices_of(j)) - len(k1.simplices_of(j))
    return abs(b1 - b2) <= extra
