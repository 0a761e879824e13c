"""Tree-adapted orthonormal bases of L^2(S, m).

Rank-1 members are normalized cell indicators.  A rank >= 2 member lives on
its support cell and takes the value ``a`` on the left child and ``-b`` on
the right child, with

    a = sqrt(m1 / (m0 (m0 + m1))),   b = sqrt(m0 / (m1 (m0 + m1)))

where m0, m1 are the child masses.  These are the unique values giving
mean zero (a m0 = b m1) and unit norm (a^2 m0 + b^2 m1 = 1).  For Lebesgue
measure a = b = 2^{(s-2)/2} when the children have level s.

Functions are stored symbolically as (cell, coefficient) pieces, so every
integral of products of basis functions is an exact finite sum.
"""

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

from .errors import IndexSetError, PartitionError
from .partition import Cell


@dataclass(frozen=True)
class Piece:
    cell: Cell
    lo: object
    hi: object
    mass: float
    coef: float


@dataclass(frozen=True)
class BasisFunction:
    index: object
    support: Cell
    pieces: tuple

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        one_d = np.ndim(self.pieces[0].lo) == 0
        out = np.zeros(x.shape if one_d else x.shape[:-1])
        for p in self.pieces:
            if one_d:
                inside = (x >= p.lo) & (x < p.hi)
            else:
                inside = np.all((x >= p.lo) & (x < p.hi), axis=-1)
            out = out + np.where(inside, p.coef, 0.0)
        return out

    @property
    def rank(self):
        return self.index.rank

    def mark_density(self):
        """Pieces of |f|^2 dm as (piece, probability) pairs; probabilities sum to 1."""
        return [(p, p.coef * p.coef * p.mass) for p in self.pieces]


def _intersection(a, b):
    """Smaller of two dyadic cells if nested, else None."""
    if a.contains(b):
        return b
    if b.contains(a):
        return a
    return None


def build_basis_function(index, partition):
    """Basis element f_{l,i} for a member ``index`` of the level-l index set."""
    if not index.is_member():
        raise IndexSetError(f"{index} is not in the index set (rank >= 2 needs final bit 0)")
    if index.rank == 1:
        pc = partition.cell_of(index.cell)
        return BasisFunction(index, pc.cell, (Piece(pc.cell, pc.lo, pc.hi, pc.mass, 1.0 / math.sqrt(pc.mass)),))
    support = index.support
    c0, c1 = support.children()
    lo0, hi0 = partition.bounds(c0)
    lo1, hi1 = partition.bounds(c1)
    m0 = float(partition.measure.mass(lo0, hi0))
    m1 = float(partition.measure.mass(lo1, hi1))
    if not (m0 > 0 and m1 > 0):
        raise PartitionError(f"support {support} of {index} has a zero-mass child")
    a = math.sqrt(m1 / (m0 * (m0 + m1)))
    b = math.sqrt(m0 / (m1 * (m0 + m1)))
    return BasisFunction(index, support, (Piece(c0, lo0, hi0, m0, a), Piece(c1, lo1, hi1, m1, -b)))


def restricted_integral(f, g, partition, region=None):
    """Exact integral of f * conj(g) dm, optionally over a dyadic cell ``region``."""
    total = 0.0
    for p in f.pieces:
        for q in g.pieces:
            cell = _intersection(p.cell, q.cell)
            if cell is None:
                continue
            if region is not None:
                cell = _intersection(cell, region)
                if cell is None:
                    continue
            mass = p.mass if cell == p.cell else q.mass if cell == q.cell else partition.mass(cell)
            total += p.coef * q.coef * mass
    return total


def inner_product(f, g, partition):
    return restricted_integral(f, g, partition)


def cell_integral(f, cell, partition):
    """Exact integral of f over a dyadic cell."""
    total = 0.0
    for p in f.pieces:
        inter = _intersection(p.cell, cell)
        if inter is None:
            continue
        mass = p.mass if inter == p.cell else partition.mass(inter)
        total += p.coef * mass
    return total


def mark_density(index, partition):
    return build_basis_function(index, partition).mark_density()


class TruncatedBasis:
    """The level-l basis truncated to rank <= rank_max on the partition window.

    Every member is constant on the cells of level ``level + rank_max - 1``
    (the finest level), and ``design[c, i]`` is the value of member ``i`` on
    finest cell ``c``.  The design matrix is square: the truncated basis
    spans exactly the indicators of the finest cells.
    """

    def __init__(self, partition, level, rank_max):
        self.partition = partition
        self.level = level
        self.rank_max = rank_max
        self.indices = partition.truncated_index_set(level, rank_max)
        self.functions = [build_basis_function(i, partition) for i in self.indices]
        self.position = {i: k for k, i in enumerate(self.indices)}

    def __len__(self):
        return len(self.indices)

    @property
    def finest_level(self):
        return self.level + self.rank_max - 1

    @cached_property
    def cell_masses(self):
        return self.partition.level_masses(self.finest_level)

    @cached_property
    def design(self):
        L = self.finest_level
        nc = self.partition.n_cells(L)
        phi = np.zeros((nc, len(self.functions)))
        for k, f in enumerate(self.functions):
            for p in f.pieces:
                start = self.partition.flat_index(p.cell, L)
                phi[start:start + (1 << (L - p.cell.level)), k] = p.coef
        return phi

    def gram(self):
        """All inner products at once: design^T diag(mass) design."""
        phi = self.design
        return phi.T @ (self.cell_masses[:, None] * phi)

    def evaluate(self, x):
        """Matrix of basis values at points, shape (npoints, N); zero outside the window."""
        flat = self.partition.locate(x, self.finest_level)
        out = np.zeros((len(flat), len(self)))
        inside = flat >= 0
        out[inside] = self.design[flat[inside]]
        return out

    def supported_in(self, cell):
        """Positions of members whose support lies inside ``cell`` (the set I_l(A))."""
        return [k for k, f in enumerate(self.functions) if cell.contains(f.support)]

    def table(self):
        rows = []
        for f in self.functions:
            lo, hi = self.partition.bounds(f.support)
            rows.append((f.index, f.support, lo, hi, f.pieces))
        return rows


def sigma_field_check(partition, level, rank):
    """Span of members with rank <= r equals span of level (l + r - 1) indicators."""
    basis = TruncatedBasis(partition, level, rank)
    phi = basis.design
    if phi.shape[0] != phi.shape[1]:
        return False
    cond = np.linalg.cond(phi)
    return bool(np.isfinite(cond) and np.linalg.matrix_rank(phi) == phi.shape[0])
