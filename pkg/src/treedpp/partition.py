"""Nested dyadic m-partitions and the tree index machinery.

A cell is addressed by a root (an integer unit cell in 1D, an integer pair
of unit squares in 2D) and a bit path.  A path of length ``n`` names a cell
of level ``n + 1``; each bit picks the left (0) or right (1) half of its
parent.  In 2D the split that produces level ``l + 1`` is along x when
``l`` is odd and along y when ``l`` is even.

The left endpoint of a 1D cell is

    J = j1 + sum_{n >= 2} j_n 2^{-(n-1)}

which is the only choice that keeps cells of width 2^{1-l} nested.

A :class:`TreeIndex` is a node of the same tree read at a level context
``l``: the first ``l - 1`` bits name a level-l cell and the remaining
``rank - 1`` bits descend further.  Reading an index at a different level
(the l-shift) only changes ``level``; root and bits stay the same.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import IndexSetError, PartitionError


def _check_bits(bits):
    bits = tuple(int(b) for b in bits)
    if any(b not in (0, 1) for b in bits):
        raise IndexSetError(f"bits must be 0/1, got {bits}")
    return bits


def _check_root(root):
    if isinstance(root, (tuple, list)):
        if len(root) != 2:
            raise IndexSetError(f"2D root must be an integer pair, got {root}")
        return (int(root[0]), int(root[1]))
    return int(root)


def format_root(root):
    return f"{root[0]},{root[1]}" if isinstance(root, tuple) else str(root)


def format_bits(bits):
    return "".join(str(b) for b in bits)


@dataclass(frozen=True, order=True)
class Cell:
    """Dyadic cell named by its root and bit path."""

    root: object
    bits: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "root", _check_root(self.root))
        object.__setattr__(self, "bits", _check_bits(self.bits))

    @property
    def level(self):
        return len(self.bits) + 1

    def children(self):
        return Cell(self.root, self.bits + (0,)), Cell(self.root, self.bits + (1,))

    def parent(self):
        if not self.bits:
            raise IndexSetError(f"level-1 cell {self} has no parent")
        return Cell(self.root, self.bits[:-1])

    def ancestor(self, level):
        if level > self.level:
            raise IndexSetError(f"level {level} is finer than cell {self}")
        return Cell(self.root, self.bits[: level - 1])

    def contains(self, other):
        """True if ``other`` is this cell or nested inside it."""
        return (
            self.root == other.root
            and len(other.bits) >= len(self.bits)
            and other.bits[: len(self.bits)] == self.bits
        )

    @classmethod
    def parse(cls, label):
        """Inverse of ``str``: ``"root|bits"`` with root ``"a"`` or ``"a,b"``."""
        root_s, _, bits_s = label.strip().partition("|")
        try:
            root = tuple(int(v) for v in root_s.split(",")) if "," in root_s else int(root_s)
            return cls(root, tuple(int(c) for c in bits_s))
        except ValueError as exc:
            raise IndexSetError(f"cannot parse cell label {label!r}") from exc

    def __str__(self):
        return f"{format_root(self.root)}|{format_bits(self.bits)}"


@dataclass(frozen=True)
class TreeIndex:
    """Element of the tree index set read at level context ``level``."""

    root: object
    bits: tuple = ()
    level: int = 1

    def __post_init__(self):
        object.__setattr__(self, "root", _check_root(self.root))
        object.__setattr__(self, "bits", _check_bits(self.bits))
        if self.level < 1:
            raise IndexSetError(f"level must be >= 1, got {self.level}")
        if len(self.bits) < self.level - 1:
            raise IndexSetError(
                f"index at level {self.level} needs >= {self.level - 1} bits, got {self.bits}"
            )

    @property
    def rank(self):
        return len(self.bits) - self.level + 2

    @property
    def local_bits(self):
        """The ``rank - 1`` bits below the level-l root cell."""
        return self.bits[self.level - 1:]

    @property
    def root_cell(self):
        """The level-l cell this index hangs from."""
        return Cell(self.root, self.bits[: self.level - 1])

    @property
    def cell(self):
        return Cell(self.root, self.bits)

    @property
    def support(self):
        """Cell B_{l,i}: the level-l cell at rank 1, the split parent cell otherwise."""
        if self.rank == 1:
            return Cell(self.root, self.bits)
        return Cell(self.root, self.bits[:-1])

    def is_member(self):
        """Membership in the level-l index set (rank 1, or final bit 0)."""
        return self.rank == 1 or self.bits[-1] == 0

    def parent(self):
        if self.rank < 2:
            raise IndexSetError(f"rank-1 index {self} has no parent")
        return TreeIndex(self.root, self.bits[:-1], self.level)

    def sort_key(self):
        root = self.root if isinstance(self.root, tuple) else (self.root,)
        return (root, self.rank, self.bits)

    def label(self):
        return f"{format_root(self.root)}|{format_bits(self.bits)}"

    @classmethod
    def parse(cls, label, level=1):
        root_s, _, bits_s = label.partition("|")
        root = tuple(int(v) for v in root_s.split(",")) if "," in root_s else int(root_s)
        return cls(root, tuple(int(c) for c in bits_s), level)

    def __str__(self):
        return f"{self.label()}@{self.level}"


def shift_index(index, level):
    """l-shift: reinterpret a level-1 index at level ``level``.

    The first ``level - 1`` bits are absorbed into the root block, so the
    rank drops by ``level - 1``.
    """
    if index.level != 1:
        raise IndexSetError(f"shift_index expects a level-1 index, got level {index.level}")
    if index.rank < level:
        raise IndexSetError(f"rank {index.rank} < target level {level}: not enough bits to shift")
    return TreeIndex(index.root, index.bits, level)


def shift_index_inverse(index):
    return TreeIndex(index.root, index.bits, 1)


@dataclass(frozen=True)
class PartitionCell:
    cell: Cell
    lo: object
    hi: object
    mass: float

    @property
    def level(self):
        return self.cell.level


def parse_window(text):
    """Parse ``"a..b"`` (or ``"a,b"``) into an integer pair."""
    if isinstance(text, (tuple, list)):
        lo, hi = text
    else:
        sep = ".." if ".." in text else ","
        lo, hi = text.split(sep)
    lo, hi = int(lo), int(hi)
    if hi <= lo:
        raise ValueError(f"empty window {lo}..{hi}")
    return lo, hi


class DyadicPartition:
    """The sequence of dyadic m-partitions of a window of S.

    The window is ``[lo, hi)`` in 1D and the square ``[lo, hi)^2`` in 2D,
    with integer endpoints so that level-1 cells are unit cells.
    """

    def __init__(self, measure, window):
        self.measure = measure
        self.dim = measure.dim
        self.window = parse_window(window)
        measure.check_window(*self.window)

    def __repr__(self):
        return f"DyadicPartition({self.measure.kind}, window={self.window})"

    @cached_property
    def roots(self):
        lo, hi = self.window
        if self.dim == 1:
            return list(range(lo, hi))
        return [(a, b) for a in range(lo, hi) for b in range(lo, hi)]

    @cached_property
    def _root_pos(self):
        return {r: k for k, r in enumerate(self.roots)}

    def in_window(self, cell):
        return cell.root in self._root_pos

    # geometry -----------------------------------------------------------

    def bounds(self, cell):
        bits = cell.bits
        if self.dim == 1:
            lo = float(cell.root) + sum(b * 2.0 ** -(p + 1) for p, b in enumerate(bits))
            return lo, lo + 2.0 ** -len(bits)
        x = float(cell.root[0]) + sum(b * 2.0 ** -(p // 2 + 1) for p, b in enumerate(bits) if p % 2 == 0)
        y = float(cell.root[1]) + sum(b * 2.0 ** -(p // 2 + 1) for p, b in enumerate(bits) if p % 2 == 1)
        nx, ny = (len(bits) + 1) // 2, len(bits) // 2
        return np.array([x, y]), np.array([x + 2.0 ** -nx, y + 2.0 ** -ny])

    def mass(self, cell):
        lo, hi = self.bounds(cell)
        return float(self.measure.mass(lo, hi))

    def cell_of(self, index):
        """The partition cell named by ``index`` (a TreeIndex or Cell)."""
        cell = index.cell if isinstance(index, TreeIndex) else index
        lo, hi = self.bounds(cell)
        m = float(self.measure.mass(lo, hi))
        if not m > 0:
            raise PartitionError(f"cell {cell} has zero reference mass")
        return PartitionCell(cell, lo, hi, m)

    def level_cells(self, level):
        """All cells of Delta(level) inside the window, canonical order."""
        n = level - 1
        out = []
        for root in self.roots:
            for k in range(2 ** n):
                out.append(Cell(root, tuple((k >> (n - 1 - p)) & 1 for p in range(n))))
        return out

    def level_bounds(self, level):
        """Vectorized bounds of Delta(level): arrays of shape (ncells,) or (ncells, 2)."""
        n = level - 1
        k = np.arange(2 ** n)
        bits = [(k >> (n - 1 - p)) & 1 for p in range(n)]
        if self.dim == 1:
            off = sum((b * 2.0 ** -(p + 1) for p, b in enumerate(bits)), np.zeros(2 ** n))
            lo = (np.asarray(self.roots, dtype=float)[:, None] + off[None, :]).ravel()
            return lo, lo + 2.0 ** -n
        offx = sum((b * 2.0 ** -(p // 2 + 1) for p, b in enumerate(bits) if p % 2 == 0), np.zeros(2 ** n))
        offy = sum((b * 2.0 ** -(p // 2 + 1) for p, b in enumerate(bits) if p % 2 == 1), np.zeros(2 ** n))
        roots = np.asarray(self.roots, dtype=float)
        lo = np.stack(
            [(roots[:, 0:1] + offx[None, :]).ravel(), (roots[:, 1:2] + offy[None, :]).ravel()],
            axis=-1,
        )
        width = np.array([2.0 ** -((n + 1) // 2), 2.0 ** -(n // 2)])
        return lo, lo + width

    def level_masses(self, level):
        lo, hi = self.level_bounds(level)
        m = self.measure.mass(lo, hi)
        if np.any(~(m > 0)):
            bad = self.level_cells(level)[int(np.argmin(m))]
            raise PartitionError(f"cell {bad} at level {level} has zero reference mass")
        return m

    def flat_index(self, cell, level=None):
        """Position of ``cell`` (or of its first descendant at ``level``) in canonical order."""
        level = cell.level if level is None else level
        depth = level - cell.level
        if depth < 0:
            raise IndexSetError(f"cell {cell} is coarser than level {level}")
        k = 0
        for b in cell.bits:
            k = (k << 1) | b
        return (self._root_pos[cell.root] << (level - 1)) + (k << depth)

    def refine(self, cells):
        """Replace each cell by its two children, checking positive mass."""
        out = []
        for c in cells:
            for child in c.children():
                if not self.mass(child) > 0:
                    raise PartitionError(f"child {child} of {c} has zero reference mass")
                out.append(child)
        return out

    def locate(self, points, level):
        """Flat index of the level-``level`` cell containing each point (-1 outside)."""
        n = level - 1
        lo, hi = self.window
        pts = np.asarray(points, dtype=float)
        if self.dim == 1:
            pts = pts.reshape(-1)
            inside = (pts >= lo) & (pts < hi)
            p = np.where(inside, pts, lo)
            root = np.floor(p).astype(np.int64)
            k = np.floor((p - root) * 2.0 ** n).astype(np.int64)
            k = np.minimum(k, 2 ** n - 1)
            flat = ((root - lo) << n) + k
            return np.where(inside, flat, -1)
        pts = pts.reshape(-1, 2)
        inside = np.all((pts >= lo) & (pts < hi), axis=1)
        p = np.where(inside[:, None], pts, lo)
        root = np.floor(p).astype(np.int64)
        nx, ny = (n + 1) // 2, n // 2
        ix = np.minimum(np.floor((p[:, 0] - root[:, 0]) * 2.0 ** nx).astype(np.int64), 2 ** nx - 1)
        iy = np.minimum(np.floor((p[:, 1] - root[:, 1]) * 2.0 ** ny).astype(np.int64), 2 ** ny - 1)
        k = np.zeros(len(p), dtype=np.int64)
        for q in range(n):
            if q % 2 == 0:
                bit = (ix >> (nx - 1 - q // 2)) & 1
            else:
                bit = (iy >> (ny - 1 - q // 2)) & 1
            k |= bit << (n - 1 - q)
        side = hi - lo
        root_pos = (root[:, 0] - lo) * side + (root[:, 1] - lo)
        return np.where(inside, (root_pos << n) + k, -1)

    def n_cells(self, level):
        return len(self.roots) << (level - 1)

    # index sets ---------------------------------------------------------

    def truncated_index_set(self, level, rank_max):
        """All members of the level-l index set with rank <= rank_max in the window.

        Ordered by root, then rank, then bits.
        """
        if level < 1 or rank_max < 1:
            raise IndexSetError("level and rank_max must be >= 1")
        out = []
        for root in self.roots:
            for rank in range(1, rank_max + 1):
                if rank == 1:
                    n = level - 1
                    for k in range(2 ** n):
                        out.append(TreeIndex(root, tuple((k >> (n - 1 - p)) & 1 for p in range(n)), level))
                else:
                    n = level + rank - 3
                    for k in range(2 ** n):
                        bits = tuple((k >> (n - 1 - p)) & 1 for p in range(n)) + (0,)
                        out.append(TreeIndex(root, bits, level))
        return out
