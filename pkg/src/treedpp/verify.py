"""Numerical checks of the identities behind the tree representation.

Each check returns a :class:`VerificationReport`.  Error budgets are kept as
separate lines (quadrature, truncation, Monte Carlo) and the pass decision
compares the gap against their sum plus the requested tolerance.
"""

from dataclasses import asdict, dataclass, field
import itertools
import json
import math

import numpy as np

from .basis import TruncatedBasis, build_basis_function, restricted_integral
from .errors import IndexSetError, PartitionError
from .quadrature import box_rule
from .rng import stream

MAX_ORDER_M = 3


@dataclass
class VerificationReport:
    identity: str
    lhs: float
    lhs_error: float
    rhs: float
    rhs_error: float
    tolerance: float
    passed: bool
    budget: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def gap(self):
        return abs(self.lhs - self.rhs)

    def to_dict(self):
        d = asdict(self)
        d["gap"] = self.gap
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("gap", None)
        return cls(**d)

    def summary(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.identity}: lhs={self.lhs:.12g} (+-{self.lhs_error:.2g}) "
                f"rhs={self.rhs:.12g} (+-{self.rhs_error:.2g}) gap={self.gap:.3g} tol={self.tolerance:.3g}")


def _cycles(perm):
    seen = [False] * len(perm)
    out = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        cyc = []
        p = start
        while not seen[p]:
            seen[p] = True
            cyc.append(p)
            p = perm[p]
        out.append(cyc)
    return out


def _sign(perm):
    return -1 if sum(len(c) - 1 for c in _cycles(perm)) % 2 else 1


def det_block_sum(block):
    """sum over x_1 in X_1, ..., x_m in X_m of det[B(x_p, x_q)].

    ``block(p, q)`` returns the matrix B restricted to X_p x X_q.  Expanding
    the determinant over permutations, each term factorizes over cycles
    into traces of block products.
    """
    m = block.m
    total = 0.0
    for perm in itertools.permutations(range(m)):
        term = 1.0
        for cyc in _cycles(perm):
            prod = block(cyc[0], perm[cyc[0]])
            for p in cyc[1:]:
                prod = prod @ block(p, perm[p])
            term = term * np.trace(prod)
        total = total + _sign(perm) * term
    return total


class _Blocks:
    def __init__(self, m, fn):
        self.m = m
        self._fn = fn
        self._cache = {}

    def __call__(self, p, q):
        if (p, q) not in self._cache:
            self._cache[(p, q)] = self._fn(p, q)
        return self._cache[(p, q)]


def _check_cells(cells, partition, level):
    if not 1 <= len(cells) <= MAX_ORDER_M:
        raise ValueError(f"correlation order m must be in 1..{MAX_ORDER_M}, got {len(cells)}")
    for c in cells:
        if c.level != level or not partition.in_window(c):
            raise PartitionError(f"{c} is not a level-{level} cell of the window")


def _subdivisions(kernel, level):
    """Splits per level-l cell so that piecewise-constant kernels are integrated exactly."""
    res = getattr(kernel, "resolution_level", None)
    if res is None:
        return 2
    return max(res - level, 0)


def _mass_rule(cells, partition, level, shift):
    """One node per level-``level`` descendant, weighted by its exact mass.

    Exact for integrands constant on those descendants; ``shift`` in (0, 1)
    places the node inside the subcell (0.5 = centre).
    """
    lo, hi = partition.level_bounds(level)
    mass = partition.level_masses(level)
    nodes, weights = [], []
    for c in cells:
        start = partition.flat_index(c, level)
        stop = start + (1 << (level - c.level))
        nodes.append(lo[start:stop] + shift * (hi[start:stop] - lo[start:stop]))
        weights.append(mass[start:stop])
    return np.concatenate(nodes), np.concatenate(weights)


def _det_integral(kernel, rules):
    sq = [np.sqrt(w) for _, w in rules]

    def blk(p, q):
        return sq[p][:, None] * kernel.matrix(rules[p][0], rules[q][0]) * sq[q][None, :]

    return det_block_sum(_Blocks(len(rules), blk))


def correlation_integral(kernel, partition, cells, order=16, subdivide=2):
    """int_{A_1 x ... x A_m} det[K(x_p, x_q)] dm^m by a composite tensor rule."""
    return _det_integral(kernel, [box_rule([c], partition, order, kernel.quad_map, subdivide) for c in cells])


def _lhs_with_error(kernel, partition, cells, order):
    res = getattr(kernel, "resolution_level", None)
    if res is not None:
        # piecewise-constant kernel: mass-weighted nodes on its resolution cells are exact
        level = max(res, cells[0].level)
        a = _det_integral(kernel, [_mass_rule([c], partition, level, 0.5) for c in cells])
        b = _det_integral(kernel, [_mass_rule([c], partition, level, 0.25) for c in cells])
        return complex(a), abs(complex(a) - complex(b))
    sub = _subdivisions(kernel, cells[0].level)
    a = correlation_integral(kernel, partition, cells, order, sub)
    b = correlation_integral(kernel, partition, cells, order, sub + 1)
    return complex(b), abs(complex(b) - complex(a))


def projected_sum(P, cells):
    """sum over i_p in I_l(A_p) of det[K_F(i_p, i_q)]."""
    sets = [P.basis.supported_in(c) for c in cells]

    def blk(p, q):
        return P.matrix[np.ix_(sets[p], sets[q])]

    return complex(det_block_sum(_Blocks(len(cells), blk))), [len(s) for s in sets]


def correlation_identity(kernel, P, cells, tol=1e-10, order=16):
    """Compare the m-point correlation integral over A_1 x ... x A_m with the
    determinant sum of the projected kernel over indices supported in the A_p.
    """
    partition = P.basis.partition
    level = P.basis.level
    _check_cells(cells, partition, level)
    lhs, lhs_err = _lhs_with_error(kernel, partition, cells, order)
    rhs, sizes = projected_sum(P, cells)
    rhs_err = float(P.metadata.get("quadrature", {}).get("error_estimate", 0.0)) * max(sizes) ** len(cells)
    gap = abs(lhs - rhs)
    budget = {"lhs_quadrature": lhs_err, "rhs_quadrature": rhs_err, "truncation_gap": gap,
              "requested": tol}
    tolerance = tol + lhs_err + rhs_err
    meta = dict(P.metadata)
    meta.update({"cells": [str(c) for c in cells], "m": len(cells)})
    return VerificationReport(
        identity=f"correlation m={len(cells)}",
        lhs=float(lhs.real), lhs_error=lhs_err, rhs=float(rhs.real), rhs_error=rhs_err,
        tolerance=tolerance, passed=bool(gap <= tolerance), budget=budget, metadata=meta,
        details={"lhs_imag": float(lhs.imag), "rhs_imag": float(rhs.imag), "index_counts": sizes},
    )


def orthogonality_integral(partition, i, j, cell):
    """int_A f_i conj(f_j) dm, computed exactly from the piecewise-constant form."""
    fi = build_basis_function(i, partition)
    fj = fi if j == i else build_basis_function(j, partition)
    return restricted_integral(fi, fj, partition, region=cell)


def orthogonality_expected(i, j, cell):
    return 1.0 if (i == j and cell.contains(i.support)) else 0.0


def orthogonality_table(basis):
    """All restricted Gram matrices int_A f_i f_j dm, one per level-l cell A.

    Returns the cells, an array of shape (ncells, N, N) and the expected
    0/1 pattern of the same shape.
    """
    part = basis.partition
    L = basis.finest_level
    phi = basis.design
    w = basis.cell_masses
    cells = part.level_cells(basis.level)
    span = 1 << (L - basis.level)
    values = np.empty((len(cells), len(basis), len(basis)))
    expected = np.zeros_like(values)
    for a, cell in enumerate(cells):
        rows = slice(a * span, (a + 1) * span)
        values[a] = phi[rows].T @ (w[rows, None] * phi[rows])
        inside = basis.supported_in(cell)
        expected[a, inside, inside] = 1.0
    return cells, values, expected


def orthogonality_check(partition, level, rank_max, tol=1e-12):
    basis = TruncatedBasis(partition, level, rank_max)
    cells, values, expected = orthogonality_table(basis)
    err = float(np.max(np.abs(values - expected))) if values.size else 0.0
    n = len(basis)
    return VerificationReport(
        identity="restricted orthogonality",
        lhs=err, lhs_error=0.0, rhs=0.0, rhs_error=0.0, tolerance=tol, passed=bool(err <= tol),
        budget={"max_abs_error": err, "requested": tol},
        metadata={"measure": partition.measure.kind, "window": list(partition.window),
                  "level": level, "rank_max": rank_max},
        details={"triples": len(cells) * n * n, "functions": n, "cells": len(cells)},
    )


def falling_factorial(n, k):
    out = np.ones_like(n, dtype=float)
    for r in range(k):
        out = out * (n - r)
    return out


def factorial_moment_check(kernel, P, cells, mults, draws, seed=0, threads=1, order=16, extra_tol=0.0):
    """Empirical E[prod s(A_p)_(k_p)] over lifted draws vs the integral of rho^m."""
    from .lift import TreeLift

    partition = P.basis.partition
    level = P.basis.level
    if len(cells) != len(mults) or any(k < 1 for k in mults):
        raise ValueError("need one multiplicity >= 1 per cell")
    if len(set(cells)) != len(cells):
        raise IndexSetError("factorial moments need disjoint cells")
    for a, b in itertools.combinations(cells, 2):
        if a.contains(b) or b.contains(a):
            raise IndexSetError(f"cells {a} and {b} overlap")
    repeated = [c for c, k in zip(cells, mults) for _ in range(k)]
    _check_cells(repeated, partition, level)
    quad, quad_err = _lhs_with_error(kernel, partition, repeated, order)
    rhs, _ = projected_sum(P, repeated)
    truncation = abs(quad - rhs)
    batch = TreeLift(P).sample(draws, seed, threads, stream_id=0)
    counts = batch.counts(partition, level)
    pos = [partition.flat_index(c) for c in cells]
    vals = np.ones(draws)
    for p, k in zip(pos, mults):
        vals = vals * falling_factorial(counts[:, p], k)
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(draws)) if draws > 1 else float("inf")
    budget = {"quadrature": quad_err, "truncation_gap": float(truncation), "mc_3sigma": 3 * se,
              "requested": extra_tol}
    tolerance = quad_err + float(truncation) + 3 * se + extra_tol
    meta = dict(P.metadata)
    meta.update({"cells": [str(c) for c in cells], "multiplicities": list(mults), "draws": draws, "seed": seed})
    return VerificationReport(
        identity=f"factorial moment m={sum(mults)}",
        lhs=float(quad.real), lhs_error=quad_err, rhs=mean, rhs_error=se,
        tolerance=tolerance, passed=bool(abs(quad.real - mean) <= tolerance), budget=budget, metadata=meta,
        details={"projected": float(rhs.real)},
    )


def aggregate_counts(fine_counts, level, level_fine):
    """Level-l counts from level-l' counts: children of flat cell c are contiguous."""
    fine_counts = np.asarray(fine_counts)
    span = 1 << (level_fine - level)
    return fine_counts.reshape(fine_counts.shape[:-1] + (-1, span)).sum(axis=-1)


def random_configurations(partition, n_configs, n_points, seed):
    rng = stream(seed, 7)
    lo, hi = partition.window
    shape = (n_configs, n_points) if partition.dim == 1 else (n_configs, n_points, 2)
    return rng.uniform(lo, hi, size=shape)


def refinement_check(partition, level, level_fine, n_configs=1000, n_points=100, seed=0):
    """Level-l counts as a function of level-l' counts, against a direct recount."""
    if level_fine < level:
        raise ValueError("level_fine must be >= level")
    configs = random_configurations(partition, n_configs, n_points, seed)
    mismatches = 0
    nc, nf = partition.n_cells(level), partition.n_cells(level_fine)
    for pts in configs:
        fine = np.bincount(partition.locate(pts, level_fine), minlength=nf)
        direct = np.bincount(partition.locate(pts, level), minlength=nc)
        if not np.array_equal(aggregate_counts(fine, level, level_fine), direct):
            mismatches += 1
    return VerificationReport(
        identity="refinement",
        lhs=float(mismatches), lhs_error=0.0, rhs=0.0, rhs_error=0.0, tolerance=0.0,
        passed=mismatches == 0, budget={"mismatches": mismatches},
        metadata={"measure": partition.measure.kind, "window": list(partition.window), "level": level,
                  "level_fine": level_fine, "configs": n_configs, "points": n_points, "seed": seed},
    )
