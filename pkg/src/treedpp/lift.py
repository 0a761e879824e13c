"""The lifted (marked) point process on Omega(l) and its unlabeled pushforward.

A lifted draw picks tree indices from the discrete DPP with kernel K_F and
then, independently for each picked index i, places one point s_i in the
support cell of f_{l,i} with law |f_{l,i}|^2 dm.  Forgetting the indices
gives a point configuration on S whose level-l cell counts have the law of
the continuous process restricted to those counts.
"""

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dpp import Configurations, DiscreteDPP
from .errors import IndexSetError
from .rng import CHUNK, map_chunks, stream


@dataclass(frozen=True)
class LiftedSample:
    """omega = sum delta_{(i, s_i)}: picked indices with their marks."""

    indices: tuple
    points: np.ndarray

    def __len__(self):
        return len(self.indices)


def unlabel(omega):
    """Forget the indices: the multiset of marks as an array of points."""
    return np.array(omega.points, copy=True)


def cell_counts(points, partition, level):
    """Number of points in each level-l cell of the window (canonical order)."""
    flat = partition.locate(points, level)
    if np.any(flat < 0):
        raise IndexSetError("configuration has points outside the partition window")
    return np.bincount(flat, minlength=partition.n_cells(level))


class MarkTable:
    """Per-index mark densities packed for vectorized sampling."""

    def __init__(self, basis):
        self.basis = basis
        n = len(basis)
        dim = basis.partition.dim
        shape = (n, 2) if dim == 1 else (n, 2, 2)
        self.lo = np.zeros(shape)
        self.hi = np.zeros(shape)
        self.p_first = np.ones(n)
        for k, f in enumerate(basis.functions):
            dens = f.mark_density()
            for j, (piece, _) in enumerate(dens):
                self.lo[k, j] = piece.lo
                self.hi[k, j] = piece.hi
            if len(dens) == 1:
                self.lo[k, 1] = self.lo[k, 0]
                self.hi[k, 1] = self.hi[k, 0]
            else:
                self.p_first[k] = dens[0][1] / (dens[0][1] + dens[1][1])

    def sample(self, positions, rng):
        """One mark per entry of ``positions`` (indices into the basis)."""
        measure = self.basis.partition.measure
        u_piece = rng.random(len(positions))
        second = (u_piece >= self.p_first[positions]).astype(int)
        lo = self.lo[positions, second]
        hi = self.hi[positions, second]
        u = rng.random(lo.shape)
        return measure.sample_in(lo, hi, u), second


@dataclass(frozen=True)
class LiftedBatch:
    """Many lifted draws: index positions and marks in flat storage."""

    configs: Configurations
    points: np.ndarray
    pieces: np.ndarray
    labels: list

    def __len__(self):
        return len(self.configs)

    def __getitem__(self, k):
        a, b = self.configs.offsets[k], self.configs.offsets[k + 1]
        return LiftedSample(tuple(self.labels[j] for j in self.configs.flat[a:b]), self.points[a:b])

    def counts(self, partition, level):
        """Level-l cell counts of the unlabeled configurations, shape (ndraws, ncells)."""
        flat = partition.locate(self.points, level)
        if np.any(flat < 0):
            raise IndexSetError("lifted marks fall outside the partition window")
        owner = np.repeat(np.arange(len(self)), self.configs.sizes)
        out = np.zeros((len(self), partition.n_cells(level)), dtype=np.int64)
        np.add.at(out, (owner, flat), 1)
        return out


class TreeLift:
    """Sampler for the lift of a projected kernel at its level."""

    def __init__(self, projected):
        self.projected = projected
        self.basis = projected.basis
        self.dpp = DiscreteDPP.from_projected(projected)
        self.marks = MarkTable(self.basis)

    def _draw(self, seed, stream_id, c, count):
        configs = self.dpp._draw(stream(seed, stream_id, c, 0), count)
        points, pieces = self.marks.sample(configs.flat, stream(seed, stream_id, c, 1))
        return configs, points, pieces

    def sample(self, n, seed=0, threads=1, stream_id=0, chunk=CHUNK):
        parts = map_chunks(lambda c, start, count: self._draw(seed, stream_id, c, count), n, threads, chunk)
        configs = Configurations.concatenate([p[0] for p in parts])
        dim = self.basis.partition.dim
        empty = np.zeros((0,) if dim == 1 else (0, 2))
        points = np.concatenate([p[1] for p in parts]) if parts else empty
        pieces = np.concatenate([p[2] for p in parts]) if parts else np.zeros(0, dtype=int)
        batch = LiftedBatch(configs, points, pieces, self.projected.indices)
        check_support(batch, self.basis)
        return batch

    def sample_one(self, rng):
        positions = self.dpp.sample(rng)
        points, _ = self.marks.sample(positions, rng)
        return LiftedSample(tuple(self.projected.indices[j] for j in positions), points)


def check_support(batch, basis):
    """Every mark must lie in the support cell of its index."""
    part = basis.partition
    if not len(batch.points):
        return
    supp_lo = np.array([part.bounds(f.support)[0] for f in basis.functions])
    supp_hi = np.array([part.bounds(f.support)[1] for f in basis.functions])
    lo = supp_lo[batch.configs.flat]
    hi = supp_hi[batch.configs.flat]
    inside = (batch.points >= lo) & (batch.points < hi)
    if inside.ndim > 1:
        inside = np.all(inside, axis=-1)
    if not np.all(inside):
        raise AssertionError("a lifted mark left the support cell of its index")


def count_law(counts):
    return Counter(map(tuple, np.asarray(counts).tolist()))


def compare_laws(law_a, n_a, law_b, n_b, min_expected=5.0):
    """Per-outcome 3-sigma comparison and chi-square homogeneity test.

    ``law_a``/``law_b`` are Counters of outcome -> number of draws.
    Outcomes whose pooled expected count is below ``min_expected`` in either
    sample are merged into one bin before the chi-square test.
    """
    outcomes = sorted(set(law_a) | set(law_b))
    rows = []
    worst = 0.0
    for o in outcomes:
        fa, fb = law_a.get(o, 0) / n_a, law_b.get(o, 0) / n_b
        pooled = (law_a.get(o, 0) + law_b.get(o, 0)) / (n_a + n_b)
        sigma = np.sqrt(pooled * (1 - pooled) * (1 / n_a + 1 / n_b))
        z = abs(fa - fb) / sigma if sigma > 0 else 0.0
        worst = max(worst, z)
        rows.append({"outcome": o, "freq_a": fa, "freq_b": fb, "sigma": sigma, "z": z})
    big, small_a, small_b = [], 0, 0
    for o in outcomes:
        pooled = (law_a.get(o, 0) + law_b.get(o, 0)) / (n_a + n_b)
        if pooled * min(n_a, n_b) >= min_expected:
            big.append((law_a.get(o, 0), law_b.get(o, 0)))
        else:
            small_a += law_a.get(o, 0)
            small_b += law_b.get(o, 0)
    if small_a + small_b > 0:
        big.append((small_a, small_b))
    if len(big) >= 2:
        table = np.array(big, dtype=float).T
        chi2, p_value, dof, _ = stats.chi2_contingency(table, correction=False)
    else:
        chi2, p_value, dof = 0.0, 1.0, 0
    return {"rows": rows, "max_z": worst, "chi2": float(chi2), "dof": int(dof), "p_value": float(p_value)}


def compare_to_exact(law, n, exact):
    """Per-outcome 3-sigma binomial check of empirical counts against an exact law."""
    outcomes = sorted(set(law) | set(exact))
    rows = []
    worst = 0.0
    for o in outcomes:
        p = exact.get(o, 0.0)
        f = law.get(o, 0) / n
        sigma = np.sqrt(max(p * (1 - p), 0.0) / n)
        z = abs(f - p) / sigma if sigma > 0 else (0.0 if abs(f - p) < 1e-12 else np.inf)
        worst = max(worst, z)
        rows.append({"outcome": o, "freq": f, "exact": p, "sigma": sigma, "z": z})
    return {"rows": rows, "max_z": worst}


def consistency_experiment(kernel, partition, level, level_fine, rank_max, draws, seed=0,
                           threads=1, order=16, tol=1e-10, exact=False, rank_max_fine=None):
    """Sample the lift at two levels and compare their level-l count laws.

    With ``exact=True`` (finite-rank kernels) the level-l law is also
    computed exactly by enumeration of the coarse projected kernel.
    """
    from .basis import TruncatedBasis
    from .projection import project_kernel

    if level_fine <= level:
        raise ValueError("level_fine must exceed level")
    rank_max_fine = rank_max if rank_max_fine is None else rank_max_fine
    out = {"level": level, "level_fine": level_fine, "rank_max": rank_max,
           "rank_max_fine": rank_max_fine, "draws": draws, "seed": seed}
    laws = []
    projected = []
    for stream_id, (lv, R) in enumerate(((level, rank_max), (level_fine, rank_max_fine))):
        basis = TruncatedBasis(partition, lv, R)
        if exact and lv + R - 1 < kernel.resolution_level:
            raise ValueError(
                f"truncation (level {lv}, rank <= {R}) is too coarse for the fixture span "
                f"(resolution level {kernel.resolution_level})"
            )
        P = project_kernel(kernel, basis, order, tol)
        projected.append(P)
        batch = TreeLift(P).sample(draws, seed, threads, stream_id=stream_id)
        laws.append(count_law(batch.counts(partition, level)))
    out["law_coarse"] = {str(k): v for k, v in sorted(laws[0].items())}
    out["law_fine"] = {str(k): v for k, v in sorted(laws[1].items())}
    out["comparison"] = compare_laws(laws[0], draws, laws[1], draws)
    if exact:
        out["exact"] = exact_count_law(projected[0], partition, level)
        out["exact_coarse"] = compare_to_exact(laws[0], draws, out["exact"])
        out["exact_fine"] = compare_to_exact(laws[1], draws, out["exact"])
    return out


def exact_count_law(P, partition, level):
    """Exact level-l count law of the lift, by enumeration on the active indices.

    Indices whose row and column of K_F vanish are never picked, so only the
    active ones are enumerated.
    """
    from .dpp import law_from_enumeration

    active = np.flatnonzero(np.max(np.abs(P.matrix), axis=1) > 1e-14)
    sub = P.matrix[np.ix_(active, active)]
    dpp = DiscreteDPP(sub)
    groups = np.array([partition.flat_index(P.indices[k].support.ancestor(level)) for k in active], dtype=int)
    return dict(law_from_enumeration(dpp.enumerate_law(), groups, partition.n_cells(level)))
