"""Exact determinantal point processes on finite index sets.

Sampling uses the spectral algorithm: decompose K = sum lam_k v_k v_k^*,
keep each eigenvector independently with probability lam_k, then draw
points one at a time from the projection kernel of the kept vectors,
eliminating the chosen coordinate and re-orthonormalizing (Gram-Schmidt)
after each draw.
"""

from collections import Counter
from dataclasses import dataclass
import itertools

import numba
import numpy as np

from .errors import IndexSetError, NumericError, SpectrumError
from .rng import CHUNK, map_chunks, stream

SPECTRUM_EPS = 1e-8
MAX_ENUMERATION = 20


@numba.njit(cache=True, nogil=True)
def _gram_schmidt(V, ncols):
    n = V.shape[0]
    for c in range(ncols):
        for _ in range(2):
            for d in range(c):
                s = 0j
                for i in range(n):
                    s += np.conj(V[i, d]) * V[i, c]
                for i in range(n):
                    V[i, c] -= s * V[i, d]
        norm = 0.0
        for i in range(n):
            norm += V[i, c].real ** 2 + V[i, c].imag ** 2
        norm = np.sqrt(norm)
        for i in range(n):
            V[i, c] /= norm


@numba.njit(cache=True, nogil=True)
def _spectral_batch(vecs, lam, u_sel, u_pick, out, sizes):
    n_draws, N = u_sel.shape
    V = np.empty((N, N), dtype=np.complex128)
    p = np.empty(N)
    for t in range(n_draws):
        k = 0
        for j in range(N):
            if u_sel[t, j] < lam[j]:
                for i in range(N):
                    V[i, k] = vecs[i, j]
                k += 1
        count = 0
        for step in range(k):
            kk = k - step
            total = 0.0
            last = -1
            for i in range(N):
                s = 0.0
                for c in range(kk):
                    s += V[i, c].real ** 2 + V[i, c].imag ** 2
                p[i] = s
                total += s
                if s > 0.0:
                    last = i
            target = u_pick[t, step] * total
            acc = 0.0
            chosen = last
            for i in range(N):
                acc += p[i]
                if acc > target and p[i] > 0.0:
                    chosen = i
                    break
            out[t, count] = chosen
            count += 1
            if kk == 1:
                break
            j = 0
            best = -1.0
            for c in range(kk):
                a = abs(V[chosen, c])
                if a > best:
                    best = a
                    j = c
            pivot = V[chosen, j]
            for c in range(kk):
                if c == j:
                    continue
                f = V[chosen, c] / pivot
                for i in range(N):
                    V[i, c] -= f * V[i, j]
                V[chosen, c] = 0.0
            for i in range(N):
                V[i, j] = V[i, kk - 1]
            _gram_schmidt(V, kk - 1)
            for c in range(kk - 1):
                V[chosen, c] = 0.0
        sizes[t] = count
        out[t, :count] = np.sort(out[t, :count])


@dataclass(frozen=True)
class Configurations:
    """A batch of finite configurations stored as flat values plus offsets."""

    flat: np.ndarray
    offsets: np.ndarray

    def __len__(self):
        return len(self.offsets) - 1

    def __getitem__(self, k):
        return self.flat[self.offsets[k]:self.offsets[k + 1]]

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    @property
    def sizes(self):
        return np.diff(self.offsets)

    @classmethod
    def concatenate(cls, parts):
        flats = [p.flat for p in parts]
        offs = [np.zeros(1, dtype=np.int64)]
        base = 0
        for p in parts:
            offs.append(p.offsets[1:] + base)
            base += p.offsets[-1]
        return cls(np.concatenate(flats) if flats else np.zeros(0, dtype=np.int64), np.concatenate(offs))


def clip_spectrum(lam, eps=SPECTRUM_EPS):
    if lam.size and (lam.min() < -eps or lam.max() > 1 + eps):
        raise SpectrumError(f"eigenvalues [{lam.min():.3e}, {lam.max():.3e}] leave [-{eps}, 1+{eps}]")
    return np.clip(lam, 0.0, 1.0)


class DiscreteDPP:
    """DPP on {0, ..., N-1} with Hermitian kernel 0 <= K <= I.

    ``labels`` optionally names the ground-set elements (e.g. tree indices).
    """

    def __init__(self, kernel, labels=None, eps=SPECTRUM_EPS):
        K = np.asarray(kernel)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError("kernel must be a square matrix")
        if K.size and np.max(np.abs(K - K.conj().T)) > 1e-10:
            raise NumericError("kernel is not Hermitian")
        self.kernel = 0.5 * (K + K.conj().T)
        self.labels = list(labels) if labels is not None else list(range(len(K)))
        lam, vec = np.linalg.eigh(self.kernel)
        self.raw_eigenvalues = lam
        self.eigenvalues = clip_spectrum(lam, eps)
        self.eigenvectors = np.ascontiguousarray(vec, dtype=np.complex128)

    @classmethod
    def from_projected(cls, P):
        dpp = cls.__new__(cls)
        dpp.kernel = P.matrix
        dpp.labels = list(P.indices)
        dpp.raw_eigenvalues = P.eigenvalues
        dpp.eigenvalues = P.clipped_eigenvalues()
        dpp.eigenvectors = np.ascontiguousarray(P.eigenvectors, dtype=np.complex128)
        return dpp

    def __len__(self):
        return len(self.kernel)

    def _draw(self, rng, count):
        N = len(self)
        u_sel = rng.random((count, N))
        u_pick = rng.random((count, N))
        out = np.full((count, max(N, 1)), -1, dtype=np.int64)
        sizes = np.zeros(count, dtype=np.int64)
        if N:
            _spectral_batch(self.eigenvectors, self.eigenvalues, u_sel, u_pick, out, sizes)
        mask = np.arange(out.shape[1])[None, :] < sizes[:, None]
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        return Configurations(out[mask], offsets)

    def sample(self, rng):
        """One draw, as a sorted array of ground-set positions."""
        return self._draw(rng, 1)[0]

    def sample_many(self, n, seed=0, threads=1, stream_id=0, chunk=CHUNK):
        """``n`` draws; chunk ``c`` uses stream key (stream_id, c)."""
        parts = map_chunks(lambda c, start, count: self._draw(stream(seed, stream_id, c), count),
                           n, threads, chunk)
        return Configurations.concatenate(parts)

    def correlation(self, positions):
        """rho(i_1, ..., i_m) = det K restricted to the tuple."""
        positions = list(positions)
        if len(set(positions)) != len(positions):
            raise IndexSetError("correlation functions are defined for distinct indices only")
        if not positions:
            return 1.0
        sub = self.kernel[np.ix_(positions, positions)]
        return float(np.real(np.linalg.det(sub)))

    def enumerate_law(self):
        """P(sample == A) for every subset A, by P(A) = |det(K - I_{A^c})|."""
        N = len(self)
        if N > MAX_ENUMERATION:
            raise ValueError(f"ground set of size {N} exceeds the enumeration limit {MAX_ENUMERATION}")
        law = {}
        masks = np.arange(2 ** N)
        bits = ((masks[:, None] >> np.arange(N)[None, :]) & 1).astype(bool)
        eye = np.eye(N)
        step = max(1, 2 ** 22 // max(N * N, 1))
        for start in range(0, len(masks), step):
            b = bits[start:start + step]
            mats = self.kernel[None, :, :] - eye[None, :, :] * (~b)[:, None, :]
            probs = np.abs(np.linalg.det(mats)) if N else np.ones(len(b))
            for row, pr in zip(b, probs):
                law[tuple(np.flatnonzero(row).tolist())] = float(pr)
        return law

    def cardinality_law(self):
        """Law of the number of points: sum of independent Bernoulli(lam_k)."""
        dist = np.array([1.0])
        for lam in self.eigenvalues:
            dist = np.convolve(dist, [1.0 - lam, lam])
        return dist

    def count_statistics(self, groups, n, seed=0, threads=1, stream_id=0):
        """Histogram of per-group count vectors over ``n`` draws.

        ``groups[k]`` is the group (e.g. level-l cell) of ground-set element k.
        """
        groups = np.asarray(groups)
        n_groups = int(groups.max()) + 1 if groups.size else 0
        configs = self.sample_many(n, seed, threads, stream_id)
        return count_histogram(configs, groups, n_groups)


def count_histogram(configs, groups, n_groups):
    owner = np.repeat(np.arange(len(configs)), configs.sizes)
    counts = np.zeros((len(configs), n_groups), dtype=np.int64)
    np.add.at(counts, (owner, groups[configs.flat]), 1)
    return Counter(map(tuple, counts.tolist()))


def law_from_enumeration(law, groups, n_groups):
    """Push an enumerated subset law forward to per-group count vectors."""
    out = Counter()
    for subset, prob in law.items():
        vec = [0] * n_groups
        for k in subset:
            vec[groups[k]] += 1
        out[tuple(vec)] += prob
    return out


def random_kernel(rng, n, complex_valued=True):
    """Random Hermitian kernel with spectrum uniform in [0, 1]."""
    A = rng.standard_normal((n, n)) + (1j * rng.standard_normal((n, n)) if complex_valued else 0)
    Q, _ = np.linalg.qr(A)
    lam = rng.uniform(0, 1, n)
    K = (Q * lam) @ Q.conj().T
    return 0.5 * (K + K.conj().T)


def all_subsets(n):
    return [s for r in range(n + 1) for s in itertools.combinations(range(n), r)]
