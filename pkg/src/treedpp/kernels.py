"""Continuous determinantal kernels K(x, y) with their reference measures.

Sine, Airy and Bessel kernels are defined off the diagonal by a quotient
and on (and near) the diagonal by continuity.  Near the diagonal the
quotient suffers cancellation, so each kernel switches to a Taylor
expansion of the quotient inside a small band around x = y.
"""

import math

import numpy as np
from numpy.polynomial import Polynomial
from scipy import special

from .basis import cell_integral
from .errors import DomainError, IndexSetError, KernelRangeError, NumericError
from .measures import GaussianPlane, Lebesgue1D, LebesgueHalfLine

SINE_BAND = 1e-6
AIRY_BAND = 1e-3
BESSEL_BAND = 1e-3
_SERIES_TERMS = 8
# exp(x conj(y)) overflows float64 past Re(x conj y) ~ 709
GINIBRE_MAX_PRODUCT = 700.0


def _finite(values, what):
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        raise NumericError(f"{what} evaluation produced non-finite values")
    return values


# sine ---------------------------------------------------------------------

def sine_kernel(x, y):
    """sin(x - y) / (pi (x - y)); 1/pi on the diagonal."""
    t = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    small = np.abs(t) < SINE_BAND
    ts = np.where(small, 1.0, t)
    # dropped t^4/120 term is below 1e-25 inside the band
    return np.where(small, (1.0 - t * t / 6.0) / math.pi, np.sin(ts) / (math.pi * ts))


# Airy ---------------------------------------------------------------------

def _airy_series_polys(n):
    """p_k, q_k with Ai^{(k)} = p_k Ai + q_k Ai', k = 0..n."""
    p, q = [Polynomial([1.0])], [Polynomial([0.0])]
    x = Polynomial([0.0, 1.0])
    for _ in range(n):
        p, q = p + [p[-1].deriv() + x * q[-1]], q + [p[-1] + q[-1].deriv()]
    return p, q


_AIRY_P, _AIRY_Q = _airy_series_polys(_SERIES_TERMS + 1)


def airy_values(x):
    ai, aip, _, _ = special.airy(np.asarray(x, dtype=float))
    return _finite(ai, "Airy Ai"), _finite(aip, "Airy Ai'")


def _airy_near_diagonal(x, d, ai, aip):
    # K(x, x + d) = -sum_k d^{k-1}/k! c_k(x)
    out = np.zeros(np.broadcast(x, d).shape)
    for k in range(_SERIES_TERMS, 0, -1):
        c = (_AIRY_P[k + 1](x) * ai * ai + (_AIRY_Q[k + 1](x) - _AIRY_P[k](x)) * ai * aip
             - _AIRY_Q[k](x) * aip * aip)
        out = out * d + c / math.factorial(k)
    return -out


def _airy_from_values(x, y, ax, apx, ay, apy):
    d = y - x
    small = np.abs(d) < AIRY_BAND
    ds = np.where(small, 1.0, d)
    off = (ax * apy - apx * ay) / (-ds)
    near = _airy_near_diagonal(x, d, ax, apx)
    return np.where(small, near, off)


def airy_kernel(x, y):
    """(Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x - y); Ai'(x)^2 - x Ai(x)^2 on the diagonal."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ax, apx = airy_values(x)
    ay, apy = airy_values(y)
    return _airy_from_values(x, y, ax, apx, ay, apy)


# Bessel -------------------------------------------------------------------

def _bessel_check(alpha, *arrays):
    if not alpha >= 1:
        raise DomainError(f"Bessel kernel needs alpha >= 1, got {alpha}")
    for a in arrays:
        if np.any(np.asarray(a) < 0):
            raise DomainError("Bessel kernel is defined on [0, inf); got a negative argument")


def _bessel_near_diagonal(alpha, u, d):
    # N(u, u + d) = sum_k d^k/k! (J phi^(k) - phi J^(k)),  phi(u) = u J'(u)
    jd = [special.jvp(alpha, u, k) for k in range(_SERIES_TERMS + 2)]
    phi0 = u * jd[1]
    total = np.zeros(np.broadcast(u, d).shape)
    for k in range(_SERIES_TERMS, 0, -1):
        phik = u * jd[k + 1] + k * jd[k]
        total = total * d + (jd[0] * phik - phi0 * jd[k]) / math.factorial(k)
    s = 2.0 * u + d
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -total / (2.0 * s)
    return np.where(s > 0, out, 0.0)


def bessel_kernel(alpha, x, y):
    """Bessel kernel of order alpha >= 1 on [0, inf)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _bessel_check(alpha, x, y)
    u, v = np.sqrt(x), np.sqrt(y)
    ju, jv = special.jv(alpha, u), special.jv(alpha, v)
    phu, phv = u * special.jvp(alpha, u), v * special.jvp(alpha, v)
    _finite(ju, "Bessel J"), _finite(jv, "Bessel J")
    return _bessel_from_values(alpha, x, y, u, v, ju, jv, phu, phv)


def _bessel_from_values(alpha, x, y, u, v, ju, jv, phu, phv):
    d = v - u
    small = np.abs(d) < BESSEL_BAND
    den = np.where(small, 1.0, 2.0 * (x - y))
    off = (ju * phv - phu * jv) / den
    if np.any(small):
        near = _bessel_near_diagonal(alpha, np.broadcast_to(u, d.shape)[small], d[small])
        off = np.array(off, dtype=float, copy=True)
        off[small] = near
    return off


# Ginibre ------------------------------------------------------------------

def as_complex(x):
    x = np.asarray(x, dtype=float)
    return x[..., 0] + 1j * x[..., 1]


def ginibre_kernel(x, y):
    """exp(x conj(y)) with R^2 identified with C."""
    zx, zy = as_complex(x), as_complex(y)
    if np.any(np.abs(zx) * np.abs(zy) > GINIBRE_MAX_PRODUCT):
        raise KernelRangeError(f"|x||y| exceeds {GINIBRE_MAX_PRODUCT}; exp(x conj y) would overflow")
    return np.exp(zx * np.conj(zy))


# kernel objects -----------------------------------------------------------

class ContinuousKernel:
    """A kernel together with its reference measure.

    ``quad_map`` tells quadrature which coordinate to place nodes in:
    ``"identity"`` or ``"sqrt"`` (nodes uniform in sqrt(x), for kernels
    with sqrt-type behaviour at 0).
    """

    name = None
    dim = 1
    is_real = True
    quad_map = "identity"
    translation_invariant = False

    def __init__(self, measure, eval_window):
        self.measure = measure
        self.eval_window = eval_window

    def params(self):
        return {"name": self.name}

    def evaluate(self, x, y):
        raise NotImplementedError

    def matrix(self, x, y):
        """K(x_a, y_b) for all pairs; points are (n,) in 1D or (n, 2) in 2D."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.dim == 1:
            return self.evaluate(x[:, None], y[None, :])
        return self.evaluate(x[:, None, :], y[None, :, :])

    def diagonal(self, x):
        return self.evaluate(x, x)

    def cell_factor(self, partition, level, order=16):
        """Optional V with cell-pair integrals G = V V^* at ``level``; None if unavailable."""
        return None

    def check_window(self, partition):
        lo, hi = partition.window
        elo, ehi = self.eval_window
        if lo < elo or hi > ehi:
            raise KernelRangeError(
                f"window [{lo}, {hi}) leaves the evaluation window [{elo}, {ehi}] of the {self.name} kernel"
            )


class SineKernel(ContinuousKernel):
    name = "sine"
    translation_invariant = True

    def __init__(self, eval_window=(-8, 8)):
        super().__init__(Lebesgue1D(), eval_window)

    def evaluate(self, x, y):
        return sine_kernel(x, y)


class AiryKernel(ContinuousKernel):
    name = "airy"

    def __init__(self, eval_window=(-8, 8)):
        super().__init__(Lebesgue1D(), eval_window)

    def evaluate(self, x, y):
        return airy_kernel(x, y)

    def matrix(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ax, apx = airy_values(x)
        ay, apy = airy_values(y)
        return _airy_from_values(x[:, None], y[None, :], ax[:, None], apx[:, None], ay[None, :], apy[None, :])


class BesselKernel(ContinuousKernel):
    name = "bessel"
    quad_map = "sqrt"

    def __init__(self, alpha=1.0, eval_window=(0, 8)):
        _bessel_check(alpha)
        super().__init__(LebesgueHalfLine(), eval_window)
        self.alpha = float(alpha)

    def params(self):
        return {"name": self.name, "alpha": self.alpha}

    def evaluate(self, x, y):
        return bessel_kernel(self.alpha, x, y)

    def matrix(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        _bessel_check(self.alpha, x, y)
        u, v = np.sqrt(x), np.sqrt(y)
        ju, jv = special.jv(self.alpha, u), special.jv(self.alpha, v)
        phu, phv = u * special.jvp(self.alpha, u), v * special.jvp(self.alpha, v)
        _finite(ju, "Bessel J"), _finite(jv, "Bessel J")
        return _bessel_from_values(
            self.alpha, x[:, None], y[None, :], u[:, None], v[None, :],
            ju[:, None], jv[None, :], phu[:, None], phv[None, :],
        )


class GinibreKernel(ContinuousKernel):
    """exp(x conj y) against m(dx) = exp(-|x|^2) dx / pi.

    ``cell_factor`` uses exp(z conj w) = sum_n z^n conj(w)^n / n!, so the
    cell-pair integrals are G = V V^* with V[c, n] = int_c z^n dm / sqrt(n!).
    """

    name = "ginibre"
    dim = 2
    is_real = False

    def __init__(self, eval_window=(-4, 4)):
        super().__init__(GaussianPlane(), eval_window)

    def evaluate(self, x, y):
        return ginibre_kernel(x, y)

    def n_terms(self, radius):
        # smallest n with radius^{2n}/n! below 1e-17 of the largest term
        r2 = radius * radius
        log_terms = [k * math.log(r2) - math.lgamma(k + 1) if r2 > 0 else 0.0 for k in range(1, 400)]
        peak = max(log_terms + [0.0])
        for k, lt in enumerate(log_terms, start=1):
            if k > r2 and lt < peak - 40.0:
                return k + 1
        return 400

    def cell_factor(self, partition, level, order=16):
        from .quadrature import cell_nodes

        lo, hi = partition.level_bounds(level)
        nodes, weights = cell_nodes(lo, hi, order, partition.measure)
        z = as_complex(nodes)
        wlo, whi = partition.window
        radius = math.sqrt(2.0) * max(abs(wlo), abs(whi))
        n = self.n_terms(radius)
        V = np.empty((len(lo), n), dtype=complex)
        term = np.ones_like(z)
        for k in range(n):
            if k > 0:
                term = term * z / math.sqrt(k)
            V[:, k] = np.sum(weights * term, axis=1)
        return V


class FiniteRankKernel(ContinuousKernel):
    """Projection onto the span of chosen basis functions: sum_k f_k(x) f_k(y)."""

    name = "finite-rank"

    def __init__(self, functions, partition):
        super().__init__(partition.measure, partition.window)
        self.functions = list(functions)
        self.partition = partition
        self.dim = partition.dim
        self.is_real = True

    @property
    def rank(self):
        return len(self.functions)

    @property
    def resolution_level(self):
        return max(p.cell.level for f in self.functions for p in f.pieces)

    def params(self):
        return {"name": self.name, "indices": [str(f.index) for f in self.functions]}

    def features(self, x):
        return np.stack([f(x) for f in self.functions], axis=-1)

    def evaluate(self, x, y):
        return np.sum(self.features(x) * self.features(y), axis=-1)

    def matrix(self, x, y):
        return self.features(np.asarray(x, dtype=float)) @ self.features(np.asarray(y, dtype=float)).T

    def cell_factor(self, partition, level, order=16):
        cells = partition.level_cells(level)
        V = np.zeros((len(cells), self.rank))
        masses = partition.level_masses(level)
        for k, f in enumerate(self.functions):
            for p in f.pieces:
                if not partition.in_window(p.cell):
                    continue
                if p.cell.level <= level:
                    start = partition.flat_index(p.cell, level)
                    stop = start + (1 << (level - p.cell.level))
                    V[start:stop, k] += p.coef * masses[start:stop]
                else:
                    V[partition.flat_index(p.cell.ancestor(level)), k] += p.coef * p.mass
        return V

    def cell_integrals(self, cell):
        return np.array([cell_integral(f, cell, self.partition) for f in self.functions])


def build_finite_rank_kernel(indices, level, partition):
    """Projection kernel onto span{f_{l,i} : i in indices}."""
    from .basis import build_basis_function

    indices = list(indices)
    if len(set(indices)) != len(indices):
        raise IndexSetError("duplicate indices in finite-rank kernel")
    for i in indices:
        if i.level != level:
            raise IndexSetError(f"{i} is not a level-{level} index")
    return FiniteRankKernel([build_basis_function(i, partition) for i in indices], partition)


def make_kernel(name, alpha=1.0):
    name = name.lower()
    if name == "sine":
        return SineKernel()
    if name == "airy":
        return AiryKernel()
    if name == "bessel":
        return BesselKernel(alpha)
    if name == "ginibre":
        return GinibreKernel()
    raise ValueError(f"unknown kernel {name!r}")
