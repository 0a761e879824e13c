"""Tensor Gauss-Legendre quadrature over dyadic cells and cell pairs."""

from functools import lru_cache

import numpy as np
from scipy.linalg import toeplitz

from .errors import QuadratureError

_CHUNK_ENTRIES = 2 ** 23


@lru_cache(maxsize=None)
def gl_rule(order):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    t, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (t + 1.0), 0.5 * w


def _axis_nodes(a, b, order, quad_map):
    t, w = gl_rule(order)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    if quad_map == "sqrt":
        sa, sb = np.sqrt(np.maximum(a, 0.0)), np.sqrt(b)
        u = sa + (sb - sa) * t
        return u * u, 2.0 * u * (sb - sa) * w
    return a + (b - a) * t, (b - a) * w


def cell_nodes(lo, hi, order, measure, quad_map="identity"):
    """Nodes and weights (density included) for every cell.

    1D: nodes/weights of shape (ncells, order).
    2D: nodes (ncells, order^2, 2), weights (ncells, order^2).
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.ndim == 1:
        x, w = _axis_nodes(lo, hi, order, quad_map)
        return x, w * measure.density(x)
    x0, w0 = _axis_nodes(lo[:, 0], hi[:, 0], order, quad_map)
    x1, w1 = _axis_nodes(lo[:, 1], hi[:, 1], order, quad_map)
    n = len(lo)
    X = np.stack(
        [np.repeat(x0, order, axis=1), np.tile(x1, (1, order))], axis=-1
    ).reshape(n, order * order, 2)
    W = (w0[:, :, None] * w1[:, None, :]).reshape(n, order * order)
    return X, W * measure.density(X)


def _diagonal_pairs(kernel, lo, hi, order):
    """int_c int_c K dm dm per 1D cell, splitting the square along x = y."""
    t, w = gl_rule(order)
    if kernel.quad_map == "sqrt":
        a, b = np.sqrt(np.maximum(lo, 0.0)), np.sqrt(hi)
    else:
        a, b = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    L = (b - a)[:, None, None]
    sig, tau = t[:, None], t[None, :]
    s = a[:, None, None] + L * sig
    r = a[:, None, None] + L * sig * tau
    jac = L * L * sig * (w[:, None] * w[None, :])
    if kernel.quad_map == "sqrt":
        x, y = s * s, r * r
        jac = jac * 4.0 * s * r
    else:
        x, y = s, r
    x, y = np.broadcast_arrays(x, y)
    jac = jac * kernel.measure.density(x) * kernel.measure.density(y)
    vals = kernel.evaluate(x, y)
    tri = np.sum(vals * jac, axis=(1, 2))
    return 2.0 * np.real(tri)


def _direct_gram(kernel, lo, hi, order, measure):
    X, W = cell_nodes(lo, hi, order, measure, kernel.quad_map)
    n, q = W.shape
    flatX = X.reshape(n * q, -1) if X.ndim == 3 else X.reshape(n * q)
    dtype = float if kernel.is_real else complex
    G = np.empty((n, n), dtype=dtype)
    step = max(1, _CHUNK_ENTRIES // (q * q * n))
    for start in range(0, n, step):
        stop = min(n, start + step)
        rows = flatX[start * q:stop * q]
        K = kernel.matrix(rows, flatX).reshape((stop - start) * q, n, q)
        T = np.einsum("pbr,br->pb", K, W).reshape(stop - start, q, n)
        G[start:stop] = np.einsum("aq,aqb->ab", W[start:stop], T)
    if lo.ndim == 1:
        np.fill_diagonal(G, _diagonal_pairs(kernel, lo, hi, order))
    return G


def _toeplitz_gram(kernel, lo, hi, order):
    """Cell-pair integrals for a translation-invariant 1D kernel on equal cells."""
    h = float(hi[0] - lo[0])
    n = len(lo)
    t, w = gl_rule(order)
    x, wx = h * t, h * w
    diff = x[:, None] - x[None, :]
    ww = wx[:, None] * wx[None, :]
    offsets = np.arange(-(n - 1), n) * h
    g = np.empty(len(offsets), dtype=float if kernel.is_real else complex)
    step = max(1, _CHUNK_ENTRIES // (order * order))
    for start in range(0, len(offsets), step):
        off = offsets[start:start + step]
        vals = kernel.evaluate(diff[None, :, :] - off[:, None, None], np.zeros(1))
        g[start:start + step] = np.sum(vals * ww, axis=(1, 2))
    g[n - 1] = _diagonal_pairs(kernel, lo[:1], hi[:1], order)[0]
    # G[c, d] = int_c int_d K = g(d - c)
    col = g[n - 1::-1]
    row = g[n - 1:]
    return toeplitz(col, row)


def _raw_gram(kernel, partition, level, order):
    lo, hi = partition.level_bounds(level)
    if kernel.translation_invariant and partition.dim == 1 and partition.measure.kind == "Lebesgue1D":
        return _toeplitz_gram(kernel, lo, hi, order)
    return _direct_gram(kernel, lo, hi, order, partition.measure)


def _aggregate(G, dim):
    """Sum 2x2 child blocks: children of flat cell c are 2c and 2c + 1."""
    n = G.shape[0] // 2
    return G.reshape(n, 2, n, 2).sum(axis=(1, 3))


def cell_gram(kernel, partition, level, order=16, tol=1e-10):
    """Matrix of int_c int_d K(x, y) m(dx) m(dy) over the cells of ``level``.

    The estimate at ``level`` is compared against the sum of the estimates on
    the child cells (a composite rule with twice the resolution); their
    difference is the error estimate and the finer value is returned.
    Raises QuadratureError naming the worst cell pair if the estimate
    exceeds ``tol``.
    """
    factor = kernel.cell_factor(partition, level, order)
    if factor is not None:
        fine = kernel.cell_factor(partition, level + 1, order)
        fine = fine.reshape(fine.shape[0] // 2, 2, -1).sum(axis=1)
        coarse_G = factor @ factor.conj().T
        G = fine @ fine.conj().T
    else:
        coarse_G = _raw_gram(kernel, partition, level, order)
        G = _aggregate(_raw_gram(kernel, partition, level + 1, order), partition.dim)
    if kernel.is_real:
        G = np.real(G)
        coarse_G = np.real(coarse_G)
    diff = np.abs(G - coarse_G)
    worst = np.unravel_index(int(np.argmax(diff)), diff.shape)
    estimate = float(diff[worst])
    if not np.all(np.isfinite(G)):
        raise QuadratureError("non-finite cell-pair integral", worst_pair=worst)
    if estimate > tol:
        cells = partition.level_cells(level)
        pair = (str(cells[worst[0]]), str(cells[worst[1]]))
        raise QuadratureError(
            f"cell-pair quadrature error estimate {estimate:.3g} exceeds tol {tol:.3g} at {pair}",
            worst_pair=pair,
            estimate=estimate,
        )
    G = 0.5 * (G + G.conj().T)
    return G, estimate


def box_rule(cells, partition, order, quad_map="identity", subdivide=0):
    """Composite rule on a union of cells: each cell split ``subdivide`` times."""
    los, his = [], []
    for c in cells:
        lo, hi = partition.bounds(c)
        los.append(lo)
        his.append(hi)
    los, his = np.asarray(los), np.asarray(his)
    for _ in range(subdivide):
        if partition.dim == 1:
            mid = 0.5 * (los + his)
            los, his = np.concatenate([los, mid]), np.concatenate([mid, his])
        else:
            # split the longer axis first so children stay square-ish
            w = his - los
            axis = (w[:, 0] < w[:, 1]).astype(int)
            mid = los.copy()
            idx = np.arange(len(los))
            mid[idx, axis] = 0.5 * (los[idx, axis] + his[idx, axis])
            hi_left = his.copy()
            hi_left[idx, axis] = mid[idx, axis]
            lo_right = los.copy()
            lo_right[idx, axis] = mid[idx, axis]
            los, his = np.concatenate([los, lo_right]), np.concatenate([hi_left, his])
    X, W = cell_nodes(los, his, order, partition.measure, quad_map)
    if partition.dim == 1:
        return X.ravel(), W.ravel()
    return X.reshape(-1, 2), W.ravel()
