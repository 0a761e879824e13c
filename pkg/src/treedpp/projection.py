"""Projected kernel matrices K_F(i, j) on truncated tree index sets."""

from dataclasses import dataclass, field
import logging

import numpy as np

from .errors import SpectrumError
from .quadrature import box_rule, cell_gram

log = logging.getLogger(__name__)

SPECTRUM_EPS = 1e-8


@dataclass(frozen=True)
class ProjectedKernel:
    indices: list
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    metadata: dict = field(default_factory=dict)
    basis: object = None

    def __len__(self):
        return len(self.indices)

    @property
    def level(self):
        return self.metadata.get("level")

    def clipped_eigenvalues(self, eps=SPECTRUM_EPS):
        lam = self.eigenvalues
        if lam.size and (lam.min() < -eps or lam.max() > 1 + eps):
            raise SpectrumError(
                f"eigenvalues [{lam.min():.3e}, {lam.max():.3e}] leave [-{eps}, 1+{eps}]"
            )
        clipped = np.clip(lam, 0.0, 1.0)
        n_clip = int(np.count_nonzero(clipped != lam))
        if n_clip:
            shift = float(np.max(np.abs(clipped - lam)))
            report = log.warning if shift > 1e-12 else log.debug
            report("clipped %d eigenvalues into [0, 1] (max shift %.2e)", n_clip, shift)
        return clipped


def eigendecompose(matrix):
    lam, vec = np.linalg.eigh(matrix)
    return lam, vec


def project_kernel(kernel, basis, order=16, tol=1e-10):
    """Assemble K_F over a truncated basis.

    All members of ``basis`` are constant on the finest cells, so
    K_F = Phi^T G Phi with G the cell-pair integrals of K and Phi the
    design matrix.
    """
    kernel.check_window(basis.partition)
    G, quad_err = cell_gram(kernel, basis.partition, basis.finest_level, order, tol)
    phi = basis.design
    M = phi.T @ G @ phi
    asym = float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0
    M = 0.5 * (M + M.conj().T)
    lam, vec = eigendecompose(M)
    meta = {
        "kernel": kernel.params(),
        "measure": basis.partition.measure.kind,
        "window": list(basis.partition.window),
        "dim": basis.partition.dim,
        "level": basis.level,
        "rank_max": basis.rank_max,
        "quadrature": {"order": order, "tol": tol, "error_estimate": quad_err},
        "assembly_asymmetry": asym,
    }
    return ProjectedKernel(list(basis.indices), M, lam, vec, meta, basis)


def reconstruct_kernel(P, x, y):
    """sum_{i,j} K_F(i,j) f_i(x) conj(f_j(y)) for paired points x, y."""
    fx = P.basis.evaluate(x)
    fy = P.basis.evaluate(y)
    return np.einsum("pi,ij,pj->p", fx, P.matrix, fy.conj())


def reconstruction_matrix(P):
    """Reconstructed kernel on the finest cell pairs: Phi K_F Phi^T."""
    phi = P.basis.design
    return phi @ P.matrix @ phi.T


def reconstruction_error(P, kernel, n_points=10 ** 6, seed=0, box=None):
    """Relative L^2(box^2) error of the expansion, by Monte Carlo.

    ``box`` defaults to the partition window (1D: (lo, hi)).
    """
    rng = np.random.default_rng(seed)
    lo, hi = box if box is not None else P.basis.partition.window
    dim = P.basis.partition.dim
    shape = (n_points,) if dim == 1 else (n_points, 2)
    x = rng.uniform(lo, hi, size=shape)
    y = rng.uniform(lo, hi, size=shape)
    R = reconstruction_matrix(P)
    L = P.basis.finest_level
    cx = P.basis.partition.locate(x, L)
    cy = P.basis.partition.locate(y, L)
    approx = R[cx, cy]
    exact = kernel.evaluate(x, y)
    w = P.basis.partition.measure.density(x) * P.basis.partition.measure.density(y)
    num = np.mean(np.abs(exact - approx) ** 2 * w)
    den = np.mean(np.abs(exact) ** 2 * w)
    return float(np.sqrt(num / den))


def bilinear_identity_check(P, kernel, xi, eta, order=12, subdivide=1):
    """Both sides of int int K conj(P_xi) Q_eta dm dm = sum K_F(i,j) conj(xi_i) eta_j.

    The left side is integrated independently of the assembled matrix: a
    composite rule on cells one level finer than the basis resolution,
    with a different Gauss-Legendre order.
    """
    xi = np.asarray(xi)
    eta = np.asarray(eta)
    rhs = np.conj(xi) @ P.matrix @ eta
    basis = P.basis
    part = basis.partition
    cells = part.level_cells(basis.finest_level)
    X, W = box_rule(cells, part, order, kernel.quad_map, subdivide=subdivide)
    F = basis.evaluate(X)
    p_vals = F @ xi
    q_vals = F @ eta
    K = kernel.matrix(X, X)
    lhs = (W * np.conj(p_vals)) @ K @ (W * q_vals)
    return complex(lhs), complex(rhs)


def spectrum_report(P, eps=SPECTRUM_EPS):
    lam = P.eigenvalues
    clipped = np.clip(lam, 0.0, 1.0)
    report = {
        "n": int(lam.size),
        "min": float(lam.min()) if lam.size else 0.0,
        "max": float(lam.max()) if lam.size else 0.0,
        "trace": float(np.real(np.trace(P.matrix))),
        "clip_count": int(np.count_nonzero(clipped != lam)),
        "eps": eps,
        "eigenvalues": [float(v) for v in lam],
    }
    report["contained"] = bool(report["min"] >= -eps and report["max"] <= 1 + eps)
    if not report["contained"]:
        raise SpectrumError(
            f"eigenvalues [{report['min']:.3e}, {report['max']:.3e}] leave [-{eps}, 1+{eps}]"
        )
    return report
