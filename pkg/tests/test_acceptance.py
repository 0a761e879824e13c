"""Acceptance suite: one test per numbered criterion, at the stated tolerances.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import filecmp
import itertools
import math
import time

import numpy as np
import pytest

from treedpp.basis import TruncatedBasis, inner_product
from treedpp.cli import main
from treedpp.dpp import DiscreteDPP, random_kernel
from treedpp.kernels import BesselKernel, GinibreKernel, SineKernel, build_finite_rank_kernel
from treedpp.lift import compare_to_exact, consistency_experiment
from treedpp.measures import GaussianPlane, Lebesgue1D
from treedpp.partition import Cell, DyadicPartition, TreeIndex
from treedpp.projection import project_kernel, reconstruction_error
from treedpp.verify import correlation_identity, orthogonality_expected, orthogonality_integral, \
    orthogonality_table, refinement_check


def _report(criterion, number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}  {detail}"
    print(line)
    criterion(number, title, ok, detail)


def test_criterion_01_basis_orthonormality(criterion):
    t0 = time.perf_counter()
    part = DyadicPartition(Lebesgue1D(), "0..8")
    basis = TruncatedBasis(part, 1, 6)
    fs = basis.functions
    err = 0.0
    for a in range(len(fs)):
        for b in range(a, len(fs)):
            err = max(err, abs(inner_product(fs[a], fs[b], part) - (a == b)))
    gram_err = float(np.max(np.abs(basis.gram() - np.eye(len(basis)))))
    elapsed = time.perf_counter() - t0
    ok = len(basis) == 256 and err < 1e-12 and gram_err < 1e-12 and elapsed < 10
    _report(criterion, 1, "basis orthonormality", ok,
            f"N={len(basis)} max_err={err:.2e} gram_err={gram_err:.2e} t={elapsed:.1f}s")
    assert len(basis) == 256
    assert err < 1e-12 and gram_err < 1e-12
    assert elapsed < 10


SPECTRUM_CASES = [
    ("sine", lambda: SineKernel(), Lebesgue1D, "-2..2"),
    ("bessel", lambda: BesselKernel(1.0), None, "0..4"),
    ("ginibre", lambda: GinibreKernel(), GaussianPlane, "-2..2"),
]


@pytest.mark.parametrize("name,make,_measure,window", SPECTRUM_CASES, ids=[c[0] for c in SPECTRUM_CASES])
def test_criterion_02_spectrum_containment(criterion, name, make, _measure, window):
    t0 = time.perf_counter()
    kernel = make()
    part = DyadicPartition(kernel.measure, window)
    P = project_kernel(kernel, TruncatedBasis(part, 3, 6))
    lam = P.eigenvalues
    elapsed = time.perf_counter() - t0
    eps = 1e-8
    ok = lam.min() >= -eps and lam.max() <= 1 + eps and elapsed < 60
    _report(criterion, 2, f"spectrum containment ({name})", ok,
            f"N={len(P)} range=[{lam.min():.2e}, {lam.max():.6f}] t={elapsed:.1f}s")
    assert lam.min() >= -eps and lam.max() <= 1 + eps
    assert elapsed < 60


def test_criterion_03_reconstruction(criterion):
    t0 = time.perf_counter()
    kernel = SineKernel()
    part = DyadicPartition(kernel.measure, "0..1")
    errors = []
    for R in (4, 6, 8):
        P = project_kernel(kernel, TruncatedBasis(part, 1, R))
        errors.append(reconstruction_error(P, kernel, 10 ** 6, seed=2024))
    elapsed = time.perf_counter() - t0
    decreasing = errors[0] > errors[1] > errors[2]
    ok = decreasing and errors[2] < 0.05 and elapsed < 120
    _report(criterion, 3, "expansion reconstruction", ok,
            "errors(R=4,6,8)=" + ", ".join(f"{e:.3e}" for e in errors) + f" t={elapsed:.1f}s")
    assert decreasing
    assert errors[2] < 0.05
    assert elapsed < 120


def test_criterion_04_sampler_vs_enumeration(criterion):
    # kernel k: Haar-random eigenvectors and uniform spectrum from seed k; draws use seed k
    t0 = time.perf_counter()
    n = 10 ** 5
    worst_z, worst_tv, failures = 0.0, 0.0, []
    for k in range(10):
        K = random_kernel(np.random.default_rng(k), 6)
        dpp = DiscreteDPP(K)
        law = dpp.enumerate_law()
        configs = dpp.sample_many(n, seed=k)
        counts = {}
        for c in configs:
            key = tuple(int(v) for v in c)
            counts[key] = counts.get(key, 0) + 1
        tv, z_max = 0.0, 0.0
        for subset, p in law.items():
            f = counts.get(subset, 0) / n
            tv += abs(f - p)
            sigma = math.sqrt(p * (1 - p) / n)
            if sigma > 0:
                z_max = max(z_max, abs(f - p) / sigma)
        tv *= 0.5
        worst_z, worst_tv = max(worst_z, z_max), max(worst_tv, tv)
        if z_max > 3 or tv >= 0.01:
            failures.append(f"kernel {k}: TV={tv:.4f} max_z={z_max:.2f}")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 120
    _report(criterion, 4, "discrete sampler vs enumeration", ok,
            f"max_TV={worst_tv:.4f} max_z={worst_z:.2f} t={elapsed:.1f}s " + "; ".join(failures))
    assert elapsed < 120
    assert not failures, failures


def _fixture_kernels():
    """Deterministic finite-rank fixtures of rank 1..4 at levels 1..3, in 1D and 2D."""
    out = []
    for measure, window in ((Lebesgue1D(), "0..2"), (GaussianPlane(), "-1..1")):
        part = DyadicPartition(measure, window)
        for level in (1, 2, 3):
            idx = part.truncated_index_set(level, 3)
            rng = np.random.default_rng(100 + level)
            for rank in (1, 2, 3, 4):
                chosen = [idx[j] for j in sorted(rng.choice(len(idx), rank, replace=False))]
                out.append((part, level, build_finite_rank_kernel(chosen, level, part)))
    return out


def test_criterion_05_correlation_identity_exact(criterion):
    t0 = time.perf_counter()
    worst, checks = 0.0, 0
    for part, level, fx in _fixture_kernels():
        R = max(fx.resolution_level - level + 1, 1)
        P = project_kernel(fx, TruncatedBasis(part, level, R))
        cells = part.level_cells(level)
        for m in (1, 2):
            for cs in itertools.product(cells, repeat=m):
                rep = correlation_identity(fx, P, list(cs), tol=1e-10)
                worst = max(worst, rep.gap)
                checks += 1
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 30
    _report(criterion, 5, "correlation identity, finite-rank fixtures", ok,
            f"checks={checks} max_gap={worst:.2e} t={elapsed:.1f}s")
    assert worst < 1e-10
    assert elapsed < 30


def test_criterion_06_correlation_identity_sine(criterion):
    t0 = time.perf_counter()
    kernel = SineKernel()
    part = DyadicPartition(kernel.measure, "0..2")
    gaps1 = []
    for R in (4, 6, 8):
        P = project_kernel(kernel, TruncatedBasis(part, 1, R))
        one = correlation_identity(kernel, P, [Cell(0)], tol=1e-3)
        gaps1.append(abs(1 / math.pi - one.rhs))
    two = correlation_identity(kernel, P, [Cell(0), Cell(1)], tol=5e-3)
    elapsed = time.perf_counter() - t0
    lhs_ok = abs(one.lhs - 1 / math.pi) < 1e-12
    ok = lhs_ok and gaps1[2] < 1e-3 and two.gap < 5e-3 and gaps1[0] > gaps1[1] > gaps1[2] and elapsed < 180
    _report(criterion, 6, "correlation identity, sine kernel", ok,
            "m=1 gaps(R=4,6,8)=" + ", ".join(f"{g:.2e}" for g in gaps1)
            + f" m=2 gap={two.gap:.2e} t={elapsed:.1f}s")
    assert lhs_ok
    assert gaps1[2] < 1e-3
    assert gaps1[0] > gaps1[1] > gaps1[2]
    assert two.gap < 5e-3
    assert elapsed < 180


def test_criterion_07_consistency(criterion):
    t0 = time.perf_counter()
    part = DyadicPartition(Lebesgue1D(), "0..1")
    fixtures = {
        "rank2": build_finite_rank_kernel([TreeIndex(0, (), 1), TreeIndex(0, (0,), 1)], 1, part),
        "rank1": build_finite_rank_kernel([TreeIndex(0, (), 1)], 1, part),
    }
    z = {}
    for name, fx in fixtures.items():
        res = consistency_experiment(fx, part, 2, 3, 2, 10 ** 5, seed=11, exact=True)
        z[name] = max(res["exact_coarse"]["max_z"], res["exact_fine"]["max_z"], res["comparison"]["max_z"])
    sk = SineKernel()
    sine = consistency_experiment(sk, DyadicPartition(sk.measure, "0..2"), 2, 4, 6, 10 ** 5, seed=11)
    p = sine["comparison"]["p_value"]
    elapsed = time.perf_counter() - t0
    ok = all(v <= 3 for v in z.values()) and p > 1e-3 and elapsed < 300
    _report(criterion, 7, "level-l vs level-l' consistency", ok,
            " ".join(f"{k}_max_z={v:.2f}" for k, v in z.items()) + f" sine_p={p:.3f} t={elapsed:.1f}s")
    assert all(v <= 3 for v in z.values()), z
    assert p > 1e-3
    assert elapsed < 300


def test_criterion_08_trichotomy(criterion):
    t0 = time.perf_counter()
    part = DyadicPartition(Lebesgue1D(), "0..2")
    worst, triples = 0.0, 0
    for level in (1, 2, 3):
        basis = TruncatedBasis(part, level, 5)
        for cell in part.level_cells(level):
            for i, j in itertools.product(basis.indices, repeat=2):
                val = orthogonality_integral(part, i, j, cell)
                worst = max(worst, abs(val - orthogonality_expected(i, j, cell)))
                triples += 1
        _, values, expected = orthogonality_table(basis)
        worst = max(worst, float(np.max(np.abs(values - expected))))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-12 and elapsed < 10
    _report(criterion, 8, "restricted orthogonality trichotomy", ok,
            f"triples={triples} max_err={worst:.2e} t={elapsed:.1f}s")
    assert worst < 1e-12
    assert elapsed < 10


def test_criterion_09_refinement(criterion):
    reports = [
        refinement_check(DyadicPartition(Lebesgue1D(), "-2..2"), 2, 5, n_configs=1000, n_points=100, seed=3),
        refinement_check(DyadicPartition(GaussianPlane(), "-2..2"), 2, 6, n_configs=1000, n_points=100, seed=3),
    ]
    mismatches = sum(int(r.lhs) for r in reports)
    ok = mismatches == 0 and all(r.passed for r in reports)
    _report(criterion, 9, "refinement structure", ok, f"configs=2x1000 mismatches={mismatches}")
    assert ok


DETERMINISM_RUNS = [
    ["sample", "--kernel", "sine", "--level", "2", "--rank-max", "6", "--n", "1000", "--seed", "7"],
    ["lift-sample", "--kernel", "ginibre", "--level", "2", "--rank-max", "3", "--n", "9000", "--seed", "5"],
    ["verify", "moments", "--level", "1", "--rank-max", "6", "--window", "0..2", "--cell", "0|",
     "--cell", "1|", "--n", "9000", "--seed", "3"],
    ["verify", "consistency", "--level", "2", "--level-fine", "3", "--rank-max", "4", "--window", "0..2",
     "--n", "9000", "--seed", "3"],
    ["verify", "refine", "--level", "2", "--level-fine", "5", "--seed", "3"],
]


def test_criterion_10_determinism(criterion, tmp_path):
    mismatched = []
    for k, argv in enumerate(DETERMINISM_RUNS):
        dirs = []
        for rep, threads in enumerate(("1", "1", "4", "4")):
            out = tmp_path / f"run{k}-{rep}"
            code = main(argv + ["--threads", threads, "--out", str(out)])
            assert code in (0, 1)
            dirs.append(out)
        for d in dirs[1:]:
            cmp = filecmp.dircmp(dirs[0], d)
            names = sorted(p.name for p in dirs[0].iterdir())
            _, diff, errs = filecmp.cmpfiles(dirs[0], d, names, shallow=False)
            if diff or errs or cmp.left_only or cmp.right_only:
                mismatched.append((" ".join(argv[:2]), d.name, diff))
    ok = not mismatched
    _report(criterion, 10, "byte-identical reruns (1 and 4 threads)", ok,
            f"commands={len(DETERMINISM_RUNS)} mismatches={len(mismatched)}")
    assert ok, mismatched
