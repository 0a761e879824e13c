import itertools
import json

import numpy as np
import pytest
from scipy import integrate

from treedpp.basis import TruncatedBasis
from treedpp.errors import IndexSetError, PartitionError
from treedpp.kernels import SineKernel, build_finite_rank_kernel
from treedpp.measures import Lebesgue1D
from treedpp.partition import Cell, DyadicPartition, TreeIndex
from treedpp.projection import project_kernel
from treedpp.verify import (
    VerificationReport,
    _Blocks,
    aggregate_counts,
    correlation_identity,
    correlation_integral,
    det_block_sum,
    factorial_moment_check,
    falling_factorial,
    orthogonality_check,
    orthogonality_expected,
    orthogonality_integral,
    refinement_check,
)


@pytest.fixture
def line():
    return DyadicPartition(Lebesgue1D(), "0..2")


def _rank2(part):
    return build_finite_rank_kernel([TreeIndex(0, (), 1), TreeIndex(0, (0,), 1)], 1, part)


class TestDetBlockSum:
    def test_scalar_blocks_match_determinant(self):
        rng = np.random.default_rng(0)
        for m in (1, 2, 3):
            A = rng.standard_normal((m, m))
            blocks = {(p, q): np.array([[A[p, q]]]) for p in range(m) for q in range(m)}
            val = det_block_sum(_Blocks(m, lambda p, q: blocks[p, q]))
            assert val == pytest.approx(np.linalg.det(A), abs=1e-13)

    def test_sum_over_index_tuples(self):
        # sum over (a, b) of det [[M_aa, M_ab], [M_ba, M_bb]] for a 3x3 matrix M
        rng = np.random.default_rng(1)
        M = rng.standard_normal((3, 3))
        M = M + M.T
        brute = sum(M[a, a] * M[b, b] - M[a, b] * M[b, a] for a in range(3) for b in range(3))
        assert det_block_sum(_Blocks(2, lambda p, q: M)) == pytest.approx(brute, abs=1e-12)


class TestCorrelationIdentity:
    def test_fixture_m1_counts_rank(self, line):
        fx = _rank2(line)
        P = project_kernel(fx, TruncatedBasis(line, 1, 2))
        rep = correlation_identity(fx, P, [Cell(0)])
        assert rep.passed
        assert rep.lhs == pytest.approx(2.0, abs=1e-12)
        assert rep.rhs == pytest.approx(2.0, abs=1e-12)

    def test_fixture_m2_equals_pair_count(self, line):
        # both points of a rank-2 projection lie in [0, 1): E[N(N-1)] = 2
        fx = _rank2(line)
        P = project_kernel(fx, TruncatedBasis(line, 1, 2))
        rep = correlation_identity(fx, P, [Cell(0), Cell(0)])
        assert rep.lhs == pytest.approx(2.0, abs=1e-12)
        assert rep.passed

    def test_sine_m2_against_dblquad(self, line):
        k = SineKernel()
        f = lambda y, x: float(k.evaluate(x, x) * k.evaluate(y, y) - k.evaluate(x, y) ** 2)  # noqa: E731
        ref, _ = integrate.dblquad(f, 0, 1, 1, 2, epsabs=1e-13, epsrel=1e-13)
        val = correlation_integral(k, line, [Cell(0), Cell(1)])
        assert val.real == pytest.approx(ref, abs=1e-11)

    def test_sine_m1_gap_shrinks_with_rank(self, line):
        k = SineKernel()
        gaps = []
        for R in (2, 4, 6):
            rep = correlation_identity(k, project_kernel(k, TruncatedBasis(line, 1, R)), [Cell(0)])
            gaps.append(rep.gap)
            assert rep.budget["truncation_gap"] == pytest.approx(rep.gap, abs=1e-15)
            assert set(rep.budget) == {"lhs_quadrature", "rhs_quadrature", "truncation_gap", "requested"}
        assert gaps[0] > gaps[1] > gaps[2]

    def test_rejects_bad_cells(self, line):
        fx = _rank2(line)
        P = project_kernel(fx, TruncatedBasis(line, 1, 2))
        with pytest.raises(PartitionError):
            correlation_identity(fx, P, [Cell(0, (0,))])
        with pytest.raises(PartitionError):
            correlation_identity(fx, P, [Cell(5)])
        with pytest.raises(ValueError):
            correlation_identity(fx, P, [Cell(0)] * 4)

    def test_report_round_trip(self, line):
        fx = _rank2(line)
        rep = correlation_identity(fx, project_kernel(fx, TruncatedBasis(line, 1, 2)), [Cell(1)])
        back = VerificationReport.from_dict(json.loads(rep.to_json()))
        assert back == rep
        assert rep.summary().startswith("PASS")


class TestOrthogonality:
    def test_trichotomy(self, line):
        i = TreeIndex(0, (0, 0), 2)
        j = TreeIndex(0, (0,), 2)
        own, other = Cell(0, (0,)), Cell(0, (1,))
        assert orthogonality_integral(line, i, i, own) == pytest.approx(1.0, abs=1e-15)
        assert orthogonality_integral(line, i, i, other) == 0.0
        assert orthogonality_integral(line, i, j, own) == pytest.approx(0.0, abs=1e-15)
        assert orthogonality_expected(i, i, own) == 1.0
        assert orthogonality_expected(i, i, other) == 0.0
        assert orthogonality_expected(i, j, own) == 0.0

    def test_exhaustive_small(self, line):
        basis = TruncatedBasis(line, 2, 3)
        for i, j in itertools.product(basis.indices, repeat=2):
            for A in line.level_cells(2):
                assert orthogonality_integral(line, i, j, A) == pytest.approx(
                    orthogonality_expected(i, j, A), abs=1e-14)

    def test_check_report(self, line):
        rep = orthogonality_check(line, 2, 4)
        assert rep.passed and rep.details["triples"] == 4 * 32 * 32


class TestFactorialMoments:
    def test_falling_factorial(self):
        np.testing.assert_array_equal(falling_factorial(np.array([0, 1, 2, 5]), 2), [0, 0, 2, 20])

    def test_fixture_pair_count(self, line):
        fx = _rank2(line)
        P = project_kernel(fx, TruncatedBasis(line, 1, 2))
        rep = factorial_moment_check(fx, P, [Cell(0)], [2], draws=2000, seed=1)
        assert rep.lhs == pytest.approx(2.0, abs=1e-12)
        assert rep.rhs == 2.0 and rep.passed

    def test_sine_two_cells(self, line):
        k = SineKernel()
        P = project_kernel(k, TruncatedBasis(DyadicPartition(k.measure, "0..2"), 2, 5))
        rep = factorial_moment_check(k, P, [Cell(0, (0,)), Cell(1, (1,))], [1, 1], draws=20_000, seed=2)
        assert rep.passed
        assert set(rep.budget) == {"quadrature", "truncation_gap", "mc_3sigma", "requested"}

    def test_overlap_rejected(self, line):
        fx = _rank2(line)
        P = project_kernel(fx, TruncatedBasis(line, 1, 2))
        with pytest.raises(IndexSetError):
            factorial_moment_check(fx, P, [Cell(0), Cell(0)], [1, 1], draws=10)
        with pytest.raises(ValueError):
            factorial_moment_check(fx, P, [Cell(0)], [0], draws=10)


class TestRefinement:
    def test_aggregate(self):
        np.testing.assert_array_equal(aggregate_counts(np.array([1, 2, 3, 4]), 1, 2), [3, 7])

    def test_same_level_is_identity(self, line):
        assert refinement_check(line, 2, 2, n_configs=50, n_points=20).passed

    def test_random_configurations(self, line):
        rep = refinement_check(line, 1, 4, n_configs=200, n_points=30, seed=3)
        assert rep.passed and rep.lhs == 0.0

    def test_level_order(self, line):
        with pytest.raises(ValueError):
            refinement_check(line, 3, 2)
