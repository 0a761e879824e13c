import math

import numpy as np
import pytest
from scipy import special

from treedpp.errors import DomainError, IndexSetError, KernelRangeError
from treedpp.kernels import (
    AiryKernel,
    BesselKernel,
    GinibreKernel,
    SineKernel,
    airy_kernel,
    bessel_kernel,
    build_finite_rank_kernel,
    ginibre_kernel,
    make_kernel,
    sine_kernel,
)
from treedpp.measures import GaussianPlane, Lebesgue1D
from treedpp.partition import DyadicPartition, TreeIndex


def _airy_offdiag(x, y):
    ax, apx, _, _ = special.airy(x)
    ay, apy, _, _ = special.airy(y)
    return (ax * apy - apx * ay) / (x - y)


def _bessel_offdiag(alpha, x, y):
    u, v = math.sqrt(x), math.sqrt(y)
    num = special.jv(alpha, u) * v * special.jvp(alpha, v) - u * special.jvp(alpha, u) * special.jv(alpha, v)
    return num / (2 * (x - y))


class TestSine:
    def test_diagonal(self):
        assert sine_kernel(0.0, 0.0) == pytest.approx(1 / math.pi, abs=1e-16)

    def test_quarter_period(self):
        assert sine_kernel(0.0, math.pi / 2) == pytest.approx(2 / math.pi ** 2, rel=1e-15)

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        x, y = rng.uniform(-8, 8, (2, 10 ** 4))
        np.testing.assert_array_equal(sine_kernel(x, y), sine_kernel(y, x))

    def test_band_is_continuous(self):
        x = np.linspace(-3, 3, 7)
        for h in (0.99e-6, 1.01e-6):
            exact = np.sin(h) / (math.pi * h)
            np.testing.assert_allclose(sine_kernel(x, x + h), exact, rtol=1e-15)


class TestAiry:
    def test_reference_value_at_zero(self):
        ai0 = 3 ** (-2 / 3) / special.gamma(2 / 3)
        assert special.airy(0.0)[0] == pytest.approx(ai0, rel=1e-14)
        aip0 = -(3 ** (-1 / 3)) / special.gamma(1 / 3)
        assert airy_kernel(0.0, 0.0) == pytest.approx(aip0 ** 2, rel=1e-13)

    def test_diagonal_formula(self):
        x = np.linspace(-6, 6, 25)
        ai, aip, _, _ = special.airy(x)
        np.testing.assert_allclose(airy_kernel(x, x), aip ** 2 - x * ai ** 2, rtol=1e-13, atol=1e-15)

    @pytest.mark.parametrize("x", [-5.0, -1.3, 0.0, 0.7, 3.0])
    def test_diagonal_limit(self, x):
        h = 1e-5
        limit = 0.5 * (_airy_offdiag(x - h, x + h / 2) + _airy_offdiag(x + h, x - h / 2))
        fd = 0.5 * (_airy_offdiag(x - h / 2, x + h / 2) + _airy_offdiag(x + h / 2, x - h / 2))
        assert airy_kernel(x, x) == pytest.approx(fd, abs=1e-8)
        assert airy_kernel(x, x) == pytest.approx(limit, abs=1e-5)

    def test_off_diagonal_reference(self):
        ai0, aip0, _, _ = special.airy(0.0)
        ai1, aip1, _, _ = special.airy(1.0)
        v = (ai0 * aip1 - aip0 * ai1) / (0.0 - 1.0)
        assert airy_kernel(0.0, 1.0) == pytest.approx(v, rel=1e-13)

    def test_series_branch_matches_direct(self):
        x = np.linspace(-6, 6, 13)
        d = 2e-3  # just outside the series band: direct formula is accurate here
        near = airy_kernel(x, x + 0.9e-3)
        direct = _airy_offdiag(x, x + 0.9e-3)
        np.testing.assert_allclose(near, direct, atol=1e-9)
        np.testing.assert_allclose(airy_kernel(x, x + d), _airy_offdiag(x, x + d), rtol=1e-14)

    def test_matrix_agrees_with_pointwise(self):
        k = AiryKernel()
        x = np.linspace(-3, 3, 9)
        np.testing.assert_allclose(k.matrix(x, x), airy_kernel(x[:, None], x[None, :]), rtol=1e-14, atol=1e-16)

    @pytest.mark.parametrize("k", [3, 4, 5, 6])
    def test_removable_singularity(self, k):
        x = np.linspace(-4, 4, 9)
        diff = np.abs(airy_kernel(x, x + 10.0 ** -k) - airy_kernel(x, x))
        assert np.all(diff < 10.0 ** -k)


class TestBessel:
    def test_symmetric(self):
        rng = np.random.default_rng(1)
        x, y = rng.uniform(0, 8, (2, 10 ** 4))
        np.testing.assert_allclose(bessel_kernel(1.0, x, y), bessel_kernel(1.0, y, x), atol=1e-15)

    def test_off_diagonal_reference(self):
        assert bessel_kernel(1.0, 1.0, 4.0) == pytest.approx(_bessel_offdiag(1.0, 1.0, 4.0), rel=1e-13)

    @pytest.mark.parametrize("x", [0.3, 1.0, 2.5, 6.0])
    def test_diagonal_limit(self, x):
        h = 1e-5
        fd = 0.5 * (_bessel_offdiag(1.0, x - h / 2, x + h / 2) + _bessel_offdiag(1.0, x + h / 2, x - h / 2))
        assert bessel_kernel(1.0, x, x) == pytest.approx(fd, abs=1e-8)

    def test_diagonal_closed_form(self):
        # K(x, x) = (J_a(u)^2 - J_{a+1}(u) J_{a-1}(u)) / 4,  u = sqrt(x)
        x = np.linspace(0.1, 8, 20)
        u = np.sqrt(x)
        ref = 0.25 * (special.jv(1, u) ** 2 - special.jv(2, u) * special.jv(0, u))
        np.testing.assert_allclose(bessel_kernel(1.0, x, x), ref, rtol=1e-12, atol=1e-15)

    def test_negative_argument(self):
        with pytest.raises(DomainError):
            bessel_kernel(1.0, -0.1, 1.0)

    def test_alpha_below_one(self):
        with pytest.raises(DomainError):
            bessel_kernel(0.5, 1.0, 2.0)

    @pytest.mark.parametrize("k", [3, 4, 5, 6])
    def test_removable_singularity(self, k):
        x = np.linspace(0.5, 6, 9)
        diff = np.abs(bessel_kernel(2.0, x, x + 10.0 ** -k) - bessel_kernel(2.0, x, x))
        assert np.all(diff < 10.0 ** -k)


class TestGinibre:
    def test_values(self):
        assert ginibre_kernel(np.array([0.0, 0.0]), np.array([0.0, 0.0])) == pytest.approx(1.0)
        assert ginibre_kernel(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(math.e)

    def test_hermitian(self):
        rng = np.random.default_rng(2)
        x, y = rng.uniform(-4, 4, (2, 10 ** 4, 2))
        np.testing.assert_allclose(ginibre_kernel(x, y), np.conj(ginibre_kernel(y, x)), rtol=1e-12)

    def test_range_error(self):
        with pytest.raises(KernelRangeError):
            ginibre_kernel(np.array([30.0, 0.0]), np.array([30.0, 0.0]))

    def test_window_check(self):
        with pytest.raises(KernelRangeError):
            GinibreKernel().check_window(DyadicPartition(GaussianPlane(), "-5..5"))


def test_real_kernels_are_real():
    x = np.linspace(0.1, 3, 7)
    for k in (SineKernel(), AiryKernel(), BesselKernel(1.0)):
        assert not np.iscomplexobj(k.matrix(x, x))


def test_make_kernel():
    assert make_kernel("bessel", 2.0).alpha == 2.0
    with pytest.raises(ValueError):
        make_kernel("laguerre")


class TestFiniteRank:
    part = DyadicPartition(Lebesgue1D(), "0..2")

    def test_single_indicator(self):
        k = build_finite_rank_kernel([TreeIndex(0, (), 1)], 1, self.part)
        x = np.array([0.1, 0.9, 1.5])
        np.testing.assert_allclose(k.matrix(x, x), [[1, 1, 0], [1, 1, 0], [0, 0, 0]])

    def test_trace(self):
        k = build_finite_rank_kernel([TreeIndex(0, (), 1), TreeIndex(0, (0,), 1)], 1, self.part)
        V = k.cell_factor(self.part, 3)
        # int K(x, x) dm = sum over cells of K * mass, exact for piecewise constants
        lo, hi = self.part.level_bounds(3)
        diag = k.evaluate(0.5 * (lo + hi), 0.5 * (lo + hi))
        assert np.sum(diag * (hi - lo)) == pytest.approx(2.0)
        assert np.trace(V.T @ np.diag(1 / (hi - lo)) @ V) == pytest.approx(2.0)

    def test_duplicates_rejected(self):
        i = TreeIndex(0, (), 1)
        with pytest.raises(IndexSetError):
            build_finite_rank_kernel([i, i], 1, self.part)

    def test_wrong_level_rejected(self):
        with pytest.raises(IndexSetError):
            build_finite_rank_kernel([TreeIndex(0, (0,), 2)], 1, self.part)
