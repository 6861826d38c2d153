import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from amsplit import oracle
from amsplit.errors import ConfigError

A = 1.0


def _char_residual(t, n, k, c):
    return np.prod([(n - j - t) / (n - j) for j in range(k)]) - c


def _mp_roots(n, k, c):
    # independent route: mpmath on the expanded product, 40 digits
    mpmath.mp.dps = 40
    coeffs = [mpmath.mpf(1)]
    for j in range(k):
        root = n - j
        coeffs = [a - root * b for a, b in zip(coeffs + [0], [0] + coeffs)]
    scale = np.prod([mpmath.mpf(n - j) for j in range(k)]) * (-1) ** k
    coeffs[-1] -= c * scale  # coefficients are highest degree first
    return sorted((complex(r) for r in mpmath.polyroots(coeffs, maxsteps=200, extraprec=200)), key=lambda z: (z.real, z.imag))


class TestCoefficients:
    def test_mu0(self):
        assert oracle.recursion_coeffs(7, 3).mu_levels[0] == 1

    @pytest.mark.parametrize("n", [2, 10, 10**6])
    def test_k1(self, n):
        table = oracle.recursion_coeffs(n, 1)
        assert (table.mu, table.r) == (-n, (n,))

    @pytest.mark.parametrize("n", [3, 10, 1000])
    def test_k2(self, n):
        table = oracle.recursion_coeffs(n, 2)
        assert table.mu == n * (n - 1)
        assert table.r == (-n * (n - 1), 2 * n - 1)

    @pytest.mark.parametrize("k", range(1, 9))
    def test_polynomial_identity(self, k):
        for n in range(k + 1, 1001):
            table = oracle.recursion_coeffs(n, k)
            assert table.polynomial() == oracle.expanded_product(n, k)
            assert table.r[0] == -table.mu
            assert table.mu == (-1) ** k * math.prod(range(n - k + 1, n + 1))

    def test_big_integers(self):
        table = oracle.recursion_coeffs(10**6, 16)
        assert table.polynomial() == oracle.expanded_product(10**6, 16)
        assert abs(table.mu) > 2**63

    @pytest.mark.parametrize("n, k", [(5, 5), (5, 0), (1, 1)])
    def test_range(self, n, k):
        with pytest.raises(ConfigError):
            oracle.recursion_coeffs(n, k)


class TestMnk:
    @pytest.mark.parametrize("n", [2, 9, 1000])
    def test_k1(self, n):
        assert oracle.m_nk(n, 1) == Fraction(1, n)

    def test_value(self):
        assert oracle.m_nk(10, 2) == Fraction(19, 90)
        assert 1 / float(oracle.m_nk(10, 2)) == pytest.approx(4.73684, abs=5e-6)

    @pytest.mark.parametrize("n", [2, 5, 30])
    def test_harmonic(self, n):
        assert oracle.m_nk(n, n - 1) == sum(Fraction(1, j) for j in range(2, n + 1))

    @given(n=st.integers(3, 200), data=st.data())
    def test_increment(self, n, data):
        k = data.draw(st.integers(2, n - 1))
        assert oracle.m_nk(n, k) == oracle.m_nk(n, k - 1) + Fraction(1, n - k + 1)


class TestRoots:
    @pytest.mark.parametrize("n", [2, 3, 10, 100, 1000])
    def test_variance_k1(self, n):
        assert oracle.char_roots(n, 1, "variance")[0] == pytest.approx(2 - 1 / n, abs=1e-12)

    @pytest.mark.parametrize("n", [3, 50, 1000])
    def test_time_k2(self, n):
        roots = oracle.char_roots(n, 2, "time")
        assert roots[0] == 0
        assert abs(roots[1] - (2 * n - 1)) <= 1e-9 * n

    def test_variance_k2_quadratic(self):
        n = 100
        # (n - t)(n - 1 - t) = (n - 2)^2 (n - 1) / n
        b, c = -(2 * n - 1), n * (n - 1) - (n - 2) ** 2 * (n - 1) / n
        disc = math.sqrt(b * b - 4 * c)
        small, large = (-b - disc) / 2, (-b + disc) / 2
        roots = oracle.char_roots(n, 2, "variance")
        assert roots[0].real == pytest.approx(small, rel=1e-12)
        assert roots[1].real == pytest.approx(large, rel=1e-12)
        assert small == pytest.approx(1.98995, abs=5e-6)
        assert large == pytest.approx(197.01, abs=5e-3)

    @pytest.mark.parametrize("kind", ["variance", "time"])
    @pytest.mark.parametrize("n, k", [(8, 3), (20, 5), (50, 6), (300, 4)])
    def test_against_mpmath(self, kind, n, k):
        c = oracle._char_constant(n, k, kind)
        ours = sorted(oracle.char_roots(n, k, kind), key=lambda z: (z.real, z.imag))
        theirs = _mp_roots(n, k, mpmath.mpf(c.numerator) / c.denominator)
        np.testing.assert_allclose(ours, theirs, rtol=1e-10, atol=1e-10)

    @pytest.mark.parametrize("kind", ["variance", "time"])
    @pytest.mark.parametrize("k", range(1, 17))
    def test_residuals_large_n(self, kind, k):
        n = 10_000
        c = float(oracle._char_constant(n, k, kind))
        roots = oracle.char_roots(n, k, kind)
        assert roots.size == k
        assert max(abs(_char_residual(t, n, k, c)) for t in roots) <= 1e-10

    @pytest.mark.parametrize("k", [2, 3, 5, 8])
    def test_beta1_bracket_and_monotone(self, k):
        values = [oracle.char_roots(n, k, "variance")[0] for n in (k + 1, k + 3, 20, 50, 100, 400, 1000, 5000)]
        assert all(v.imag == 0 and 1 <= v.real <= 2 for v in values)
        assert all(b.real < c.real for b, c in zip(values, values[1:]))

    @pytest.mark.parametrize("k", [2, 3, 5])
    def test_beta1_expansion(self, k):
        err = [abs(oracle.char_roots(n, k, "variance")[0].real - (2 - 1 / n - (k - 1) / (2 * n * n))) for n in (100, 1000)]
        assert err[1] < err[0] / 100

    @pytest.mark.parametrize("k", [2, 3, 4, 6])
    def test_time_roots_approach_unit_circle_points(self, k):
        gaps = []
        for n in (100, 1000, 10_000):
            roots = oracle.char_roots(n, k, "time")
            target = 1 - np.exp(2j * np.pi * np.arange(k) / k)
            gaps.append(np.max(np.abs(roots / n - target)))
            assert roots[0] == 0
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-3

    def test_k_cap(self):
        with pytest.raises(ConfigError):
            oracle.char_roots(100, 17, "time")


KN_PAIRS = [(n, k) for n in range(5, 13) for k in (1, 2, 3)]


class TestSpectralV:
    @pytest.mark.parametrize("n", [3, 10, 100])
    @pytest.mark.parametrize("x", [0.0, 0.4, 1.0])
    def test_k1_closed_form(self, n, x):
        v = oracle.spectral_v(n, 1, A)(x)
        assert v == pytest.approx(math.exp((2 - 1 / n) * (x - A)), rel=1e-13)
        P = math.exp(x - A)
        assert v - P * P == pytest.approx(P * P * (P ** (-1 / n) - 1), rel=1e-9, abs=1e-15)

    @pytest.mark.parametrize("n, k", KN_PAIRS)
    def test_boundary_conditions(self, n, k):
        if k > n - 2:
            pytest.skip("needs k <= n - 2")
        sol = oracle.spectral_v(n, k, A)
        rhs = np.array([1 / n + (1 - 1 / n) * 2.0**m for m in range(k)])
        np.testing.assert_allclose(sol.derivatives_at_a(k), rhs, rtol=0, atol=1e-9)
        assert sol(A) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("kind", ["variance", "time"])
    @pytest.mark.parametrize("n, k", [(1000, 8), (10_000, 16)])
    def test_boundary_conditions_large(self, kind, n, k):
        # m-th derivatives reach |beta|^m ~ (2n)^m; check relative to the sum's own scale
        sol = (oracle.spectral_v if kind == "variance" else oracle.spectral_T)(n, k, A)
        if kind == "variance":
            rhs = np.array([1 / n + (1 - 1 / n) * 2.0**m for m in range(k)])
        else:
            rhs = np.zeros(k)
            rhs[0] = 1.0
        scale = np.array([np.sum(np.abs(sol.coeffs * sol.roots**m)) for m in range(k)])
        assert np.all(np.abs(sol.derivatives_at_a(k) - rhs) <= 1e-9 * np.maximum(scale, 1.0))
        assert sol(A) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("n, k", [(10, 3), (50, 5), (1000, 8)])
    def test_real_on_grid(self, n, k):
        sol = oracle.spectral_v(n, k, A)
        assert np.max(np.abs(sol.complex_values(np.linspace(0, A, 201)).imag)) <= 1e-9

    @pytest.mark.parametrize("n, k", [(10, 3), (12, 4), (40, 6)])
    def test_vandermonde_cross_check(self, n, k):
        sol = oracle.spectral_v(n, k, A)
        np.testing.assert_allclose(sol.vandermonde_coeffs(), sol.coeffs, rtol=1e-8, atol=1e-10)

    @pytest.mark.parametrize("n, k", KN_PAIRS)
    def test_variance_nonnegative(self, n, k):
        if k > n - 2:
            pytest.skip("needs k <= n - 2")
        x = np.linspace(0, A, 401)
        assert np.all(oracle.spectral_v(n, k, A)(x) >= np.exp(2 * (x - A)) * (1 - 1e-12))

    def test_leading_coeff_tends_to_one(self):
        for k in (2, 3, 5):
            assert abs(oracle.spectral_v(10_000, k, A).leading_coeff - 1) < 1e-2


class TestSpectralT:
    @pytest.mark.parametrize("n", [3, 10, 100])
    @pytest.mark.parametrize("x", [0.0, 0.3, 1.0])
    def test_k1_closed_form(self, n, x):
        assert oracle.spectral_T(n, 1, A)(x) == pytest.approx(n * (A - x) + 1, rel=1e-13)

    @pytest.mark.parametrize("n, k", KN_PAIRS)
    def test_boundary(self, n, k):
        if k > n - 2:
            pytest.skip("needs k <= n - 2")
        sol = oracle.spectral_T(n, k, A)
        assert sol.slope == 1 / float(oracle.m_nk(n, k))
        expected = np.zeros(k)
        expected[0] = 1.0
        np.testing.assert_allclose(sol.derivatives_at_a(k), expected, atol=1e-9)

    @pytest.mark.parametrize("n, k", [(10, 3), (40, 5)])
    def test_vandermonde_cross_check(self, n, k):
        sol = oracle.spectral_T(n, k, A)
        np.testing.assert_allclose(sol.vandermonde_coeffs(), sol.coeffs, rtol=1e-8, atol=1e-10)

    @pytest.mark.parametrize("n", [100, 1000, 10_000])
    @pytest.mark.parametrize("k", [1, 2, 3, 5, 8])
    def test_offset_matches_renewal_theory(self, n, k):
        # expected renewals on [0, t] grow like t / mu + (sigma^2 - mu^2) / (2 mu^2), plus the final level
        assert oracle.spectral_T(n, k, A).leading_coeff == pytest.approx(float(oracle.renewal_offset(n, k)), rel=1e-9)

    @pytest.mark.parametrize("k", [1, 2, 3, 5])
    def test_offset_limit(self, k):
        assert abs(oracle.spectral_T(10_000, k, A).leading_coeff - (k + 1) / (2 * k)) < 1e-2

    @pytest.mark.xfail(strict=True, reason="printed limit (3k-1)/(2k) disagrees with renewal theory for k >= 2")
    @pytest.mark.parametrize("k", [2, 3])
    def test_offset_printed_limit(self, k):
        assert abs(oracle.spectral_T(10_000, k, A).leading_coeff - (3 * k - 1) / (2 * k)) < 1e-2


class TestGrid:
    @pytest.mark.parametrize("n, k", [(10, 3), (5, 1), (20, 7)])
    def test_p_is_exponential(self, n, k):
        sol = oracle.solve_functional_equation("p", n, k, A, grid_size=4096)
        assert np.max(np.abs(sol.values - np.exp(sol.grid - A))) <= 1e-6

    def test_T_k1_meets_tolerance(self):
        sol = oracle.solve_functional_equation("T", 5, 1, A, tol=1e-8)
        assert np.max(np.abs(sol.values - (5 * (A - sol.grid) + 1))) <= 1e-8

    @pytest.mark.parametrize("kind, n, grid_size", [("T", 5, 4096), ("T", 40, 1 << 18), ("v", 100, 1 << 20)])
    def test_richardson_estimate_is_accurate(self, kind, n, grid_size):
        # k = 1 has closed forms; the estimate is asymptotically exact, not a bound
        sol = oracle.solve_functional_equation(kind, n, 1, A, grid_size=grid_size)
        exact = np.array([oracle.closed_form_k1(n, A, x)[0 if kind == "v" else 1] for x in sol.grid])
        err = np.abs(sol.values - exact)
        assert 0.9 <= err.max() / sol.estimated_error <= 1.1

    def test_v_k1_n100(self):
        # the kernel 100 exp(-100 s) is sharp: 2^20 intervals leave ~1e-8
        sol = oracle.solve_functional_equation("v", 100, 1, A, grid_size=1 << 20)
        var = sol.values[0] - math.exp(-2)
        exact = math.exp(-2) * math.expm1(0.01)
        assert abs(var - exact) <= 2e-8
        assert exact == pytest.approx(1.360142e-3, abs=5e-10)

    @pytest.mark.parametrize("kind", ["v", "T"])
    @pytest.mark.parametrize("n, k", KN_PAIRS)
    def test_agrees_with_spectral(self, kind, n, k):
        if k > n - 2:
            pytest.skip("needs k <= n - 2")
        grid = oracle.solve_functional_equation(kind, n, k, A)
        spectral = (oracle.spectral_v if kind == "v" else oracle.spectral_T)(n, k, A)
        assert np.max(np.abs(spectral(grid.grid) - grid.values)) <= grid.estimated_error + 1e-8

    @pytest.mark.parametrize("kind", ["p", "v", "T"])
    @pytest.mark.parametrize("n, k", [(6, 1), (9, 3), (12, 4)])
    def test_recursive_and_direct_sweeps_agree(self, kind, n, k):
        fast = oracle.solve_functional_equation(kind, n, k, A, grid_size=1024)
        slow = oracle.solve_functional_equation(kind, n, k, A, grid_size=1024, method="direct")
        np.testing.assert_allclose(fast.values, slow.values, rtol=1e-11)

    @pytest.mark.parametrize("kind", ["v", "T"])
    @pytest.mark.parametrize("n, k", [(10, 3), (8, 2), (6, 4), (12, 3)])
    def test_spectral_residual_within_quadrature_error(self, kind, n, k):
        # the exact solution leaves a pure O(h^2) trapezoid residual; its own
        # Richardson estimate must cover it at every node
        G = 16384
        spectral = (oracle.spectral_v if kind == "v" else oracle.spectral_T)(n, k, A)
        fine_x = np.linspace(0, A, G + 1)
        fine = oracle.functional_residual(kind, n, k, A, spectral(fine_x))[::2]
        coarse = oracle.functional_residual(kind, n, k, A, spectral(fine_x[::2]))
        assert np.all(np.abs(fine) <= np.abs(fine - coarse) / 3 + 1e-12)

    @pytest.mark.parametrize("kind", ["p", "v", "T"])
    def test_bounds_and_monotone(self, kind):
        sol = oracle.solve_functional_equation(kind, 10, 3, A, grid_size=2048)
        if kind == "T":
            assert np.all(sol.values >= 1 - 1e-12)
            assert np.all(np.diff(sol.values) <= 1e-12)
        else:
            assert np.all((sol.values > 0) & (sol.values <= 1 + 1e-12))
            assert np.all(np.diff(sol.values) >= -1e-12)

    def test_refinement_failure(self):
        with pytest.raises(oracle.ConvergenceError):
            oracle.solve_functional_equation("T", 10, 2, A, tol=1e-14, max_grid=256)

    @pytest.mark.parametrize("grid_size", [32, 101])
    def test_grid_size_validation(self, grid_size):
        with pytest.raises(ConfigError):
            oracle.solve_functional_equation("p", 10, 2, A, grid_size=grid_size)


class TestAsymptotics:
    def test_var_leading(self):
        assert oracle.asymptotics(100, 1, math.exp(-1)).var_leading == pytest.approx(math.exp(-2) / 100, rel=1e-14)
        assert oracle.asymptotics(100, 1, math.exp(-1)).var_leading == pytest.approx(1.35335e-3, abs=5e-9)

    def test_T_expansion(self):
        got = oracle.asymptotics(1000, 2, math.exp(-1)).T_expansion
        assert got == pytest.approx(1000 * (0.5 - 1 / 4000) + 5 / 4, rel=1e-14)

    def test_cost_leading(self):
        assert oracle.asymptotics(10**12, 1, math.exp(-10)).cost_expansion == pytest.approx(110, rel=1e-9)

    def test_second_order_flagged(self):
        assert oracle.asymptotics(100, 2, 0.1).var_second_informational

    def test_k1_second_order_disagrees_with_exact(self):
        # exact k = 1: n Var / P^2 = n (P^(-1/n) - 1) = t + t^2 / (2n) + ...; printed term vanishes at k = 1
        n, t = 1000, 3.0
        P = math.exp(-t)
        exact = n * (P ** (-1 / n) - 1) - t
        pred = oracle.asymptotics(n, 1, P)
        assert exact == pytest.approx(t * t / (2 * n), rel=1e-2)
        assert pred.var_second == 0.0

    @pytest.mark.parametrize("P", [0.0, 1.0, 1.5])
    def test_range(self, P):
        with pytest.raises(ConfigError):
            oracle.asymptotics(100, 1, P)


class TestCost:
    def test_direct(self):
        cm = oracle.CostModel(1.0, 0.0, 1.0)
        assert oracle.cost("direct", cm, p=math.exp(-1)) == pytest.approx((1 - math.exp(-1)) * math.e, rel=1e-14)
        assert oracle.cost("direct", cm, p=math.exp(-1)) == pytest.approx(1.71828, abs=5e-6)

    def test_k1_closed_form_limit(self):
        P = math.exp(-1)
        values = []
        for n in (100, 10_000, 1_000_000):
            v, T = oracle.closed_form_k1(n, 1.0)
            values.append(oracle.dimensionless_cost(v, P, T, n, 1))
        assert abs(values[-1] - 2) < 1e-5
        assert abs(values[0] - 2) > abs(values[1] - 2) > abs(values[2] - 2)

    @pytest.mark.parametrize("k", [1, 2])
    def test_exact_cost_rate(self, k):
        gaps = [abs(oracle.exact_cost_exponential(n, k, 1.0) - 2) for n in (100, 1000)]
        assert gaps[0] / gaps[1] >= 8

    @given(eps=st.floats(1e-3, 10.0), c0=st.floats(0.1, 10.0), c1=st.floats(0.0, 5.0))
    def test_epsilon_scaling(self, eps, c0, c1):
        big, small = oracle.CostModel(c0, c1, eps), oracle.CostModel(c0, c1, eps / 2)
        inputs = dict(v=0.2, P=0.3, T=40.0, n=50, k=2)
        assert oracle.cost("ams", small, **inputs) == pytest.approx(4 * oracle.cost("ams", big, **inputs), rel=1e-12)
        assert oracle.cost("direct", small, p=0.01) == pytest.approx(4 * oracle.cost("direct", big, p=0.01), rel=1e-12)

    def test_leading_crossover_condition(self):
        # AMS wins at leading order iff (1 + (c1/c0) log n)((log p)^2 - log p) < (1 - p)/p
        cm, n = oracle.CostModel(1.0, 0.5, 1.0), 1000
        for t in (0.5, 1.0, 3.0, 10.0):
            p = math.exp(-t)
            ams_leading = (cm.c0 + cm.c1 * math.log(n)) * (t * t + t)
            wins = ams_leading < oracle.cost("direct", cm, p=p)
            assert wins == ((1 + cm.c1 / cm.c0 * math.log(n)) * (t * t + t) < (1 - p) / p)
        assert (1 + 0.5 * math.log(n)) * 110 < math.expm1(10)

    @pytest.mark.parametrize("kwargs", [dict(c0=0.0), dict(c1=-1.0), dict(epsilon=0.0)])
    def test_cost_model_validation(self, kwargs):
        with pytest.raises(ConfigError):
            oracle.CostModel(**kwargs)

    def test_zero_probability(self):
        with pytest.raises(ConfigError):
            oracle.cost("direct", oracle.CostModel(), p=0.0)
