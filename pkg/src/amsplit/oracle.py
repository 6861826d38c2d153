"""Deterministic reference values for AMS in the exponential case.

With ``X ~ Exp(1)`` and ``P(x) = exp(x - a)``, three functions of the start
level ``x`` describe the estimator exactly at finite ``n``:

* ``p(x) = E[p_hat]``, which equals ``P(x)``;
* ``v(x) = E[p_hat^2]``, so ``Var(p_hat) = v - P^2``;
* ``T(x) = E[J] + 1``.

Each solves a Volterra equation ``q(x) = c * int_x^a q(y) g(y - x) dy + theta(x)``
whose kernel ``g = f_{n,k}(.; 0)`` is the density of the ``k``-th order
statistic of ``n`` unit exponentials.  They also solve order-``k`` linear
ODEs with characteristic polynomial ``prod_j (n - j - t) / prod_j (n - j) = c``,
which gives closed exponential-sum forms.

Two independent routes are provided:

* :func:`solve_functional_equation` discretises the Volterra equation with
  the composite trapezoid rule and a downward sweep from ``a``;
* :func:`spectral_v` and :func:`spectral_T` find the characteristic roots
  and fit the exponential sum to the boundary derivatives at ``a``.

Integer-valued quantities (ODE coefficients, ``M_{n,k}``) are exact.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numba import njit
from scipy import optimize

from .errors import ConditioningError, ConfigError, ConvergenceError
from .models import ExponentialModel
from .order_stats import log_binom, theta_p, theta_v

K_MAX = 16
MIN_ROOT_GAP = 1e-8


def _check_nk(n, k, kmax_offset=1):
    if not isinstance(n, (int, np.integer)) or not isinstance(k, (int, np.integer)):
        raise ConfigError(f"n and k must be integers, got n={n!r}, k={k!r}")
    if not 1 <= k <= n - kmax_offset:
        raise ConfigError(f"need 1 <= k <= n-{kmax_offset}, got n={n}, k={k}")


# ODE coefficients


@dataclass(frozen=True)
class CoefficientTable:
    """Exact coefficients of the order-``k`` ODE.

    ``r_levels[l]`` holds ``(r_{0,l}, ..., r_{l-1,l})`` and ``mu_levels[l]``
    holds ``mu_l``, for ``l = 0..k``.
    """

    n: int
    k: int
    mu_levels: tuple
    r_levels: tuple

    @property
    def mu(self):
        return self.mu_levels[self.k]

    @property
    def r(self):
        return self.r_levels[self.k]

    def polynomial(self):
        """Integer coefficients of ``t^k - sum_m r_m t^m``, lowest degree first."""
        return tuple(-c for c in self.r) + (1,)


def recursion_coeffs(n, k) -> CoefficientTable:
    """Run the coefficient recursion in exact integer arithmetic.

    With ``c_l = n - k + l``:

    * ``mu_0 = 1``, ``mu_{l+1} = -c_{l+1} mu_l``;
    * ``r_{0,1} = c_1``;
    * ``r_{0,l+1} = -c_{l+1} r_{0,l}``;
    * ``r_{m,l+1} = r_{m-1,l} - c_{l+1} r_{m,l}`` for ``1 <= m <= l-1``;
    * ``r_{l,l+1} = r_{l-1,l} + c_{l+1}``.

    The top branch keeps the ``r_{l-1,l}`` term; without it the ``k = 2``
    table already disagrees with ``(t - n)(t - n + 1)``.
    """
    _check_nk(n, k)
    n, k = int(n), int(k)
    mu = [1]
    r = [()]
    for l in range(k):
        c = n - k + l + 1
        mu.append(-c * mu[l])
        prev = r[l]
        if l == 0:
            r.append((c,))
            continue
        nxt = [-c * prev[0]]
        for m in range(1, l):
            nxt.append(prev[m - 1] - c * prev[m])
        nxt.append(prev[l - 1] + c)
        r.append(tuple(nxt))
    return CoefficientTable(n, k, tuple(mu), tuple(r))


def expanded_product(n, k):
    """Integer coefficients of ``(t - n)(t - n + 1)...(t - n + k - 1)``, lowest first."""
    coeffs = [1]
    for j in range(k):
        root = n - j
        out = [0] * (len(coeffs) + 1)
        for i, c in enumerate(coeffs):
            out[i + 1] += c
            out[i] -= root * c
        coeffs = out
    return tuple(coeffs)


def m_nk(n, k) -> Fraction:
    """Mean of the ``k``-th order statistic of ``n`` unit exponentials, exactly."""
    _check_nk(n, k)
    return sum((Fraction(1, n - j) for j in range(k)), Fraction(0))


def var_nk(n, k) -> Fraction:
    """Variance of the same order statistic: ``sum_j 1/(n-j)^2``."""
    _check_nk(n, k)
    return sum((Fraction(1, (n - j) ** 2) for j in range(k)), Fraction(0))


# characteristic roots


def _char_constant(n, k, kind):
    if kind == "variance":
        return Fraction((n - k) ** 2, n * n)
    if kind == "time":
        return Fraction(1)
    raise ConfigError(f"kind must be 'variance' or 'time', got {kind!r}")


def _char_poly_scaled(n, k, c):
    """Coefficients in ``s = t/n`` of ``prod(n-j-t) - c prod(n-j)``, highest first, monic."""
    # prod_j (n - j - t) = (-1)^k prod_j (t - (n - j))
    coeffs = list(expanded_product(n, k))
    sign = -1 if k % 2 else 1
    coeffs = [Fraction(sign * q) for q in coeffs]
    base = math.prod(n - j for j in range(k))
    coeffs[0] -= c * base
    lead = coeffs[k]
    scaled = [coeffs[m] * Fraction(n) ** m / lead / Fraction(n) ** k for m in range(k + 1)]
    return scaled[::-1]


def _char_value(t, n, k, c):
    """``prod(1 - t/(n-j)) - c`` and its derivative in ``t``."""
    terms = np.array([1.0 - t / (n - j) for j in range(k)], dtype=complex)
    prod = np.prod(terms)
    deriv = -prod * np.sum(1.0 / ((n - np.arange(k)) * terms))
    return prod - c, deriv


def _newton(t, n, k, c, iters=8):
    for _ in range(iters):
        f, df = _char_value(t, n, k, c)
        if df == 0:
            break
        step = f / df
        t = t - step
        if abs(step) <= 1e-15 * max(1.0, abs(t)):
            break
    return t


def _beta1(n, k):
    """Real root on [1, 2] of ``sum_j log(1 - t/(n-j)) = 2 log(1 - k/n)``."""
    target = 2.0 * math.log1p(-k / n)
    js = np.arange(k)

    def h(t):
        with np.errstate(divide="ignore"):
            return float(np.sum(np.log1p(-t / (n - js)))) - target

    def dh(t):
        return float(-np.sum(1.0 / (n - js - t)))

    if not h(1.0) >= 0.0 >= h(2.0):
        raise ConvergenceError(f"no sign change of the variance equation on [1, 2] (n={n}, k={k})")
    t = optimize.brentq(h, 1.0, 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    for _ in range(4):
        d = dh(t)
        if d == 0.0:
            break
        step = h(t) / d
        if not 1.0 <= t - step <= 2.0:
            break
        t -= step
        if abs(step) < 1e-16:
            break
    if abs(h(t)) > 1e-12:
        raise ConvergenceError(f"variance root did not converge: residual {h(t):.3e} (n={n}, k={k})")
    return t


def _order_roots(roots, n):
    phase = np.mod(np.angle(1.0 - roots / n), 2 * np.pi)
    # phases near 2*pi belong next to 0
    phase = np.where(phase > 2 * np.pi - 1e-9, 0.0, phase)
    return roots[np.lexsort((roots.imag, phase))]


def char_roots(n, k, kind):
    """All ``k`` roots of the characteristic equation.

    The first entry is ``beta^1`` (the real root in ``[1, 2]``) for
    ``kind="variance"`` and exactly ``0`` for ``kind="time"``.  Remaining
    roots are ordered by the phase of ``1 - t/n``.

    Raises
    ------
    ConditioningError
        If two roots are closer than ``1e-8``.
    ConvergenceError
        If Newton polishing leaves a residual above ``1e-10``.
    """
    _check_nk(n, k)
    if k > K_MAX:
        raise ConfigError(f"k is capped at {K_MAX}, got {k}")
    n, k = int(n), int(k)
    c = _char_constant(n, k, kind)
    cf = float(c)
    if kind == "time":
        # constant term vanishes exactly: divide by s
        poly = _char_poly_scaled(n, k, c)
        assert poly[-1] == 0
        rest = np.roots([float(q) for q in poly[:-1]]) * n if k > 1 else np.array([], dtype=complex)
        rest = np.array([_newton(complex(t), n, k, cf) for t in rest], dtype=complex)
        roots = np.concatenate([[0.0 + 0.0j], _order_roots(rest, n)])
    else:
        poly = _char_poly_scaled(n, k, c)
        raw = np.roots([float(q) for q in poly]) * n
        b1 = _beta1(n, k)
        first = int(np.argmin(np.abs(raw - b1)))
        rest = np.delete(raw, first)
        rest = np.array([_newton(complex(t), n, k, cf) for t in rest], dtype=complex)
        roots = np.concatenate([[complex(b1)], _order_roots(rest, n)])
    for t in roots[1:]:
        f, _ = _char_value(t, n, k, cf)
        if abs(f) > 1e-10:
            raise ConvergenceError(f"root {t} of the {kind} equation has residual {abs(f):.3e} (n={n}, k={k})")
    if k > 1:
        gaps = np.abs(roots[:, None] - roots[None, :])[np.triu_indices(k, 1)]
        if gaps.min() <= MIN_ROOT_GAP:
            raise ConditioningError(f"characteristic roots nearly coincide (gap {gaps.min():.2e}, n={n}, k={k})")
    return roots


# spectral reconstructions


def _lagrange_at(roots, l, t):
    others = np.delete(roots, l)
    return np.prod((t - others) / (roots[l] - others))


def _lagrange_deriv_at(roots, l, t):
    others = np.delete(roots, l)
    denom = np.prod(roots[l] - others)
    total = 0.0 + 0.0j
    for i in range(others.size):
        total += np.prod(np.delete(t - others, i))
    return total / denom


@dataclass(frozen=True)
class SpectralSolution:
    """``q(x) = slope (a - x) + Re sum_l coeffs[l] exp(roots[l] (x - a))``.

    ``slope`` is zero for ``kind="variance"`` and ``Delta = 1 / M_{n,k}``
    for ``kind="time"``.
    """

    n: int
    k: int
    a: float
    kind: str
    roots: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)
    slope: float = 0.0

    def complex_values(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        expo = np.exp(np.multiply.outer(x - self.a, self.roots))
        return self.slope * (self.a - x) + expo @ self.coeffs

    def __call__(self, x):
        out = self.complex_values(x).real
        return out if np.ndim(x) else float(out[0])

    def derivatives_at_a(self, order):
        """``d^m q / dx^m`` at ``a`` for ``m = 0..order-1``."""
        out = np.array([np.sum(self.coeffs * self.roots**m) for m in range(order)])
        if order > 1:
            out[1] -= self.slope
        return out

    @property
    def leading_coeff(self):
        """``eta^1`` or ``delta^1``."""
        return float(self.coeffs[0].real)

    def vandermonde_coeffs(self):
        """Coefficients recomputed by a dense solve of the Vandermonde system."""
        V = np.vander(self.roots, self.k, increasing=True).T
        if self.kind == "variance":
            rhs = np.array([1.0 / self.n + (1.0 - 1.0 / self.n) * 2.0**m for m in range(self.k)], dtype=complex)
        else:
            rhs = np.zeros(self.k, dtype=complex)
            rhs[0] = 1.0
            if self.k > 1:
                rhs[1] = self.slope
        return np.linalg.solve(V, rhs)


def spectral_v(n, k, a) -> SpectralSolution:
    """Exact ``v = E[p_hat^2]`` as a sum of ``k`` exponentials.

    Coefficients solve ``sum_l eta_l beta_l^m = 1/n + (1 - 1/n) 2^m``
    for ``m < k``, written in Lagrange form:
    ``eta_l = L_l(1)/n + (1 - 1/n) L_l(2)``.
    """
    _check_nk(n, k, 2)
    roots = char_roots(n, k, "variance")
    eta = np.array(
        [_lagrange_at(roots, l, 1.0) / n + (1.0 - 1.0 / n) * _lagrange_at(roots, l, 2.0) for l in range(k)],
        dtype=complex,
    )
    return SpectralSolution(int(n), int(k), float(a), "variance", roots, eta)


def spectral_T(n, k, a) -> SpectralSolution:
    """Exact ``T = E[J] + 1`` as an affine part plus ``k - 1`` exponentials.

    The slope is ``1 / M_{n,k}``; the remaining coefficients solve
    ``sum_l delta_l alpha_l^m = [m == 0] + slope [m == 1]``, i.e.
    ``delta_l = L_l(0) + slope L_l'(0)``.
    """
    _check_nk(n, k, 2)
    roots = char_roots(n, k, "time")
    slope = 1.0 / float(m_nk(n, k))
    delta = np.array(
        [_lagrange_at(roots, l, 0.0) + slope * _lagrange_deriv_at(roots, l, 0.0) for l in range(k)],
        dtype=complex,
    )
    return SpectralSolution(int(n), int(k), float(a), "time", roots, delta, slope)


def renewal_offset(n, k):
    """Constant term of ``T`` far below ``a``: ``(sigma^2 + mu^2) / (2 mu^2)``.

    ``mu`` and ``sigma^2`` are the mean and variance of one level increment;
    the value is exact at finite ``n`` and tends to ``(k + 1) / (2k)``.
    """
    mu = m_nk(n, k)
    return (var_nk(n, k) + mu * mu) / (2 * mu * mu)


def closed_form_k1(n, a, x=0.0):
    """Exact ``(v, T)`` for ``k = 1``: ``exp((2 - 1/n)(x - a))`` and ``n (a - x) + 1``."""
    return math.exp((2.0 - 1.0 / n) * (x - a)), n * (a - x) + 1.0


# Volterra quadrature


def kernel_values(n, k, h, count):
    """``f_{n,k}(d h; 0)`` for ``d = 0..count-1``."""
    s = h * np.arange(count)
    logg = math.log(k) + float(log_binom(n, k)) - (n - k + 1) * s
    if k > 1:
        with np.errstate(divide="ignore"):
            logg = logg + (k - 1) * np.log(-np.expm1(-s))
    g = np.exp(logg)
    g[0] = float(n) if k == 1 else 0.0
    return g


def kernel_exponentials(n, k):
    """Weights ``w_i`` and rates ``lam_i`` with ``f_{n,k}(s; 0) = sum_i w_i exp(-lam_i s)``."""
    scale = k * math.comb(n, k)
    weights = np.array([scale * math.comb(k - 1, i) * (-1) ** i for i in range(k)], dtype=float)
    rates = np.array([n - k + 1 + i for i in range(k)], dtype=float)
    return weights, rates


@njit(cache=True)
def _sweep(g, theta, c, h):
    # direct O(G^2) trapezoid sweep
    size = theta.size
    G = size - 1
    q = np.empty(size)
    q[G] = theta[G]
    diag = 1.0 - c * 0.5 * h * g[0]
    for i in range(G - 1, -1, -1):
        acc = 0.5 * q[G] * g[G - i]
        for m in range(i + 1, G):
            acc += q[m] * g[m - i]
        q[i] = (c * h * acc + theta[i]) / diag
    return q


@njit(cache=True)
def _sweep_recursive(weights, rates, g0, theta, c, h):
    # same trapezoid sums, accumulated per exponential in O(G k)
    size = theta.size
    G = size - 1
    nexp = weights.size
    decay = np.exp(-rates * h)
    acc = np.zeros(nexp)
    q = np.empty(size)
    q[G] = theta[G]
    diag = 1.0 - c * 0.5 * h * g0
    for i in range(G - 1, -1, -1):
        w = 0.5 if i + 1 == G else 1.0
        total = 0.0
        for j in range(nexp):
            acc[j] = decay[j] * (w * q[i + 1] + acc[j])
            total += weights[j] * acc[j]
        q[i] = (c * h * total + theta[i]) / diag
    return q


@njit(cache=True)
def _residual(q, g, theta, c, h):
    size = q.size
    G = size - 1
    out = np.empty(size)
    for i in range(size):
        if i == G:
            out[i] = q[G] - theta[G]
            continue
        acc = 0.5 * q[i] * g[0] + 0.5 * q[G] * g[G - i]
        for m in range(i + 1, G):
            acc += q[m] * g[m - i]
        out[i] = q[i] - c * h * acc - theta[i]
    return out


def _equation(kind, n, k, a, grid):
    model = ExponentialModel()
    if kind == "p":
        return 1.0 - k / n, theta_p(n, k, model, grid, a)
    if kind == "v":
        _check_nk(n, k, 2)
        return (1.0 - k / n) ** 2, theta_v(n, k, model, grid, a)
    if kind == "T":
        return 1.0, np.ones_like(grid)
    raise ConfigError(f"kind must be one of 'p', 'v', 'T', got {kind!r}")


def _solve_fixed(kind, n, k, a, G, method="recursive"):
    grid = np.linspace(0.0, a, G + 1)
    h = a / G
    c, theta = _equation(kind, n, k, a, grid)
    theta = np.asarray(theta, dtype=float)
    if method == "direct":
        return grid, _sweep(kernel_values(n, k, h, G + 1), theta, c, h)
    if method != "recursive":
        raise ConfigError(f"method must be 'recursive' or 'direct', got {method!r}")
    weights, rates = kernel_exponentials(n, k)
    g0 = float(n) if k == 1 else 0.0
    return grid, _sweep_recursive(weights, rates, g0, theta, c, h)


def functional_residual(kind, n, k, a, values):
    """Trapezoid residual of the Volterra equation for ``values`` on a uniform grid."""
    G = len(values) - 1
    grid = np.linspace(0.0, a, G + 1)
    h = a / G
    c, theta = _equation(kind, n, k, a, grid)
    g = kernel_values(n, k, h, G + 1)
    return _residual(np.asarray(values, dtype=float), g, np.asarray(theta, dtype=float), c, h)


@dataclass(frozen=True)
class GridSolution:
    """Trapezoid solution on ``grid`` with a per-node Richardson error estimate."""

    kind: str
    n: int
    k: int
    a: float
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    error_estimate: np.ndarray = field(repr=False)

    @property
    def estimated_error(self):
        return float(self.error_estimate.max())

    def __call__(self, x):
        return np.interp(x, self.grid, self.values)


def _richardson(fine, coarse):
    est = np.empty_like(fine)
    est[::2] = np.abs(fine[::2] - coarse) / 3.0
    est[1::2] = np.maximum(est[:-1:2], est[2::2])
    return est


def solve_functional_equation(
    kind, n, k, a, grid_size=None, tol=1e-8, max_grid=1 << 20, min_grid=64, method="recursive"
):
    """Solve the ``p``, ``v`` or ``T`` equation on ``[0, a]``.

    With ``grid_size`` given, solves on that many intervals and estimates the
    error against the half-size grid.  Otherwise doubles from ``min_grid``
    until the estimate drops below ``tol``.

    ``method="recursive"`` splits the kernel into its ``k`` exponentials and
    accumulates the trapezoid sums in ``O(G k)``; ``"direct"`` forms them
    explicitly in ``O(G^2)``.  Both evaluate the same quadrature rule.  The
    exponential split has alternating weights of size ``k C(n, k) C(k-1, i)``,
    so the recursive route loses digits when ``n`` and ``k`` are both large.

    Raises
    ------
    ConvergenceError
        If ``max_grid`` is reached before ``tol``.
    """
    _check_nk(n, k)
    if grid_size is not None:
        if grid_size < 64 or grid_size % 2:
            raise ConfigError(f"grid_size must be even and >= 64, got {grid_size}")
        _, coarse = _solve_fixed(kind, n, k, a, grid_size // 2, method)
        grid, fine = _solve_fixed(kind, n, k, a, grid_size, method)
        return GridSolution(kind, n, k, a, grid, fine, _richardson(fine, coarse))
    G = min_grid
    _, coarse = _solve_fixed(kind, n, k, a, G, method)
    while True:
        G *= 2
        grid, fine = _solve_fixed(kind, n, k, a, G, method)
        est = _richardson(fine, coarse)
        if est.max() < tol:
            return GridSolution(kind, n, k, a, grid, fine, est)
        if G >= max_grid:
            raise ConvergenceError(
                f"grid refinement reached {G} intervals with error estimate {est.max():.3e} > {tol:.1e}"
            )
        coarse = fine


# asymptotics and cost


@dataclass(frozen=True)
class AsymptoticPrediction:
    """Large-``n`` expansions evaluated as printed, with ``t = -log P``.

    ``var_second`` is kept for reference only: at ``k = 1`` it disagrees
    with the exact variance, whose second-order term is ``t^2 / (2n)``.
    """

    var_leading: float
    var_second: float
    T_expansion: float
    cost_expansion: float
    var_second_informational: bool = True


def asymptotics(n, k, P) -> AsymptoticPrediction:
    if not 0.0 < P < 1.0:
        raise ConfigError(f"P must lie in (0, 1), got {P}")
    t = -math.log(P)
    var_leading = P * P * t / n
    var_second = P * P / n * (t * t + t) * (k - 1) / (2.0 * n)
    T_expansion = n * (t * (1.0 / k - (k - 1) / (2.0 * k * n)) + (3 * k - 1) / (2.0 * k * n))
    cost_expansion = (t * t + t) + (t * (k - 1) + 0.5 * t * t + 0.5 * t**3) / n
    return AsymptoticPrediction(var_leading, var_second, T_expansion, cost_expansion)


@dataclass(frozen=True)
class CostModel:
    """Per-sample cost ``c0``, sorting coefficient ``c1``, target relative error ``epsilon``."""

    c0: float = 1.0
    c1: float = 0.0
    epsilon: float = 1.0

    def __post_init__(self):
        if self.c0 <= 0 or self.c1 < 0 or self.epsilon <= 0:
            raise ConfigError(f"cost parameters must be positive (c1 may be 0), got {self}")


def dimensionless_cost(v, P, T, n, k):
    """``(v - P^2) / P^2 * (k T + n - k)``: work times relative variance."""
    if P <= 0:
        raise ConfigError("P must be positive")
    return (v - P * P) / (P * P) * (k * T + n - k)


def cost(kind, cost_model: CostModel, **inputs):
    """Work to reach relative error ``epsilon``.

    ``kind="ams"`` takes ``v, P, T, n, k``; ``kind="direct"`` takes ``p``.
    """
    eps2 = cost_model.epsilon**2
    if kind == "ams":
        n = inputs["n"]
        C = dimensionless_cost(inputs["v"], inputs["P"], inputs["T"], n, inputs["k"])
        return (cost_model.c0 + cost_model.c1 * math.log(n)) * C / eps2
    if kind == "direct":
        p = inputs["p"]
        if p <= 0:
            raise ConfigError("p must be positive")
        return cost_model.c0 * (1.0 - p) / (eps2 * p)
    raise ConfigError(f"kind must be 'ams' or 'direct', got {kind!r}")


def exact_cost_exponential(n, k, a, x=0.0):
    """Dimensionless AMS cost from the spectral ``v`` and ``T``."""
    P = math.exp(x - a)
    v = spectral_v(n, k, a)(x)
    T = spectral_T(n, k, a)(x)
    return dimensionless_cost(v, P, T, n, k)
