"""Order statistics of conditional samples.

For ``n`` i.i.d. draws from ``L(X | X > x)``, the ``k``-th smallest has
density

    f_{n,k}(y; x) = k C(n, k) F(y; x)^(k-1) f(y; x) (1 - F(y; x))^(n-k)

and CDF ``I_{F(y;x)}(k, n-k+1)`` (regularized incomplete beta).  Survival
factors are taken from the cumulative hazard, so ``1 - F(y; x)`` is never
formed by subtraction.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigError
from .models import ExponentialModel, RandomModel


def log_binom(n, k):
    return special.gammaln(n + 1) - special.gammaln(k + 1) - special.gammaln(n - k + 1)


def _survival(model, y, x):
    """``1 - F(y; x)`` for ``y >= x``."""
    return np.exp(-(model.lam(np.maximum(y, x)) - model.lam(x)))


def _conditional_cdf(model, y, x):
    return -np.expm1(-(model.lam(np.maximum(y, x)) - model.lam(x)))


@dataclass(frozen=True)
class OrderStatSpec:
    """Rank ``k`` among ``n`` draws from ``L(X | X > x)``."""

    n: int
    k: int
    x: float = 0.0
    model: RandomModel = ExponentialModel()

    def __post_init__(self):
        if self.n < 2 or not 1 <= self.k <= self.n - 1:
            raise ConfigError(f"need n >= 2 and 1 <= k <= n-1, got n={self.n}, k={self.k}")


def density_fnk(spec: OrderStatSpec, y):
    """Density of the ``k``-th order statistic; zero below ``x``."""
    y = np.asarray(y, dtype=float)
    n, k, x, model = spec.n, spec.k, spec.x, spec.model
    span = model.lam(np.maximum(y, x)) - model.lam(x)
    # log f(y; x) = log h(y) - span
    log_val = (
        np.log(k)
        + log_binom(n, k)
        + np.log(model.hazard(np.maximum(y, x)))
        - (n - k + 1) * span
    )
    if k > 1:
        with np.errstate(divide="ignore"):
            log_val = log_val + (k - 1) * np.log(-np.expm1(-span))
    out = np.exp(log_val)
    return np.where(y < x, 0.0, out)


def cdf_Fnk(spec: OrderStatSpec, y):
    """``P(k-th order statistic <= y)`` via the incomplete beta function."""
    F = _conditional_cdf(spec.model, np.asarray(y, dtype=float), spec.x)
    return special.betainc(spec.k, spec.n - spec.k + 1, F)


def sf_Fnk(spec: OrderStatSpec, y):
    """``1 - cdf_Fnk``, computed without cancellation."""
    F = _conditional_cdf(spec.model, np.asarray(y, dtype=float), spec.x)
    return special.betaincc(spec.k, spec.n - spec.k + 1, F)


def _check(n, k, kmax):
    if not 1 <= k <= kmax:
        raise ConfigError(f"k must satisfy 1 <= k <= {kmax} for n={n}, got k={k}")


def _order_sf(n, k, F):
    # valid for 1 <= k <= n, including the maximum k = n
    return special.betaincc(k, n - k + 1, F)


def theta_p(n, k, model, x, a):
    """Probability that the first level already reaches ``a``, times the corrector.

    ``(1 - F(a; x)) (1 - F_{n-1,k}(a; x))``.
    """
    _check(n, k, n - 1)
    F = _conditional_cdf(model, a, x)
    return _survival(model, a, x) * _order_sf(n - 1, k, F)


def theta_v(n, k, model, x, a):
    """Second-moment counterpart of :func:`theta_p`; requires ``k <= n - 2``.

    ``(1/n)(1-F)(1-F_{n-1,k}) + (1-1/n)(1-F)^2 (1-F_{n-2,k})`` at ``(a; x)``.
    """
    _check(n, k, n - 2)
    F = _conditional_cdf(model, a, x)
    surv = _survival(model, a, x)
    first = surv * _order_sf(n - 1, k, F)
    second = surv**2 * _order_sf(n - 2, k, F)
    return first / n + (1.0 - 1.0 / n) * second
