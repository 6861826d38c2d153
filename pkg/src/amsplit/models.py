"""Positive random variables with exact conditional samplers.

A model is described by its CDF ``F``, quantile, and the cumulative hazard
``lam(y) = -log(1 - F(y))``.  Conditional quantities are all computed through
``lam``: the survival of ``L(X | X > x)`` at ``y`` is ``exp(-(lam(y) - lam(x)))``,
which stays accurate deep in the tail where ``1 - F`` underflows.

Conditional sampling always goes through the quantile transform with one
explicit uniform per draw::

    y = lam_inv(lam(x) - log1p(-u))

so that two models fed the same uniforms produce draws whose cumulative
hazards coincide.  The AMS kernels use the same formulas, keyed by
``kernel_code``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateConditioningError, InfiniteLambdaError

# kernel codes shared with amsplit._kernels
EXPONENTIAL = 0
PARETO = 1
WEIBULL = 2
COMMITTOR = 3


class RandomModel:
    """Base class; subclasses provide ``cdf``, ``quantile``, ``lam``, ``lam_inv``.

    All four accept scalars or arrays.
    """

    key = "abstract"
    kernel_code = -1
    supports_atom_at_target = False

    def cdf(self, y):
        raise NotImplementedError

    def quantile(self, p):
        raise NotImplementedError

    def lam(self, y):
        raise NotImplementedError

    def lam_inv(self, s):
        raise NotImplementedError

    def hazard(self, y):
        """Derivative of ``lam``; the density is ``hazard(y) * (1 - F(y))``."""
        raise NotImplementedError

    def pdf(self, y):
        return self.hazard(y) * np.exp(-self.lam(y))

    def survival(self, y):
        return np.exp(-self.lam(y))

    @property
    def params(self):
        return ()

    def kernel_params(self):
        return np.array(self.params, dtype=np.float64)

    def sample_raw(self, x, u):
        """Quantile of ``L(X | X > x)`` at scalar ``u``, without validation.

        Scalar code uses :mod:`math` so that results match the compiled
        kernels bit for bit.
        """
        return float(self.lam_inv(float(self.lam(x)) - math.log1p(-u)))


@dataclass(frozen=True)
class ExponentialModel(RandomModel):
    """``X ~ Exp(1)``; ``lam`` is the identity."""

    key = "exponential"
    kernel_code = EXPONENTIAL

    def cdf(self, y):
        y = np.maximum(y, 0.0)
        return -np.expm1(-y)

    def quantile(self, p):
        return -np.log1p(-p)

    def lam(self, y):
        return np.maximum(y, 0.0)

    def lam_inv(self, s):
        return s

    def hazard(self, y):
        return np.where(np.asarray(y) >= 0, 1.0, 0.0)

    def sample_raw(self, x, u):
        return x - math.log1p(-u)


@dataclass(frozen=True)
class ParetoModel(RandomModel):
    """Lomax law ``F(y) = 1 - (1 + y)^(-shape)``."""

    shape: float = 2.0

    key = "pareto"
    kernel_code = PARETO

    def __post_init__(self):
        if not self.shape > 0:
            raise ConfigError(f"pareto shape must be positive, got {self.shape}")

    @property
    def params(self):
        return (self.shape,)

    def cdf(self, y):
        y = np.maximum(y, 0.0)
        return -np.expm1(-self.shape * np.log1p(y))

    def quantile(self, p):
        return np.expm1(-np.log1p(-p) / self.shape)

    def lam(self, y):
        return self.shape * np.log1p(np.maximum(y, 0.0))

    def lam_inv(self, s):
        return np.expm1(s / self.shape)

    def hazard(self, y):
        return self.shape / (1.0 + np.maximum(y, 0.0))

    def sample_raw(self, x, u):
        s = self.shape * math.log1p(x) - math.log1p(-u)
        return math.expm1(s / self.shape)


@dataclass(frozen=True)
class WeibullModel(RandomModel):
    """``F(y) = 1 - exp(-y^shape)``."""

    shape: float = 2.0

    key = "weibull"
    kernel_code = WEIBULL

    def __post_init__(self):
        if not self.shape > 0:
            raise ConfigError(f"weibull shape must be positive, got {self.shape}")

    @property
    def params(self):
        return (self.shape,)

    def cdf(self, y):
        return -np.expm1(-self.lam(y))

    def quantile(self, p):
        return self.lam_inv(-np.log1p(-p))

    def lam(self, y):
        return np.maximum(y, 0.0) ** self.shape

    def lam_inv(self, s):
        return s ** (1.0 / self.shape)

    def hazard(self, y):
        y = np.maximum(y, 0.0)
        return self.shape * y ** (self.shape - 1.0)

    def sample_raw(self, x, u):
        s = x**self.shape - math.log1p(-u)
        return s ** (1.0 / self.shape)


@dataclass(frozen=True)
class CommittorToyModel(RandomModel):
    """Law of the running maximum of the committor along a reactive path.

    ``P(X > z) = xi0 / z`` on ``[xi0, 1)`` with an atom of mass ``xi0`` at the
    target level 1.  Started from level ``z``, the conditional law has survival
    ``z / t`` on ``[z, 1)`` and mass ``z`` at 1, so ``min(z / (1 - u), 1)``
    is an exact conditional sampler.
    """

    xi0: float = 0.05

    key = "committor"
    kernel_code = COMMITTOR
    supports_atom_at_target = True
    target = 1.0

    def __post_init__(self):
        if not 0.0 < self.xi0 < 1.0:
            raise ConfigError(f"committor xi0 must lie in (0, 1), got {self.xi0}")

    @property
    def params(self):
        return (self.xi0,)

    def cdf(self, y):
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore"):
            body = np.clip(1.0 - self.xi0 / y, 0.0, 1.0)
        return np.where(y >= 1.0, 1.0, body)

    def quantile(self, p):
        return np.minimum(self.xi0 / (1.0 - np.asarray(p, dtype=float)), 1.0)

    def lam(self, y):
        y = np.asarray(y, dtype=float)
        body = np.log(np.maximum(y, self.xi0) / self.xi0)
        return np.where(y >= 1.0, np.inf, body)

    def lam_inv(self, s):
        return np.minimum(self.xi0 * np.exp(s), 1.0)

    def hazard(self, y):
        raise DegenerateConditioningError("the committor law has an atom and no density")

    def sample_raw(self, x, u):
        z = max(x, self.xi0)
        return min(z / (1.0 - u), 1.0)

    def sample_tilde(self, x, u, a=1.0):
        """Conditional draw passed through :func:`tilde_transform`.

        The auxiliary uniform is recycled from ``u``: given the draw lands at
        or above ``a`` (i.e. ``1 - u <= z / a``), ``(1 - u) a / z`` is uniform
        on (0, 1] and independent of the decision.
        """
        z = max(x, self.xi0)
        v = 1.0 - u
        capped = min(z / v, 1.0)
        if capped >= a:
            # rounding can push u_aux one ulp above 1; skip the range check
            return a / (v * a / z)
        return capped


@dataclass(frozen=True)
class PdmpModel(ExponentialModel):
    """Running maximum of a 1d piecewise-deterministic process.

    The position moves up at unit speed until an Exp(1) switching time, then
    down at unit speed forever.  Its supremum started from ``x`` is ``x``
    plus the switching time, so the law coincides with the exponential case;
    the sampler below actually builds the path.
    """

    key = "pdmp"

    @staticmethod
    def switching_time(u):
        return -math.log1p(-u)

    def simulate_path(self, x, u, times):
        """Return ``(velocity, position)`` sampled at ``times``."""
        tau = self.switching_time(u)
        times = np.asarray(times, dtype=float)
        up = times <= tau
        velocity = np.where(up, 1.0, -1.0)
        position = np.where(up, x + times, x + tau - (times - tau))
        return velocity, position

    def sample_raw(self, x, u):
        # the path is piecewise linear; its supremum sits on a breakpoint
        tau = self.switching_time(u)
        _, position = self.simulate_path(x, u, np.array([0.0, tau]))
        return float(position.max())


MODEL_REGISTRY = {
    "exponential": ExponentialModel,
    "pareto": ParetoModel,
    "weibull": WeibullModel,
    "committor": CommittorToyModel,
    "pdmp": PdmpModel,
}


def make_model(key, params=()):
    """Build a model from its registry key and positional parameters."""
    try:
        cls = MODEL_REGISTRY[key]
    except KeyError:
        known = ", ".join(sorted(MODEL_REGISTRY))
        raise ConfigError(f"unknown model key {key!r} (known: {known})") from None
    try:
        return cls(*params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters {list(params)} for model {key!r}: {exc}") from None


def _check_level(model, x):
    if float(model.cdf(x)) >= 1.0:
        raise DegenerateConditioningError(
            f"cannot condition {model.key} on X > {x}: cdf({x}) = 1"
        )


def cdf_conditional(model, y, x):
    """CDF of ``L(X | X > x)`` evaluated at ``y``."""
    _check_level(model, x)
    if y < x:
        return 0.0
    return float(-np.expm1(-(model.lam(y) - model.lam(x))))


def lambda_between(model, y, x):
    """``lam(y) - lam(x)``, i.e. ``-log(1 - F(y; x))``, for ``x <= y``."""
    if y < x:
        raise ValueError(f"lambda_between needs x <= y, got x={x}, y={y}")
    if float(model.cdf(y)) >= 1.0:
        raise InfiniteLambdaError(f"lam({y}) is infinite for model {model.key}")
    return float(model.lam(y) - model.lam(x))


def sample_conditional(model, x, u):
    """Exact draw from ``L(X | X > x)`` by inversion at the uniform ``u``."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must lie in (0, 1), got {u}")
    _check_level(model, x)
    return float(model.sample_raw(x, u))


def tilde_transform(x_val, u_aux, a):
    """Replace values at or above ``a`` by an independent Pareto tail ``a / u_aux``.

    Leaves ``x_val`` untouched below ``a``; the result is ``>= a`` exactly
    when ``x_val >= a``, and it has a continuous CDF whenever ``x_val`` has
    one on ``[0, a)``.
    """
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")
    if not 0.0 < u_aux <= 1.0:
        raise ValueError(f"u_aux must lie in (0, 1], got {u_aux}")
    return x_val if x_val < a else a / u_aux
