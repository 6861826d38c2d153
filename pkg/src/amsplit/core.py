"""Adaptive Multilevel Splitting with exact conditional resampling.

Starting from ``n`` i.i.d. draws of ``L(X | X > x)``, each iteration takes
the ``k``-th lowest particle level ``Z``, kills the ``k`` particles at or
below it and redraws them from ``L(X | X > Z)``.  The run stops once ``Z >= a``;
with ``J`` iterations and a fraction ``C`` of particles at or above ``a``
the estimate of ``P(X >= a | X > x)`` is ``C (1 - k/n)^J``.

Two implementations share the uniform stream of :mod:`amsplit.rng`:
:func:`run_ams` dispatches to the compiled loop in :mod:`amsplit._kernels`,
:func:`run_ams_reference` is a plain Python transcription used to test it.
"""

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import ConfigError, DegenerateConditioningError, InfiniteLambdaError, RunawayError
from .models import COMMITTOR, RandomModel
from .rng import UniformStream


@dataclass(frozen=True)
class AmsConfig:
    """Parameters of one AMS run.

    ``max_iterations=None`` selects :func:`default_max_iterations`.
    """

    n: int
    k: int
    x: float
    a: float
    max_iterations: int | None = None

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise ConfigError(f"n must be an integer >= 2, got {self.n!r}")
        if not isinstance(self.k, (int, np.integer)) or not 1 <= self.k <= self.n - 1:
            raise ConfigError(f"k must satisfy 1 <= k <= n-1, got k={self.k!r}, n={self.n}")
        if not self.a > 0:
            raise ConfigError(f"target a must be positive, got {self.a!r}")
        if not 0 <= self.x <= self.a:
            raise ConfigError(f"start level must satisfy 0 <= x <= a, got x={self.x!r}, a={self.a!r}")
        if self.max_iterations is not None and self.max_iterations <= 0:
            raise ConfigError(f"max_iterations must be positive, got {self.max_iterations!r}")


@dataclass
class AmsState:
    """Particle system after ``iteration`` resampling rounds.

    ``particles`` is sorted by ``(level, index)``.
    """

    particles: list
    current_level: float
    iteration: int
    stream: UniformStream

    @property
    def levels(self):
        return np.array([p[0] for p in self.particles])

    @property
    def indices(self):
        return np.array([p[1] for p in self.particles], dtype=np.int64)


@dataclass(frozen=True)
class AmsResult:
    """Outcome of one run.

    ``corrector`` is ``count_ge_a / n``; ``level_trace`` holds
    ``Z^0, ..., Z^(J+1)``; ``kill_order`` lists killed particle indices,
    ``k`` per iteration.
    """

    n: int
    k: int
    j_count: int
    count_ge_a: int
    level_trace: np.ndarray = field(repr=False)
    kill_order: np.ndarray = field(repr=False)
    digest: int = 0
    seed: int = 0
    rep: int = 0

    @property
    def corrector(self):
        return self.count_ge_a / self.n

    @property
    def corrector_exact(self):
        return Fraction(self.count_ge_a, self.n)

    @property
    def estimate(self):
        return estimate(self.j_count, self.corrector, self.n, self.k)

    @property
    def samples_drawn(self):
        return self.n + self.k * self.j_count


@dataclass(frozen=True)
class TransformedView:
    """Particles and level mapped through the cumulative hazard."""

    y_particles: np.ndarray
    s_level: float


def estimate(j_count, corrector, n, k):
    """``corrector * (1 - k/n)^j_count``, evaluated in log space."""
    return corrector * math.exp(j_count * math.log1p(-k / n))


def lambda_span(model: RandomModel, x, a):
    """Cumulative-hazard distance from ``x`` to ``a`` as seen by the sampler."""
    if model.kernel_code == COMMITTOR:
        # the tail substitution makes the law Pareto with survival xi0 / y
        return math.log(max(a, model.xi0) / max(x, model.xi0))
    return float(model.lam(a) - model.lam(x))


def default_max_iterations(model, config):
    span = lambda_span(model, config.x, config.a)
    if not math.isfinite(span):
        raise InfiniteLambdaError(f"cumulative hazard is infinite at a={config.a}")
    m = config.n * span
    return 100 * math.ceil(m + 10 * math.sqrt(m) + config.n)


def _resolve(model, config):
    if model.kernel_code < 0:
        raise ConfigError(f"model {model.key!r} has no compiled sampler")
    if model.kernel_code == COMMITTOR:
        if config.a > model.target:
            raise DegenerateConditioningError(
                f"committor target must not exceed {model.target}, got a={config.a}"
            )
    elif float(model.cdf(config.x)) >= 1.0:
        raise DegenerateConditioningError(f"cdf({config.x}) = 1 for model {model.key}")
    if config.max_iterations is not None:
        return config.max_iterations
    return default_max_iterations(model, config)


def _param(model):
    return float(model.params[0]) if model.params else 0.0


def run_ams(model: RandomModel, config: AmsConfig, seed: int, rep: int = 0) -> AmsResult:
    """One AMS run on the ``(seed, rep)`` stream.

    Raises
    ------
    RunawayError
        If ``max_iterations`` rounds pass without reaching ``a``.
    """
    max_iter = _resolve(model, config)
    j, cnt, digest, status, trace, kills, _, _ = _kernels.run_one(
        model.kernel_code,
        _param(model),
        float(config.x),
        float(config.a),
        int(config.n),
        int(config.k),
        int(max_iter),
        np.uint64(seed),
        np.uint64(rep),
        64,
    )
    if status == _kernels.STATUS_RUNAWAY:
        raise RunawayError(f"no termination after {max_iter} iterations (seed={seed}, rep={rep})")
    return AmsResult(config.n, config.k, int(j), int(cnt), trace, kills, int(digest), seed, rep)


def run_ams_batch(model, config, seed, rep0, m):
    """``m`` runs on substreams ``rep0..rep0+m-1``.

    Returns arrays ``(J, count_ge_a, digest, status)``; runaways are
    reported through ``status`` rather than raised.
    """
    max_iter = _resolve(model, config)
    return _kernels.run_batch(
        model.kernel_code,
        _param(model),
        float(config.x),
        float(config.a),
        int(config.n),
        int(config.k),
        int(max_iter),
        np.uint64(seed),
        np.uint64(rep0),
        int(m),
    )


def evolve_unstopped(model, x, n, k, n_iter, seed, rep0, m):
    """Levels ``Z^0..Z^(n_iter+1)`` and particles after ``n_iter`` rounds, no target."""
    if model.kernel_code == COMMITTOR:
        raise ConfigError("the committor law has bounded support; use a target level")
    return _kernels.evolve_batch(
        model.kernel_code, _param(model), float(x), int(n), int(k), int(n_iter),
        np.uint64(seed), np.uint64(rep0), int(m),
    )


# pure Python reference


def _reference_draw(model, z, u, a):
    if model.kernel_code == COMMITTOR:
        return float(model.sample_tilde(z, u, a))
    return float(model.sample_raw(z, u))


def iterate_states(model, config, seed, rep=0):
    """Yield the :class:`AmsState` after initialisation and after every round.

    Stops after yielding the first state whose level is ``>= a``.
    """
    max_iter = _resolve(model, config)
    n, k, a = config.n, config.k, config.a
    stream = UniformStream(seed, rep)
    particles = []
    for i in range(n):
        bisect.insort(particles, (_reference_draw(model, config.x, stream.next(), a), i))
    state = AmsState(particles, particles[k - 1][0], 0, stream)
    yield state
    while state.current_level < a:
        if state.iteration >= max_iter:
            raise RunawayError(f"no termination after {max_iter} iterations (seed={seed}, rep={rep})")
        z = state.current_level
        killed = [i for _, i in particles[:k]]
        del particles[:k]
        for i in killed:
            bisect.insort(particles, (_reference_draw(model, z, stream.next(), a), i))
        state = AmsState(particles, particles[k - 1][0], state.iteration + 1, stream)
        state.killed = killed
        yield state


def run_ams_reference(model: RandomModel, config: AmsConfig, seed: int, rep: int = 0) -> AmsResult:
    """Slow transcription of :func:`run_ams`; same stream, same result."""
    trace = [float(config.x)]
    kills = []
    state = None
    for state in iterate_states(model, config, seed, rep):
        trace.append(state.current_level)
        kills.extend(getattr(state, "killed", []))
    count = sum(1 for level, _ in state.particles if level >= config.a)
    return AmsResult(
        config.n,
        config.k,
        state.iteration,
        count,
        np.array(trace),
        np.array(kills, dtype=np.int64),
        _digest(kills),
        seed,
        rep,
    )


def _digest(kills):
    mask = (1 << 64) - 1
    digest = 0xCBF29CE484222325
    for value in kills:
        for shift in range(0, 64, 8):
            digest ^= (value >> shift) & 0xFF
            digest = (digest * 0x100000001B3) & mask
    return digest


def transformed_view(state: AmsState, model: RandomModel) -> TransformedView:
    """Apply the cumulative hazard to every particle and to the current level."""
    levels = state.levels
    if np.any(model.cdf(levels) >= 1.0) or float(model.cdf(state.current_level)) >= 1.0:
        raise InfiniteLambdaError("a particle sits at the essential supremum of the model")
    return TransformedView(np.asarray(model.lam(levels), dtype=float), float(model.lam(state.current_level)))


def run_direct_mc(model: RandomModel, a, m_samples, seed, rep0=0, chunks=64):
    """Fraction of ``m_samples`` unconditional draws with ``X >= a``."""
    if m_samples < 1:
        raise ConfigError(f"m_samples must be >= 1, got {m_samples}")
    chunks = max(1, min(chunks, m_samples))
    hits = _kernels.direct_batch(
        model.kernel_code, _param(model), float(a), int(m_samples), np.uint64(seed), np.uint64(rep0), chunks
    )
    return int(hits.sum()) / m_samples
