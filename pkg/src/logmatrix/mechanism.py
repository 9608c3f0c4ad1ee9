"""Unbounded streaming counter built on the L/R factorization.

The counter releases ``S_t + (L y)_t`` where ``y`` is i.i.d. Gaussian noise
with standard deviation ``sigma = C * Delta``.  ``Delta`` is the *limiting*
column norm of R, so one noise scale covers every horizon.  Coefficients of
L and the noise product ``L y`` are materialized in power-of-two blocks: when
``t`` passes the current epoch ``T`` the epoch doubles, the next ``T`` noise
values are drawn, and positions ``T..2T-1`` of ``L y`` are computed with one
truncated product.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy.special import ndtri

from .factor import FactorPair, FactorParams
from .sensitivity import compute_sensitivity
from .series import MulBudget, convolve

logger = logging.getLogger(__name__)


class SensitivityViolationError(ValueError):
    """Raised when a stream value lies outside [0, 1]."""


def gaussian_scale(epsilon: float, delta_priv: float) -> float:
    """Noise multiplier ``sqrt(2 ln(1.25 / delta)) / epsilon`` for unit l2 sensitivity."""
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValueError("epsilon must be positive and finite")
    if not 0 < delta_priv < 1:
        raise ValueError("delta_priv must lie in (0, 1)")
    return math.sqrt(2.0 * math.log(1.25 / delta_priv)) / epsilon


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float = 1.0
    delta_priv: float = 1e-6
    C: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "C", gaussian_scale(self.epsilon, self.delta_priv))


@dataclass(frozen=True)
class SideInfo:
    """Hint that the stream length satisfies ``n0 <= n <= c_factor * n0``."""

    n0: int
    c_factor: float = 1.0

    def __post_init__(self) -> None:
        if self.n0 < 1:
            raise ValueError("n0 must be >= 1")
        if self.c_factor < 1:
            raise ValueError("c_factor must be >= 1")

    @property
    def horizon(self) -> int:
        return int(math.ceil(self.n0 * self.c_factor))


class NoiseSource:
    """Standard normals from a counter-based generator, drawn in index order.

    Philox keyed by ``(seed, stream)``; each 64-bit word becomes one uniform
    ``((w >> 11) + 1/2) / 2^53`` and then one normal through the inverse CDF,
    so the ``s``-th draw depends only on ``seed``, ``stream`` and ``s``.
    """

    def __init__(self, seed: int, stream: int = 0) -> None:
        key = np.array([int(seed) & (2**64 - 1), int(stream)], dtype=np.uint64)
        self._gen = np.random.Philox(key=key)
        self.drawn = 0

    def normals(self, count: int) -> np.ndarray:
        raw = self._gen.random_raw(count)
        u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
        self.drawn += count
        return ndtri(u)


def _check_inputs(xs: np.ndarray) -> None:
    if not np.all((xs >= 0.0) & (xs <= 1.0)):
        raise SensitivityViolationError("stream values must lie in [0, 1]")


class CounterState:
    """Streaming state of the unbounded counter.

    Prefer :func:`init` to construct one.  ``sigma`` overrides the
    calibrated scale (``sigma=0`` gives exact prefix sums).  ``pair`` lets
    several sequential runs share one coefficient generator; coefficients
    are prefix-stable, so sharing never changes outputs, only the cost
    charged to each state's budget.
    """

    def __init__(self, params: FactorParams, sigma: float, seed: int,
                 side: Optional[SideInfo] = None, *, stream: int = 0,
                 check_inputs: bool = True, pair: Optional[FactorPair] = None) -> None:
        if sigma < 0 or not math.isfinite(sigma):
            raise ValueError("sigma must be finite and nonnegative")
        self.params = params
        self.sigma = float(sigma)
        self.seed = seed
        self.side = side
        self.check_inputs = check_inputs
        self.noise = NoiseSource(seed, stream)
        self.budget = MulBudget()
        self.t = 0
        self.running_sum = 0.0
        self.epoch = 0
        self.L = np.zeros(0)
        self.y = np.zeros(0)
        self.Ly = np.zeros(0)
        self._setup(pair)
        self.grow_to(2)
        if side is not None:
            self.grow_to(side.horizon)

    # hooks for subclasses -------------------------------------------------

    def _setup(self, pair: Optional[FactorPair]) -> None:
        if pair is None:
            pair = FactorPair(self.params, with_L=True, with_R=False)
        elif pair.params != self.params or pair.L is None:
            raise ValueError("shared pair does not match the counter parameters")
        self.pair = pair

    def _extend_L(self, n: int) -> np.ndarray:
        self.pair.extend_to(n)
        return self.pair.L[:n]

    # growth --------------------------------------------------------------

    def _double(self) -> None:
        t_old = self.epoch
        n = 2 * t_old if t_old else 1
        with self.budget:
            self.L = self._extend_L(n)
            self.y = np.concatenate([self.y, self.sigma * self.noise.normals(n - t_old)])
            block = convolve(self.L, self.y, n)[t_old:]
        self.Ly = np.concatenate([self.Ly, block])
        self.epoch = n
        logger.debug("epoch %d, cumulative cost %.3f M(t)", n, self.budget.units(n))

    def grow_to(self, n: int) -> None:
        """Materialize coefficients and noise output for times up to ``n``."""
        while self.epoch < n:
            self._double()

    # streaming -----------------------------------------------------------

    def step(self, x: float) -> float:
        """Consume ``x_t`` and release the private estimate of ``S_t``."""
        x = float(x)
        if self.check_inputs:
            _check_inputs(np.array([x]))
        self.t += 1
        if self.t > self.epoch:
            self.grow_to(self.t)
        self.running_sum += x
        return self.running_sum + self.Ly[self.t - 1]

    def run(self, xs) -> np.ndarray:
        """Feed a block of values; identical to calling :meth:`step` on each."""
        xs = np.asarray(xs, dtype=np.float64).ravel()
        if self.check_inputs:
            _check_inputs(xs)
        t0, t1 = self.t, self.t + xs.size
        self.grow_to(t1)
        sums = np.cumsum(np.concatenate([[self.running_sum], xs]))[1:]
        if xs.size:
            self.running_sum = float(sums[-1])
        self.t = t1
        return sums + self.Ly[t0:t1]

    def variance_profile(self, t_max: Optional[int] = None) -> np.ndarray:
        """Exact output variance at ``t = 1..t_max`` from the materialized L."""
        t_max = self.epoch if t_max is None else t_max
        if t_max > self.epoch:
            raise ValueError("t_max exceeds the materialized prefix")
        return self.sigma**2 * np.cumsum(self.L[:t_max] ** 2)


def init(params: FactorParams, privacy: PrivacyParams, seed: int,
         side: Optional[SideInfo] = None, sigma: Optional[float] = None,
         pair: Optional[FactorPair] = None) -> CounterState:
    """Start a counter with ``sigma = C * Delta`` (unless ``sigma`` is given)."""
    if sigma is None:
        sigma = privacy.C * compute_sensitivity(params).delta
    return CounterState(params, sigma, seed, side, pair=pair)


def step(state: CounterState, x_t: float) -> float:
    return state.step(x_t)


# --------------------------------------------------------------------------
# exact variance
# --------------------------------------------------------------------------

_L_CACHE: dict = {}


def exact_L(params: FactorParams, n: int) -> np.ndarray:
    """First ``n`` coefficients of L, cached per parameter pair."""
    pair = _L_CACHE.get(params)
    if pair is None:
        pair = _L_CACHE[params] = FactorPair(params, with_L=True, with_R=False)
    pair.extend_to(n)
    return pair.L[:n]


def variance_profile(params: FactorParams, privacy: PrivacyParams, t_max: int) -> np.ndarray:
    """``C^2 Delta^2 sum_{m<t} L[m]^2`` for ``t = 1..t_max``."""
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    delta_sq = compute_sensitivity(params).delta_sq
    L = exact_L(params, t_max)
    return privacy.C**2 * delta_sq * np.cumsum(L * L)


def variance_at(source: Union[CounterState, FactorParams], t: int,
                privacy: Optional[PrivacyParams] = None) -> float:
    """Exact variance of the released estimate at time ``t``.

    ``source`` is either a running :class:`CounterState` (its own sigma and
    coefficients) or :class:`FactorParams` together with ``privacy``.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if isinstance(source, CounterState):
        return float(source.variance_profile(t)[-1])
    if privacy is None:
        raise ValueError("privacy parameters are required with FactorParams")
    return float(variance_profile(source, privacy, t)[-1])


# --------------------------------------------------------------------------
# error metrics
# --------------------------------------------------------------------------


class ErrorMetrics(NamedTuple):
    """Monte Carlo error estimates.

    Noise at different times is drawn independently, which ignores the
    correlation the shared ``y`` induces; the ``estimator`` tag records this.
    """

    err_l22: float
    err_linf: float

    estimator = "independent-per-t"


def error_metrics(variances, n: int, trials: int, seed: int = 0,
                  chunk: int = 1 << 20) -> ErrorMetrics:
    """Mean-squared and maximum additive error under independent Gaussian noise.

    ``err_l22 = E[(sum_t e_t^2)^(1/2)] / n`` and ``err_linf = E[max_t |e_t|]``
    over ``t = 1..n`` with ``e_t ~ N(0, variances[t-1])``.
    """
    var = np.asarray(variances, dtype=np.float64)[:n]
    if n < 1 or trials < 1:
        raise ValueError("n and trials must be >= 1")
    if var.size < n:
        raise ValueError("need at least n variances")
    if np.any(var < 0):
        raise ValueError("variances must be nonnegative")
    sd = np.sqrt(var)
    rng = np.random.Generator(np.random.Philox(seed))
    per_chunk = max(1, chunk // n)
    l2_total = 0.0
    linf_total = 0.0
    done = 0
    while done < trials:
        k = min(per_chunk, trials - done)
        e = rng.standard_normal((k, n)) * sd
        l2_total += np.sqrt(np.sum(e * e, axis=1)).sum()
        linf_total += np.abs(e).max(axis=1).sum()
        done += k
    return ErrorMetrics(l2_total / trials / n, linf_total / trials)
