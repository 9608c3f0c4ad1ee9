"""Asymptotic expansion of the coefficients of f and the approximate counter.

For ``x = ln ln m`` the coefficients of ``f(z; gamma, delta)`` satisfy

    [z^m] f ~ (ln m)^gamma (2x)^delta / sqrt(pi m)
              * (1 + sum_{k>=1} e_k(x) / (x ln m)^k)

with ``e_k(x) = sqrt(pi) * d^k/ds^k (1/Gamma(-s)) at s = -1/2 * E_k(x)`` and
``E_k`` the Taylor coefficients in ``u`` of

    g(u) = (1 - x u)^gamma * (1 + ln(1 - x u) / x)^delta.

The approximate counter uses exact coefficients of R until the expansion
matches them to a relative tolerance ``eta``; after that, new coefficients of
R come from the expansion and L is recovered as ``(1/(1-z)) / R`` by one
quotient extension per doubling, so ``L R = 1/(1-z)`` holds by construction.
Noise is inflated to ``(1 + eta) * C * Delta``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import binom, zeta

from . import series
from .factor import FactorPair, FactorParams
from .mechanism import CounterState, PrivacyParams, SideInfo
from .sensitivity import compute_sensitivity

logger = logging.getLogger(__name__)

MIN_INDEX = 16
EULER_GAMMA = 0.57721566490153286061


def _polygamma_half(k: int) -> float:
    """``psi^(k)(1/2)``."""
    if k == 0:
        return -EULER_GAMMA - 2.0 * math.log(2.0)
    return (-1) ** (k + 1) * math.factorial(k) * (2.0 ** (k + 1) - 1.0) * float(zeta(k + 1))


def recip_gamma_derivs(K: int) -> np.ndarray:
    """``d^k/ds^k (1/Gamma(-s))`` at ``s = -1/2`` for ``k = 0..K``.

    With ``s = -1/2 + u``, ``1/Gamma(1/2 - u) = exp(-ln Gamma(1/2 - u))`` and
    the log-gamma Taylor series at 1/2 has coefficients
    ``psi^(j-1)(1/2) (-1)^j / j!``.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    n = K + 1
    h = np.zeros(n)
    for j in range(1, n):
        h[j] = -_polygamma_half(j - 1) * (-1) ** j / math.factorial(j)
    coeffs = series.exp_series(h, n) / math.sqrt(math.pi)
    return coeffs * np.array([math.factorial(k) for k in range(n)], dtype=float)


def E_taylor(x: float, K: int, gamma: float, delta_log: float) -> np.ndarray:
    """First ``K+1`` Taylor coefficients of ``g(u)`` at a given ``x > 0``."""
    if not x > 0:
        raise ValueError("x must be positive")
    n = K + 1
    lin = np.zeros(max(n, 2))
    lin[0], lin[1] = 1.0, -x
    lin = lin[:n] if n > 1 else lin[:1]
    first = series.pow_series(lin, gamma, n)
    if delta_log == 0 or n == 1:
        return first
    inner = series.log_series(lin, n) / x
    inner[0] = 1.0
    return series.convolve(first, series.pow_series(inner, delta_log, n), n)


def _miller_pow(a: np.ndarray, s: float) -> np.ndarray:
    """Coefficients of ``a(u)^s`` for a batch; ``a`` has shape (K+1, B), ``a[0] = 1``."""
    n = a.shape[0]
    b = np.zeros_like(a)
    b[0] = 1.0
    for k in range(1, n):
        j = np.arange(1, k + 1)
        w = ((s + 1.0) * j - k)[:, None]
        b[k] = np.sum(w * a[1 : k + 1] * b[k - j], axis=0) / k
    return b


def E_batch(x, K: int, gamma: float, delta_log: float) -> np.ndarray:
    """``E_k`` for many ``x`` at once; shape ``(K+1, len(x))``.

    Closed forms for the two inner series plus a power recurrence, O(K^2)
    per point.  Agrees with :func:`E_taylor` to rounding.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any(x <= 0):
        raise ValueError("x must be positive")
    k = np.arange(K + 1)[:, None]
    first = binom(gamma, k) * (-x[None, :]) ** k
    if delta_log == 0:
        return first
    # 1 + ln(1 - x u)/x = 1 - sum_{k>=1} x^(k-1) u^k / k
    inner = np.empty((K + 1, x.size))
    inner[0] = 1.0
    if K >= 1:
        kk = k[1:]
        inner[1:] = -(x[None, :] ** (kk - 1)) / kk
    second = _miller_pow(inner, delta_log)
    out = np.zeros_like(first)
    for i in range(K + 1):
        out[i] = np.sum(first[: i + 1] * second[i::-1], axis=0)
    return out


@dataclass(frozen=True)
class ExpansionContext:
    """Precomputed constants of the truncated expansion."""

    K: int
    gamma: float
    delta_log: float
    rg_derivs: tuple
    eta: float = 1e-3

    @classmethod
    def build(cls, params: FactorParams, K: int = 4, eta: float = 1e-3) -> "ExpansionContext":
        _check_exponents(params)
        return cls(K, params.gamma, params.delta_log, tuple(recip_gamma_derivs(K)), eta)

    @property
    def e_scale(self) -> np.ndarray:
        """``sqrt(pi) * rg_derivs``; the first entry is 1."""
        return math.sqrt(math.pi) * np.asarray(self.rg_derivs)


def _check_exponents(params: FactorParams) -> None:
    # delta_log = 0 just removes the log-log factor and is allowed
    g, d = float(params.gamma), float(params.delta_log)
    if g >= 0 and g.is_integer():
        raise ValueError("gamma must not be a nonnegative integer")
    if d > 0 and d.is_integer():
        raise ValueError("delta_log must not be a positive integer")


def approx_coeffs(ms, ctx: ExpansionContext) -> np.ndarray:
    """Vectorized :func:`approx_coeff`."""
    m = np.asarray(ms, dtype=np.float64)
    if np.any(m < MIN_INDEX):
        raise ValueError(f"the expansion needs m >= {MIN_INDEX}")
    m = np.atleast_1d(m)
    lm = np.log(m)
    x = np.log(lm)
    lead = lm**ctx.gamma / np.sqrt(m * math.pi)
    if ctx.delta_log != 0:
        lead = lead * (2.0 * x) ** ctx.delta_log
    if ctx.K == 0:
        return lead
    E = E_batch(x, ctx.K, ctx.gamma, ctx.delta_log)
    corr = np.ones_like(m)
    scale = ctx.e_scale
    for k in range(1, ctx.K + 1):
        corr += scale[k] * E[k] / (x * lm) ** k
    return lead * corr


def approx_coeff(m: int, ctx: ExpansionContext) -> float:
    """Order-``K`` expansion of ``[z^m] f(z; gamma, delta_log)``, ``m >= 16``."""
    if m < MIN_INDEX:
        raise ValueError(f"the expansion needs m >= {MIN_INDEX}")
    return float(approx_coeffs([m], ctx)[0])


def asymptotic_tail(params: FactorParams, N: int, K: int = 4) -> float:
    """``sum_{m>=N} ([z^m] f_R)^2`` estimated from the expansion.

    The sum is replaced by the integral over ``m >= N - 1/2`` (midpoint rule)
    and rewritten in ``v = ln ln m``, where the integrand is
    ``exp((1 + 2 gamma) v) (2v)^(2 delta) S(v)^2 / pi`` and ``S`` is the
    bracketed correction.  Needs ``gamma < -1/2``.
    """
    if not params.gamma < -0.5:
        raise ValueError("the tail diverges for gamma >= -1/2")
    if N < MIN_INDEX + 1:
        raise ValueError(f"N must exceed {MIN_INDEX}")
    ctx = ExpansionContext.build(params, K)
    rate = -(1.0 + 2.0 * params.gamma)
    v0 = math.log(math.log(N - 0.5))
    scale = ctx.e_scale

    def f(y: float) -> float:
        v = v0 + y / rate
        corr = 1.0
        # beyond ln m = e^40 the corrections are below double precision
        if K and v < 40.0:
            lm = math.exp(v)
            E = E_batch([v], K, params.gamma, params.delta_log)[:, 0]
            corr += sum(scale[k] * E[k] / (v * lm) ** k for k in range(1, K + 1))
        val = math.exp(-y - rate * v0) * corr * corr / math.pi / rate
        if params.delta_log != 0:
            val *= (2.0 * v) ** (2.0 * params.delta_log)
        return val

    cuts = [0.0] + [2.0**k for k in range(-4, 10)]
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        total += integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)[0]
    return total


# --------------------------------------------------------------------------
# approximate counter
# --------------------------------------------------------------------------


class Alg2State(CounterState):
    """Counter whose R switches from exact to expanded coefficients.

    Before the switch L comes from the exact pair, so with a switch that never
    fires the outputs coincide with the exact counter at the inflated sigma.
    ``switch_epoch`` records the length at which the expansion was accepted.
    """

    def __init__(self, params: FactorParams, sigma: float, seed: int,
                 ctx: ExpansionContext, side: Optional[SideInfo] = None, **kw) -> None:
        self.ctx = ctx
        self.switch_epoch: Optional[int] = None
        self.switch_error: Optional[float] = None
        super().__init__(params, sigma, seed, side, **kw)

    @property
    def switched(self) -> bool:
        return self.switch_epoch is not None

    def _setup(self, pair: Optional[FactorPair]) -> None:
        if pair is not None:
            raise ValueError("the approximate counter keeps its own pair")
        self.pair = FactorPair(self.params, with_L=True, with_R=True)
        self.R_hat = np.ones(1)
        self.L_hat = np.ones(1)

    def _extend_L(self, n: int) -> np.ndarray:
        t = self.L_hat.size
        if n <= t:
            return self.L_hat[:n]
        if not self.switched:
            self.pair.extend_to(n)
            self.R_hat = self.pair.R[:n].copy()
            self.L_hat = self.pair.L[:n].copy()
            m = n - 1
            if m >= MIN_INDEX:
                exact = self.R_hat[m]
                err = abs(approx_coeff(m, self.ctx) - exact) / abs(exact)
                if err <= self.ctx.eta:
                    self.switch_epoch = n
                    self.switch_error = err
                    logger.info("expansion accepted at t=%d (rel. error %.3g)", n, err)
            return self.L_hat
        new = approx_coeffs(np.arange(t, n), self.ctx)
        self.R_hat = np.concatenate([self.R_hat, new])
        # 1/R_hat = (1 - z) L_hat, known to t terms without extra work
        ginv = np.diff(self.L_hat, prepend=0.0)
        self.L_hat = series._quotient_extend(np.ones(n), self.R_hat, self.L_hat, n, ginv)
        return self.L_hat


def alg2_init(params: FactorParams, privacy: PrivacyParams, seed: int,
              K: int = 4, eta: float = 1e-3, side: Optional[SideInfo] = None,
              sigma: Optional[float] = None) -> Alg2State:
    """Approximate counter with ``sigma = (1 + eta) C Delta``."""
    ctx = ExpansionContext.build(params, K, eta)
    if sigma is None:
        sigma = (1.0 + eta) * privacy.C * compute_sensitivity(params).delta
    return Alg2State(params, sigma, seed, ctx, side)


def alg2_step(state: Alg2State, x_t: float) -> float:
    return state.step(x_t)


def alg2_variance_profile(params: FactorParams, privacy: PrivacyParams, t_max: int,
                          K: int = 4, eta: float = 1e-3) -> np.ndarray:
    """Exact variance of the approximate counter at ``t = 1..t_max``."""
    state = alg2_init(params, privacy, seed=0, K=K, eta=eta)
    state.grow_to(t_max)
    return state.variance_profile(t_max)
