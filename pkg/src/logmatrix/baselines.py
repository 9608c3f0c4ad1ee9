"""Comparison mechanisms: the bounded square-root factorization and the hybrid.

The square-root mechanism uses ``L = R = (1 - z)^(-1/2)`` and must be
calibrated to a known horizon ``n``.

The hybrid runs a bounded counter restarted at every power of two (epoch
``k`` covers times ``2^k .. 2^(k+1) - 1``) next to an unbounded counter over
the epoch totals ``y_k``.  At ``t = 2^k + r`` it releases the unbounded
estimate of ``sum_{i<k} y_i`` plus the bounded within-epoch estimate at
offset ``r + 1``.  The budget is split in squared-scale terms: the bounded
part gets noise multiplier ``C / sqrt(rho)``, the unbounded part
``C / sqrt(1 - rho)``.  With reuse, the final bounded output of every
completed epoch is a second, independent estimate of its ``y_i``; the two
estimates of ``sum_{i<k} y_i`` are combined by inverse-variance weighting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .factor import FactorPair, FactorParams, coeffs_f1
from .mechanism import CounterState, NoiseSource, PrivacyParams, _check_inputs, exact_L
from .sensitivity import compute_sensitivity
from .series import convolve

UNBOUNDED_VARIANTS = ("independent", "logmatrix")


def _f1_partial_squares(n: int) -> np.ndarray:
    """``S_j = sum_{m<j} f1[m]^2`` for ``j = 1..n``."""
    c = coeffs_f1(n)
    return np.cumsum(c * c)


def sqrt_matrix_variance(t, n: int, privacy: PrivacyParams):
    """Variance of the bounded square-root mechanism at ``t`` with horizon ``n``.

    ``C^2 * S_n * S_t``: the column norm is taken at the full horizon, the
    row norm at ``t``.  ``t`` may be an array.
    """
    t_arr = np.asarray(t)
    if np.any(t_arr < 1):
        raise ValueError("t must be >= 1")
    if np.any(t_arr > n):
        raise ValueError("t exceeds the horizon n of the bounded mechanism")
    S = _f1_partial_squares(n)
    out = privacy.C**2 * S[n - 1] * S[t_arr - 1]
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HybridConfig:
    rho: float = 0.75
    unbounded_variant: str = "logmatrix"
    reuse: bool = True
    params: FactorParams = FactorParams()

    def __post_init__(self) -> None:
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        if self.unbounded_variant not in UNBOUNDED_VARIANTS:
            raise ValueError(f"unbounded_variant must be one of {UNBOUNDED_VARIANTS}")

    def scales(self, privacy: PrivacyParams) -> tuple:
        """Noise multipliers ``(C_b, C_u)`` for the bounded and unbounded parts."""
        return privacy.C / math.sqrt(self.rho), privacy.C / math.sqrt(1.0 - self.rho)


def _epoch_split(t):
    t = np.asarray(t, dtype=np.int64)
    k = np.floor(np.log2(t)).astype(np.int64)
    # guard against rounding in log2 near powers of two
    k = np.where((1 << (k + 1)) <= t, k + 1, k)
    k = np.where((1 << k) > t, k - 1, k)
    return k, t - (1 << k)


def _unbounded_variances(k_max: int, config: HybridConfig, privacy: PrivacyParams) -> np.ndarray:
    """Variance of the unbounded estimate of ``sum_{i<k} y_i`` for ``k = 0..k_max``."""
    _, c_u = config.scales(privacy)
    k = np.arange(k_max + 1)
    if config.unbounded_variant == "independent":
        return c_u**2 * k.astype(float)
    delta_sq = compute_sensitivity(config.params).delta_sq
    L = exact_L(config.params, max(k_max, 1))
    out = np.zeros(k_max + 1)
    out[1:] = c_u**2 * delta_sq * np.cumsum(L[:k_max] ** 2)
    return out


def hybrid_variance(t, config: HybridConfig, privacy: PrivacyParams):
    """Exact variance of the hybrid estimate at ``t`` (scalar or array)."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.int64))
    if np.any(t_arr < 1):
        raise ValueError("t must be >= 1")
    k, r = _epoch_split(t_arr)
    k_max = int(k.max())
    c_b, _ = config.scales(privacy)
    S = _f1_partial_squares(1 << k_max)
    epoch_len = 1 << k
    bounded = c_b**2 * S[epoch_len - 1] * S[r]
    v_u = _unbounded_variances(k_max, config, privacy)[k]
    if config.reuse:
        finals = c_b**2 * S[(1 << np.arange(k_max + 1)) - 1] ** 2
        v_b = np.concatenate([[0.0], np.cumsum(finals)])[k]
        with np.errstate(invalid="ignore", divide="ignore"):
            comb = np.where(k > 0, v_u * v_b / (v_u + v_b), 0.0)
        v_u = comb
    out = v_u + bounded
    return float(out[0]) if np.ndim(t) == 0 else out


class HybridStream:
    """Streaming hybrid mechanism; same ``step``/``run`` contract as the counter.

    Noise streams: the bounded part draws from stream 1, the independent
    unbounded part from stream 2, and the log-matrix unbounded counter from
    its own stream 0, all keyed by ``seed``.  ``sigma_scale=0`` disables noise.
    """

    def __init__(self, config: HybridConfig, privacy: PrivacyParams, seed: int,
                 sigma_scale: float = 1.0, pair: Optional[FactorPair] = None) -> None:
        self.config = config
        self.privacy = privacy
        self.sigma_scale = float(sigma_scale)
        c_b, c_u = config.scales(privacy)
        self.c_b = self.sigma_scale * c_b
        self.c_u = self.sigma_scale * c_u
        self.t = 0
        self.running_sum = 0.0
        self.k = -1
        self._bounded_noise = NoiseSource(seed, 1)
        self._indep_noise = NoiseSource(seed, 2)
        self._unbounded = None
        if config.unbounded_variant == "logmatrix":
            delta = compute_sensitivity(config.params).delta
            self._unbounded = CounterState(config.params, self.c_u * delta, seed,
                                           check_inputs=False, pair=pair)
        self._epoch_noise = np.zeros(0)
        self._epoch_sum = 0.0
        self._last_bounded = 0.0
        self._finals_est = 0.0  # sum of completed epochs' final bounded outputs
        self._finals_var = 0.0
        self._unb_est = 0.0     # unbounded estimate of sum_{i<k} y_i
        self._unb_var = 0.0
        self._prefix = 0.0

    def _start_epoch(self) -> None:
        if self.k >= 0:
            y = self._epoch_sum
            if self._unbounded is not None:
                self._unb_est = self._unbounded.step(y)
            else:
                self._unb_est += y + self.c_u * self._indep_noise.normals(1)[0]
            self._finals_est += self._last_bounded
            n_prev = 1 << self.k
            self._finals_var += self.c_b**2 * self._S[n_prev - 1] ** 2
        self.k += 1
        n = 1 << self.k
        self._S = _f1_partial_squares(n)
        self._unb_var = self.sigma_scale**2 * _unbounded_variances(
            self.k, self.config, self.privacy)[self.k]
        z = self._bounded_noise.normals(n)
        scale = self.c_b * math.sqrt(self._S[n - 1])
        self._epoch_noise = scale * convolve(coeffs_f1(n), z, n)
        self._epoch_sum = 0.0
        self._prefix = self._prefix_estimate()

    def _prefix_estimate(self) -> float:
        if self.k == 0:
            return 0.0
        if not self.config.reuse:
            return self._unb_est
        v_u, v_b = self._unb_var, self._finals_var
        if v_u == 0.0:
            return self._unb_est
        if v_b == 0.0:
            return self._finals_est
        w = v_b / (v_u + v_b)
        return w * self._unb_est + (1.0 - w) * self._finals_est

    def run(self, xs) -> np.ndarray:
        """Feed a block of values; identical to calling :meth:`step` on each."""
        xs = np.asarray(xs, dtype=np.float64).ravel()
        _check_inputs(xs)
        out = np.empty(xs.size)
        pos = 0
        while pos < xs.size:
            if self.t + 1 >= (1 << (self.k + 1)):
                self._start_epoch()
            start = 1 << self.k
            r0 = self.t + 1 - start
            take = min(xs.size - pos, start - r0)
            block = xs[pos : pos + take]
            sums = np.cumsum(np.concatenate([[self._epoch_sum], block]))[1:]
            self._epoch_sum = float(sums[-1])
            self.running_sum = float(np.cumsum(np.concatenate([[self.running_sum], block]))[-1])
            bounded = sums + self._epoch_noise[r0 : r0 + take]
            self._last_bounded = float(bounded[-1])
            out[pos : pos + take] = self._prefix + bounded
            self.t += take
            pos += take
        return out

    def step(self, x: float) -> float:
        """Consume ``x_t`` and release the hybrid estimate of ``S_t``."""
        return float(self.run([x])[0])


def hybrid_stream(config: HybridConfig, privacy: PrivacyParams, seed: int,
                  sigma_scale: float = 1.0, pair: Optional[FactorPair] = None) -> HybridStream:
    return HybridStream(config, privacy, seed, sigma_scale, pair)
