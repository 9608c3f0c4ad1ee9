"""Taylor coefficients of the logarithmically perturbed square-root factors.

The family is

    f(z; gamma, delta) = f1(z) * f2(z; gamma) * f3(z; delta)
    f1 = (1 - z)^(-1/2)
    f2 = ((1/z) ln(1/(1-z)))^gamma
    f3 = ((2/z) ln((1/z) ln(1/(1-z))))^delta

and the factorization of the all-ones lower-triangular matrix is
``L = LTToep(f(z; -gamma, -delta))``, ``R = LTToep(f(z; gamma, delta))``.

Both perturbation factors are handled in log space: with ``l2 = ln f2(z; 1)``
and ``l3 = ln f3(z; 1)`` the perturbation of L is ``exp(-gamma l2 - delta l3)``
and that of R is its reciprocal ``exp(gamma l2 + delta l3)``.  ``l2`` and
``l3`` are cached and extended at every doubling, never recomputed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import series
from .series import convolve, exp_series, log_series

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.01


@dataclass(frozen=True)
class FactorParams:
    """Exponents ``(gamma, delta_log)`` of the R-side function.

    ``delta_log`` is the exponent on the log-log factor; it is not the privacy
    parameter.  R is square-summable iff ``gamma < -1/2``.
    """

    gamma: float = -0.5 - DEFAULT_ALPHA
    delta_log: float = 0.5 + DEFAULT_ALPHA

    @property
    def alpha(self) -> float:
        return -0.5 - self.gamma

    @property
    def is_valid(self) -> bool:
        return self.gamma < -0.5

    @classmethod
    def preset(cls, name: str = "default", alpha: float = DEFAULT_ALPHA) -> "FactorParams":
        """Named parameter choices.

        ``default``: delta_log = -gamma; ``large-n``: delta_log = -6 gamma / 5
        (first two coefficients of L and R equal those of f1); ``fast``:
        delta_log = 0.
        """
        gamma = -0.5 - alpha
        if name == "default":
            return cls(gamma, -gamma)
        if name == "large-n":
            return cls(gamma, -6.0 * gamma / 5.0)
        if name == "fast":
            return cls(gamma, 0.0)
        raise ValueError(f"unknown preset {name!r}")

    def negated(self) -> "FactorParams":
        """Parameters of the partner factor (L for R and vice versa)."""
        return FactorParams(-self.gamma, -self.delta_log)


def coeffs_f1(t: int) -> np.ndarray:
    """First ``t`` coefficients of ``(1 - z)^(-1/2)`` via ``c_m = (1 - 1/(2m)) c_{m-1}``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    ratios = np.ones(t)
    m = np.arange(1, t)
    ratios[1:] = 1.0 - 0.5 / m
    return np.cumprod(ratios)


def coeffs_f2_base(t: int) -> np.ndarray:
    """Coefficients of ``(1/z) ln(1/(1-z))``, i.e. ``1/(m+1)``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return 1.0 / np.arange(1, t + 1)


def coeffs_f3_base(t: int) -> np.ndarray:
    """Coefficients of ``(2/z) ln f2(z; 1)``: ``2 [z^(m+1)] ln f2``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    l2 = log_series(coeffs_f2_base(t + 1), t + 1)
    out = 2.0 * l2[1:]
    out[0] = 1.0  # 2 * [z] ln f2 = 2 * (1/2), pinned against rounding
    return out


class _LogCache:
    """``ln f2(z;1)`` (t+1 terms) and ``ln f3(z;1)`` (t terms), extended in place."""

    def __init__(self, need_f3: bool) -> None:
        self.need_f3 = need_f3
        self.l2 = np.array([0.0, 0.5])
        self.l3 = np.zeros(1)

    @property
    def length(self) -> int:
        return self.l2.size - 1

    def extend(self, n: int) -> None:
        t = self.length
        if n <= t:
            return
        f2 = coeffs_f2_base(n + 1)
        l2 = log_series(f2, n, warm=self.l2)
        # one extra coefficient by direct recurrence (linear work), so that
        # ln f3 can use n shifted terms without doubling every FFT size
        q = series.derivative(l2)  # n - 1 terms of f2'/f2
        dn = n * f2[n]  # [z^(n-1)] f2'
        extra = dn - np.dot(f2[1:n], q[::-1][: n - 1]) if n > 1 else dn
        self.l2 = np.append(l2, extra / n)
        if self.need_f3:
            f3 = 2.0 * self.l2[1:]
            self.l3 = log_series(f3, n, warm=self.l3)

    def perturbation_log(self, gamma: float, delta: float, n: int) -> np.ndarray:
        """Coefficients of ``gamma ln f2 + delta ln f3`` (n terms)."""
        h = gamma * self.l2[:n]
        if self.need_f3 and delta != 0:
            h = h + delta * self.l3[:n]
        return h


class _Factor:
    """One side (f(z; gamma, delta)) grown by doubling with a shared log cache."""

    def __init__(self, gamma: float, delta: float, logs: _LogCache) -> None:
        self.gamma = gamma
        self.delta = delta
        self.logs = logs
        self.trivial = gamma == 0 and delta == 0
        self.pert = np.ones(1)
        self.coeffs = np.ones(1)

    def extend(self, n: int) -> None:
        t = self.coeffs.size
        if n <= t:
            return
        f1 = coeffs_f1(n)
        if self.trivial:
            self.coeffs = np.concatenate([self.coeffs, f1[t:]])
            return
        h = self.logs.perturbation_log(self.gamma, self.delta, n)
        self.pert = exp_series(h, n, warm_start=self.pert)
        # f1 multiplies in last; already-emitted coefficients stay untouched
        full = convolve(f1, self.pert, n)
        self.coeffs = np.concatenate([self.coeffs, full[t:]])


class FactorPair:
    """Growing prefixes of ``L = f(z; -gamma, -delta)`` and ``R = f(z; gamma, delta)``.

    ``with_R=False`` skips the R side; the streaming mechanism only needs L.
    Lengths go 1, 2, 4, ...; :meth:`extend` doubles and never changes stored
    coefficients.
    """

    def __init__(self, params: FactorParams, with_L: bool = True, with_R: bool = True) -> None:
        if not (with_L or with_R):
            raise ValueError("need at least one side")
        self.params = params
        need_f3 = params.delta_log != 0
        self._logs = _LogCache(need_f3)
        g, d = params.gamma, params.delta_log
        self._L = _Factor(-g, -d, self._logs) if with_L else None
        self._R = _Factor(g, d, self._logs) if with_R else None
        self._trivial = g == 0 and d == 0
        self.t = 1

    @property
    def L(self) -> Optional[np.ndarray]:
        return None if self._L is None else self._L.coeffs

    @property
    def R(self) -> Optional[np.ndarray]:
        return None if self._R is None else self._R.coeffs

    def extend(self) -> "FactorPair":
        """Double the stored length."""
        return self.extend_to(2 * self.t)

    def extend_to(self, n: int) -> "FactorPair":
        """Double repeatedly until at least ``n`` coefficients are stored."""
        while self.t < n:
            target = 2 * self.t
            budget = series.MulBudget()
            with budget:
                if not self._trivial:
                    self._logs.extend(target)
                for side in (self._L, self._R):
                    if side is not None:
                        side.extend(target)
            self.t = target
            logger.debug("extend to %d: %.3f M(t)", target, budget.units(target))
        return self


def extend_pair(pair: FactorPair) -> FactorPair:
    """Double ``pair`` in place and return it."""
    return pair.extend()


def coeffs_f(params: FactorParams, t: int, warm: Optional[FactorPair] = None) -> np.ndarray:
    """First ``t`` coefficients of ``f(z; gamma, delta_log)`` (the R side).

    ``warm`` may be a :class:`FactorPair` for the same parameters holding a
    shorter prefix; it is extended in place and its R prefix reused.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if t == 1:
        return np.ones(1)
    if warm is None:
        warm = FactorPair(params, with_L=False, with_R=True)
    elif warm.params != params or warm.R is None:
        raise ValueError("warm state does not match the requested parameters")
    warm.extend_to(t)
    return warm.R[:t].copy()


def row_norm_prefix(L, t: int) -> float:
    """``||[L]_t||_{2->inf}``: the l2 norm of the first ``t`` coefficients."""
    L = np.asarray(L, dtype=np.float64)
    if t > L.size:
        raise ValueError("t exceeds the available coefficients")
    return math.sqrt(float(np.dot(L[:t], L[:t])))
