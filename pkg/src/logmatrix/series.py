"""Truncated power-series arithmetic on coefficient arrays.

A series is a 1-D float64 array ``a`` with ``a[m] = [z^m] f``.  Every
lower-triangular Toeplitz matrix used in this package is stored this way, so
matrix products become truncated convolutions.

Products go through a power-of-two real FFT with zero padding, never cyclic
wrap-around (except in the residual steps of the Newton iterations, where the
wrapped positions are provably discarded).  Every transform is charged to the
active :class:`MulBudget` objects so the cost of the Newton iterations can be
checked against their nominal constants.

Newton iterations are prefix-stable: when a result is refined from ``m`` to
``n`` terms, the first ``m`` stored values are copied verbatim.
"""

from __future__ import annotations

import contextvars
import logging
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

# products at or below this many output terms use direct convolution
_DIRECT_CUTOFF = 32


class SeriesError(ValueError):
    """Base class for series-arithmetic errors."""


class NonInvertibleSeriesError(SeriesError):
    """Raised when a series with zero constant term has to be inverted."""


class NormalizationError(SeriesError):
    """Raised when log/exp preconditions on the constant term do not hold."""


# --------------------------------------------------------------------------
# multiplication budget
# --------------------------------------------------------------------------

_active_budgets: contextvars.ContextVar[tuple] = contextvars.ContextVar(
    "_active_budgets", default=()
)


class MulBudget:
    """Accumulates polynomial-multiplication cost in units of ``M(1)``.

    One FFT of length ``L`` costs ``L / 6``, so a length-``n`` truncated
    product (two forward and one inverse transform of length ``2n``) costs
    exactly ``n``, i.e. ``M(n)`` with ``M(2n) = 2 M(n)``.  Direct convolutions
    below the FFT cutoff are charged what the equivalent FFT product would cost.

    Use as a context manager; nested budgets all get charged::

        with MulBudget() as budget:
            exp_series(h, 1024)
        budget.units(1024)   # cost in units of M(1024)
    """

    def __init__(self) -> None:
        self.count = 0.0
        self._token = None

    def charge(self, amount: float) -> None:
        self.count += amount

    def units(self, n: int) -> float:
        """Total cost expressed in multiples of ``M(n)``."""
        return self.count / n

    def reset(self) -> None:
        self.count = 0.0

    def __enter__(self) -> "MulBudget":
        self._token = _active_budgets.set(_active_budgets.get() + (self,))
        return self

    def __exit__(self, *exc) -> None:
        _active_budgets.reset(self._token)
        self._token = None

    def __repr__(self) -> str:
        return f"MulBudget(count={self.count:g})"


def _charge(amount: float) -> None:
    for budget in _active_budgets.get():
        budget.charge(amount)


def _pow2(n: int) -> int:
    return 1 << max(0, (int(n) - 1).bit_length())


def _rfft(a: np.ndarray, size: int) -> np.ndarray:
    _charge(size / 6)
    return np.fft.rfft(a, size)


def _irfft(spectrum: np.ndarray, size: int) -> np.ndarray:
    _charge(size / 6)
    return np.fft.irfft(spectrum, size)


class _Spectra:
    """Caches forward transforms of one operand at several FFT sizes."""

    def __init__(self, a: np.ndarray) -> None:
        self.a = a
        self._cache: dict[int, np.ndarray] = {}

    def at(self, size: int) -> np.ndarray:
        spectrum = self._cache.get(size)
        if spectrum is None:
            spectrum = self._cache[size] = _rfft(self.a, size)
        return spectrum


def _mul(a, b, size: int, lo: int, hi: int) -> np.ndarray:
    """Positions ``lo:hi`` of the length-``size`` cyclic product of a and b.

    ``a`` and ``b`` may be arrays or :class:`_Spectra` (to reuse transforms).
    """
    fa = a.at(size) if isinstance(a, _Spectra) else _rfft(a, size)
    fb = b.at(size) if isinstance(b, _Spectra) else _rfft(b, size)
    return _irfft(fa * fb, size)[lo:hi]


def _as_series(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("a series must be a non-empty 1-D sequence")
    return arr


def _padded(a: np.ndarray, n: int) -> np.ndarray:
    if a.size >= n:
        return a[:n]
    out = np.zeros(n)
    out[: a.size] = a
    return out


def _unit(n: int) -> np.ndarray:
    out = np.zeros(n)
    out[0] = 1.0
    return out


# --------------------------------------------------------------------------
# basic operations
# --------------------------------------------------------------------------


def convolve(a, b, n: int) -> np.ndarray:
    """First ``n`` coefficients of the product of two series.

    Charges ``M(n)`` for full-length power-of-two inputs.
    """
    if n <= 0:
        raise ValueError("convolve needs a positive output length")
    a = _as_series(a)[:n]
    b = _as_series(b)[:n]
    full = a.size + b.size - 1
    size = _pow2(full)
    if n <= _DIRECT_CUTOFF:
        _charge(size / 2)
        return _padded(np.convolve(a, b), n)
    return _padded(_mul(a, b, size, 0, min(n, full)), n)


def derivative(a) -> np.ndarray:
    """Term-by-term derivative; the result is one term shorter (min. 1)."""
    a = _as_series(a)
    if a.size == 1:
        return np.zeros(1)
    return a[1:] * np.arange(1, a.size)


def antiderivative(a) -> np.ndarray:
    """Term-by-term integral with zero constant term; one term longer."""
    a = _as_series(a)
    out = np.empty(a.size + 1)
    out[0] = 0.0
    out[1:] = a / np.arange(1, a.size + 1)
    return out


# --------------------------------------------------------------------------
# Newton iterations
# --------------------------------------------------------------------------


def _recip_extend(a: np.ndarray, g: np.ndarray, n: int) -> np.ndarray:
    """Refine ``g = 1/a mod z^m`` to ``n`` terms, keeping ``g`` verbatim."""
    g = np.array(g, dtype=np.float64)
    m = g.size
    while m < n:
        k = min(2 * m, n)
        size = _pow2(k)
        ga = _Spectra(g)
        # a*g = 1 + z^m e; positions >= size wrap below m and are discarded
        e = _mul(_padded(a, k), ga, size, m, k)
        # positions 0..k-m-1 of g*e are clean since m + (k-m) - 1 < size
        high = -_mul(ga, e, size, 0, k - m)
        g = np.concatenate([g, high])
        m = k
    return g


def reciprocal(a, n: int, warm: Optional[np.ndarray] = None) -> np.ndarray:
    """``1/a mod z^n`` by Newton iteration with precision doubling.

    ``warm`` is an already-known prefix of the reciprocal; it is kept as is.
    """
    a = _as_series(a)
    if a[0] == 0:
        raise NonInvertibleSeriesError("constant term is zero")
    if n <= 0:
        raise ValueError("length must be positive")
    g = np.array([1.0 / a[0]]) if warm is None else np.asarray(warm, float)[:n]
    return _recip_extend(a, g, n)


def _quotient_extend(num, den, q, n: int, ginv: np.ndarray) -> np.ndarray:
    """Extend a known quotient prefix ``q`` of ``num/den`` to ``n`` terms.

    ``ginv`` must hold at least ``n - len(q)`` terms of ``1/den``.
    """
    q = np.asarray(q, dtype=np.float64)
    m = q.size
    if m >= n:
        return q[:n].copy()
    den = _padded(den, n)
    num = _padded(num, n)
    j = n - m
    size = _pow2(n)
    # den*q has length n+m-1; wrapped positions land below m
    r = _mul(den, q, size, m, n)
    d = num[m:n] - r
    size2 = _pow2(2 * j - 1)
    high = _mul(ginv[:j], d, size2, 0, j)
    return np.concatenate([q, high])


def divide(num, den, n: int) -> np.ndarray:
    """``num/den mod z^n`` (reciprocal to half length, then one correction)."""
    num = _as_series(num)
    den = _as_series(den)
    if den[0] == 0:
        raise NonInvertibleSeriesError("denominator has zero constant term")
    if n <= 0:
        raise ValueError("length must be positive")
    if n == 1:
        return np.array([_padded(num, 1)[0] / den[0]])
    h = (n + 1) // 2
    g = reciprocal(den, h)
    size = _pow2(2 * h - 1)
    gs = _Spectra(g)
    q0 = _mul(_padded(num, h), gs, size, 0, h)
    # residual and correction, reusing the transform of g
    den_n = _padded(den, n)
    r = _mul(den_n, q0, _pow2(n), h, n)
    d = _padded(num, n)[h:n] - r
    high = _mul(gs, d, size, 0, n - h)
    return np.concatenate([q0, high])


def log_series(a, n: int, warm: Optional[np.ndarray] = None) -> np.ndarray:
    """``ln(a) mod z^n`` as the antiderivative of ``a'/a``; needs ``a[0] == 1``.

    ``warm`` is a known prefix of the logarithm (any length up to ``n``).
    """
    a = _as_series(a)
    if a[0] != 1.0:
        raise NormalizationError("log_series needs a[0] == 1")
    if n <= 0:
        raise ValueError("length must be positive")
    if n == 1:
        return np.zeros(1)
    a = _padded(a, n)
    da = derivative(a)  # n - 1 terms
    if warm is None or len(warm) <= 1:
        q = divide(da, a, n - 1)
        return antiderivative(q)[:n]
    warm = np.asarray(warm, dtype=np.float64)[:n]
    m = warm.size
    if m == n:
        return warm.copy()
    known = derivative(warm)  # m - 1 terms of a'/a
    ginv = reciprocal(a, n - m)
    q = _quotient_extend(da, a, known, n - 1, ginv)
    out = antiderivative(q)[:n]
    out[:m] = warm
    return out


def _exp_step(h: np.ndarray, f: np.ndarray, k: int) -> np.ndarray:
    """One Newton step from ``f = exp(h) mod z^m`` to ``k <= 2m`` terms."""
    m = f.size
    # ln f mod z^k = integral of f'/f; its first m-1 derivative terms equal h'
    known = derivative(h[:m]) if m > 1 else np.zeros(0)
    ginv = reciprocal(f, k - m)
    fs = _Spectra(_padded(f, m))
    size = _pow2(k)
    if m > 1:
        r = _mul(fs, known, size, m - 1, k - 1)
    else:
        r = np.zeros(k - 1)
    d = _padded(derivative(f), k - 1)[m - 1 : k - 1] - r
    j = k - m
    high_q = _mul(ginv[:j], d, _pow2(2 * j - 1), 0, j)
    q = np.concatenate([known, high_q])
    lnf = antiderivative(q)
    e = h[m:k] - lnf[m:k]
    # f*e truncated; f has m terms and e has k-m, all inside one 2m transform
    high = _mul(fs, e, size, 0, k - m)
    return np.concatenate([f, high])


def exp_series(h, n: int, warm_start: Optional[np.ndarray] = None) -> np.ndarray:
    """``exp(h) mod z^n``; needs ``h[0] == 0``.

    With ``warm_start`` (a prefix of the result, typically ``n/2`` terms) each
    stored coefficient is kept bit-for-bit and only the new ones are computed.
    """
    h = _as_series(h)
    if h[0] != 0.0:
        raise NormalizationError("exp_series needs h[0] == 0")
    if n <= 0:
        raise ValueError("length must be positive")
    h = _padded(h, n)
    if warm_start is None:
        f = np.ones(1)
    else:
        f = np.array(warm_start, dtype=np.float64)[:n]
        if f.size == 0 or f[0] != 1.0:
            raise NormalizationError("warm start must begin with 1")
    while f.size < n:
        f = _exp_step(h, f, min(2 * f.size, n))
    return f


def pow_series(a, s: float, n: int) -> np.ndarray:
    """``a**s mod z^n`` as ``exp(s * ln a)``; needs ``a[0] == 1``."""
    a = _as_series(a)
    if a[0] != 1.0:
        raise NormalizationError("pow_series needs a[0] == 1")
    if s == 0:
        return _unit(n)
    return exp_series(s * log_series(a, n), n)
