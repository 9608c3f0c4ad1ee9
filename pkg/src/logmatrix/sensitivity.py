"""Limiting column norm of R via Parseval's identity.

``Delta^2 = sum_m ([z^m] f_R)^2`` equals the mean of ``|f_R|^2`` over the unit
circle.  With ``omega = (pi - theta) / 2`` and

    I1 = 2 cos(omega)
    I2 = ln(I1)^2 + omega^2
    I3 = ln(I2)^2 / 4
    I4 = arctan(-omega / ln(I1)) + 2 omega

the integral folds onto ``[0, pi/2)`` with a branch offset of ``pi`` on
``(pi/3, pi/2)``, where ``ln I1`` changes sign.

The integrand is integrable but extremely heavy at ``omega -> pi/2``: with
``eps = I1`` it behaves like ``1 / (eps |ln eps|^(1 + 2 alpha))``, and for
``alpha = 0.01`` most of the mass sits at ``ln ln(1/eps)`` around
``1 / (2 alpha)``.  Rules that cluster nodes near the endpoint in ``omega``
never get there.  The last piece is therefore integrated in the variable
``v = ln ln(1/eps)``, where the integrand decays like ``exp(-2 alpha v)``.
All quadrature runs in mpmath at 30+ significant digits.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .factor import FactorParams, coeffs_f

BRANCH_POINT = math.pi / 3
_DPS = 30


class DivergentSensitivityError(ValueError):
    """Raised when gamma >= -1/2: the coefficients of R are not square-summable."""


class SingularPointError(ValueError):
    """Raised when the integrand is evaluated at omega = +-pi/2."""


class PrecisionError(RuntimeError):
    """Raised when the quadrature misses its tolerance; carries the best estimate."""

    def __init__(self, message: str, result: "SensitivityResult") -> None:
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class SensitivityResult:
    delta_sq: float
    delta: float
    quad_error_estimate: float
    params: FactorParams


def _omega_integrand(w, gamma, delta):
    """Folded integrand at ``0 <= w < pi/2`` in mpmath arithmetic.

    The branch offset follows the sign of ``ln I1`` (0 below pi/3, pi above).
    """
    I1 = 2 * mp.cos(w)
    lI1 = mp.log(I1)
    I2 = lI1**2 + w**2
    val = I2**gamma / I1
    if delta == 0:
        return val
    I3 = mp.log(I2) ** 2 / 4
    if lI1 == 0:
        # one-sided limit; both branches agree here
        shifted = 2 * w - mp.pi / 2
    else:
        offset = 0 if lI1 > 0 else mp.pi
        shifted = mp.atan(-w / lI1) + 2 * w - offset
    return val * (I3 + shifted**2) ** delta


def integrand(omega: float, params: FactorParams) -> float:
    """``I1^-1 I2^(gamma) (I3 + (I4 - offset)^2)^delta_log`` at ``omega``.

    ``gamma = -1/2 - alpha``.  Even in ``omega``; singular at ``|omega| = pi/2``.
    """
    w = abs(float(omega))
    if w >= math.pi / 2:
        raise SingularPointError("integrand is singular at omega = +-pi/2")
    with mp.workdps(_DPS):
        return float(_omega_integrand(mp.mpf(w), params.gamma, params.delta_log))


def parseval_integrand(theta: float, params: FactorParams) -> float:
    """``|f_R(e^{i theta})|^2`` evaluated directly from the definition of f.

    Uses principal logarithms: ``ln f2 = ln L - ln z`` with ``L = -ln(1 - z)``
    is continuous on the circle minus ``z = 1`` and real at ``z = -1``.
    """
    with mp.workdps(_DPS):
        z = mp.expj(theta)
        big_l = -mp.log(1 - z)
        lf2 = mp.log(big_l) - mp.log(z)
        val = 1 / abs(1 - z) * mp.exp(2 * params.gamma * mp.re(lf2))
        if params.delta_log != 0:
            val *= (4 * abs(lf2) ** 2) ** params.delta_log
        return float(val)


def _tail_integrand(y, gamma, delta, rate):
    """Integrand of the piece near pi/2 in ``y = rate * v``, ``v = ln ln(1/I1)``."""
    v = y / rate
    s = mp.exp(v)
    if s < 100:
        eps = mp.exp(-s)
        w = mp.acos(eps / 2)
        gap = -2 * mp.asin(eps / 2)  # 2w - pi without cancellation
        jac = 1 / mp.sqrt(4 - eps**2)
    else:
        w = mp.pi / 2
        gap = 0
        jac = mp.mpf(0.5)
    ln_i2 = 2 * v + mp.log1p(w**2 * mp.exp(-2 * v))
    # d(omega) / I1 = ds / sqrt(4 - eps^2) and ds = s dv
    val = mp.exp(v + gamma * ln_i2) * jac / rate
    if delta == 0:
        return val
    I3 = ln_i2**2 / 4
    shifted = mp.atan(w / s) + gap
    return val * (I3 + shifted**2) ** delta


@functools.lru_cache(maxsize=128)
def _quadrature(gamma: float, delta: float, split: float, dps: int):
    with mp.workdps(dps):
        split_mp = mp.pi / 3 if split == BRANCH_POINT else mp.mpf(split)
        w1 = mp.acos(mp.exp(-1) / 2)
        f = lambda w: _omega_integrand(w, gamma, delta)
        a, ea = mp.quad(f, [0, split_mp], error=True)
        b, eb = mp.quad(f, [split_mp, w1], error=True)
        rate = -(1 + 2 * gamma)
        cuts = [0] + [mp.mpf(2) ** k for k in range(-4, 10)]
        c, ec = mp.quad(lambda y: _tail_integrand(y, gamma, delta, rate), cuts, error=True)
        scale = mp.mpf(2) ** (1 + 2 * delta) / mp.pi
        return float(scale * (a + b + c)), float(scale * (ea + eb + ec))


def compute_sensitivity(params: FactorParams, tol: float = 1e-12,
                        split: float = BRANCH_POINT, dps: int = _DPS) -> SensitivityResult:
    """``Delta^2 = lim_n ||[R]_n||_{1->2}^2`` by quadrature.

    ``tol`` is relative.  ``split`` moves the break point between the first
    two pieces (the branch offsets stay tied to pi/3).
    """
    if not params.gamma < -0.5:
        raise DivergentSensitivityError(
            f"gamma={params.gamma} >= -1/2: column norms of R diverge"
        )
    if not 0 < split < math.acos(math.exp(-1) / 2):
        raise ValueError("split must lie inside the first two pieces")
    value, err = _quadrature(float(params.gamma), float(params.delta_log), float(split), int(dps))
    result = SensitivityResult(value, math.sqrt(value), err, params)
    if not err <= tol * abs(value):
        raise PrecisionError(
            f"quadrature error {err:.3g} exceeds tolerance {tol:.3g} (relative)", result
        )
    return result


def partial_sums(params: FactorParams, Ns) -> np.ndarray:
    """``sum_{m<N} ([z^m] f_R)^2`` for each ``N`` in ``Ns`` (one coefficient run)."""
    Ns = np.asarray(Ns, dtype=np.int64)
    if Ns.size and Ns.min() < 1:
        raise ValueError("N must be >= 1")
    R = coeffs_f(params, int(Ns.max()))
    csum = np.cumsum(R * R)
    return csum[Ns - 1]


def partial_sum_oracle(params: FactorParams, N: int) -> float:
    """``sum_{m<N} ([z^m] f_R)^2`` from the exact coefficients."""
    return float(partial_sums(params, [N])[0])


def extrapolated_limit(params: FactorParams, N: int, K: int = 4) -> float:
    """Partial sum to ``N`` plus the asymptotic tail beyond it.

    The tail integrates the squared asymptotic expansion of the coefficients
    (order ``K``) over ``m >= N - 1/2``, an estimate independent of the
    circle integral.
    """
    from .approx import asymptotic_tail

    return partial_sum_oracle(params, N) + asymptotic_tail(params, N, K)
