"""Command-line interface.

Every subcommand writes CSV with one header line and a trailing
``# key=value ...`` metadata line.  Floats use ``repr`` so values round-trip
exactly.  Exit status: 0 on success, 2 for invalid flags, 3 for numerical
failures (divergent sensitivity, quadrature tolerance not met).
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from .approx import ExpansionContext, alg2_init, alg2_variance_profile, approx_coeffs
from .baselines import HybridConfig, hybrid_stream, hybrid_variance, sqrt_matrix_variance
from .factor import FactorPair, FactorParams, coeffs_f1
from .mechanism import PrivacyParams, SideInfo, init, variance_profile
from .sensitivity import DivergentSensitivityError, PrecisionError, compute_sensitivity

OUTPUT_DIR_ENV = "LOGMATRIX_OUTPUT_DIR"

VARIANCE_MECHS = ("logmatrix", "approx", "sqrt", "hybrid-indep", "hybrid-log")
COMPARE_DEFAULT = ("logmatrix:default", "logmatrix:large-n", "logmatrix:fast",
                   "approx", "sqrt", "hybrid-indep", "hybrid-log")
SIMULATE_MECHS = ("logmatrix", "approx", "hybrid-indep", "hybrid-log")


class FlagError(ValueError):
    """Invalid flag combination or value."""


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    s = repr(float(v))
    # integral values print without the trailing ".0"; still an exact round trip
    return s[:-2] if s.endswith(".0") else s


def _csv(header: Sequence[str], rows, meta: Dict[str, object]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    items = {"version": __version__, **meta}
    buf.write("# " + " ".join(f"{k}={v}" for k, v in items.items()) + "\n")
    return buf.getvalue()


def t_grid(t_max: int) -> np.ndarray:
    """Powers of two, the step before each, and 3 geometric midpoints per octave.

    Always includes 1 and ``t_max``; strictly increasing.
    """
    if t_max < 1:
        raise FlagError("t_max must be >= 1")
    pts = {1, t_max}
    k = 0
    while (1 << k) <= t_max:
        base = 1 << k
        pts.add(base)
        pts.add(max(1, base - 1))
        for j in (1, 2, 3):
            pts.add(int(round(base * 2 ** (j / 4))))
        k += 1
    return np.array(sorted(p for p in pts if p <= t_max), dtype=np.int64)


# --------------------------------------------------------------------------
# argument handling
# --------------------------------------------------------------------------


def _params(args) -> FactorParams:
    if getattr(args, "preset", None):
        return FactorParams.preset(args.preset, alpha=-0.5 - args.gamma)
    return FactorParams(args.gamma, args.delta_log)


def _privacy(args) -> PrivacyParams:
    try:
        return PrivacyParams(args.eps, args.delta_priv)
    except ValueError as exc:
        raise FlagError(str(exc)) from exc


def _check_t_max(args) -> None:
    if args.t_max < 1:
        raise FlagError("--t-max must be >= 1")


def _check_valid(params: FactorParams) -> None:
    if not params.is_valid:
        raise DivergentSensitivityError(
            f"gamma={params.gamma} >= -1/2: sensitivity diverges"
        )


def _add_factor_flags(p: argparse.ArgumentParser, presets: bool = False) -> None:
    p.add_argument("--gamma", type=float, default=-0.51)
    p.add_argument("--delta-log", type=float, default=0.51)
    if presets:
        p.add_argument("--preset", choices=("default", "large-n", "fast"),
                       help="derive delta-log from gamma")


def _add_privacy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--delta-priv", type=float, default=1e-6)


def _add_approx_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--eta", type=float, default=1e-3)


def _add_hybrid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rho", type=float, default=0.75)
    p.add_argument("--no-reuse", action="store_true")


def _hybrid_config(args, variant: str, params: FactorParams) -> HybridConfig:
    try:
        return HybridConfig(args.rho, variant, not args.no_reuse, params)
    except ValueError as exc:
        raise FlagError(str(exc)) from exc


def _check_approx(args) -> None:
    if args.K < 0:
        raise FlagError("--K must be >= 0")
    if not args.eta > 0:
        raise FlagError("--eta must be positive")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_coeffs(args) -> str:
    _check_t_max(args)
    params = _params(args)
    n = args.t_max
    pair = FactorPair(params).extend_to(n)
    rows = zip(range(n), pair.L[:n], pair.R[:n], coeffs_f1(n))
    meta = {"gamma": repr(params.gamma), "delta_log": repr(params.delta_log)}
    return _csv(("m", "coeff_L", "coeff_R", "coeff_f1"), rows, meta)


def cmd_sensitivity(args) -> str:
    if not args.tol > 0:
        raise FlagError("--tol must be positive")
    params = _params(args)
    res = compute_sensitivity(params, tol=args.tol)
    meta = {"gamma": repr(params.gamma), "delta_log": repr(params.delta_log), "tol": repr(args.tol)}
    return _csv(("delta", "delta_sq", "quad_error_estimate"),
                [(res.delta, res.delta_sq, res.quad_error_estimate)], meta)


def _variance_curve(mech: str, params: FactorParams, privacy: PrivacyParams, args,
                    ts: np.ndarray) -> np.ndarray:
    t_max = int(ts[-1])
    if mech.startswith("logmatrix"):
        _, _, preset = mech.partition(":")
        p = FactorParams.preset(preset, params.alpha) if preset else params
        _check_valid(p)
        return variance_profile(p, privacy, t_max)[ts - 1]
    if mech == "approx":
        _check_valid(params)
        _check_approx(args)
        return alg2_variance_profile(params, privacy, t_max, args.K, args.eta)[ts - 1]
    if mech == "sqrt":
        return sqrt_matrix_variance(ts, t_max, privacy)
    if mech in ("hybrid-indep", "hybrid-log"):
        variant = "independent" if mech == "hybrid-indep" else "logmatrix"
        if variant == "logmatrix":
            _check_valid(params)
        return hybrid_variance(ts, _hybrid_config(args, variant, params), privacy)
    raise FlagError(f"unknown mechanism {mech!r}")


def _variance_meta(args, params, privacy) -> Dict[str, object]:
    return {
        "gamma": repr(params.gamma), "delta_log": repr(params.delta_log),
        "eps": repr(privacy.epsilon), "delta_priv": repr(privacy.delta_priv),
        "K": args.K, "eta": repr(args.eta), "rho": repr(args.rho),
        "reuse": "none" if args.no_reuse else "completed-epochs",
    }


def cmd_variance(args) -> str:
    _check_t_max(args)
    params = _params(args)
    privacy = _privacy(args)
    ts = t_grid(args.t_max)
    var = _variance_curve(args.mech, params, privacy, args, ts)
    meta = {"mech": args.mech, **_variance_meta(args, params, privacy)}
    return _csv(("t", "variance"), zip(ts, var), meta)


def cmd_compare(args) -> str:
    _check_t_max(args)
    params = _params(args)
    privacy = _privacy(args)
    mechs = args.mechs.split(",") if args.mechs else list(COMPARE_DEFAULT)
    ts = t_grid(args.t_max)
    curves = {m: _variance_curve(m, params, privacy, args, ts) for m in mechs}
    rows = [(t, m, curves[m][i]) for m in mechs for i, t in enumerate(ts)]
    meta = {"mechs": ",".join(mechs), **_variance_meta(args, params, privacy)}
    if args.svg:
        with open(_resolve(args.svg), "w") as fh:
            fh.write(render_svg(ts, curves))
    return _csv(("t", "mechanism", "variance"), rows, meta)


def _read_input(source: str, n: Optional[int], seed: int) -> np.ndarray:
    kind, _, arg = source.partition(":")
    if kind == "zeros":
        if n is None:
            raise FlagError("--t-max is required with --input zeros")
        return np.zeros(n)
    if kind == "bernoulli":
        if n is None:
            raise FlagError("--t-max is required with --input bernoulli:p")
        try:
            p = float(arg)
        except ValueError as exc:
            raise FlagError("bernoulli needs a probability, e.g. bernoulli:0.5") from exc
        if not 0 <= p <= 1:
            raise FlagError("bernoulli probability must lie in [0, 1]")
        rng = np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), 99]))
        return (rng.random(n) < p).astype(np.float64)
    if kind == "file":
        try:
            xs = np.loadtxt(arg, dtype=np.float64, ndmin=1)
        except (OSError, ValueError) as exc:
            raise FlagError(f"cannot read input file: {exc}") from exc
        if n is not None:
            xs = xs[:n]
        if np.any((xs < 0) | (xs > 1)):
            raise FlagError("input values must lie in [0, 1]")
        return xs
    raise FlagError("--input must be zeros, bernoulli:p or file:PATH")


def cmd_simulate(args) -> str:
    if args.t_max is not None and args.t_max < 1:
        raise FlagError("--t-max must be >= 1")
    params = _params(args)
    privacy = _privacy(args)
    xs = _read_input(args.input, args.t_max, args.seed)
    side = None
    if args.n0 is not None:
        try:
            side = SideInfo(args.n0, args.c_factor)
        except ValueError as exc:
            raise FlagError(str(exc)) from exc
    if args.mech in ("logmatrix", "approx", "hybrid-log"):
        _check_valid(params)
    if args.mech == "logmatrix":
        state = init(params, privacy, args.seed, side)
    elif args.mech == "approx":
        _check_approx(args)
        state = alg2_init(params, privacy, args.seed, args.K, args.eta, side)
    elif args.mech in ("hybrid-indep", "hybrid-log"):
        variant = "independent" if args.mech == "hybrid-indep" else "logmatrix"
        state = hybrid_stream(_hybrid_config(args, variant, params), privacy, args.seed)
    else:
        raise FlagError(f"unknown mechanism {args.mech!r}")
    out = state.run(xs)
    true = np.cumsum(xs)
    rows = zip(range(1, xs.size + 1), true, out, out - true)
    meta = {"mech": args.mech, "seed": args.seed, "gamma": repr(params.gamma),
            "delta_log": repr(params.delta_log), "eps": repr(privacy.epsilon),
            "delta_priv": repr(privacy.delta_priv), "input": args.input}
    if side is not None:
        meta.update(n0=side.n0, c_factor=repr(float(side.c_factor)))
    return _csv(("t", "true_sum", "output", "noise"), rows, meta)


def cmd_approx_error(args) -> str:
    _check_t_max(args)
    _check_approx(args)
    params = _params(args)
    if args.t_max < 17:
        raise FlagError("--t-max must be >= 17 (the expansion needs m >= 16)")
    try:
        ctx = ExpansionContext.build(params, args.K)
    except ValueError as exc:
        raise FlagError(str(exc)) from exc
    exact = FactorPair(params, with_L=False).extend_to(args.t_max).R
    ms = t_grid(args.t_max - 1)
    ms = ms[ms >= 16]
    approx = approx_coeffs(ms, ctx)
    rel = np.abs(approx - exact[ms]) / np.abs(exact[ms])
    meta = {"gamma": repr(params.gamma), "delta_log": repr(params.delta_log), "K": args.K}
    return _csv(("t", "exact", "approx", "rel_error"), zip(ms, exact[ms], approx, rel), meta)


# --------------------------------------------------------------------------
# SVG
# --------------------------------------------------------------------------

_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2")


def render_svg(ts: np.ndarray, curves: Dict[str, np.ndarray],
               width: int = 720, height: int = 440) -> str:
    """Log-x, log-y line chart of variance curves."""
    pad_l, pad_r, pad_t, pad_b = 70, 170, 20, 45
    lx = np.log2(ts.astype(float))
    vals = np.concatenate([np.asarray(c, float) for c in curves.values()])
    vals = vals[vals > 0]
    ly_min, ly_max = np.log10(vals.min()), np.log10(vals.max())
    if ly_max == ly_min:
        ly_max = ly_min + 1
    x_span = max(lx[-1] - lx[0], 1.0)

    def sx(v):
        return pad_l + (v - lx[0]) / x_span * (width - pad_l - pad_r)

    def sy(v):
        return height - pad_b - (v - ly_min) / (ly_max - ly_min) * (height - pad_t - pad_b)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    x0, x1 = sx(lx[0]), sx(lx[-1])
    y0, y1 = sy(ly_min), sy(ly_max)
    out.append(f'<path d="M{x0:.1f},{y1:.1f} L{x0:.1f},{y0:.1f} L{x1:.1f},{y0:.1f}" '
               'stroke="black" fill="none"/>')
    for k in range(int(math.ceil(lx[0])), int(lx[-1]) + 1, 2):
        x = sx(k)
        out.append(f'<text x="{x:.1f}" y="{height - pad_b + 18}" font-size="11" '
                   f'text-anchor="middle">2^{k}</text>')
    for d in range(int(math.ceil(ly_min)), int(math.floor(ly_max)) + 1):
        y = sy(d)
        out.append(f'<text x="{pad_l - 6}" y="{y + 4:.1f}" font-size="11" '
                   f'text-anchor="end">1e{d}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{height - 8}" font-size="12" '
               'text-anchor="middle">t</text>')
    for i, (name, curve) in enumerate(curves.items()):
        color = _COLORS[i % len(_COLORS)]
        c = np.asarray(curve, float)
        pts = " ".join(f"{sx(a):.1f},{sy(math.log10(b)):.1f}" for a, b in zip(lx, c) if b > 0)
        out.append(f'<polyline points="{pts}" stroke="{color}" fill="none" stroke-width="1.5"/>')
        ly = pad_t + 16 * i + 10
        out.append(f'<text x="{width - pad_r + 10}" y="{ly}" font-size="11" fill="{color}">'
                   f'{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _resolve(path: str) -> str:
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logmatrix",
                                     description="Smooth unbounded private continual counting.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coeffs", help="Taylor coefficients of L, R and f1")
    _add_factor_flags(p, presets=True)
    p.add_argument("--t-max", type=int, default=16)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("sensitivity", help="limiting column norm of R")
    _add_factor_flags(p, presets=True)
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("variance", help="exact variance on a geometric t grid")
    p.add_argument("--mech", choices=VARIANCE_MECHS + tuple(
        f"logmatrix:{n}" for n in ("default", "large-n", "fast")), default="logmatrix")
    _add_factor_flags(p, presets=True)
    _add_privacy_flags(p)
    _add_approx_flags(p)
    _add_hybrid_flags(p)
    p.add_argument("--t-max", type=int, default=1 << 16)
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("compare", help="variance of several mechanisms side by side")
    p.add_argument("--mechs", help=f"comma-separated ids (default: {','.join(COMPARE_DEFAULT)})")
    _add_factor_flags(p, presets=True)
    _add_privacy_flags(p)
    _add_approx_flags(p)
    _add_hybrid_flags(p)
    p.add_argument("--t-max", type=int, default=1 << 16)
    p.add_argument("--svg", help="also write a log-log chart to this path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="run a mechanism on a stream")
    p.add_argument("--mech", choices=SIMULATE_MECHS, default="logmatrix")
    _add_factor_flags(p, presets=True)
    _add_privacy_flags(p)
    _add_approx_flags(p)
    _add_hybrid_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n0", type=int)
    p.add_argument("--c-factor", type=float, default=1.0)
    p.add_argument("--input", default="zeros", help="zeros | bernoulli:p | file:PATH")
    p.add_argument("--t-max", type=int, help="stream length (required unless reading a file)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("approx-error", help="accuracy of the coefficient expansion")
    _add_factor_flags(p, presets=True)
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--eta", type=float, default=1e-3)
    p.add_argument("--t-max", type=int, default=1 << 16)
    p.set_defaults(func=cmd_approx_error)

    for action in sub.choices.values():
        action.add_argument("--output", "-o", help="write CSV here instead of stdout")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
    except FlagError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergentSensitivityError, PrecisionError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if args.output:
        with open(_resolve(args.output), "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
