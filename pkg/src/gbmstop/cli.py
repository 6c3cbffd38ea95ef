"""Batch front end: TOML problem configs in, reports and CSV out.

Config layout::

    [model]
    r = 0.1
    alpha = 0.1
    sigma2 = 0.1

    [profit.gross_profit]          # or [[profit.segments]], see below
    a = 1.0
    b = 10.0
    c = 1.0
    f = 2.0
    K = 4.0

    [quadrature]                   # optional
    rel_tol = 1e-10

    [mc]                           # optional
    n_paths = 200000
    dt = 1e-3
    seed = 0

Free-form profits are ordered segment tables covering ]0, inf[::

    [[profit.segments]]
    kind = "polynomial"            # polynomial | power | constant | shifted_reciprocal
    coefficients = [-10.0, 11.0, -1.0]
    interval = [0.0, 6.9367]

    [[profit.segments]]
    kind = "shifted_reciprocal"
    e = 70.03
    f = 2.0
    K = 4.0
    interval = [6.9367, inf]

Exit codes are stable: 0 success, 2 ill-posed model parameters,
3 unsupported profit shape, 4 bad input (config, flags, points),
5 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

import numpy as np

from .errors import (
    GbmStopError,
    IllPosedParameterError,
    NotApplicableError,
    UnsupportedShapeError,
)
from .model import GbmParameters
from .profit import (
    Constant,
    Polynomial,
    Power,
    ProfitFunction,
    Segment,
    ShiftedReciprocal,
    gross_profit,
)
from .quadrature import QuadConfig
from .sensitivity import predicted_signs, report as sensitivity_report, sweep
from .solver import ProblemClass, solve
from .verify import (
    McConfig,
    dominance_check,
    estimate_J,
    hjb_residual,
    smooth_fit_check,
    transversality_check,
)

_INF = math.inf

__all__ = ["ProblemConfig", "ConfigError", "load_config", "serialize_config", "main"]


class ConfigError(GbmStopError, ValueError):
    """Config file is syntactically or semantically unusable; the message
    cites the offending key."""


@dataclass(frozen=True)
class ProblemConfig:
    params: GbmParameters
    pf: ProfitFunction
    quad: QuadConfig
    mc: McConfig


def _need(table: dict, key: str, where: str) -> object:
    if key not in table:
        raise ConfigError(f"missing key '{where}.{key}'")
    return table[key]


def _real(table: dict, key: str, where: str) -> float:
    v = _need(table, key, where)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"'{where}.{key}' must be a number, got {v!r}")
    return float(v)


_SEGMENT_KINDS = ("polynomial", "power", "constant", "shifted_reciprocal")


def _parse_segment(rec: dict, idx: int) -> Segment:
    where = f"profit.segments[{idx}]"
    kind = _need(rec, "kind", where)
    interval = _need(rec, "interval", where)
    if (not isinstance(interval, list) or len(interval) != 2
            or not all(isinstance(v, (int, float)) for v in interval)):
        raise ConfigError(f"'{where}.interval' must be [lo, hi]")
    lo, hi = float(interval[0]), float(interval[1])
    if kind == "polynomial":
        coeffs = _need(rec, "coefficients", where)
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigError(f"'{where}.coefficients' must be a nonempty array")
        form = Polynomial(tuple(float(c) for c in coeffs))
    elif kind == "power":
        form = Power(_real(rec, "c", where), _real(rec, "p", where))
    elif kind == "constant":
        form = Constant(_real(rec, "k", where))
    elif kind == "shifted_reciprocal":
        form = ShiftedReciprocal(_real(rec, "e", where), _real(rec, "f", where),
                                 _real(rec, "K", where))
    else:
        raise ConfigError(f"'{where}.kind' must be one of {_SEGMENT_KINDS}, got {kind!r}")
    return Segment(lo, hi, form)


def load_config(path: str) -> ProblemConfig:
    """Parse and validate a problem config; errors cite line or key."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    model = raw.get("model")
    if not isinstance(model, dict):
        raise ConfigError("missing [model] section")
    params = GbmParameters(
        r=_real(model, "r", "model"),
        alpha=_real(model, "alpha", "model"),
        sigma2=_real(model, "sigma2", "model"),
    )

    profit = raw.get("profit")
    if not isinstance(profit, dict):
        raise ConfigError("missing [profit] section")
    if "gross_profit" in profit:
        g = profit["gross_profit"]
        pf = gross_profit(
            _real(g, "a", "profit.gross_profit"),
            _real(g, "b", "profit.gross_profit"),
            _real(g, "c", "profit.gross_profit"),
            _real(g, "f", "profit.gross_profit"),
            _real(g, "K", "profit.gross_profit"),
        )
    elif "segments" in profit:
        recs = profit["segments"]
        if not isinstance(recs, list) or not recs:
            raise ConfigError("'profit.segments' must be a nonempty array of tables")
        pf = ProfitFunction(tuple(_parse_segment(r, i) for i, r in enumerate(recs)))
    else:
        raise ConfigError("[profit] needs either a gross_profit table or a segments array")

    quad_raw = raw.get("quadrature", {})
    quad_kwargs = {}
    for key in ("rel_tol", "abs_tol"):
        if key in quad_raw:
            quad_kwargs[key] = _real(quad_raw, key, "quadrature")
    if "max_subdivisions" in quad_raw:
        quad_kwargs["max_subdivisions"] = int(
            _real(quad_raw, "max_subdivisions", "quadrature"))
    quad = QuadConfig(**quad_kwargs)

    mc_raw = raw.get("mc", {})
    mc_kwargs = {}
    if "n_paths" in mc_raw:
        mc_kwargs["n_paths"] = int(_real(mc_raw, "n_paths", "mc"))
    if "dt" in mc_raw:
        mc_kwargs["dt"] = _real(mc_raw, "dt", "mc")
    if "t_max" in mc_raw:
        mc_kwargs["t_max"] = _real(mc_raw, "t_max", "mc")
    if "seed" in mc_raw:
        mc_kwargs["seed"] = int(_real(mc_raw, "seed", "mc"))
    mc = McConfig(**mc_kwargs)

    return ProblemConfig(params=params, pf=pf, quad=quad, mc=mc)


def _toml_value(v: object) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(u) for u in v) + "]"
    raise TypeError(f"cannot serialize {v!r}")


def serialize_config(cfg: ProblemConfig) -> str:
    """Emit TOML that re-parses to a bit-identical problem."""
    out = ["[model]"]
    out += [f"r = {_toml_value(cfg.params.r)}",
            f"alpha = {_toml_value(cfg.params.alpha)}",
            f"sigma2 = {_toml_value(cfg.params.sigma2)}", ""]
    for seg in cfg.pf.segments:
        out.append("[[profit.segments]]")
        f = seg.form
        if isinstance(f, Polynomial):
            out.append('kind = "polynomial"')
            out.append(f"coefficients = {_toml_value(list(f.coefficients))}")
        elif isinstance(f, Power):
            out.append('kind = "power"')
            out += [f"c = {_toml_value(f.c)}", f"p = {_toml_value(f.p)}"]
        elif isinstance(f, Constant):
            out.append('kind = "constant"')
            out.append(f"k = {_toml_value(f.k)}")
        elif isinstance(f, ShiftedReciprocal):
            out.append('kind = "shifted_reciprocal"')
            out += [f"e = {_toml_value(f.e)}", f"f = {_toml_value(f.f)}",
                    f"K = {_toml_value(f.K)}"]
        else:
            raise TypeError(f"cannot serialize form {type(f).__name__}")
        out.append(f"interval = {_toml_value([seg.lo, seg.hi])}")
        out.append("")
    out += ["[quadrature]",
            f"rel_tol = {_toml_value(cfg.quad.rel_tol)}",
            f"abs_tol = {_toml_value(cfg.quad.abs_tol)}",
            f"max_subdivisions = {cfg.quad.max_subdivisions}", ""]
    out += ["[mc]",
            f"n_paths = {cfg.mc.n_paths}",
            f"dt = {_toml_value(cfg.mc.dt)}"]
    if cfg.mc.t_max is not None:
        out.append(f"t_max = {_toml_value(cfg.mc.t_max)}")
    out.append(f"seed = {cfg.mc.seed}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# shared helpers


def _fmt(v: float | None) -> str:
    if v is None:
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _region_str(region) -> str:
    if region.empty:
        return "(empty)"
    parts = []
    for iv in region.intervals:
        lo_b = "[" if iv.lo_closed else "]"
        hi_b = "]" if iv.hi_closed else "["
        parts.append(f"{lo_b}{_fmt(iv.lo)}, {_fmt(iv.hi)}{hi_b}")
    return " u ".join(parts)


def _write_rows(path: str | None, header: list[str], rows: list[list[str]]) -> None:
    fh = sys.stdout if path is None else open(path, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if path is not None:
            fh.close()


def _parse_points(spec: str) -> list[float]:
    try:
        return [float(tok) for tok in spec.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad point list {spec!r}: {exc}") from exc


def _parse_grid(spec: str) -> list[float]:
    parts = spec.split(":")
    if len(parts) not in (3, 4):
        raise ConfigError(f"grid spec must be lo:hi:n[:log|lin], got {spec!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"bad grid spec {spec!r}: {exc}") from exc
    scale = parts[3] if len(parts) == 4 else "log"
    if scale not in ("log", "lin"):
        raise ConfigError(f"grid scale must be log or lin, got {scale!r}")
    if not (0.0 < lo < hi) or n < 2:
        raise ConfigError(f"grid needs 0 < lo < hi and n >= 2, got {spec!r}")
    if scale == "log":
        return list(np.geomspace(lo, hi, n))
    return list(np.linspace(lo, hi, n))


def _apply_overrides(cfg: ProblemConfig, args: argparse.Namespace) -> ProblemConfig:
    quad, mc = cfg.quad, cfg.mc
    if getattr(args, "tol", None) is not None:
        quad = QuadConfig(rel_tol=args.tol, abs_tol=quad.abs_tol,
                          max_subdivisions=quad.max_subdivisions)
    mc_changes = {}
    for flag, field_name in (("seed", "seed"), ("paths", "n_paths"), ("dt", "dt")):
        v = getattr(args, flag, None)
        if v is not None:
            mc_changes[field_name] = v
    if mc_changes:
        mc = dataclasses.replace(mc, **mc_changes)
    return ProblemConfig(cfg.params, cfg.pf, quad, mc)


def _solution_record(sol) -> dict:
    return {
        "problem_class": sol.problem_class.value,
        "d1": sol.roots[0],
        "d2": sol.roots[1],
        "gamma": sol.gamma,
        "zeta": None if sol.zeta is None or math.isinf(sol.zeta) else sol.zeta,
        "delta": sol.delta,
        "beta": None if sol.beta is None or math.isinf(sol.beta) else sol.beta,
        "a1": sol.a1,
        "a2": sol.a2,
        "stopping_region": _region_str(sol.stopping_region),
        "continuation_region": _region_str(sol.continuation_region),
    }


# ---------------------------------------------------------------------------
# subcommands


def _cmd_solve(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    sol = solve(cfg.pf, cfg.params, cfg.quad)
    d1, d2 = sol.roots
    print(f"problem class : {sol.problem_class.value}")
    print(f"roots         : d1={d1!r}  d2={d2!r}")
    thr = [
        f"{name}={_fmt(v)}"
        for name, v in (("gamma", sol.gamma), ("zeta", sol.zeta),
                        ("delta", sol.delta), ("beta", sol.beta))
        if v is not None
    ]
    print(f"thresholds    : {'  '.join(thr) if thr else '(none)'}")
    if sol.a1 is not None:
        print(f"coefficients  : a1={sol.a1!r}  a2={sol.a2!r}")
    else:
        print("coefficients  : (none)")
    print(f"stopping      : {_region_str(sol.stopping_region)}")
    print(f"continuation  : {_region_str(sol.continuation_region)}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(_solution_record(sol), fh, indent=2)
            fh.write("\n")
    return 0


def _threshold_points(sol) -> list[float]:
    return [t for t in (sol.gamma, sol.zeta, sol.delta, sol.beta)
            if t is not None and 0.0 < t < _INF]


def _cmd_eval(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    if args.x:
        xs = _parse_points(args.x)
    elif args.grid:
        xs = _parse_grid(args.grid)
    else:
        raise ConfigError("eval needs --x or --grid")
    for x in xs:
        if not (x > 0.0 and math.isfinite(x)):
            raise ConfigError(f"evaluation points must be in ]0, inf[, got {x}")
    sol = solve(cfg.pf, cfg.params, cfg.quad)
    thresholds = _threshold_points(sol)
    rows = []
    for x in xs:
        if any(x == t for t in thresholds):
            region = "boundary"
        elif x in sol.stopping_region:
            region = "stop"
        else:
            region = "continue"
        rows.append([_fmt(x), _fmt(sol.value(x)), _fmt(sol.value_derivative(x)), region])
    _write_rows(args.out, ["x", "V", "V_prime", "region"], rows)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    if args.values:
        grid = _parse_points(args.values)
    elif args.range:
        grid = _parse_grid(args.range)
    else:
        raise ConfigError("sweep needs --values or --range")
    rows = sweep(cfg.pf, cfg.params, args.vary, grid, cfg.quad)
    out = [
        [_fmt(r.param_value), r.problem_class or "", _fmt(r.gamma), _fmt(r.zeta),
         _fmt(r.delta), _fmt(r.beta), r.excluded_reason or ""]
        for r in rows
    ]
    _write_rows(args.out, ["param_value", "class", "gamma", "zeta", "delta", "beta",
                           "excluded_reason"], out)
    return 0


def _cmd_sensitivity(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    sol = solve(cfg.pf, cfg.params, cfg.quad)
    cell = predicted_signs(cfg.params)
    print(f"problem class        : {sol.problem_class.value}")
    try:
        rep = sensitivity_report(cfg.pf, cfg.params, sol, cfg.quad)
        print(f"d(d1)/d(alpha)       : {rep.d_d1_d_alpha!r}")
        print(f"d(d2)/d(alpha)       : {rep.d_d2_d_alpha!r}")
        print(f"d(d1)/d(sigma2)      : {rep.d_d1_d_sigma2!r}")
        print(f"d(d2)/d(sigma2)      : {rep.d_d2_d_sigma2!r}")
        print(f"d(threshold)/d(alpha) : {rep.d_threshold_d_alpha!r}"
              f"  (finite difference {rep.fd_alpha!r})")
        print(f"d(threshold)/d(sigma2): {rep.d_threshold_d_sigma2!r}"
              f"  (finite difference {rep.fd_sigma2!r})")
        rows = [
            ["d_d1_d_alpha", _fmt(rep.d_d1_d_alpha)],
            ["d_d2_d_alpha", _fmt(rep.d_d2_d_alpha)],
            ["d_d1_d_sigma2", _fmt(rep.d_d1_d_sigma2)],
            ["d_d2_d_sigma2", _fmt(rep.d_d2_d_sigma2)],
            ["d_threshold_d_alpha", _fmt(rep.d_threshold_d_alpha)],
            ["d_threshold_d_sigma2", _fmt(rep.d_threshold_d_sigma2)],
            ["fd_alpha", _fmt(rep.fd_alpha)],
            ["fd_sigma2", _fmt(rep.fd_sigma2)],
        ]
    except NotApplicableError as exc:
        print(f"threshold gradient   : not applicable ({exc})")
        sens = cfg.params.root_sensitivities()
        rows = [
            ["d_d1_d_alpha", _fmt(sens.dd1_dalpha)],
            ["d_d2_d_alpha", _fmt(sens.dd2_dalpha)],
            ["d_d1_d_sigma2", _fmt(sens.dd1_dsigma2)],
            ["d_d2_d_sigma2", _fmt(sens.dd2_dsigma2)],
        ]
    print("predicted signs      : "
          f"zeta/alpha={cell.d_zeta_d_alpha:+d} gamma/alpha={cell.d_gamma_d_alpha:+d} "
          f"zeta/sigma2={cell.d_zeta_d_sigma2:+d} gamma/sigma2={cell.d_gamma_d_sigma2:+d}")
    if args.out:
        _write_rows(args.out, ["quantity", "value"], rows)
    return 0


def _default_hjb_grid(sol, n: int = 200) -> list[float]:
    thresholds = _threshold_points(sol)
    anchor = thresholds[0] if thresholds else 1.0
    lo = min(thresholds) / 50.0 if thresholds else anchor / 50.0
    hi = max(thresholds) * 50.0 if thresholds else anchor * 50.0
    grid = list(np.geomspace(lo, hi, n))
    eps = 1e-3
    extra = [t * (1.0 + s * eps) for t in thresholds for s in (-1.0, 1.0)]
    return [x for x in grid + extra if x not in thresholds]


def _cmd_verify(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    sol = solve(cfg.pf, cfg.params, cfg.quad)
    if sol.problem_class not in (ProblemClass.ONE_SIDED_LOWER,
                                 ProblemClass.ONE_SIDED_UPPER,
                                 ProblemClass.TWO_SIDED):
        print(f"problem class {sol.problem_class.value}: nothing to verify "
              "(no free boundary)")
        return 0
    if args.debug_scale_threshold != 1.0:
        k = args.debug_scale_threshold
        sol = dataclasses.replace(
            sol,
            gamma=None if sol.gamma is None else sol.gamma * k,
            zeta=None if sol.zeta is None else sol.zeta * k,
            delta=None if sol.delta is None else sol.delta * k,
            beta=None if sol.beta is None else sol.beta * k,
        )
    failed = False

    sf = smooth_fit_check(sol)
    worst = max(max(e.value_residual / e.scale, e.derivative_residual / e.scale)
                for e in sf.entries)
    print(f"smooth fit     : {'PASS' if sf.passed else 'FAIL'} "
          f"(worst residual {worst:.3e}, tol {sf.tol:g})")
    failed |= not sf.passed

    grid_n = args.grid_points
    hjb = hjb_residual(sol, cfg.params, _default_hjb_grid(sol, grid_n))
    print(f"hjb residual   : {'PASS' if hjb.passed else 'FAIL'} "
          f"({len(hjb.points)} points, {hjb.n_violations} violations)")
    failed |= not hjb.passed

    tv = transversality_check(sol, cfg.params)
    print(f"transversality : {'PASS' if tv.passed else 'FAIL'} ({tv.message})")
    failed |= not tv.passed

    if args.mc:
        thresholds = _threshold_points(sol)
        upper_only = (sol.problem_class is ProblemClass.ONE_SIDED_UPPER
                      or (sol.beta is not None and math.isfinite(sol.beta)
                          and not (sol.delta and sol.delta > 0.0)))
        if args.x_given:
            x = args.x
        elif len(thresholds) > 1:
            x = math.sqrt(thresholds[0] * thresholds[-1])
        elif upper_only:
            x = 0.5 * thresholds[0]
        else:
            x = 2.0 * thresholds[0]
        est = estimate_J(cfg.pf, cfg.params, sol.stopping_region, x, cfg.mc)
        v = sol.value(x)
        ok = abs(est.mean - v) <= 3.0 * est.std_error
        print(f"mc consistency : {'PASS' if ok else 'FAIL'} "
              f"(x={x:g}, estimate {est.mean:.6g} +- {est.std_error:.2g}, value {v:.6g})")
        failed |= not ok
        try:
            dom = dominance_check(cfg.pf, cfg.params, sol, x,
                                  [-0.3, -0.1, 0.1, 0.3], cfg.mc)
            print(f"mc dominance   : PASS ({len(dom.rows)} perturbations dominated)")
        except GbmStopError as exc:
            print(f"mc dominance   : FAIL ({exc})")
            failed = True

    return 5 if failed else 0


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="gbmstop",
        description="Solve perpetual stopping problems on geometric Brownian motion.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("config", help="TOML problem config")
        sp.add_argument("--tol", type=float, default=None,
                        help="override quadrature relative tolerance")
        sp.add_argument("--seed", type=int, default=None, help="override MC seed")
        sp.add_argument("--paths", type=int, default=None, help="override MC path count")
        sp.add_argument("--dt", type=float, default=None, help="override MC step size")
        sp.add_argument("--out", default=None, help="write machine-readable output here")

    sp = sub.add_parser("solve", help="classify and solve the free-boundary problem")
    add_common(sp)
    sp.set_defaults(fn=_cmd_solve)

    sp = sub.add_parser("eval", help="evaluate the value function on points")
    add_common(sp)
    sp.add_argument("--x", default=None, help="comma-separated evaluation points")
    sp.add_argument("--grid", default=None, help="lo:hi:n[:log|lin] evaluation grid")
    sp.set_defaults(fn=_cmd_eval)

    sp = sub.add_parser("sweep", help="re-solve along a parameter grid, emit CSV")
    add_common(sp)
    sp.add_argument("--vary", required=True, choices=("alpha", "sigma2"))
    sp.add_argument("--values", default=None, help="comma-separated parameter values")
    sp.add_argument("--range", default=None, help="lo:hi:n[:log|lin] parameter grid")
    sp.set_defaults(fn=_cmd_sweep)

    sp = sub.add_parser("sensitivity", help="root and threshold derivatives")
    add_common(sp)
    sp.set_defaults(fn=_cmd_sensitivity)

    sp = sub.add_parser("verify", help="a-posteriori checks on the solved problem")
    add_common(sp)
    sp.add_argument("--mc", action="store_true",
                    help="also run Monte Carlo consistency and dominance")
    sp.add_argument("--x", type=float, default=None, dest="x",
                    help="start point for the Monte Carlo checks")
    sp.add_argument("--grid-points", type=int, default=200,
                    help="size of the HJB residual grid")
    sp.add_argument("--debug-scale-threshold", type=float, default=1.0,
                    help=argparse.SUPPRESS)
    sp.set_defaults(fn=_cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if hasattr(args, "x"):
        args.x_given = args.x is not None
    try:
        return args.fn(args)
    except IllPosedParameterError as exc:
        print(f"error: ill-posed model parameters: {exc}", file=sys.stderr)
        return 2
    except UnsupportedShapeError as exc:
        print(f"error: unsupported profit shape: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except GbmStopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
