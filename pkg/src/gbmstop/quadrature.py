"""Certified weighted profit integrals.

Everything the solver does reduces to integrals of the form

    integral_a^b s^(-d-1) Pi(s) ds,

possibly with an extra log(s) factor, over intervals whose endpoints may be
0 or infinity.  All integration happens after the substitution s = e^u,
which turns the weight into exp(-d u) and makes the improper ends
exponentially decaying whenever they converge at all.

Convergence at an improper end is decided analytically, never by probing:
the outermost segment behaves like c*x^p with an exact (p, c) from its
closed form, so the end converges iff p - d is negative at infinity and
positive at zero (strictly; the liminf conditions fail at equality).  The
numeric window is truncated where the discarded remainder is provably
below the error budget, using the two-sided dominance bound
|Pi(x)| <= (4/3)|c| x^p that each form certifies beyond a computable knot.

Finite pieces go to an adaptive Gauss-Kronrod rule (QUADPACK) with the
segment joins and sign roots as mandatory break points.  Outside the
outermost joins the integrand is evaluated in factored form
exp((p-d)u) * (exp(-pu) Pi(e^u)) so that no intermediate power overflows.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from scipy import integrate

from .errors import DivergentIntegralError, NoConvergenceError
from .profit import ProfitFunction

__all__ = [
    "QuadConfig",
    "IntegralResult",
    "weighted_integral",
    "log_weighted_integral",
    "kernel_integral",
    "kernel_derivative_integral",
]

_INF = math.inf


@dataclass(frozen=True)
class QuadConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    max_subdivisions: int = 2000

    def __post_init__(self):
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0 or self.max_subdivisions < 1:
            raise ValueError("tolerances must be positive and max_subdivisions >= 1")


@dataclass(frozen=True)
class IntegralResult:
    """Value with an a-posteriori error estimate.

    convergent means the estimate met max(abs_tol, rel_tol * |value|); a
    False flag is not an error, it signals roundoff-limited accuracy (the
    estimate is still valid).
    """

    value: float
    error_estimate: float
    convergent: bool


def _quad_piece(fn, ulo, uhi, cfg, points=None):
    """One QUADPACK call in log space; returns (value, error_estimate)."""
    if uhi <= ulo:
        return 0.0, 0.0
    pts = [p for p in (points or []) if ulo < p < uhi]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(
            fn, ulo, uhi,
            points=pts or None,
            limit=cfg.max_subdivisions,
            epsabs=0.25 * cfg.abs_tol,
            epsrel=cfg.rel_tol,
            full_output=1,
        )
    value, abserr, info = out[0], out[1], out[2]
    if len(out) > 3 and info.get("last", 0) >= cfg.max_subdivisions:
        raise NoConvergenceError(
            f"quadrature used all {cfg.max_subdivisions} subdivisions on "
            f"[{ulo:.6g}, {uhi:.6g}] without reaching tolerance"
        )
    return value, abserr


def _head_behaviour(pf: ProfitFunction):
    return pf.segments[0].form.limit_at_zero()


def _tail_behaviour(pf: ProfitFunction):
    return pf.segments[-1].form.limit_at_inf()


def _truncation_head(p, c, d, budget, anchor, log_weight):
    """Cut level L <= anchor with integral_{-inf}^L bounded below budget.

    Remainder of the head in log space is at most
    (4/3)|c| e^{(p-d)L} / (p-d), with an extra (|L| + 1/(p-d)) factor for
    the log weight; p - d > 0 here.
    """
    gap = p - d
    coef = (4.0 / 3.0) * abs(c) / gap
    L = min(anchor, -1.0)
    for _ in range(4):
        factor = (abs(L) + 1.0 / gap) if log_weight else 1.0
        target = math.log(budget / (coef * factor)) / gap
        L_new = min(anchor, target)
        if L_new >= L - 1e-9:
            L = L_new
            break
        L = L_new
    factor = (abs(L) + 1.0 / gap) if log_weight else 1.0
    return L, coef * factor * math.exp(gap * L)


def _truncation_tail(p, c, d, budget, anchor, log_weight):
    """Cut level U >= anchor with integral_U^inf bounded below budget."""
    gap = d - p
    coef = (4.0 / 3.0) * abs(c) / gap
    U = max(anchor, 1.0)
    for _ in range(4):
        factor = (abs(U) + 1.0 / gap) if log_weight else 1.0
        target = -math.log(budget / (coef * factor)) / gap
        U_new = max(anchor, target)
        if U_new <= U + 1e-9:
            U = U_new
            break
        U = U_new
    factor = (abs(U) + 1.0 / gap) if log_weight else 1.0
    return U, coef * factor * math.exp(-gap * U)


def _weighted(pf: ProfitFunction, d: float, a: float, b: float, cfg: QuadConfig,
              log_weight: bool) -> IntegralResult:
    if not (a >= 0.0 and b > 0.0 and a <= b):
        raise ValueError(f"need 0 <= a <= b, got [{a}, {b}]")
    if a == b:
        return IntegralResult(0.0, 0.0, True)

    joins = pf.breakpoints()
    u_first = math.log(joins[0]) if joins else 0.0
    u_last = math.log(joins[-1]) if joins else 0.0
    head_form = pf.segments[0].form
    tail_form = pf.segments[-1].form
    p_h, c_h = _head_behaviour(pf)
    p_t, c_t = _tail_behaviour(pf)

    def direct(u):
        x = math.exp(u)
        w = math.exp(-d * u) * pf(x)
        return w * u if log_weight else w

    def head_scaled(u):
        w = math.exp((p_h - d) * u) * head_form.scaled_value(u, p_h)
        return w * u if log_weight else w

    def tail_scaled(u):
        w = math.exp((p_t - d) * u) * tail_form.scaled_value(u, p_t)
        return w * u if log_weight else w

    budget = 0.25 * cfg.abs_tol
    pieces = []  # (fn, ulo, uhi, points)
    trunc_err = 0.0

    if a == 0.0:
        if c_h != 0.0 and p_h - d <= 0.0:
            sign = (1 if c_h > 0.0 else -1) * (-1 if log_weight else 1)
            raise DivergentIntegralError(
                sign, f"head behaves like {c_h:.3g} * x^{p_h:g} and p - d = {p_h - d:g} <= 0"
            )
        if c_h == 0.0:
            u_lo = u_first  # identically zero head contributes nothing
        else:
            hdb = head_form.head_dominated_below()
            anchor = min(u_first, math.log(hdb) if hdb < _INF else u_first, math.log(b))
            u_lo, err = _truncation_head(p_h, c_h, d, budget, anchor - 1.0, log_weight)
            trunc_err += err
    else:
        u_lo = math.log(a)

    if b == _INF:
        if c_t != 0.0 and p_t - d >= 0.0:
            sign = 1 if c_t > 0.0 else -1
            raise DivergentIntegralError(
                sign, f"tail behaves like {c_t:.3g} * x^{p_t:g} and p - d = {p_t - d:g} >= 0"
            )
        if c_t == 0.0:
            u_hi = u_last
        else:
            tdf = tail_form.tail_dominated_from()
            anchor = max(u_last, math.log(tdf) if tdf > 0.0 else u_last, u_lo)
            u_hi, err = _truncation_tail(p_t, c_t, d, budget, anchor + 1.0, log_weight)
            trunc_err += err
    else:
        u_hi = math.log(b)

    if u_lo < u_hi:
        lo_mid = min(max(u_lo, u_first), u_hi)
        hi_mid = max(min(u_hi, u_last), lo_mid)
        if u_lo < lo_mid:
            pieces.append((head_scaled, u_lo, lo_mid, None))
        if lo_mid < hi_mid:
            pts = [math.log(j) for j in joins]
            pieces.append((direct, lo_mid, hi_mid, pts))
        if hi_mid < u_hi:
            pieces.append((tail_scaled, hi_mid, u_hi, None))

    total = 0.0
    err_total = trunc_err
    for fn, ulo, uhi, pts in pieces:
        v, e = _quad_piece(fn, ulo, uhi, cfg, pts)
        total += v
        err_total += e
    ok = err_total <= max(cfg.abs_tol, cfg.rel_tol * abs(total))
    return IntegralResult(total, err_total, ok)


def weighted_integral(pf: ProfitFunction, d: float, a: float, b: float,
                      cfg: QuadConfig | None = None) -> IntegralResult:
    """integral_a^b s^(-d-1) Pi(s) ds with certified improper endpoints.

    Raises DivergentIntegralError (carrying the sign of the divergence)
    when the analytic endpoint test fails, NoConvergenceError when the
    adaptive rule runs out of subdivisions.
    """
    return _weighted(pf, d, a, b, cfg or QuadConfig(), log_weight=False)


def log_weighted_integral(pf: ProfitFunction, d: float, a: float, b: float,
                          cfg: QuadConfig | None = None) -> IntegralResult:
    """integral_a^b s^(-d-1) log(s) Pi(s) ds, same conventions as above."""
    return _weighted(pf, d, a, b, cfg or QuadConfig(), log_weight=True)


def kernel_integral(pf: ProfitFunction, roots: tuple[float, float], x_star: float,
                    x: float, cfg: QuadConfig | None = None) -> IntegralResult:
    """integral_{x*}^{x} ((x/s)^{d2} - (x/s)^{d1}) Pi(s)/s ds, signed.

    The kernel vanishes at s = x, so the integrand is bounded on the whole
    (always finite) interval; powers are evaluated as exp(d * (log x - u)).
    """
    cfg = cfg or QuadConfig()
    d1, d2 = roots
    if not (x_star > 0.0 and x > 0.0) or not (math.isfinite(x_star) and math.isfinite(x)):
        raise ValueError(f"kernel integral needs finite positive bounds, got x*={x_star}, x={x}")
    if x_star == x:
        return IntegralResult(0.0, 0.0, True)
    lo, hi = (x_star, x) if x_star < x else (x, x_star)
    sign = 1.0 if x >= x_star else -1.0
    w = math.log(x)

    def fn(u):
        return (math.exp(d2 * (w - u)) - math.exp(d1 * (w - u))) * pf(math.exp(u))

    pts = [math.log(j) for j in pf.breakpoints()]
    v, e = _quad_piece(fn, math.log(lo), math.log(hi), cfg, pts)
    ok = e <= max(cfg.abs_tol, cfg.rel_tol * abs(v))
    return IntegralResult(sign * v, e, ok)


def kernel_derivative_integral(pf: ProfitFunction, roots: tuple[float, float],
                               x_star: float, x: float,
                               cfg: QuadConfig | None = None) -> IntegralResult:
    """integral_{x*}^{x} (d2 (x/s)^{d2} - d1 (x/s)^{d1}) Pi(s)/s ds, signed.

    Differentiating the kernel representation in x reweights the two
    powers by their exponents; the boundary terms cancel because the
    kernel vanishes at s = x.
    """
    cfg = cfg or QuadConfig()
    d1, d2 = roots
    if not (x_star > 0.0 and x > 0.0) or not (math.isfinite(x_star) and math.isfinite(x)):
        raise ValueError(f"kernel integral needs finite positive bounds, got x*={x_star}, x={x}")
    if x_star == x:
        return IntegralResult(0.0, 0.0, True)
    lo, hi = (x_star, x) if x_star < x else (x, x_star)
    sign = 1.0 if x >= x_star else -1.0
    w = math.log(x)

    def fn(u):
        return (d2 * math.exp(d2 * (w - u)) - d1 * math.exp(d1 * (w - u))) * pf(math.exp(u))

    pts = [math.log(j) for j in pf.breakpoints()]
    v, e = _quad_piece(fn, math.log(lo), math.log(hi), cfg, pts)
    ok = e <= max(cfg.abs_tol, cfg.rel_tol * abs(v))
    return IntegralResult(sign * v, e, ok)
