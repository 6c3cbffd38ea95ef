"""How boundaries move with the drift and the variance.

Implicit differentiation of the boundary equations gives the gradients in
closed form up to one extra quadrature (a log-weighted profit integral);
both gradients inherit the sign of the matching characteristic-root
derivative, which is why the predicted sign cell can be computed from the
parameters alone.

The sign cells follow the published case split on (r, alpha vs sigma2/2,
alpha vs r, alpha vs 0) with two corrections in the r < 0, alpha < 0
corner, where the split as tabulated contradicts its own derivative
formulas:

* sign d(d1)/d(sigma2) = sign d1(d1-1): for r < alpha < -sigma2/2 both
  roots exceed 1 (their sum 1 - 2 alpha/sigma2 > 2 with 1 outside the
  root interval), so the derivative is positive, not negative.
* at alpha = r < 0 the root equal to 1 is the smaller one whenever
  sigma2 < 2|r|, so d(d2)/d(sigma2) is negative there, not zero.

The cells returned here are the exact signs in every region; they agree
with the published tabulation everywhere outside that corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .errors import GbmStopError, IllPosedParameterError, NotApplicableError
from .model import GbmParameters
from .profit import ProfitFunction
from .quadrature import QuadConfig, log_weighted_integral
from .solver import ProblemClass, StoppingSolution
from . import solver

__all__ = [
    "SignCell",
    "SensitivityReport",
    "SweepRow",
    "root_derivatives",
    "threshold_gradient",
    "predicted_signs",
    "report",
    "sweep",
]

_INF = math.inf


@dataclass(frozen=True)
class SignCell:
    """Signs (-1, 0, +1) of the four boundary/root gradients.

    The upper-boundary gradient shares the sign of d(d1)/d(i) and the
    lower-boundary gradient that of d(d2)/d(i), so one cell covers both.
    """

    d_zeta_d_alpha: int
    d_gamma_d_alpha: int
    d_zeta_d_sigma2: int
    d_gamma_d_sigma2: int


@dataclass(frozen=True)
class SensitivityReport:
    d_d1_d_alpha: float
    d_d2_d_alpha: float
    d_d1_d_sigma2: float
    d_d2_d_sigma2: float
    d_threshold_d_alpha: float
    d_threshold_d_sigma2: float
    predicted_signs: SignCell
    fd_alpha: float
    fd_sigma2: float


@dataclass(frozen=True)
class SweepRow:
    param_value: float
    problem_class: Optional[str]
    gamma: Optional[float]
    zeta: Optional[float]
    delta: Optional[float]
    beta: Optional[float]
    excluded_reason: Optional[str]


def root_derivatives(params: GbmParameters) -> tuple[float, float, float, float]:
    """(d(d1)/d(alpha), d(d2)/d(alpha), d(d1)/d(sigma2), d(d2)/d(sigma2))."""
    s = params.root_sensitivities()
    return s.dd1_dalpha, s.dd2_dalpha, s.dd1_dsigma2, s.dd2_dsigma2


def threshold_gradient(pf: ProfitFunction, params: GbmParameters,
                       solution: StoppingSolution, which: str,
                       cfg: QuadConfig | None = None) -> float:
    """Gradient of the solved boundary with respect to alpha or sigma2.

    Lower boundary g:  dg/di = -d(d2)/di * L2 / (g^(-d2-1) Pi(g)),
    upper boundary z:  dz/di = +d(d1)/di * L1 / (z^(-d1-1) Pi(z)),
    with L2, L1 the log-weighted boundary integrals over ]g, inf[ and
    ]0, z[.  Only the one-sided classes have such a formula.
    """
    if which not in ("alpha", "sigma2"):
        raise ValueError(f"which must be 'alpha' or 'sigma2', got {which!r}")
    cfg = cfg or QuadConfig()
    d1, d2 = solution.roots
    da1, da2, ds1, ds2 = root_derivatives(params)

    if solution.problem_class is ProblemClass.ONE_SIDED_LOWER:
        g = solution.gamma
        pi_g = pf(g)
        if pi_g == 0.0:
            raise NotApplicableError("profit vanishes at the boundary; the "
                                     "implicit-function denominator is 0")
        num = log_weighted_integral(pf, d2, g, _INF, cfg).value
        dd = da2 if which == "alpha" else ds2
        return -dd * num / (g ** (-d2 - 1.0) * pi_g)

    if solution.problem_class is ProblemClass.ONE_SIDED_UPPER:
        z = solution.zeta
        pi_z = pf(z)
        if pi_z == 0.0:
            raise NotApplicableError("profit vanishes at the boundary; the "
                                     "implicit-function denominator is 0")
        num = log_weighted_integral(pf, d1, 0.0, z, cfg).value
        dd = da1 if which == "alpha" else ds1
        return dd * num / (z ** (-d1 - 1.0) * pi_z)

    raise NotApplicableError(
        f"no analytic boundary gradient for class {solution.problem_class.value}")


def predicted_signs(params: GbmParameters) -> SignCell:
    """Exact sign cell for the current parameters.

    Alpha columns: d(d1)/d(alpha) has the sign of (sigma2/2-alpha)/sqrt(D)-1
    and d(d2)/d(alpha) of -(sigma2/2-alpha)/sqrt(D)-1, which the case
    split below resolves without evaluating the square root.  Sigma2
    columns: sign d(d1)/d(sigma2) = sign d1(d1-1) and
    sign d(d2)/d(sigma2) = -sign d2(d2-1), resolved through the position
    of the roots relative to 0 and 1 (the latter is decided by the sign
    of alpha - r, the characteristic polynomial at 1).
    """
    r, alpha, s2 = params.r, params.alpha, params.sigma2
    below = alpha < s2 / 2.0  # alpha = sigma2/2 with r <= 0 is ill-posed

    if r > 0.0:
        za, ga = -1, -1
        zs = +1  # d1 < 0
        gs = -1 if alpha < r else (0 if alpha == r else +1)  # d2 vs 1
    elif r == 0.0:
        za = 0 if below else -1
        ga = -1 if below else 0
        zs = 0 if below else +1  # d1 = 0 or d1 < 0
        if below:
            # d2 = 1 - 2 alpha / sigma2 sits relative to 1 as alpha to 0
            gs = -1 if alpha < 0.0 else (0 if alpha == 0.0 else +1)
        else:
            gs = 0  # d2 = 0
    else:
        za, ga = (+1, -1) if below else (-1, +1)
        if not below:
            zs, gs = +1, -1  # both roots negative
        elif alpha < r:
            zs, gs = -1, -1  # d1 < 1 < d2
        elif alpha == r:
            # one root is exactly 1, the other 2|r|/sigma2
            if s2 > -2.0 * r:
                zs, gs = -1, 0  # d1 < 1 = d2
            else:
                zs, gs = 0, -1  # d1 = 1 < d2
        elif alpha > -s2 / 2.0:
            zs, gs = -1, +1  # both roots in ]0, 1[
        else:
            zs, gs = +1, -1  # both roots above 1
    return SignCell(za, ga, zs, gs)


def _fd_threshold(pf, params, klass, which, cfg):
    """Central difference of the re-solved boundary; step 1e-4 relative."""
    v = getattr(params, which)
    h = 1e-4 * abs(v) if v != 0.0 else 1e-6
    lo = replace(params, **{which: v - h})
    hi = replace(params, **{which: v + h})
    solve_one = solver.solve_gamma if klass is ProblemClass.ONE_SIDED_LOWER \
        else solver.solve_zeta
    return (solve_one(pf, hi, cfg) - solve_one(pf, lo, cfg)) / (2.0 * h)


def report(pf: ProfitFunction, params: GbmParameters,
           solution: StoppingSolution,
           cfg: QuadConfig | None = None) -> SensitivityReport:
    """Gradients, predicted signs and finite-difference cross-checks."""
    cfg = cfg or QuadConfig()
    da1, da2, ds1, ds2 = root_derivatives(params)
    ga = threshold_gradient(pf, params, solution, "alpha", cfg)
    gs = threshold_gradient(pf, params, solution, "sigma2", cfg)
    klass = solution.problem_class
    return SensitivityReport(
        d_d1_d_alpha=da1, d_d2_d_alpha=da2,
        d_d1_d_sigma2=ds1, d_d2_d_sigma2=ds2,
        d_threshold_d_alpha=ga, d_threshold_d_sigma2=gs,
        predicted_signs=predicted_signs(params),
        fd_alpha=_fd_threshold(pf, params, klass, "alpha", cfg),
        fd_sigma2=_fd_threshold(pf, params, klass, "sigma2", cfg),
    )


def sweep(pf: ProfitFunction, base_params: GbmParameters, vary: str,
          grid, cfg: QuadConfig | None = None) -> list[SweepRow]:
    """Re-classify and re-solve along a parameter grid.

    Invalid or unsolvable points become excluded rows carrying the error
    message; the sweep itself never aborts.  Row order follows the grid.
    """
    if vary not in ("alpha", "sigma2"):
        raise ValueError(f"vary must be 'alpha' or 'sigma2', got {vary!r}")
    cfg = cfg or QuadConfig()
    rows = []
    for v in grid:
        try:
            params = replace(base_params, **{vary: float(v)})
        except (IllPosedParameterError, ValueError) as exc:
            rows.append(SweepRow(float(v), None, None, None, None, None, str(exc)))
            continue
        try:
            sol = solver.solve(pf, params, cfg)
        except GbmStopError as exc:
            rows.append(SweepRow(float(v), None, None, None, None, None, str(exc)))
            continue
        rows.append(SweepRow(
            float(v), sol.problem_class.value,
            sol.gamma, sol.zeta, sol.delta, sol.beta, None))
    return rows
