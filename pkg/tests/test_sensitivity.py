"""Gradient formulas against finite differences and the sign cells."""

import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from gbmstop.errors import NotApplicableError
from gbmstop.model import GbmParameters
from gbmstop.quadrature import log_weighted_integral
from gbmstop.sensitivity import (
    SweepRow,
    predicted_signs,
    report,
    root_derivatives,
    sweep,
    threshold_gradient,
)
from gbmstop.solver import ProblemClass, solve

INF = math.inf


def sign(x: float) -> int:
    return (x > 0.0) - (x < 0.0)


class TestRootDerivatives:
    def test_reference_values(self, base_params):
        da1, da2, ds1, ds2 = root_derivatives(base_params)
        assert da1 == pytest.approx(-40.0 / 3.0, rel=1e-12)
        assert da2 == pytest.approx(-20.0 / 3.0, rel=1e-12)
        assert ds1 == pytest.approx(20.0, rel=1e-12)
        assert ds2 == 0.0  # alpha = r puts d2 exactly at 1


class TestThresholdGradient:
    def test_sigma2_gradient_vanishes_at_alpha_equal_r(self, pf_lower, base_params):
        sol = solve(pf_lower, base_params)
        g = threshold_gradient(pf_lower, base_params, sol, "sigma2")
        assert abs(g) < 1e-10

    @pytest.mark.parametrize("alpha,expected_sign", [(0.09, -1), (0.11, +1)])
    def test_sigma2_gradient_sign(self, pf_lower, alpha, expected_sign):
        params = GbmParameters(r=0.1, alpha=alpha, sigma2=0.05)
        sol = solve(pf_lower, params)
        g = threshold_gradient(pf_lower, params, sol, "sigma2")
        assert sign(g) == expected_sign

    def test_matches_finite_differences(self, pf_lower):
        params = GbmParameters(r=0.1, alpha=0.09, sigma2=0.05)
        sol = solve(pf_lower, params)
        rep = report(pf_lower, params, sol)
        assert rep.d_threshold_d_alpha == pytest.approx(rep.fd_alpha, rel=1e-3)
        assert rep.d_threshold_d_sigma2 == pytest.approx(rep.fd_sigma2, rel=1e-3)

    def test_upper_boundary_gradient(self, pf_lower, base_params):
        pf = pf_lower.negated()
        sol = solve(pf, base_params)
        assert sol.problem_class is ProblemClass.ONE_SIDED_UPPER
        rep = report(pf, base_params, sol)
        # boundary moves with d1: negative alpha-derivative for r > 0
        assert sign(rep.d_threshold_d_alpha) == sign(rep.d_d1_d_alpha) == -1
        assert rep.d_threshold_d_alpha == pytest.approx(rep.fd_alpha, rel=1e-3)
        assert rep.d_threshold_d_sigma2 == pytest.approx(rep.fd_sigma2, rel=1e-3)

    def test_not_applicable_for_two_sided(self, pf_both, base_params):
        sol = solve(pf_both, base_params)
        with pytest.raises(NotApplicableError, match="no analytic"):
            threshold_gradient(pf_both, base_params, sol, "alpha")

    def test_which_validated(self, pf_lower, base_params):
        sol = solve(pf_lower, base_params)
        with pytest.raises(ValueError, match="which"):
            threshold_gradient(pf_lower, base_params, sol, "r")


class TestPredictedSigns:
    def test_positive_rate_cells(self):
        cell = predicted_signs(GbmParameters(r=0.1, alpha=0.05, sigma2=0.1))
        assert (cell.d_zeta_d_alpha, cell.d_gamma_d_alpha) == (-1, -1)
        assert cell.d_zeta_d_sigma2 == +1
        assert cell.d_gamma_d_sigma2 == -1  # alpha < r
        assert predicted_signs(GbmParameters(0.1, 0.1, 0.1)).d_gamma_d_sigma2 == 0
        assert predicted_signs(GbmParameters(0.1, 0.2, 0.1)).d_gamma_d_sigma2 == +1

    def test_zero_rate_cells(self):
        low = predicted_signs(GbmParameters(0.0, 0.02, 0.1))   # 0 < alpha < s2/2
        assert (low.d_zeta_d_alpha, low.d_gamma_d_alpha) == (0, -1)
        assert (low.d_zeta_d_sigma2, low.d_gamma_d_sigma2) == (0, +1)
        neg = predicted_signs(GbmParameters(0.0, -0.3, 0.1))
        assert neg.d_gamma_d_sigma2 == -1
        high = predicted_signs(GbmParameters(0.0, 0.3, 0.1))   # alpha > s2/2
        assert (high.d_zeta_d_alpha, high.d_gamma_d_alpha) == (-1, 0)
        assert (high.d_zeta_d_sigma2, high.d_gamma_d_sigma2) == (+1, 0)

    def test_negative_rate_cells(self):
        small = predicted_signs(GbmParameters(-0.1, 0.2, 2.0))  # alpha < s2/2
        assert (small.d_zeta_d_alpha, small.d_gamma_d_alpha) == (+1, -1)
        assert (small.d_zeta_d_sigma2, small.d_gamma_d_sigma2) == (-1, +1)
        large = predicted_signs(GbmParameters(-0.1, 0.3, 0.1))  # alpha > s2/2
        assert (large.d_zeta_d_alpha, large.d_gamma_d_alpha) == (-1, +1)
        assert (large.d_zeta_d_sigma2, large.d_gamma_d_sigma2) == (+1, -1)
        below_r = predicted_signs(GbmParameters(-0.5, -0.6, 0.1))
        assert below_r.d_gamma_d_sigma2 == -1

    def test_corrected_corner_cells(self):
        # r < alpha < -sigma2/2: both roots above 1, signs flip relative
        # to the published split (see module docstring)
        cell = predicted_signs(GbmParameters(-0.5, -0.3, 0.1))
        assert (cell.d_zeta_d_sigma2, cell.d_gamma_d_sigma2) == (+1, -1)
        # alpha = r < 0 with sigma2 < 2|r|: the unit root is the lower one
        tie = predicted_signs(GbmParameters(-0.5, -0.5, 0.1))
        assert (tie.d_zeta_d_sigma2, tie.d_gamma_d_sigma2) == (0, -1)
        tie2 = predicted_signs(GbmParameters(-0.05, -0.05, 0.2))
        assert (tie2.d_zeta_d_sigma2, tie2.d_gamma_d_sigma2) == (-1, 0)

    @settings(max_examples=150, deadline=None)
    @given(
        r=st.floats(-0.6, 0.6),
        alpha=st.floats(-1.2, 1.2),
        sigma2=st.floats(0.01, 2.5),
    )
    def test_cells_match_computed_derivatives(self, r, alpha, sigma2):
        try:
            params = GbmParameters(r=r, alpha=alpha, sigma2=sigma2)
        except Exception:
            assume(False)
        da1, da2, ds1, ds2 = root_derivatives(params)
        # stay away from cell boundaries where a sign legitimately vanishes
        scale = max(abs(v) for v in (da1, da2, ds1, ds2))
        assume(min(abs(v) for v in (da1, da2, ds1, ds2)) > 1e-9 * scale)
        cell = predicted_signs(params)
        assert sign(da1) == cell.d_zeta_d_alpha
        assert sign(da2) == cell.d_gamma_d_alpha
        assert sign(ds1) == cell.d_zeta_d_sigma2
        assert sign(ds2) == cell.d_gamma_d_sigma2


class TestLogWeightedBoundaryIntegrals:
    def test_lower_boundary_integral_positive(self, pf_lower, base_params):
        sol = solve(pf_lower, base_params)
        d2 = sol.roots[1]
        val = log_weighted_integral(pf_lower, d2, sol.gamma, INF).value
        assert val > 0.0

    def test_upper_boundary_integral_negative(self, pf_lower, base_params):
        # applying the comparison lemma to -Pi (negative below the sign
        # change, positive above) makes this integral strictly negative;
        # the boundary gradient stays sign-linked to d1 because the
        # denominator Pi(zeta) is negative as well
        pf = pf_lower.negated()
        sol = solve(pf, base_params)
        d1 = sol.roots[0]
        val = log_weighted_integral(pf, d1, 0.0, sol.zeta).value
        assert val < 0.0


class TestSweep:
    def test_rows_follow_grid_and_record_exclusions(self, pf_both):
        base = GbmParameters(r=-0.1, alpha=0.3, sigma2=0.1)
        rows = sweep(pf_both, base, "alpha", [-0.15, 0.0, 0.25])
        assert [row.param_value for row in rows] == [-0.15, 0.0, 0.25]

        ok_low, excluded, ok_high = rows
        assert ok_low.problem_class == "two_sided"
        assert ok_low.beta == INF and ok_low.delta > 0.0
        assert ok_low.excluded_reason is None

        assert excluded.problem_class is None
        assert "posed" in excluded.excluded_reason or "root" in excluded.excluded_reason
        assert excluded.gamma is None and excluded.beta is None

        assert ok_high.problem_class == "two_sided"
        assert ok_high.delta == 0.0 and 10.0 < ok_high.beta < 25.0

    def test_one_sided_sweep(self, pf_lower, base_params):
        rows = sweep(pf_lower, base_params, "sigma2", [0.01, 0.1])
        for row in rows:
            assert row.problem_class == "one_sided_lower"
            assert row.gamma == pytest.approx(0.3384, abs=5e-4)
            assert row.zeta is None and row.delta is None and row.beta is None

    def test_vary_validated(self, pf_lower, base_params):
        with pytest.raises(ValueError, match="vary"):
            sweep(pf_lower, base_params, "r", [0.1])

    def test_rows_are_plain_records(self):
        row = SweepRow(1.0, None, None, None, None, None, "why")
        assert row.excluded_reason == "why"
