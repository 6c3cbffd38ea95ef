"""Weighted-integral engine against closed-form oracles.

Power-law profits integrate in closed form for every weight exponent, so
most cases here have exact answers:

    integral_a^b s^(-d-1) * k s^p ds = k (b^q - a^q) / q,   q = p - d,
    with log factor:                   d/dq of the above,
    q = 0:                             k log(b/a).

The reciprocal tail of the gross-profit instances has no elementary
antiderivative; its improper integral is checked against a geometric
series expansion of 1/(s-f) that converges fast for s >> f.
"""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gbmstop.errors import DivergentIntegralError, NoConvergenceError
from gbmstop.profit import (
    Constant,
    Polynomial,
    Power,
    ProfitFunction,
    Segment,
    gross_profit,
)
from gbmstop.quadrature import (
    IntegralResult,
    QuadConfig,
    kernel_derivative_integral,
    kernel_integral,
    log_weighted_integral,
    weighted_integral,
)

INF = math.inf


def power_pf(k, p):
    return ProfitFunction((Segment(0.0, INF, Power(k, p)),))


def power_oracle(k, p, d, a, b):
    q = p - d
    if q == 0.0:
        return k * math.log(b / a)
    hi = b**q if b < INF else 0.0
    lo = a**q if a > 0.0 else 0.0
    return k * (hi - lo) / q


@pytest.fixture(scope="module")
def pf_one():
    return gross_profit(1.0, 10.0, 1.0, 2.0, 4.0)


@pytest.fixture(scope="module")
def pf_two():
    return gross_profit(1.0, 10.0, 1.0, 8.0, -5.0)


class TestClosedForms:
    def test_constant_unit_interval(self):
        res = weighted_integral(power_pf(1.0, 0.0), 1.0, 1.0, 2.0)
        assert res.value == pytest.approx(0.5, rel=1e-12)
        assert res.convergent

    @pytest.mark.parametrize("p,d", [(1.0, 1.0), (1.0, 2.0), (2.0, -1.0),
                                     (-0.5, 0.7), (0.0, 0.0), (3.0, 2.999)])
    def test_power_finite(self, p, d):
        pf = power_pf(2.0, p)
        res = weighted_integral(pf, d, 0.5, 7.3)
        assert res.value == pytest.approx(power_oracle(2.0, p, d, 0.5, 7.3), rel=1e-11)

    def test_log_weight_finite(self):
        pf = power_pf(1.0, 0.0)
        # integral of u e^{-u} between hand limits
        assert log_weighted_integral(pf, 1.0, 1.0, math.e).value == pytest.approx(
            1.0 - 2.0 / math.e, rel=1e-12)
        assert log_weighted_integral(pf, 1.0, 1.0 / math.e, math.e).value == pytest.approx(
            -2.0 / math.e, rel=1e-12)

    def test_improper_head(self):
        res = weighted_integral(power_pf(1.0, 1.0), 0.0, 0.0, 1.0)
        assert res.value == pytest.approx(1.0, rel=1e-11)
        res = weighted_integral(power_pf(1.0, 1.0), 0.5, 0.0, 1.0)
        assert res.value == pytest.approx(2.0, rel=1e-11)

    def test_improper_tail(self):
        res = weighted_integral(power_pf(1.0, 1.0), 1.5, 1.0, INF)
        assert res.value == pytest.approx(2.0, rel=1e-11)
        res = weighted_integral(power_pf(1.0, 1.0), 3.0, 2.0, INF)
        assert res.value == pytest.approx(0.125, rel=1e-11)

    def test_both_ends_improper(self):
        pf = ProfitFunction((
            Segment(0.0, 1.0, Power(1.0, 2.0)),
            Segment(1.0, INF, Power(1.0, -1.0)),
        ))
        res = weighted_integral(pf, 0.5, 0.0, INF)
        assert res.value == pytest.approx(4.0 / 3.0, rel=1e-11)

    def test_log_weight_improper(self):
        # integral_0^1 x^{q-1} log x dx = -1/q^2 and the mirrored tail
        res = log_weighted_integral(power_pf(1.0, 2.0), 0.5, 0.0, 1.0)
        assert res.value == pytest.approx(-4.0 / 9.0, rel=1e-11)
        res = log_weighted_integral(power_pf(1.0, 1.0), 2.0, 1.0, INF)
        assert res.value == pytest.approx(1.0, rel=1e-11)

    def test_polynomial_head(self, pf_one):
        res = weighted_integral(pf_one, -1.0, 0.0, 1.0)
        assert res.value == pytest.approx(-29.0 / 6.0, rel=1e-11)


class TestDivergence:
    @pytest.mark.parametrize("d,sign", [(1.0, 1), (0.5, 1)])
    def test_tail_positive(self, d, sign):
        with pytest.raises(DivergentIntegralError) as exc:
            weighted_integral(power_pf(1.0, 1.0), d, 1.0, INF)
        assert exc.value.sign == sign

    def test_tail_negative(self, pf_two):
        # tail tends to K = -5, so any d <= 0 diverges to -infinity
        for d in (0.0, -0.3):
            with pytest.raises(DivergentIntegralError) as exc:
                weighted_integral(pf_two, d, 1.0, INF)
            assert exc.value.sign == -1

    def test_head_negative(self, pf_one):
        with pytest.raises(DivergentIntegralError) as exc:
            weighted_integral(pf_one, 1.0, 0.0, 1.0)
        assert exc.value.sign == -1

    def test_log_weight_flips_head_sign(self):
        # positive integrand times log s < 0 near zero
        with pytest.raises(DivergentIntegralError) as exc:
            log_weighted_integral(power_pf(1.0, 1.0), 1.0, 0.0, 1.0)
        assert exc.value.sign == -1
        with pytest.raises(DivergentIntegralError) as exc:
            log_weighted_integral(power_pf(1.0, 1.0), 1.0, 1.0, INF)
        assert exc.value.sign == 1

    def test_zero_head_is_harmless(self):
        pf = ProfitFunction((
            Segment(0.0, 1.0, Constant(0.0)),
            Segment(1.0, INF, Power(1.0, -1.0)),
        ))
        res = weighted_integral(pf, 1.0, 0.0, INF)
        assert res.value == pytest.approx(0.5, rel=1e-11)

    def test_finite_interval_never_raises(self):
        res = weighted_integral(power_pf(1.0, 1.0), 5.0, 1e-3, 1.0)
        assert res.value == pytest.approx(power_oracle(1.0, 1.0, 5.0, 1e-3, 1.0), rel=1e-10)


class TestCertifiedTruncation:
    @staticmethod
    def reciprocal_tail_oracle(e, f, K, d, T, terms=60):
        """integral_T^inf s^(-d-1) (e/(s-f) + K) ds by geometric series."""
        total = K * T ** (-d) / d
        for n in range(terms):
            total += e * f**n * T ** (-d - 1 - n) / (d + 1 + n)
        return total

    @pytest.mark.parametrize("d", [0.4, 1.0, 1.17])
    def test_reciprocal_tail(self, pf_one, d):
        T = 50.0
        tail = pf_one.segments[1].form
        oracle = self.reciprocal_tail_oracle(tail.e, tail.f, tail.K, d, T)
        res = weighted_integral(pf_one, d, T, INF)
        assert res.value == pytest.approx(oracle, rel=1e-10)

    def test_full_range_matches_split(self, pf_one):
        whole = weighted_integral(pf_one, 1.0, 0.5, INF)
        left = weighted_integral(pf_one, 1.0, 0.5, 50.0)
        tail = pf_one.segments[1].form
        right = self.reciprocal_tail_oracle(tail.e, tail.f, tail.K, 1.0, 50.0)
        assert whole.value == pytest.approx(left.value + right, rel=1e-10)

    def test_budget_respected(self):
        res = weighted_integral(power_pf(1.0, 1.0), 1.5, 1.0, INF)
        assert abs(res.value - 2.0) <= max(res.error_estimate, 1e-12)


class TestKernel:
    ROOTS = (-2.0, 1.0)

    def test_zero_length(self, pf_one):
        res = kernel_integral(pf_one, self.ROOTS, 3.0, 3.0)
        assert res == IntegralResult(0.0, 0.0, True)

    def manual(self, pf, x_star, x, n=200_001):
        # trapezoid in log space, fine grid, for orientation checks
        d1, d2 = self.ROOTS
        lo, hi = min(x_star, x), max(x_star, x)
        us = [math.log(lo) + i * (math.log(hi) - math.log(lo)) / (n - 1) for i in range(n)]
        w = math.log(x)
        vals = [(math.exp(d2 * (w - u)) - math.exp(d1 * (w - u))) * pf(math.exp(u)) for u in us]
        h = us[1] - us[0]
        total = h * (sum(vals) - 0.5 * (vals[0] + vals[-1]))
        return total if x >= x_star else -total

    @pytest.mark.parametrize("x_star,x", [(2.0, 9.0), (9.0, 2.0), (0.5, 30.0)])
    def test_orientation_and_value(self, pf_one, x_star, x):
        res = kernel_integral(pf_one, self.ROOTS, x_star, x)
        assert res.value == pytest.approx(self.manual(pf_one, x_star, x), rel=1e-7)

    @pytest.mark.parametrize("x", [0.7, 3.0, 9.0, 30.0])
    def test_derivative_consistency(self, pf_one, x):
        h = 1e-5 * x
        up = kernel_integral(pf_one, self.ROOTS, 2.0, x + h).value
        dn = kernel_integral(pf_one, self.ROOTS, 2.0, x - h).value
        fd = (up - dn) / (2.0 * h)
        grad = kernel_derivative_integral(pf_one, self.ROOTS, 2.0, x).value / x
        assert grad == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_rejects_nonfinite_bounds(self, pf_one):
        with pytest.raises(ValueError):
            kernel_integral(pf_one, self.ROOTS, 0.0, 1.0)
        with pytest.raises(ValueError):
            kernel_integral(pf_one, self.ROOTS, 1.0, INF)


class TestProperties:
    @given(
        d=st.floats(-3.0, 2.0),
        ends=st.lists(st.floats(0.05, 60.0), min_size=3, max_size=3, unique=True),
    )
    @settings(max_examples=80, deadline=None)
    def test_additivity(self, d, ends):
        pf = gross_profit(1.0, 10.0, 1.0, 2.0, 4.0)
        a, b, c = sorted(ends)
        whole = weighted_integral(pf, d, a, c).value
        split = weighted_integral(pf, d, a, b).value + weighted_integral(pf, d, b, c).value
        assert whole == pytest.approx(split, abs=1e-9 * (1.0 + abs(whole)))

    @given(
        p=st.floats(-2.0, 2.0),
        d=st.floats(-2.0, 2.0),
        span=st.lists(st.floats(0.1, 20.0), min_size=2, max_size=2, unique=True),
    )
    @settings(max_examples=80, deadline=None)
    def test_power_oracle_property(self, p, d, span):
        if abs(p - d) < 0.05:
            return
        a, b = sorted(span)
        res = weighted_integral(power_pf(1.5, p), d, a, b)
        assert res.value == pytest.approx(power_oracle(1.5, p, d, a, b), rel=1e-9)


class TestResultContract:
    def test_empty_interval(self, pf_one):
        assert weighted_integral(pf_one, 1.0, 2.0, 2.0) == IntegralResult(0.0, 0.0, True)

    def test_bad_interval(self, pf_one):
        with pytest.raises(ValueError):
            weighted_integral(pf_one, 1.0, 3.0, 2.0)
        with pytest.raises(ValueError):
            weighted_integral(pf_one, 1.0, -1.0, 2.0)

    def test_estimate_present(self, pf_one):
        res = weighted_integral(pf_one, 1.0, 0.5, 20.0)
        assert res.convergent and 0.0 < res.error_estimate < 1e-10

    def test_subdivision_exhaustion(self):
        cfg = QuadConfig(rel_tol=1e-13, abs_tol=1e-280, max_subdivisions=1)
        with pytest.raises(NoConvergenceError):
            weighted_integral(power_pf(1.0, -0.5), 0.77, 1e-6, 1e6, cfg)

    def test_config_override(self, pf_one):
        loose = QuadConfig(rel_tol=1e-6, abs_tol=1e-8)
        res = weighted_integral(pf_one, 1.0, 0.5, INF, loose)
        tight = weighted_integral(pf_one, 1.0, 0.5, INF)
        assert res.value == pytest.approx(tight.value, rel=1e-6)
