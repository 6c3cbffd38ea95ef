"""Geometric Brownian motion parameters and the characteristic polynomial.

The diffusion is dX_t = alpha X_t dt + sigma X_t dW_t with X_0 = x > 0,
discounted at a rate r that may be negative.  All problem classification
runs through the quadratic

    P(d) = (sigma2 / 2) d**2 + (alpha - sigma2 / 2) d - r,

whose two real roots d1 < d2 exist iff the discriminant
(sigma2/2 - alpha)**2 + 2 sigma2 r is strictly positive.  That strict
inequality is the well-posedness condition enforced here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import IllPosedParameterError

__all__ = ["GbmParameters", "RootSensitivities", "from_roots"]


@dataclass(frozen=True)
class RootSensitivities:
    """Partial derivatives of the characteristic roots.

    Attributes are d{root}_d{parameter}; sigma2 means the variance
    parameter sigma**2, not sigma.
    """

    dd1_dalpha: float
    dd2_dalpha: float
    dd1_dr: float
    dd2_dr: float
    dd1_dsigma2: float
    dd2_dsigma2: float


@dataclass(frozen=True)
class GbmParameters:
    """Validated (r, alpha, sigma2) triple.

    Raises IllPosedParameterError from the constructor when sigma2 <= 0,
    any entry is non-finite, or the discriminant is not strictly positive.
    Negative r is legitimate; it narrows the admissible (alpha, sigma2)
    range through the discriminant.
    """

    r: float
    alpha: float
    sigma2: float

    def __post_init__(self):
        for name in ("r", "alpha", "sigma2"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise IllPosedParameterError(f"{name} must be a finite number, got {v!r}")
        if self.sigma2 <= 0.0:
            raise IllPosedParameterError(f"sigma2 must be > 0, got {self.sigma2}")
        if self.discriminant <= 0.0:
            raise IllPosedParameterError(
                "ill-posed parameters: (sigma2/2 - alpha)^2 + 2 sigma2 r = "
                f"{self.discriminant:.6g} <= 0 (r={self.r}, alpha={self.alpha}, "
                f"sigma2={self.sigma2})"
            )

    @property
    def discriminant(self) -> float:
        half = 0.5 * self.sigma2
        return (half - self.alpha) ** 2 + 2.0 * self.sigma2 * self.r

    def char_poly(self, d: float) -> float:
        """P(d); vanishes exactly at the characteristic roots."""
        half = 0.5 * self.sigma2
        return half * d * d + (self.alpha - half) * d - self.r

    def roots(self) -> tuple[float, float]:
        """Both real roots (d1, d2), d1 < d2, computed cancellation-safely.

        The larger-magnitude root comes from the quadratic formula (no
        subtractive cancellation on that branch); the other root follows
        from the product d1 d2 = -2 r / sigma2.  When r = 0 the second
        root is exactly 0.
        """
        m = 0.5 * self.sigma2 - self.alpha
        sq = math.sqrt(self.discriminant)
        if m >= 0.0:
            d2 = (m + sq) / self.sigma2
            d1 = (-2.0 * self.r / self.sigma2) / d2
        else:
            d1 = (m - sq) / self.sigma2
            d2 = (-2.0 * self.r / self.sigma2) / d1
        return d1, d2

    def root_sensitivities(self) -> RootSensitivities:
        """Exact partials of d1, d2 in (alpha, r, sigma2).

        Implicit differentiation of P(d) = 0 with
        P'(d1) = (sigma2/2)(d1 - d2) and P'(d2) = (sigma2/2)(d2 - d1).
        """
        d1, d2 = self.roots()
        gap = d2 - d1
        half = 0.5 * self.sigma2
        # dP/dalpha = d, dP/dr = -1, dP/dsigma2 = d(d - 1)/2
        return RootSensitivities(
            dd1_dalpha=d1 / (half * gap),
            dd2_dalpha=-d2 / (half * gap),
            dd1_dr=-1.0 / (half * gap),
            dd2_dr=1.0 / (half * gap),
            dd1_dsigma2=d1 * (d1 - 1.0) / (self.sigma2 * gap),
            dd2_dsigma2=-d2 * (d2 - 1.0) / (self.sigma2 * gap),
        )


def from_roots(d1: float, d2: float, sigma2: float) -> GbmParameters:
    """Parameters whose characteristic roots are exactly (d1, d2).

    Inverts the root map: r = -(sigma2/2) d1 d2 and
    alpha = (sigma2/2)(1 - d1 - d2).  Requires d1 < d2 and sigma2 > 0;
    the resulting triple is always well posed because the discriminant
    equals (sigma2/2)^2 (d2 - d1)^2.
    """
    if not (d1 < d2):
        raise IllPosedParameterError(f"need d1 < d2, got d1={d1}, d2={d2}")
    if sigma2 <= 0.0:
        raise IllPosedParameterError(f"sigma2 must be > 0, got {sigma2}")
    half = 0.5 * sigma2
    return GbmParameters(r=-half * d1 * d2, alpha=half * (1.0 - d1 - d2), sigma2=sigma2)
