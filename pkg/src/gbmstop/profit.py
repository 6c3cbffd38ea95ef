"""Piecewise-analytic profit functions with exact sign structure.

A profit function is a finite list of segments partitioning ]0, inf[, each
carrying one closed form: a polynomial, a shifted reciprocal e/(x-f)+K, a
pure power c*x^p, or a constant.  Keeping the forms closed (instead of
accepting arbitrary callables) is what makes the rest of the package work:
sign-change points are exact roots, and the integrability tests near 0 and
infinity are decided from limit exponents rather than from truncation
experiments.

The supported sign pattern is negative / zero / positive / zero / negative
scanning from 0 to infinity, where any piece except the positive one may be
empty and the zero pieces may be single points.  Functions that are
nonnegative or nonpositive everywhere are flagged as such; anything else
(for example a second positive hump) is rejected.  Isolated interior zeros
that do not change the sign are tolerated and merged into the surrounding
region; they are invisible to every integral.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import BadParametersError, UnsupportedShapeError

__all__ = [
    "Polynomial",
    "ShiftedReciprocal",
    "Power",
    "Constant",
    "Segment",
    "SignStructure",
    "ProfitFunction",
    "classify_signs",
    "check_vp_plus_finite",
    "check_vp_minus_finite",
    "gross_profit",
]

_INF = math.inf


class Form(ABC):
    """One analytic piece.  Immutable; all methods are pure."""

    @abstractmethod
    def value(self, x: float) -> float: ...

    @abstractmethod
    def derivative(self, x: float) -> float: ...

    @abstractmethod
    def roots_in(self, lo: float, hi: float) -> list[float]:
        """Exact zeros strictly inside ]lo, hi[, sorted ascending."""

    @abstractmethod
    def is_zero(self) -> bool: ...

    @abstractmethod
    def limit_at_zero(self) -> tuple[float, float]:
        """(p, c) with form(x) ~ c*x^p as x -> 0+; c = 0 for the zero form."""

    @abstractmethod
    def limit_at_inf(self) -> tuple[float, float]:
        """(p, c) with form(x) ~ c*x^p as x -> inf."""

    @abstractmethod
    def negated(self) -> "Form": ...

    def scaled_value(self, u: float, p: float) -> float:
        """exp(-p*u) * value(exp(u)), overridable for overflow-safe tails."""
        return math.exp(-p * u) * self.value(math.exp(u))

    def tail_dominated_from(self) -> float:
        """Smallest T with |form(x)| in [2/3, 4/3]*|c|*x^p for all x >= T."""
        return 1.0

    def head_dominated_below(self) -> float:
        """Largest t with the same two-sided bound for all 0 < x <= t."""
        return _INF


@dataclass(frozen=True)
class Polynomial(Form):
    """Sum of coefficients[k] * x^k, ascending degree."""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(v) for v in self.coefficients)
        while len(c) > 1 and c[-1] == 0.0:
            c = c[:-1]
        object.__setattr__(self, "coefficients", c)

    def value(self, x: float) -> float:
        acc = 0.0
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc

    def derivative(self, x: float) -> float:
        acc = 0.0
        for k in range(len(self.coefficients) - 1, 0, -1):
            acc = acc * x + k * self.coefficients[k]
        return acc

    def roots_in(self, lo, hi):
        c = self.coefficients
        deg = len(c) - 1
        if self.is_zero() or deg == 0:
            return []
        if deg == 1:
            roots = [-c[0] / c[1]]
        elif deg == 2:
            # stable quadratic: big root by formula, other by Vieta
            a, b, c0 = c[2], c[1], c[0]
            disc = b * b - 4.0 * a * c0
            if disc < 0.0:
                return []
            if disc == 0.0:
                roots = [-b / (2.0 * a)]
            else:
                q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
                roots = [q / a, c0 / q] if q != 0.0 else [0.0, -b / a]
        else:
            rr = np.roots(list(reversed(c)))
            scale = max(1.0, max(abs(v) for v in rr))
            roots = [float(v.real) for v in rr if abs(v.imag) <= 1e-12 * scale]
        return sorted(v for v in set(roots) if lo < v < hi)

    def is_zero(self):
        return all(v == 0.0 for v in self.coefficients)

    def _lowest(self):
        for k, v in enumerate(self.coefficients):
            if v != 0.0:
                return k, v
        return 0, 0.0

    def _highest(self):
        for k in range(len(self.coefficients) - 1, -1, -1):
            if self.coefficients[k] != 0.0:
                return k, self.coefficients[k]
        return 0, 0.0

    def limit_at_zero(self):
        k, v = self._lowest()
        return float(k), v

    def limit_at_inf(self):
        k, v = self._highest()
        return float(k), v

    def negated(self):
        return Polynomial(tuple(-v for v in self.coefficients))

    def scaled_value(self, u, p):
        # exponents k - p are <= 0 on the tail side and >= 0 on the head
        # side, so every term stays representable
        return sum(c * math.exp((k - p) * u) for k, c in enumerate(self.coefficients) if c != 0.0)

    def tail_dominated_from(self):
        kh, ch = self._highest()
        t = 1.0
        for k, c in enumerate(self.coefficients[:kh]):
            if c != 0.0:
                t = max(t, 4.0 * (abs(c) / abs(ch)) ** (1.0 / (kh - k)))
        return t

    def head_dominated_below(self):
        kl, cl = self._lowest()
        if cl == 0.0:
            return _INF
        t = _INF
        for k in range(kl + 1, len(self.coefficients)):
            c = self.coefficients[k]
            if c != 0.0:
                t = min(t, 0.25 * (abs(cl) / abs(c)) ** (1.0 / (k - kl)))
        return t


@dataclass(frozen=True)
class ShiftedReciprocal(Form):
    """e/(x - f) + K, only valid on x > f."""

    e: float
    f: float
    K: float

    def __post_init__(self):
        if self.f < 0.0:
            raise BadParametersError(f"pole location f must be >= 0, got {self.f}")

    def value(self, x: float) -> float:
        return self.e / (x - self.f) + self.K

    def derivative(self, x: float) -> float:
        return -self.e / (x - self.f) ** 2

    def roots_in(self, lo, hi):
        if self.K == 0.0 or self.e == 0.0:
            return []
        root = self.f - self.e / self.K
        return [root] if lo < root < hi else []

    def is_zero(self):
        return self.e == 0.0 and self.K == 0.0

    def limit_at_zero(self):
        # only meaningful when the segment touches 0, which forces f = 0
        if self.f != 0.0:
            raise ValueError("shifted reciprocal with f > 0 cannot touch x = 0")
        return (-1.0, self.e) if self.e != 0.0 else (0.0, self.K)

    def limit_at_inf(self):
        return (0.0, self.K) if self.K != 0.0 else (-1.0, self.e)

    def negated(self):
        return ShiftedReciprocal(-self.e, self.f, -self.K)

    def scaled_value(self, u, p):
        if p == 0.0:
            if u > 50.0:
                w = math.exp(-u)
                return self.K + self.e * w / (1.0 - self.f * w)
            return self.value(math.exp(u))
        if p == -1.0:
            # e*x/(x-f) + K*x, stable at both ends
            if u > 50.0:
                return self.e / (1.0 - self.f * math.exp(-u)) + self.K * math.exp(u)
            x = math.exp(u)
            return self.e * x / (x - self.f) + self.K * x
        return super().scaled_value(u, p)

    def tail_dominated_from(self):
        if self.K != 0.0:
            return max(2.0 * self.f, self.f + 3.0 * abs(self.e / self.K), 1e-300)
        return max(2.0 * self.f, 1e-300)

    def head_dominated_below(self):
        if self.e != 0.0 and self.K != 0.0:
            return abs(self.e) / (3.0 * abs(self.K))
        return _INF


@dataclass(frozen=True)
class Power(Form):
    """c * x^p."""

    c: float
    p: float

    def value(self, x: float) -> float:
        return self.c * x**self.p

    def derivative(self, x: float) -> float:
        return self.c * self.p * x ** (self.p - 1.0)

    def roots_in(self, lo, hi):
        return []

    def is_zero(self):
        return self.c == 0.0

    def limit_at_zero(self):
        return self.p, self.c

    def limit_at_inf(self):
        return self.p, self.c

    def negated(self):
        return Power(-self.c, self.p)

    def scaled_value(self, u, p):
        return self.c * math.exp((self.p - p) * u)


@dataclass(frozen=True)
class Constant(Form):
    """k everywhere."""

    k: float

    def value(self, x: float) -> float:
        return self.k

    def derivative(self, x: float) -> float:
        return 0.0

    def roots_in(self, lo, hi):
        return []

    def is_zero(self):
        return self.k == 0.0

    def limit_at_zero(self):
        return 0.0, self.k

    def limit_at_inf(self):
        return 0.0, self.k

    def negated(self):
        return Constant(-self.k)

    def scaled_value(self, u, p):
        return self.k * math.exp(-p * u)


@dataclass(frozen=True)
class Segment:
    """Half-open piece [lo, hi[ of the domain with its form.

    The left endpoint belongs to the segment (right-continuity at joins);
    the first segment starts at lo = 0 which itself is outside the domain.
    """

    lo: float
    hi: float
    form: Form

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi):
            raise BadParametersError(f"segment needs 0 <= lo < hi, got [{self.lo}, {self.hi}[")
        if isinstance(self.form, ShiftedReciprocal) and self.lo < self.form.f:
            raise BadParametersError(
                f"shifted reciprocal pole at {self.form.f} lies inside [{self.lo}, {self.hi}["
            )


@dataclass(frozen=True)
class SignStructure:
    """Sign-change points of the negative/zero/positive/zero/negative pattern.

    Pi < 0 on ]0, x1l[, Pi = 0 on [x1l, x1r], Pi > 0 on ]x1r, x2l[,
    Pi = 0 on [x2l, x2r], Pi < 0 on ]x2r, inf[.  For the two trivial
    patterns the pattern field is authoritative and the thresholds are
    canonical placeholders.
    """

    x1l: float
    x1r: float
    x2l: float
    x2r: float
    pattern: str = "general"  # general | all_nonnegative | all_nonpositive

    def __post_init__(self):
        if self.pattern == "general":
            ok = 0.0 <= self.x1l <= self.x1r < self.x2l <= self.x2r
            ok = ok and not (self.x1l == 0.0 and self.x2r == _INF and self.x1r == 0.0 and self.x2l == _INF)
            if not ok:
                raise UnsupportedShapeError(
                    f"inconsistent sign structure ({self.x1l}, {self.x1r}, {self.x2l}, {self.x2r})"
                )

    @property
    def all_nonnegative(self) -> bool:
        return self.pattern == "all_nonnegative"

    @property
    def all_nonpositive(self) -> bool:
        return self.pattern == "all_nonpositive"

    @property
    def has_negative_head(self) -> bool:
        return self.pattern == "all_nonpositive" or (self.pattern == "general" and self.x1l > 0.0)

    @property
    def has_negative_tail(self) -> bool:
        return self.pattern == "all_nonpositive" or (self.pattern == "general" and self.x2r < _INF)


@dataclass(frozen=True)
class ProfitFunction:
    """Ordered segments covering ]0, inf[ plus their classified signs."""

    segments: tuple[Segment, ...]
    signs: SignStructure = field(init=False, compare=False)

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise BadParametersError("at least one segment is required")
        if segs[0].lo != 0.0 or segs[-1].hi != _INF:
            raise BadParametersError("segments must cover ]0, inf[")
        for left, right in zip(segs, segs[1:]):
            if left.hi != right.lo:
                raise BadParametersError(
                    f"segments must be contiguous, found gap/overlap at {left.hi} vs {right.lo}"
                )
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "signs", _classify(segs))

    def segment_at(self, x: float) -> Segment:
        if not (x > 0.0) or not math.isfinite(x):
            raise ValueError(f"profit functions are defined on ]0, inf[, got x={x}")
        los = [s.lo for s in self.segments]
        return self.segments[bisect_right(los, x) - 1]

    def __call__(self, x: float) -> float:
        return self.segment_at(x).form.value(x)

    def derivative(self, x: float) -> float:
        return self.segment_at(x).form.derivative(x)

    def plus(self, x: float) -> float:
        """Positive part max(Pi(x), 0)."""
        return max(self(x), 0.0)

    def minus(self, x: float) -> float:
        """Negative part max(-Pi(x), 0)."""
        return max(-self(x), 0.0)

    def negated(self) -> "ProfitFunction":
        """-Pi.  Raises UnsupportedShapeError when -Pi leaves the family."""
        return ProfitFunction(tuple(Segment(s.lo, s.hi, s.form.negated()) for s in self.segments))

    def breakpoints(self) -> list[float]:
        """Finite interior kinks: segment joins and exact sign roots."""
        pts = {s.lo for s in self.segments if s.lo > 0.0}
        for v in (self.signs.x1l, self.signs.x1r, self.signs.x2l, self.signs.x2r):
            if 0.0 < v < _INF:
                pts.add(v)
        return sorted(pts)


def _cell_midpoint(lo: float, hi: float) -> float:
    if hi == _INF:
        return 2.0 * lo + 2.0
    if lo == 0.0:
        return 0.5 * hi
    return 0.5 * (lo + hi)


def _classify(segments: tuple[Segment, ...]) -> SignStructure:
    cuts = []
    for seg in segments:
        if seg.lo > 0.0:
            cuts.append(seg.lo)
        cuts.extend(seg.form.roots_in(seg.lo, min(seg.hi, 1e306)))
    cuts = sorted(set(cuts))

    cells = []
    prev = 0.0
    for c in cuts:
        if c > prev:
            cells.append((prev, c))
            prev = c
    cells.append((prev, _INF))

    # constant sign per cell: cells never straddle a join or a root
    los = [s.lo for s in segments]
    runs: list[list] = []  # [lo, hi, sign]
    for lo, hi in cells:
        mid = _cell_midpoint(lo, hi)
        seg = segments[bisect_right(los, mid) - 1]
        if seg.form.is_zero():
            s = 0
        else:
            v = seg.form.value(mid)
            s = (v > 0.0) - (v < 0.0)
        if runs and runs[-1][2] == s:
            runs[-1][1] = hi  # merges tangency points into their region
        else:
            runs.append([lo, hi, s])

    present = {s for _, _, s in runs}
    if 1 not in present:
        return SignStructure(_INF, _INF, _INF, _INF, "all_nonpositive")
    if -1 not in present:
        return SignStructure(0.0, 0.0, _INF, _INF, "all_nonnegative")

    def reject():
        pretty = ", ".join(f"]{lo:.6g}, {hi:.6g}[: {s:+d}" for lo, hi, s in runs)
        raise UnsupportedShapeError(
            "sign pattern must be negative/zero/positive/zero/negative from 0 to inf; got " + pretty
        )

    # match the run signs against  -? 0? + 0? -?
    i = 0
    x1l = x1r = 0.0
    if runs[i][2] == -1:
        x1l = x1r = runs[i][1]
        i += 1
    if i < len(runs) and runs[i][2] == 0:
        x1r = runs[i][1]
        i += 1
    if i == len(runs) or runs[i][2] != 1:
        reject()
    x2l = x2r = runs[i][1]
    i += 1
    if i < len(runs) and runs[i][2] == 0:
        x2l, x2r = runs[i][0], runs[i][1]
        i += 1
    if i < len(runs):
        if runs[i][2] != -1 or i != len(runs) - 1:
            reject()
        x2r = runs[i][0]
        x2l = min(x2l, x2r)
        i += 1
    return SignStructure(x1l, x1r, x2l, x2r, "general")


def classify_signs(pf: ProfitFunction) -> SignStructure:
    """Sign structure of pf (computed at construction, returned as-is)."""
    return pf.signs


def _head_integrable(pf: ProfitFunction, d1: float) -> bool:
    p, c = pf.segments[0].form.limit_at_zero()
    return c == 0.0 or p - d1 > 0.0


def _tail_integrable(pf: ProfitFunction, d2: float) -> bool:
    p, c = pf.segments[-1].form.limit_at_inf()
    return c == 0.0 or p - d2 < 0.0


def check_vp_plus_finite(pf: ProfitFunction, roots: tuple[float, float]) -> bool:
    """True iff the positive part has finite expected discounted mass.

    Integrability of x^(-d1-1) Pi+ near 0 and x^(-d2-1) Pi+ near infinity,
    decided from the limit exponents of the outermost segments.  Equality of
    exponents is rejected: the liminf conditions fail there.
    """
    d1, d2 = roots
    signs = pf.signs
    if signs.all_nonpositive:
        return True
    head_positive = signs.all_nonnegative or signs.x1r == 0.0
    tail_positive = signs.all_nonnegative or signs.x2l == _INF
    if head_positive and not _head_integrable(pf, d1):
        return False
    if tail_positive and not _tail_integrable(pf, d2):
        return False
    return True


def check_vp_minus_finite(pf: ProfitFunction, roots: tuple[float, float]) -> bool:
    """Mirror of check_vp_plus_finite for the negative part."""
    d1, d2 = roots
    signs = pf.signs
    if signs.all_nonnegative:
        return True
    if signs.has_negative_head and not _head_integrable(pf, d1):
        return False
    if signs.has_negative_tail and not _tail_integrable(pf, d2):
        return False
    return True


def gross_profit(a: float, b: float, c: float, f: float, K: float) -> ProfitFunction:
    """Quasi-concave gross profit: -c(x-a)(x-b) up to x0, then e/(x-f)+K.

    The switch point x0 and the numerator e are the unique values making
    the function continuously differentiable:

        x0 = (a + b + f + sqrt((a+b+f)^2 - 3(ab + (a+b)f + K/c))) / 3
        e  = c (2 x0 - a - b) (x0 - f)^2
    """
    if min(a, b, f) < 0.0 or c <= 0.0:
        raise BadParametersError("need a, b, f >= 0 and c > 0")
    if not a < b:
        raise BadParametersError(f"need a < b, got a={a}, b={b}")
    s = a + b + f
    disc = s * s - 3.0 * (a * b + (a + b) * f + K / c)
    if disc < 0.0:
        raise BadParametersError(f"no C^1 switch point: discriminant {disc:.6g} < 0")
    x0 = (s + math.sqrt(disc)) / 3.0
    if not x0 > f:
        raise BadParametersError(f"switch point x0={x0:.6g} does not exceed the pole f={f}")
    e = c * (2.0 * x0 - a - b) * (x0 - f) ** 2
    quad = Polynomial((-c * a * b, c * (a + b), -c))
    return ProfitFunction((Segment(0.0, x0, quad), Segment(x0, _INF, ShiftedReciprocal(e, f, K))))
