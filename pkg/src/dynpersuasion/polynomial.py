"""Real polynomials on the unit interval and their sign-change roots."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_DEGREE = 8
ROOT_TOL = 1e-12


@dataclass(frozen=True)
class Polynomial:
    """Polynomial with coefficients stored constant term first.

    Trailing zeros are stripped on construction so that equal polynomials
    compare equal. The zero polynomial has ``coeffs == (0.0,)``.
    """

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Sequence[float]):
        c = [float(x) for x in coeffs]
        if not c:
            c = [0.0]
        if not all(math.isfinite(x) for x in c):
            raise ValueError(f"non-finite polynomial coefficient in {c!r}")
        while len(c) > 1 and c[-1] == 0.0:
            c.pop()
        if len(c) - 1 > MAX_DEGREE:
            raise ValueError(f"polynomial degree {len(c) - 1} exceeds {MAX_DEGREE}")
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def constant(cls, value: float) -> "Polynomial":
        return cls([value])

    @classmethod
    def line(cls, slope: float, intercept: float) -> "Polynomial":
        return cls([intercept, slope])

    @classmethod
    def through(cls, x0: float, y0: float, x1: float, y1: float) -> "Polynomial":
        """Affine polynomial through two points."""
        slope = (y1 - y0) / (x1 - x0)
        return cls([y0 - slope * x0, slope])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(c) <= tol for c in self.coeffs)

    def __call__(self, p):
        c = self.coeffs
        if np.ndim(p) == 0:
            acc = 0.0
            for coef in reversed(c):
                acc = acc * p + coef
            return float(acc)
        p = np.asarray(p, dtype=float)
        acc = np.zeros_like(p)
        for coef in reversed(c):
            acc = acc * p + coef
        return acc

    def deriv(self, m: int = 1) -> "Polynomial":
        c = list(self.coeffs)
        for _ in range(m):
            if len(c) == 1:
                return Polynomial([0.0])
            c = [k * c[k] for k in range(1, len(c))]
        return Polynomial(c)

    def __add__(self, other: "Polynomial | float") -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial([other])
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [0.0] * (n - len(self.coeffs))
        b = list(other.coeffs) + [0.0] * (n - len(other.coeffs))
        return Polynomial([x + y for x, y in zip(a, b)])

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial([-x for x in self.coeffs])

    def __sub__(self, other: "Polynomial | float") -> "Polynomial":
        if not isinstance(other, Polynomial):
            other = Polynomial([other])
        return self + (-other)

    def __rsub__(self, other: float) -> "Polynomial":
        return Polynomial([other]) - self

    def __mul__(self, k: float) -> "Polynomial":
        return Polynomial([k * x for x in self.coeffs])

    __rmul__ = __mul__

    def roots_in(self, lo: float = 0.0, hi: float = 1.0) -> list[float]:
        """Strict sign-change roots in the open interval ``(lo, hi)``."""
        return sign_change_roots(self, lo, hi)

    def critical_points(self, lo: float = 0.0, hi: float = 1.0) -> list[float]:
        """Real zeros of the derivative inside ``(lo, hi)``, sorted.

        Includes tangential zeros (no sign change); used to split the
        interval into monotone stretches.
        """
        return _real_zeros(self.deriv(), lo, hi)

    def min_max_on(self, lo: float, hi: float) -> tuple[float, float]:
        pts = [lo, hi] + self.critical_points(lo, hi)
        vals = [self(x) for x in pts]
        return min(vals), max(vals)


def _bisect(f: Polynomial, a: float, b: float, fa: float, tol: float = ROOT_TOL) -> float:
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0:
            return m
        if (fm < 0.0) == (fa < 0.0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def _real_zeros(f: Polynomial, lo: float, hi: float) -> list[float]:
    """All real zeros of ``f`` in ``(lo, hi)``, tangential ones included."""
    if f.degree <= 0:
        return []
    out = []
    for z in np.polynomial.polynomial.polyroots(np.array(f.coeffs)):
        if abs(z.imag) <= 1e-9 * max(1.0, abs(z.real)):
            x = float(z.real)
            if lo < x < hi:
                out.append(x)
    return sorted(out)


def sign_change_roots(f: Polynomial, lo: float = 0.0, hi: float = 1.0) -> list[float]:
    """Roots of ``f`` in ``(lo, hi)`` at which ``f`` strictly changes sign.

    Degree <= 2 uses the closed form; higher degrees isolate roots between
    consecutive critical points (where ``f`` is monotone) and bisect to
    ``ROOT_TOL``. Tangential zeros yield nothing.
    """
    d = f.degree
    if d <= 0:
        return []
    c = f.coeffs
    if d == 1:
        x = -c[0] / c[1]
        return [x] if lo < x < hi else []
    if d == 2:
        a, b, k = c[2], c[1], c[0]
        disc = b * b - 4.0 * a * k
        if disc <= 0.0:
            return []
        s = math.sqrt(disc)
        # numerically stable pair
        q = -0.5 * (b + math.copysign(s, b))
        xs = sorted({q / a, k / q} if q != 0.0 else {0.0})
        return [x for x in xs if lo < x < hi]
    knots = [lo] + f.critical_points(lo, hi) + [hi]
    vals = [f(x) for x in knots]
    scale = max(1.0, max(abs(v) for v in vals))
    eps = 1e-14 * scale
    roots = []
    # a zero sitting exactly on a knot counts when its neighbours disagree in sign
    signs = [0 if abs(v) <= eps else (1 if v > 0 else -1) for v in vals]
    last_sign, last_idx = 0, None
    for i, s in enumerate(signs):
        if s == 0:
            continue
        if last_sign != 0 and s != last_sign:
            if i - last_idx == 1:
                roots.append(_bisect(f, knots[last_idx], knots[i], vals[last_idx]))
            else:
                # zero knot(s) in between; take the middle one
                zero_idx = (last_idx + i) // 2
                roots.append(knots[zero_idx])
        last_sign, last_idx = s, i
    return [x for x in roots if lo < x < hi]
