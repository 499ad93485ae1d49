"""Exact value function when every piece of ``u`` is affine.

On a funded piece the value is ``u_k + A H1 - B H2`` where
``H1(p) = p**xi (1-p)**(1-xi)`` and ``H2(p) = H1(1-p)`` span the solutions of
``c(p) h'' = h``. A configuration says which pieces are funded and, at each
breakpoint between two funded pieces, whether the value is smooth-pasted
through it or the principal stops there. Each configuration gives a small
linear system; the answer is the configuration whose solution passes
:func:`verify_value`.

Free boundaries strictly inside an affine piece never occur: value matching
and smooth pasting there give zero Cauchy data for ``v - u_k``, which solves
the homogeneous equation, so ``v = u_k`` on the whole stretch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .envelope import concave_envelope
from .hjb_fd import diffusion_coeff
from .piecewise import PiecewiseFn
from .polynomial import Polynomial

MAX_BREAKPOINTS = 12
EQ_TOL = 1e-8
ORDER_TOL = 1e-9
VERIFY_POINTS = 10001


class NotAffine(ValueError):
    pass


class NoValidConfiguration(RuntimeError):
    pass


def xi(r_sigma2: float) -> float:
    if not (r_sigma2 > 0 and math.isfinite(r_sigma2)):
        raise ValueError(f"r_sigma2 must be positive, got {r_sigma2!r}")
    return 0.5 + math.sqrt(0.25 + 2.0 * r_sigma2)


def _h1(p, x, order=0):
    p = np.asarray(p, dtype=float)
    h = p**x * (1.0 - p) ** (1.0 - x)
    if order == 0:
        return h
    g = x / p + (x - 1.0) / (1.0 - p)
    if order == 1:
        return h * g
    dg = -x / p**2 + (x - 1.0) / (1.0 - p) ** 2
    return h * (g * g + dg)


def basis(p, x: float):
    """``(H1, H2, H1', H2', H1'', H2'')`` at ``p`` in (0, 1)."""
    arr = np.asarray(p, dtype=float)
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise ValueError("basis derivatives need p strictly inside (0, 1)")
    q = 1.0 - arr
    out = (
        _h1(arr, x),
        _h1(q, x),
        _h1(arr, x, 1),
        -_h1(q, x, 1),
        _h1(arr, x, 2),
        _h1(q, x, 2),
    )
    if np.ndim(p) == 0:
        return tuple(float(v) for v in out)
    return out


def _homog(p, A: float, B: float, x: float, order: int = 0):
    """``A H1 - B H2`` (or a derivative), skipping zero coefficients so the ends are finite."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    if A != 0.0:
        out = out + A * _h1(p, x, order)
    if B != 0.0:
        sign = -1.0 if order % 2 else 1.0
        out = out - B * sign * _h1(1.0 - p, x, order)
    return out


@dataclass(frozen=True)
class FundingPiece:
    lo: float
    hi: float
    A: float
    B: float
    particular: Polynomial


@dataclass
class ClosedFormValue:
    xi: float
    r_sigma2: float
    stop_fn: PiecewiseFn
    coeffs: tuple  # per piece of stop_fn: (A, B) when funded, else None
    pasted: tuple  # per interior breakpoint: True if smooth-pasted through
    funding_region: list[tuple[float, float]] = field(default_factory=list)

    @property
    def intervals(self) -> list[FundingPiece]:
        b = self.stop_fn.breakpoints
        return [
            FundingPiece(b[k], b[k + 1], ab[0], ab[1], self.stop_fn.pieces[k])
            for k, ab in enumerate(self.coeffs)
            if ab is not None
        ]

    def _piece_value(self, k: int, p, order: int = 0):
        poly = self.stop_fn.pieces[k]
        base = poly.deriv(order)(p) if order else poly(p)
        ab = self.coeffs[k]
        if ab is None:
            return base
        return base + _homog(p, ab[0], ab[1], self.xi, order)

    def breakpoint_value(self, j: int) -> float:
        u = self.stop_fn
        n = len(u.breakpoints)
        if j in (0, n - 1):
            return u.point_values[j]
        if self.pasted[j - 1]:
            return float(self._piece_value(j - 1, u.breakpoints[j]))
        return u.point_values[j]

    def __call__(self, p):
        u = self.stop_fn
        if np.ndim(p) == 0:
            j = u.breakpoint_index(float(p))
            if j is not None:
                return self.breakpoint_value(j)
            return float(self._piece_value(u.piece_index(float(p)), float(p)))
        p = np.asarray(p, dtype=float)
        b = np.asarray(u.breakpoints)
        idx = np.clip(np.searchsorted(b, p, side="right") - 1, 0, len(u.pieces) - 1)
        out = np.empty_like(p)
        for k in range(len(u.pieces)):
            m = idx == k
            if m.any():
                out[m] = self._piece_value(k, p[m])
        for j, x in enumerate(b):
            hit = np.abs(p - x) <= 1e-12
            if hit.any():
                out[hit] = self.breakpoint_value(j)
        return out

    def limits(self, j: int) -> tuple[float, float]:
        b = self.stop_fn.breakpoints[j]
        left = float(self._piece_value(j - 1, b)) if j > 0 else self.breakpoint_value(j)
        right = float(self._piece_value(j, b)) if j < len(self.stop_fn.pieces) else self.breakpoint_value(j)
        return left, right

    def deriv_limits(self, j: int) -> tuple[float, float]:
        """One-sided slopes at breakpoint ``j``; at 0 and 1 only one side exists."""
        b = self.stop_fn.breakpoints[j]
        n = len(self.stop_fn.pieces)
        left = float(self._piece_value(j - 1, b, 1)) if j > 0 else math.nan
        right = float(self._piece_value(j, b, 1)) if j < n else math.nan
        return left, right

    def derivative(self, p, order: int = 1):
        p = np.asarray(p, dtype=float)
        u = self.stop_fn
        b = np.asarray(u.breakpoints)
        idx = np.clip(np.searchsorted(b, p, side="right") - 1, 0, len(u.pieces) - 1)
        out = np.empty_like(p)
        for k in range(len(u.pieces)):
            m = idx == k
            if m.any():
                out[m] = self._piece_value(k, p[m], order)
        return out

    def to_dict(self) -> dict:
        return {
            "xi": self.xi,
            "r_sigma2": self.r_sigma2,
            "intervals": [
                {"lo": fp.lo, "hi": fp.hi, "A": fp.A, "B": fp.B, "particular": list(fp.particular.coeffs)}
                for fp in self.intervals
            ],
            "funding_region": [list(iv) for iv in self.funding_region],
        }


@dataclass
class VerificationReport:
    below_u: float
    above_cav: float
    continuity: float
    smooth_pasting: float
    ode_residual: float
    convexity_margin: float | None  # min v'' inside funding; None if nothing is funded
    convex_kink: float
    kinks: list[tuple[float, float, float]]  # (p, left slope, right slope)

    def passed(self, tol: float = EQ_TOL) -> bool:
        return (
            self.below_u <= ORDER_TOL
            and self.above_cav <= ORDER_TOL
            and self.continuity <= tol
            and self.smooth_pasting <= tol
            and self.ode_residual <= tol
            and (self.convexity_margin is None or self.convexity_margin > 0.0)
            and self.convex_kink <= tol
        )

    def concave_kink_at(self, p: float, tol: float = 1e-12) -> bool:
        return any(abs(x - p) <= tol and left > right + EQ_TOL for x, left, right in self.kinks)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["kinks"] = [list(k) for k in self.kinks]
        d["passed"] = self.passed()
        return d


def _region_from(coeffs, pasted, b) -> list[tuple[float, float]]:
    out = []
    start = None
    for k, ab in enumerate(coeffs):
        if ab is None:
            if start is not None:
                out.append((start, b[k]))
                start = None
            continue
        if start is None:
            start = b[k]
        elif not pasted[k - 1]:
            out.append((start, b[k]))
            start = b[k]
    if start is not None:
        out.append((start, b[-1]))
    return out


def verify_value(v: ClosedFormValue, u: PiecewiseFn | None = None, r_sigma2: float | None = None,
                 cav: PiecewiseFn | None = None, n_grid: int = VERIFY_POINTS) -> VerificationReport:
    if u is None:
        u = v.stop_fn
    if r_sigma2 is None:
        r_sigma2 = v.r_sigma2
    if cav is None:
        cav = concave_envelope(u)
    b = u.breakpoints
    grid = np.union1d(np.linspace(0.0, 1.0, n_grid), np.asarray(b))
    vv = v(grid)
    uu = u.eval_usc(grid)
    below = float(np.max(uu - vv, initial=0.0))
    above = float(np.max(vv - cav.eval_usc(grid), initial=0.0))
    above = max(above, 0.0)
    below = max(below, 0.0)

    cont = 0.0
    for j in range(len(b)):
        vj = v.breakpoint_value(j)
        left, right = v.limits(j)
        cont = max(cont, abs(left - vj), abs(right - vj))

    smooth = 0.0
    kinks = []
    convex_kink = 0.0
    for j in range(1, len(b) - 1):
        left, right = v.deriv_limits(j)
        if v.pasted[j - 1]:
            smooth = max(smooth, abs(left - right))
        if abs(left - right) > EQ_TOL:
            kinks.append((b[j], left, right))
            convex_kink = max(convex_kink, right - left)

    ode = 0.0
    margin = None
    for k, ab in enumerate(v.coeffs):
        if ab is None:
            continue
        lo, hi = b[k], b[k + 1]
        pts = grid[(grid > lo) & (grid < hi)]
        if pts.size == 0:
            pts = np.array([0.5 * (lo + hi)])
        val = v._piece_value(k, pts)
        d2 = v._piece_value(k, pts, 2)
        res = val - u.pieces[k](pts) - diffusion_coeff(pts, r_sigma2) * d2
        ode = max(ode, float(np.abs(res).max()))
        m = float(d2.min())
        margin = m if margin is None else min(margin, m)
    return VerificationReport(below, above, cont, smooth, ode, margin, convex_kink, kinks)


def _solve_stretch(u: PiecewiseFn, x: float, s: int, e: int, pasted) -> list | None:
    """(A, B) for pieces ``s..e-1`` funded together between breakpoints ``s`` and ``e``."""
    b = u.breakpoints
    last = len(b) - 1
    n = e - s
    M = np.zeros((2 * n, 2 * n))
    rhs = np.zeros(2 * n)
    row = 0

    def h(p, order=0):
        # (coefficient on A, coefficient on B) for value or slope at p
        if p <= 0.0 or p >= 1.0:
            return None
        return _h1(p, x, order), -(-1.0) ** order * _h1(1.0 - p, x, order)

    # left end
    if s == 0:
        M[row, 1] = 1.0
    else:
        hh = h(b[s])
        M[row, 0], M[row, 1] = hh
        rhs[row] = u.point_values[s] - u.pieces[s](b[s])
    row += 1
    for j in range(s + 1, e):
        c0 = 2 * (j - 1 - s)
        p = b[j]
        assert pasted[j - 1]
        for order in (0, 1):
            hh = h(p, order)
            M[row, c0], M[row, c0 + 1] = hh
            M[row, c0 + 2], M[row, c0 + 3] = -hh[0], -hh[1]
            pl = u.pieces[j - 1].deriv(order) if order else u.pieces[j - 1]
            pr = u.pieces[j].deriv(order) if order else u.pieces[j]
            rhs[row] = pr(p) - pl(p)
            row += 1
    if e == last:
        M[row, 2 * n - 2] = 1.0
    else:
        hh = h(b[e])
        M[row, 2 * n - 2], M[row, 2 * n - 1] = hh
        rhs[row] = u.point_values[e] - u.pieces[e - 1](b[e])
    try:
        sol = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    # pivoting leaves ~1e-17 in the pinned coefficients; H2(0) and H1(1) are infinite
    if s == 0:
        sol[1] = 0.0
    if e == last:
        sol[2 * n - 2] = 0.0
    return [(float(sol[2 * i]), float(sol[2 * i + 1])) for i in range(n)]


def _candidates(n_pieces: int):
    """Yield (funded flags per piece, pasted flags per interior breakpoint)."""
    for funded in product((False, True), repeat=n_pieces):
        ff = [j for j in range(1, n_pieces) if funded[j - 1] and funded[j]]
        for choice in product((True, False), repeat=len(ff)):
            pasted = [False] * (n_pieces - 1)
            for j, c in zip(ff, choice):
                pasted[j - 1] = c
            yield funded, tuple(pasted)


def build_candidate(u: PiecewiseFn, r_sigma2: float, funded, pasted) -> ClosedFormValue | None:
    x = xi(r_sigma2)
    b = u.breakpoints
    coeffs: list = [None] * len(u.pieces)
    k = 0
    while k < len(u.pieces):
        if not funded[k]:
            k += 1
            continue
        e = k + 1
        while e < len(u.pieces) and funded[e] and pasted[e - 1]:
            e += 1
        sol = _solve_stretch(u, x, k, e, pasted)
        if sol is None:
            return None
        coeffs[k:e] = sol
        k = e
    return ClosedFormValue(x, float(r_sigma2), u, tuple(coeffs), tuple(pasted), _region_from(coeffs, pasted, b))


def solve_closed_form(u: PiecewiseFn, r_sigma2: float, cav: PiecewiseFn | None = None) -> ClosedFormValue:
    """Enumerate configurations and return the one that verifies.

    Knife-edge ties are broken towards less funding, then fewer intervals.
    """
    if not u.is_affine():
        raise NotAffine("closed form needs every piece of u to be affine; use the FD solver")
    xi(r_sigma2)
    m = len(u.interior_breakpoints)
    if m > MAX_BREAKPOINTS:
        raise NoValidConfiguration(f"{m} breakpoints exceeds the enumeration cap of {MAX_BREAKPOINTS}")
    if cav is None:
        cav = concave_envelope(u)
    best = None
    worst_seen = None
    for funded, pasted in _candidates(len(u.pieces)):
        cand = build_candidate(u, r_sigma2, funded, pasted)
        if cand is None:
            continue
        rep = verify_value(cand, u, r_sigma2, cav=cav)
        if not rep.passed():
            worst_seen = rep if worst_seen is None else worst_seen
            continue
        key = (sum(hi - lo for lo, hi in cand.funding_region), len(cand.funding_region))
        if best is None or key < best[0]:
            best = (key, cand)
    if best is None:
        raise NoValidConfiguration(
            "no configuration passed verification (knife-edge instance or degenerate payoff)"
        )
    return best[1]
