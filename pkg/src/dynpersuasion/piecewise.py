"""Piecewise-polynomial functions on [0, 1] with explicit breakpoint values."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .polynomial import Polynomial, _real_zeros, sign_change_roots

# distance below which a query point is treated as sitting on a breakpoint
SNAP_TOL = 1e-12


@dataclass(frozen=True)
class PiecewiseFn:
    """``breakpoints[0] = 0 < ... < breakpoints[-1] = 1``.

    ``pieces[k]`` is used on the open interval between breakpoints ``k`` and
    ``k + 1``; ``point_values[k]`` is the value at breakpoint ``k``. The
    function must be upper semi-continuous at interior breakpoints and
    continuous at 0 and 1.
    """

    breakpoints: tuple[float, ...]
    pieces: tuple[Polynomial, ...]
    point_values: tuple[float, ...]

    def __init__(self, breakpoints, pieces, point_values, check: bool = True):
        b = tuple(float(x) for x in breakpoints)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "pieces", tuple(pieces))
        object.__setattr__(self, "point_values", tuple(float(x) for x in point_values))
        if check:
            self._validate()

    def _validate(self):
        b = self.breakpoints
        if len(b) < 2 or b[0] != 0.0 or b[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if any(y <= x for x, y in zip(b, b[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(self.pieces) != len(b) - 1 or len(self.point_values) != len(b):
            raise ValueError("need one piece per interval and one value per breakpoint")
        scale = 1.0 + max(abs(v) for v in self.point_values)
        tol = 1e-9 * scale
        if abs(self.point_values[0] - self.pieces[0](0.0)) > tol:
            raise ValueError("value at 0 must equal the right limit")
        if abs(self.point_values[-1] - self.pieces[-1](1.0)) > tol:
            raise ValueError("value at 1 must equal the left limit")
        for k in range(1, len(b) - 1):
            left = self.pieces[k - 1](b[k])
            right = self.pieces[k](b[k])
            if self.point_values[k] < max(left, right) - tol:
                raise ValueError(
                    f"not upper semi-continuous at {b[k]!r}: value {self.point_values[k]!r} "
                    f"below limits ({left!r}, {right!r})"
                )

    @classmethod
    def from_polynomial(cls, poly: Polynomial) -> "PiecewiseFn":
        return cls([0.0, 1.0], [poly], [poly(0.0), poly(1.0)])

    @property
    def interior_breakpoints(self) -> tuple[float, ...]:
        return self.breakpoints[1:-1]

    def is_affine(self) -> bool:
        return all(p.degree <= 1 for p in self.pieces)

    def discontinuities(self, tol: float = 1e-12) -> list[float]:
        """Interior breakpoints where the one-sided limits differ."""
        out = []
        for k in range(1, len(self.breakpoints) - 1):
            b = self.breakpoints[k]
            if abs(self.pieces[k - 1](b) - self.pieces[k](b)) > tol:
                out.append(b)
        return out

    def piece_index(self, p: float) -> int:
        """Index of the piece whose closed interval contains ``p`` (left-biased)."""
        k = int(np.searchsorted(self.breakpoints, p, side="left")) - 1
        return min(max(k, 0), len(self.pieces) - 1)

    def breakpoint_index(self, p: float, tol: float = SNAP_TOL) -> int | None:
        b = self.breakpoints
        k = int(np.searchsorted(b, p))
        for j in (k - 1, k):
            if 0 <= j < len(b) and abs(b[j] - p) <= tol:
                return j
        return None

    def __call__(self, p):
        return self.eval_usc(p)

    def eval_usc(self, p):
        """Point values at breakpoints, polynomial values elsewhere."""
        if np.ndim(p) == 0:
            j = self.breakpoint_index(float(p))
            if j is not None:
                return self.point_values[j]
            return self.pieces[self.piece_index(float(p))](float(p))
        p = np.asarray(p, dtype=float)
        b = np.asarray(self.breakpoints)
        idx = np.clip(np.searchsorted(b, p, side="right") - 1, 0, len(self.pieces) - 1)
        out = np.empty_like(p)
        for k, poly in enumerate(self.pieces):
            mask = idx == k
            if mask.any():
                out[mask] = poly(p[mask])
        pos = np.clip(np.searchsorted(b, p), 0, len(b) - 1)
        for cand in (pos - 1, pos):
            cand = np.clip(cand, 0, len(b) - 1)
            hit = np.abs(b[cand] - p) <= SNAP_TOL
            if hit.any():
                out[hit] = np.asarray(self.point_values)[cand[hit]]
        return out

    def eval_limits(self, p: float) -> tuple[float, float]:
        """(left limit, right limit); at 0 and 1 both equal the point value."""
        p = float(p)
        j = self.breakpoint_index(p)
        if j is None:
            v = self.eval_usc(p)
            return v, v
        if j == 0 or j == len(self.breakpoints) - 1:
            v = self.point_values[j]
            return v, v
        b = self.breakpoints[j]
        return self.pieces[j - 1](b), self.pieces[j](b)

    def deriv_limits(self, p: float) -> tuple[float, float]:
        """One-sided first derivatives of the piece polynomials at ``p``."""
        j = self.breakpoint_index(p)
        if j is None:
            d = self.pieces[self.piece_index(p)].deriv()(p)
            return d, d
        left = self.pieces[max(j - 1, 0)].deriv()(self.breakpoints[j])
        right = self.pieces[min(j, len(self.pieces) - 1)].deriv()(self.breakpoints[j])
        return left, right

    def __sub__(self, other: "PiecewiseFn") -> "PiecewiseFn":
        """Difference on the common refinement; not validated (may be non-usc)."""
        b = sorted(set(self.breakpoints) | set(other.breakpoints))
        merged = [b[0]]
        for x in b[1:]:
            if x - merged[-1] > SNAP_TOL:
                merged.append(x)
            else:
                merged[-1] = x if x in (0.0, 1.0) else merged[-1]
        pieces = []
        for lo, hi in zip(merged, merged[1:]):
            m = 0.5 * (lo + hi)
            pieces.append(self.pieces[self.piece_index(m)] - other.pieces[other.piece_index(m)])
        vals = [self.eval_usc(x) - other.eval_usc(x) for x in merged]
        return PiecewiseFn(merged, pieces, vals, check=False)

    def zero_set(self, tol: float = 1e-9) -> list[tuple[float, float]]:
        """Closed intervals (possibly degenerate) on which the function vanishes.

        Meant for nonnegative gap functions. A piece that is identically
        zero (within ``tol``) contributes its whole closure; otherwise zeros
        are sign-change roots plus critical points with ``|f| <= tol``.
        Breakpoints count when their point value is within ``tol``.
        """
        pts: list[tuple[float, float]] = []
        b = self.breakpoints
        for k, poly in enumerate(self.pieces):
            lo, hi = b[k], b[k + 1]
            fmin, fmax = poly.min_max_on(lo, hi)
            if max(abs(fmin), abs(fmax)) <= tol:
                pts.append((lo, hi))
                continue
            for x in sign_change_roots(poly, lo, hi):
                pts.append((x, x))
            for x in _real_zeros(poly.deriv(), lo, hi):
                if abs(poly(x)) <= tol:
                    pts.append((x, x))
        for k, x in enumerate(b):
            if abs(self.point_values[k]) <= tol:
                pts.append((x, x))
        pts.sort()
        merged: list[list[float]] = []
        for lo, hi in pts:
            if merged and lo <= merged[-1][1] + SNAP_TOL:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        return [(lo, hi) for lo, hi in merged]

    def positive_intervals(self, tol: float = 1e-9) -> list[tuple[float, float]]:
        """Open intervals making up the complement of :meth:`zero_set`."""
        zs = self.zero_set(tol)
        out = []
        cursor = 0.0
        # 0 and 1 are treated as contact points for gap functions
        for lo, hi in zs + [(1.0, 1.0)]:
            if lo > cursor + SNAP_TOL:
                out.append((cursor, lo))
            cursor = max(cursor, hi)
        return out


def containing_interval(intervals: Sequence[tuple[float, float]], p: float):
    """The open interval ``(lo, hi)`` from ``intervals`` containing ``p``, or None."""
    for lo, hi in intervals:
        if lo < p < hi:
            return lo, hi
    return None
