"""Concave envelope of the induced payoff and the static persuasion benchmark."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .piecewise import PiecewiseFn, containing_interval
from .polynomial import Polynomial

CONTACT_TOL = 1e-9
SAMPLES_PER_PIECE = 2048


@dataclass(frozen=True)
class BeliefPair:
    lower: float
    upper: float

    def __post_init__(self):
        if not (0.0 <= self.lower <= self.upper <= 1.0):
            raise ValueError(f"need 0 <= lower <= upper <= 1, got ({self.lower}, {self.upper})")

    def as_tuple(self) -> tuple[float, float]:
        return (self.lower, self.upper)


@dataclass
class _Vertex:
    x: float
    y: float
    piece: int | None  # None for breakpoint nodes
    node: int | None
    order: int  # position in the sorted candidate list


def _upper_hull(verts: list[_Vertex]) -> list[_Vertex]:
    hull: list[_Vertex] = []
    for v in verts:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (b.x - a.x) * (v.y - a.y) - (b.y - a.y) * (v.x - a.x)
            if cross >= 0.0:
                hull.pop()
            else:
                break
        hull.append(v)
    return hull


def _tangent_point(poly: Polynomial, lo: float, hi: float, x_ext: float, y_ext: float, x0: float) -> float:
    """Point ``a`` in ``[lo, hi]`` where the tangent of ``poly`` passes through the external point."""
    dpoly = poly.deriv()

    def g(a):
        return poly(a) + dpoly(a) * (x_ext - a) - y_ext

    ga, gb = g(lo), g(hi)
    if ga == 0.0:
        return lo
    if gb == 0.0:
        return hi
    if (ga < 0.0) == (gb < 0.0):
        return x0
    a, b = lo, hi
    while b - a > 1e-15:
        m = 0.5 * (a + b)
        gm = g(m)
        if (gm < 0.0) == (ga < 0.0):
            a, ga = m, gm
        else:
            b = m
    return 0.5 * (a + b)


def _on_piece(u: PiecewiseFn, v: _Vertex, k: int) -> bool:
    if v.piece is not None:
        return v.piece == k
    b = u.breakpoints
    if v.node not in (k, k + 1):
        return False
    return abs(u.pieces[k](b[v.node]) - v.y) <= 1e-12 * (1.0 + abs(v.y))


def concave_envelope(u: PiecewiseFn, samples_per_piece: int = SAMPLES_PER_PIECE) -> PiecewiseFn:
    """Smallest concave majorant of ``u`` as a PiecewiseFn.

    Affine pieces only contribute their breakpoint values, so the hull is
    exact for piecewise-affine ``u``. Higher-degree pieces are sampled;
    chord endpoints that land on a sampled piece are then moved to the
    exact tangency by bisection.
    """
    b = u.breakpoints
    raw: list[_Vertex] = []
    for k, x in enumerate(b):
        raw.append(_Vertex(x, u.point_values[k], None, k, 0))
    sample_pos: dict[int, np.ndarray] = {}
    for k, poly in enumerate(u.pieces):
        if poly.degree >= 2:
            xs = np.linspace(b[k], b[k + 1], samples_per_piece + 2)[1:-1]
            sample_pos[k] = xs
            ys = poly(xs)
            raw.extend(_Vertex(float(x), float(y), k, None, 0) for x, y in zip(xs, ys))
    raw.sort(key=lambda v: v.x)
    for i, v in enumerate(raw):
        v.order = i
    hull = _upper_hull(raw)

    # classify each hull edge: follow a piece, or chord
    edges = []
    for v1, v2 in zip(hull, hull[1:]):
        follow = None
        if v2.order == v1.order + 1:
            k = u.piece_index(0.5 * (v1.x + v2.x))
            if u.pieces[k].degree >= 2 and _on_piece(u, v1, k) and _on_piece(u, v2, k):
                follow = k
        edges.append(follow)

    def bracket(v: _Vertex):
        xs = sample_pos[v.piece]
        i = int(np.searchsorted(xs, v.x))
        lo = xs[i - 1] if i > 0 else b[v.piece]
        hi = xs[i + 1] if i + 1 < len(xs) else b[v.piece + 1]
        return lo, hi

    # snap chord endpoints lying on sampled pieces to true tangencies
    for i, follow in enumerate(edges):
        if follow is not None:
            continue
        v1, v2 = hull[i], hull[i + 1]
        r1 = v1.piece is not None
        r2 = v2.piece is not None
        if not (r1 or r2):
            continue
        br1 = bracket(v1) if r1 else None
        br2 = bracket(v2) if r2 else None
        for _ in range(100):
            x1_old, x2_old = v1.x, v2.x
            if r1:
                p1 = u.pieces[v1.piece]
                v1.x = _tangent_point(p1, br1[0], br1[1], v2.x, v2.y, v1.x)
                v1.y = p1(v1.x)
            if r2:
                p2 = u.pieces[v2.piece]
                v2.x = _tangent_point(p2, br2[0], br2[1], v1.x, v1.y, v2.x)
                v2.y = p2(v2.x)
            if abs(v1.x - x1_old) < 1e-15 and abs(v2.x - x2_old) < 1e-15:
                break

    # assemble segments, merging consecutive follow edges on one piece
    segs: list[tuple[float, float, Polynomial]] = []
    for i, follow in enumerate(edges):
        v1, v2 = hull[i], hull[i + 1]
        if v2.x - v1.x <= 1e-15:
            continue
        if follow is not None:
            poly = u.pieces[follow]
            if segs and segs[-1][2] is poly and abs(segs[-1][1] - v1.x) <= 1e-15:
                segs[-1] = (segs[-1][0], v2.x, poly)
                continue
            segs.append((v1.x, v2.x, poly))
        else:
            segs.append((v1.x, v2.x, Polynomial.through(v1.x, v1.y, v2.x, v2.y)))

    bps = [s[0] for s in segs] + [1.0]
    bps[0] = 0.0
    pieces = [s[2] for s in segs]
    vals = [pieces[0](0.0)]
    for k in range(1, len(bps) - 1):
        vals.append(max(pieces[k - 1](bps[k]), pieces[k](bps[k])))
    vals.append(pieces[-1](1.0))
    return PiecewiseFn(bps, pieces, vals)


def contact_gap(u: PiecewiseFn, cav: PiecewiseFn | None = None) -> PiecewiseFn:
    if cav is None:
        cav = concave_envelope(u)
    return cav - u


def persuasion_beliefs(
    u: PiecewiseFn, p0: float, cav: PiecewiseFn | None = None, tol: float = CONTACT_TOL
) -> tuple[BeliefPair, float]:
    """Beliefs induced by the optimal static split of ``p0`` and its value."""
    if not (0.0 <= p0 <= 1.0):
        raise ValueError(f"prior must lie in [0, 1], got {p0!r}")
    if cav is None:
        cav = concave_envelope(u)
    gap = cav - u
    hit = containing_interval(gap.positive_intervals(tol), p0)
    pair = BeliefPair(*hit) if hit else BeliefPair(p0, p0)
    return pair, float(cav(p0))


def brute_force_envelope(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Upper concave hull of sampled points, evaluated back on ``xs``.

    Independent grid oracle for tests.
    """
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]
    hx, hy = [], []
    for x, y in zip(xs, ys):
        while len(hx) >= 2 and (hx[-1] - hx[-2]) * (y - hy[-2]) - (hy[-1] - hy[-2]) * (x - hx[-2]) >= 0:
            hx.pop()
            hy.pop()
        hx.append(x)
        hy.append(y)
    out = np.interp(xs, hx, hy)
    res = np.empty_like(out)
    res[order] = out
    return res
