"""Equilibrium objects built on the value function, plus sweep and prior checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .envelope import BeliefPair, concave_envelope, persuasion_beliefs
from .hjb_closed import ClosedFormValue, solve_closed_form
from .hjb_fd import DEFAULT_N, GridValue, default_tol, funding_region_fd, solve_fd
from .model import ModelSpec, induced_flow_payoff
from .piecewise import PiecewiseFn, containing_interval
from .polynomial import Polynomial, sign_change_roots

SANDWICH_TOL = 1e-6
MONO_TOL = 1e-6
SUP_GRID = 10001


class NotApplicable(ValueError):
    def __init__(self, condition: str, message: str):
        super().__init__(f"{condition}: {message}")
        self.condition = condition


class NotSingleCrossing(ValueError):
    def __init__(self, pair: tuple[str, str], message: str):
        super().__init__(f"{pair[0]} vs {pair[1]}: {message}")
        self.pair = pair


def solve_value(u: PiecewiseFn, r_sigma2: float, method: str = "auto", n_points: int = DEFAULT_N,
                backend: str | None = None, cav: PiecewiseFn | None = None):
    """Closed form for affine ``u``, FD otherwise (``method='auto'``)."""
    if method == "auto":
        method = "closed" if u.is_affine() else "fd"
    if method == "closed":
        return solve_closed_form(u, r_sigma2, cav=cav)
    if method == "fd":
        return solve_fd(u, r_sigma2, n_points, backend=backend)
    raise ValueError(f"unknown method {method!r}; use closed, fd or auto")


def _tol_for(u: PiecewiseFn, tol: float | None) -> float:
    if tol is not None:
        return tol
    return default_tol(np.asarray(u.eval_usc(np.linspace(0.0, 1.0, 1001))))


@dataclass
class Policy:
    """Fund at full rate on the open intervals, nothing elsewhere."""

    intervals: list[tuple[float, float]]

    def __call__(self, p) -> float:
        return 1.0 if containing_interval(self.intervals, float(p)) else 0.0

    def fund_mask(self, p: np.ndarray) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape, dtype=bool)
        for lo, hi in self.intervals:
            out |= (p > lo) & (p < hi)
        return out

    @classmethod
    def never(cls) -> "Policy":
        return cls([])


def best_reply_policy(v, u: PiecewiseFn, tol: float | None = None) -> Policy:
    """Fund exactly where ``v > u``.

    For a closed-form value this is the funding set of its configuration,
    where ``v - u`` is strictly positive by construction. For a grid value
    the nodes with ``v - u > tol`` (plus the converged discrete policy) are used.
    """
    if isinstance(v, ClosedFormValue):
        return Policy(list(v.funding_region))
    if isinstance(v, GridValue):
        return Policy(funding_region_fd(v, _tol_for(u, tol)))
    raise TypeError(f"unsupported value type {type(v).__name__}")


def long_run_beliefs(v, u: PiecewiseFn, p0: float, tol: float | None = None,
                     policy: Policy | None = None) -> tuple[BeliefPair, float]:
    """``(p-, p+)`` and the probability ``gamma`` of ending at ``p-``.

    When ``p0`` is already a contact point the pair collapses and gamma is 1.
    """
    if not (0.0 <= p0 <= 1.0):
        raise ValueError(f"prior must lie in [0, 1], got {p0!r}")
    if policy is None:
        policy = best_reply_policy(v, u, tol)
    hit = containing_interval(policy.intervals, p0)
    if hit is None:
        return BeliefPair(p0, p0), 1.0
    lo, hi = hit
    return BeliefPair(lo, hi), (hi - p0) / (hi - lo)


def value_at(v, p: float) -> float:
    return float(v(p))


def sup_gap(v, cav: PiecewiseFn, u: PiecewiseFn | None = None) -> float:
    """sup |cav u - v| on the verification grid (or the FD grid)."""
    if isinstance(v, GridValue):
        return float(np.abs(cav.eval_usc(v.grid) - v.values).max())
    grid = np.linspace(0.0, 1.0, SUP_GRID)
    if u is not None:
        grid = np.union1d(grid, u.breakpoints)
    return float(np.abs(cav.eval_usc(grid) - v(grid)).max())


def weakly_convex_stop_set(u: PiecewiseFn, funding: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Open intervals of the stopping region on which ``u`` is weakly convex.

    Any funding rule is optimal there, so the best reply is not unique on it.
    """
    b = u.breakpoints
    stop = []
    cursor = 0.0
    for lo, hi in sorted(funding):
        if lo > cursor:
            stop.append((cursor, lo))
        cursor = max(cursor, hi)
    if cursor < 1.0:
        stop.append((cursor, 1.0))
    out: list[tuple[float, float]] = []
    for slo, shi in stop:
        for k, poly in enumerate(u.pieces):
            lo, hi = max(slo, b[k]), min(shi, b[k + 1])
            if hi <= lo:
                continue
            d2 = poly.deriv(2)
            cuts = [lo] + [x for x in sign_change_roots(d2, lo, hi) if lo < x < hi] + [hi]
            for a, c in zip(cuts, cuts[1:]):
                if d2(0.5 * (a + c)) >= -1e-12:
                    if out and abs(out[-1][1] - a) <= 1e-12:
                        out[-1] = (out[-1][0], c)
                    else:
                        out.append((a, c))
    return out


def _knife_edge(v, u: PiecewiseFn, pair: BeliefPair, tol: float) -> list[str]:
    """Reasons why the long-run beliefs sit on a near-indifference."""
    reasons = []
    if pair.lower == pair.upper:
        return reasons
    h = v.h if isinstance(v, GridValue) else 1e-4
    delta = max(10 * h, 1e-3)
    for end, side in ((pair.lower, 1.0), (pair.upper, -1.0)):
        if end in (0.0, 1.0):
            continue
        pts = end + side * np.linspace(delta / 10, delta, 10)
        pts = pts[(pts > pair.lower) & (pts < pair.upper)]
        if pts.size and float(np.max(np.asarray(v(pts)) - u.eval_usc(pts))) < 10 * tol:
            reasons.append(f"v - u stays below {10 * tol:.3g} next to {end:.6g}")
    return reasons


@dataclass
class EquilibriumReport:
    r_sigma2: float
    p0: float
    method: str
    funding_region: list[tuple[float, float]]
    long_run: BeliefPair
    persuasion: BeliefPair
    value_at_prior: float
    persuasion_value: float
    gamma: float
    sup_gap: float
    knife_edge: list[str] = field(default_factory=list)
    weakly_convex_stop: list[tuple[float, float]] = field(default_factory=list)
    value: object = field(default=None, repr=False, compare=False)

    def sandwich_ok(self, tol: float = SANDWICH_TOL) -> bool:
        P_lo, P_hi = self.persuasion.as_tuple()
        lo, hi = self.long_run.as_tuple()
        return P_lo <= lo + tol and lo <= self.p0 + tol and self.p0 <= hi + tol and hi <= P_hi + tol

    def to_dict(self) -> dict:
        return {
            "r_sigma2": self.r_sigma2,
            "p0": self.p0,
            "method": self.method,
            "funding_region": [list(iv) for iv in self.funding_region],
            "long_run": list(self.long_run.as_tuple()),
            "persuasion": list(self.persuasion.as_tuple()),
            "value_at_prior": self.value_at_prior,
            "persuasion_value": self.persuasion_value,
            "gamma": self.gamma,
            "sup_gap": self.sup_gap,
            "knife_edge": list(self.knife_edge),
            "weakly_convex_stop": [list(iv) for iv in self.weakly_convex_stop],
        }


def equilibrium_for_u(u: PiecewiseFn, r_sigma2: float, p0: float, method: str = "auto",
                      n_points: int = DEFAULT_N, tol: float | None = None, backend: str | None = None,
                      cav: PiecewiseFn | None = None) -> EquilibriumReport:
    if cav is None:
        cav = concave_envelope(u)
    v = solve_value(u, r_sigma2, method, n_points, backend, cav=cav)
    tol = _tol_for(u, tol)
    policy = best_reply_policy(v, u, tol)
    pair, gamma = long_run_beliefs(v, u, p0, policy=policy)
    P, pval = persuasion_beliefs(u, p0, cav)
    used = "closed" if isinstance(v, ClosedFormValue) else "fd"
    return EquilibriumReport(
        r_sigma2=float(r_sigma2),
        p0=float(p0),
        method=used,
        funding_region=policy.intervals,
        long_run=pair,
        persuasion=P,
        value_at_prior=value_at(v, p0),
        persuasion_value=pval,
        gamma=gamma,
        sup_gap=sup_gap(v, cav, u),
        knife_edge=_knife_edge(v, u, pair, tol),
        weakly_convex_stop=weakly_convex_stop_set(u, policy.intervals),
        value=v,
    )


def compute_equilibrium(model: ModelSpec, r_sigma2: float | None = None, p0: float | None = None,
                        method: str = "auto", n_points: int = DEFAULT_N, tol: float | None = None,
                        backend: str | None = None) -> EquilibriumReport:
    u = induced_flow_payoff(model)
    rs = model.r_sigma2 if r_sigma2 is None else r_sigma2
    return equilibrium_for_u(u, rs, model.p0 if p0 is None else p0, method, n_points, tol, backend)


# ------------------------------------------------------------------- sweeps


@dataclass
class SweepTable:
    rows: list[EquilibriumReport]

    COLUMNS = ("r_sigma2", "p_minus", "p_plus", "P_minus", "P_plus", "value", "sup_gap")

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                (r.r_sigma2, r.long_run.lower, r.long_run.upper, r.persuasion.lower, r.persuasion.upper,
                 r.value_at_prior, r.sup_gap)
                for r in self.rows
            ]
        )

    def column(self, name: str) -> np.ndarray:
        return self.as_array()[:, self.COLUMNS.index(name)]

    def monotone_beliefs(self, tol: float = MONO_TOL) -> bool:
        lo, hi = self.column("p_minus"), self.column("p_plus")
        return bool(np.all(np.diff(lo) <= tol) and np.all(np.diff(hi) >= -tol))

    def monotone_values(self, tol: float = 1e-9) -> bool:
        return bool(np.all(np.diff(self.column("value")) >= -tol))

    def gap_strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.column("sup_gap")) < 0.0))

    def closest_to_persuasion(self) -> bool:
        d = np.abs(self.column("p_minus") - self.column("P_minus")) + np.abs(
            self.column("p_plus") - self.column("P_plus")
        )
        return bool(d[-1] <= d.min() + MONO_TOL)

    def sandwich_ok(self, tol: float = SANDWICH_TOL) -> bool:
        return all(r.sandwich_ok(tol) for r in self.rows)


def sweep(model: ModelSpec, r_sigma2_list: Sequence[float], method: str = "auto", p0: float | None = None,
          n_points: int = DEFAULT_N, tol: float | None = None, backend: str | None = None) -> SweepTable:
    rs = [float(x) for x in r_sigma2_list]
    if len(rs) < 2:
        raise ValueError("sweep needs at least two r_sigma2 values")
    if any(x <= 0 for x in rs):
        raise ValueError("r_sigma2 values must be positive")
    if any(b >= a for a, b in zip(rs, rs[1:])):
        raise ValueError("r_sigma2 values must be strictly decreasing")
    u = induced_flow_payoff(model)
    cav = concave_envelope(u)
    p0 = model.p0 if p0 is None else p0
    rows = [equilibrium_for_u(u, x, p0, method, n_points, tol, backend, cav=cav) for x in rs]
    return SweepTable(rows)


# --------------------------------------------------------- prior disagreement


def _same_poly(a: Polynomial, b: Polynomial, tol: float = 1e-12) -> bool:
    d = a - b
    return all(abs(c) <= tol for c in d.coeffs)


def _check_common_convex(model: ModelSpec):
    for a in model.actions:
        if not _same_poly(model.principal_payoff[a], model.agent_payoff[a]):
            raise NotApplicable("payoff mismatch", f"f_P and f_a differ for action {a!r}")
    for a in model.actions:
        d2 = model.agent_payoff[a].deriv(2)
        lo, _ = d2.min_max_on(0.0, 1.0)
        if lo < -1e-12:
            raise NotApplicable("convexity", f"f({a!r}, .) is not convex on [0, 1]")
    f = model.agent_payoff
    crossing = False
    for a, b in combinations(model.actions, 2):
        lo, hi = (f[a] - f[b]).min_max_on(0.0, 1.0)
        if lo < 0.0 < hi:
            crossing = True
            break
    if not crossing:
        raise NotApplicable("non-degeneracy", "no pair of actions is ranked differently at two beliefs")
    # condition (ii), one best action near each end, holds for polynomial payoffs:
    # pairwise differences have finitely many zeros, so the argmax is eventually constant


@dataclass
class FullInfoReport:
    applicable: bool
    eta_estimate: float | None
    checked_grid: list[tuple[float, bool]]
    eta_bracket: tuple[float, float] | None = None

    def monotone(self) -> bool:
        flags = [f for _, f in sorted(self.checked_grid, reverse=True)]
        return all(not a or b for a, b in zip(flags, flags[1:]))

    def to_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "eta_estimate": self.eta_estimate,
            "eta_bracket": list(self.eta_bracket) if self.eta_bracket else None,
            "checked_grid": [[x, f] for x, f in self.checked_grid],
        }


def is_full_info(model: ModelSpec, r_sigma2: float, method: str = "auto", n_points: int = DEFAULT_N,
                 backend: str | None = None, u: PiecewiseFn | None = None) -> bool:
    """True when the principal funds on all of (0, 1)."""
    if u is None:
        u = induced_flow_payoff(model)
    v = solve_value(u, r_sigma2, method, n_points, backend)
    if isinstance(v, GridValue):
        return bool(np.all(v.gap()[1:-1] > 0.0) and funding_region_fd(v) == [(0.0, 1.0)])
    return v.funding_region == [(0.0, 1.0)]


def full_info_check(model: ModelSpec, r_sigma2_grid: Sequence[float], method: str = "auto",
                    n_points: int = DEFAULT_N, backend: str | None = None, bisect_steps: int = 40) -> FullInfoReport:
    """Scan ``r_sigma2_grid`` for full information and bracket the threshold.

    The threshold estimate comes from bisection in log r_sigma2 between the
    largest full-information grid value and the next larger one.
    """
    _check_common_convex(model)
    u = induced_flow_payoff(model)
    grid = sorted({float(x) for x in r_sigma2_grid}, reverse=True)
    if not grid or grid[-1] <= 0:
        raise ValueError("r_sigma2 grid must be non-empty and positive")
    checked = [(x, is_full_info(model, x, method, n_points, backend, u)) for x in grid]
    good = [x for x, f in checked if f]
    if not good:
        return FullInfoReport(True, None, checked)
    top = max(good)
    above = [x for x, f in checked if x > top]
    if not above:
        return FullInfoReport(True, top, checked, (top, math.inf))
    lo, hi = top, min(above)
    for _ in range(bisect_steps):
        mid = math.sqrt(lo * hi)
        if is_full_info(model, mid, method, n_points, backend, u):
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-10:
            break
    return FullInfoReport(True, lo, checked, (lo, hi))


def check_single_crossing(model: ModelSpec):
    f = model.agent_payoff
    for a, b in combinations(model.actions, 2):
        roots = sign_change_roots(f[a] - f[b], 0.0, 1.0)
        if len(roots) > 1:
            raise NotSingleCrossing((a, b), f"difference changes sign {len(roots)} times on [0, 1]")


def welfare_prior_monotonicity(model: ModelSpec, p_a0_list: Sequence[float], r_sigma2: float | None = None,
                               method: str = "auto", n_points: int = DEFAULT_N,
                               backend: str | None = None) -> list[float]:
    """Principal's value at her prior for each agent prior, in the given order.

    The agent priors must all lie on one side of ``p0``; the list is
    returned in input order so callers can order it towards ``p0``.
    """
    for a in model.actions:
        if not _same_poly(model.principal_payoff[a], model.agent_payoff[a]):
            raise NotApplicable("payoff mismatch", f"f_P and f_a differ for action {a!r}")
    check_single_crossing(model)
    sides = {np.sign(q - model.p0) for q in p_a0_list if q != model.p0}
    if len(sides) > 1:
        raise ValueError("agent priors must all lie on one side of p0")
    rs = model.r_sigma2 if r_sigma2 is None else r_sigma2
    out = []
    for q in p_a0_list:
        m = model.with_params(p_a0=float(q))
        u = induced_flow_payoff(m)
        v = solve_value(u, rs, method, n_points, backend)
        out.append(value_at(v, m.p0))
    return out
