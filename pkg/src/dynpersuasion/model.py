"""Game description, the agent's myopic strategy and the induced flow payoff."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping

import numpy as np

from .piecewise import PiecewiseFn
from .polynomial import Polynomial


class ModelValidationError(ValueError):
    """A model violates one of its invariants; ``field`` names the culprit."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ModelSpec:
    actions: tuple[str, ...]
    principal_payoff: Mapping[str, Polynomial]
    agent_payoff: Mapping[str, Polynomial]
    r: float
    sigma: float
    p0: float
    p_a0: float | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(str(a) for a in self.actions))
        if self.p_a0 is None:
            object.__setattr__(self, "p_a0", self.p0)
        object.__setattr__(self, "principal_payoff", dict(self.principal_payoff))
        object.__setattr__(self, "agent_payoff", dict(self.agent_payoff))
        self.validate()

    def validate(self):
        if len(self.actions) < 1:
            raise ModelValidationError("actions", "need at least one action")
        if len(set(self.actions)) != len(self.actions):
            raise ModelValidationError("actions", "duplicate action labels")
        for a in self.actions:
            if a not in self.principal_payoff:
                raise ModelValidationError("f_P", f"missing payoff for action {a!r}")
            if a not in self.agent_payoff:
                raise ModelValidationError("f_a", f"missing payoff for action {a!r}")
        for name, table in (("f_P", self.principal_payoff), ("f_a", self.agent_payoff)):
            extra = set(table) - set(self.actions)
            if extra:
                raise ModelValidationError(name, f"payoff for unknown action(s) {sorted(extra)}")
        if not (math.isfinite(self.r) and self.r > 0):
            raise ModelValidationError("r", f"must be positive, got {self.r!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ModelValidationError("sigma", f"must be positive, got {self.sigma!r}")
        for name in ("p0", "p_a0"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ModelValidationError(name, f"must lie in (0, 1), got {v!r}")

    @property
    def r_sigma2(self) -> float:
        return self.r * self.sigma**2

    @property
    def common_prior(self) -> bool:
        return self.p0 == self.p_a0

    def with_params(self, **changes) -> "ModelSpec":
        kw = dict(
            actions=self.actions,
            principal_payoff=self.principal_payoff,
            agent_payoff=self.agent_payoff,
            r=self.r,
            sigma=self.sigma,
            p0=self.p0,
            p_a0=self.p_a0,
            name=self.name,
        )
        kw.update(changes)
        return ModelSpec(**kw)


def _odds_ratio(p0: float, p_a0: float) -> float:
    for name, v in (("p0", p0), ("p_a0", p_a0)):
        if not (0.0 < v < 1.0):
            raise ValueError(f"{name} must lie strictly inside (0, 1), got {v!r}")
    return (p0 / (1.0 - p0)) / (p_a0 / (1.0 - p_a0))


def phi_map(p, p0: float, p_a0: float):
    """Agent's belief when the principal's is ``p``, given the two priors."""
    d = _odds_ratio(p0, p_a0)
    if np.ndim(p) == 0:
        p = float(p)
        if not (0.0 <= p <= 1.0):
            raise ValueError(f"belief must lie in [0, 1], got {p!r}")
        if d == 1.0:
            return p
        return p / (p + (1.0 - p) * d)
    p = np.asarray(p, dtype=float)
    if d == 1.0:
        return p.copy()
    return p / (p + (1.0 - p) * d)


def phi_inverse(q, p0: float, p_a0: float):
    """Principal's belief corresponding to agent belief ``q``."""
    return phi_map(q, p_a0, p0)


@dataclass(frozen=True)
class AgentStrategy:
    """Pure regular myopic strategy.

    ``breakpoints`` are in the principal's belief coordinate;
    ``agent_breakpoints`` are the same points seen by the agent.
    ``interval_actions[k]`` is played on the k-th open interval and
    ``point_actions[k]`` exactly at ``breakpoints[k]``.
    """

    breakpoints: tuple[float, ...]
    agent_breakpoints: tuple[float, ...]
    interval_actions: tuple[str, ...]
    point_actions: tuple[str, ...]

    def action_at(self, p: float) -> str:
        for k, b in enumerate(self.breakpoints):
            if abs(p - b) <= 1e-12:
                return self.point_actions[k]
        k = int(np.searchsorted(self.breakpoints, p))
        return self.interval_actions[k]


def _argmax_actions(payoffs: Mapping[str, Polynomial], actions, q: float, tol: float = 1e-12):
    vals = {a: payoffs[a](q) for a in actions}
    best = max(vals.values())
    scale = 1.0 + abs(best)
    return [a for a in actions if vals[a] >= best - tol * scale]


def _principal_preferred(spec: ModelSpec, candidates, p: float) -> str:
    # first listed wins exact ties so results are deterministic
    best = candidates[0]
    for a in candidates[1:]:
        if spec.principal_payoff[a](p) > spec.principal_payoff[best](p):
            best = a
    return best


def myopic_regular_strategy(spec: ModelSpec) -> AgentStrategy:
    """Myopic best response with principal-preferred tie-breaking.

    Candidate switch points are the strict crossings of pairwise agent-payoff
    differences, found in the agent's belief coordinate, plus the crossings
    of principal payoffs (these matter where the agent is indifferent on a
    stretch). Only those where the played action changes are kept.
    """
    acts = spec.actions
    cands = set()
    for a, b in combinations(acts, 2):
        diff = spec.agent_payoff[a] - spec.agent_payoff[b]
        cands.update(diff.roots_in(0.0, 1.0))
        # where the agent is indifferent on a stretch, the tie-break flips at f_P crossings
        for p in (spec.principal_payoff[a] - spec.principal_payoff[b]).roots_in(0.0, 1.0):
            cands.add(float(phi_map(p, spec.p0, spec.p_a0)))
    cands = sorted(c for c in cands if 0.0 < c < 1.0)
    edges = [0.0] + cands + [1.0]

    def to_principal(q):
        return phi_inverse(q, spec.p0, spec.p_a0)

    interval_actions = []
    for lo, hi in zip(edges, edges[1:]):
        qm = 0.5 * (lo + hi)
        best = _argmax_actions(spec.agent_payoff, acts, qm)
        interval_actions.append(_principal_preferred(spec, best, to_principal(qm)))

    agent_bps, bps, ia, pa = [], [], [interval_actions[0]], []
    for k, q in enumerate(cands):
        if interval_actions[k + 1] == ia[-1]:
            continue
        p = to_principal(q)
        best = _argmax_actions(spec.agent_payoff, acts, q, tol=1e-9)
        agent_bps.append(q)
        bps.append(p)
        pa.append(_principal_preferred(spec, best, p))
        ia.append(interval_actions[k + 1])
    return AgentStrategy(tuple(bps), tuple(agent_bps), tuple(ia), tuple(pa))


def induced_flow_payoff(spec: ModelSpec, strat: AgentStrategy | None = None) -> PiecewiseFn:
    """Principal's flow payoff ``u`` in her own belief coordinate."""
    if strat is None:
        strat = myopic_regular_strategy(spec)
    fP = spec.principal_payoff
    pieces = [fP[a] for a in strat.interval_actions]
    bps = [0.0] + list(strat.breakpoints) + [1.0]
    vals = [pieces[0](0.0)]
    for k, b in enumerate(strat.breakpoints):
        own = fP[strat.point_actions[k]](b)
        # the point action is agent-optimal at b, as are both neighbours, so it dominates
        vals.append(max(own, pieces[k](b), pieces[k + 1](b)))
    vals.append(pieces[-1](1.0))
    return PiecewiseFn(bps, pieces, vals)


def brute_force_payoff(spec: ModelSpec, p: np.ndarray) -> np.ndarray:
    """Independent grid evaluation of ``u``: max of f_P over agent-optimal actions."""
    q = phi_map(np.asarray(p, dtype=float), spec.p0, spec.p_a0)
    fa = np.array([spec.agent_payoff[a](q) for a in spec.actions])
    fp = np.array([spec.principal_payoff[a](p) for a in spec.actions])
    best = fa.max(axis=0)
    # exact ties only: equal polynomials evaluate identically, isolated touches are measure zero
    opt = fa >= best
    return np.where(opt, fp, -np.inf).max(axis=0)
