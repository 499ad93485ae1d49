"""Consistency checks run by ``dynpersuasion validate``."""

from __future__ import annotations

import numpy as np

from .envelope import concave_envelope, persuasion_beliefs
from .equilibrium import equilibrium_for_u
from .hjb_closed import solve_closed_form, verify_value
from .hjb_fd import DEFAULT_N, solve_fd
from .model import ModelSpec, brute_force_payoff, induced_flow_payoff, phi_inverse, phi_map

GRID = 10001


def _check(name: str, value: float, limit: float, ok: bool | None = None) -> dict:
    if ok is None:
        ok = bool(value <= limit)
    return {"name": name, "value": float(value), "limit": float(limit), "ok": bool(ok)}


def validate_model(m: ModelSpec, n_points: int = DEFAULT_N, backend: str | None = None) -> dict:
    checks = []
    u = induced_flow_payoff(m)
    p = np.linspace(0.0, 1.0, GRID)
    b = np.asarray(u.breakpoints)
    away = np.min(np.abs(p[:, None] - b[None, :]), axis=1) > 1e-9
    ue = u.eval_usc(p)
    bf = brute_force_payoff(m, p)
    checks.append(_check("u_matches_argmax", float(np.max(np.abs(ue - bf)[away], initial=0.0)), 1e-9))
    at_b = u.eval_usc(b) - brute_force_payoff(m, b)
    checks.append(_check("u_usc_at_breakpoints", float(max(-at_b.min(), 0.0)), 1e-9))

    rt = np.abs(phi_inverse(phi_map(p, m.p0, m.p_a0), m.p0, m.p_a0) - p).max()
    checks.append(_check("phi_round_trip", rt, 1e-12))

    cav = concave_envelope(u)
    ce = cav.eval_usc(p)
    checks.append(_check("cav_majorizes_u", float(max((ue - ce).max(), 0.0)), 1e-9))
    d2 = ce[:-2] - 2 * ce[1:-1] + ce[2:]
    checks.append(_check("cav_concave", float(max(d2.max(), 0.0)), 1e-9))
    ends = max(abs(cav(0.0) - u(0.0)), abs(cav(1.0) - u(1.0)))
    checks.append(_check("cav_endpoints", ends, 1e-12))
    idem = np.abs(concave_envelope(cav).eval_usc(p) - ce).max()
    checks.append(_check("cav_idempotent", float(idem), 1e-10))
    pair, _ = persuasion_beliefs(u, m.p0, cav)
    contact = max(cav(pair.lower) - u(pair.lower), cav(pair.upper) - u(pair.upper))
    checks.append(_check("persuasion_contact", contact, 1e-9))

    gv = solve_fd(u, m.r_sigma2, n_points, backend=backend)
    checks.append(_check("fd_residual", gv.residual, 1e-6))
    checks.append(_check("fd_above_u", float(max((gv.u_grid - gv.values).max(), 0.0)), 1e-9))
    checks.append(_check("fd_below_cav", float(max((gv.values - cav.eval_usc(gv.grid)).max(), 0.0)), 1e-6))
    checks.append(_check("fd_boundary",
                         max(abs(gv.values[0] - gv.u_grid[0]), abs(gv.values[-1] - gv.u_grid[-1])), 0.0))

    if u.is_affine():
        v = solve_closed_form(u, m.r_sigma2, cav=cav)
        rep = verify_value(v, u, cav=cav)
        for key in ("below_u", "above_cav"):
            checks.append(_check(f"closed_{key}", getattr(rep, key), 1e-9))
        for key in ("continuity", "smooth_pasting", "ode_residual", "convex_kink"):
            checks.append(_check(f"closed_{key}", getattr(rep, key), 1e-8))
        margin = rep.convexity_margin
        checks.append(_check("closed_convexity_margin", 0.0 if margin is None else margin, 0.0,
                             ok=margin is None or margin > 0.0))
        gap = float(np.abs(v(gv.grid) - gv.values).max())
        checks.append(_check("closed_vs_fd", gap, 5e-3))

    eq = equilibrium_for_u(u, m.r_sigma2, m.p0, "auto", n_points, None, backend, cav=cav)
    checks.append(_check("sandwich", 0.0, 0.0, ok=eq.sandwich_ok()))
    lo, hi = eq.long_run.as_tuple()
    split = abs(eq.gamma * lo + (1 - eq.gamma) * hi - m.p0) if hi > lo else 0.0
    checks.append(_check("martingale_split", split, 1e-9))
    return {
        "model": m.name,
        "r_sigma2": m.r_sigma2,
        "passed": all(c["ok"] for c in checks),
        "checks": checks,
    }
