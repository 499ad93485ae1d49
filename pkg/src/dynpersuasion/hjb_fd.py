"""Monotone finite-difference solver for ``w = u + c(p) max(0, w'')``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envelope import brute_force_envelope
from .kernels import D2_NOISE, policy_iteration
from .piecewise import PiecewiseFn

DEFAULT_N = 4001


class NonConvergence(RuntimeError):
    pass


def diffusion_coeff(p, r_sigma2: float):
    """c(p) = p^2 (1-p)^2 / (2 r sigma^2)."""
    p = np.asarray(p, dtype=float)
    return p**2 * (1.0 - p) ** 2 / (2.0 * r_sigma2)


def sample_u(u: PiecewiseFn, n_points: int) -> np.ndarray:
    """usc samples of ``u`` with each breakpoint moved to its nearest node."""
    grid = np.linspace(0.0, 1.0, n_points)
    vals = np.asarray(u.eval_usc(grid), dtype=float)
    h = 1.0 / (n_points - 1)
    for b, pv in zip(u.interior_breakpoints, u.point_values[1:-1]):
        i = int(round(b / h))
        vals[i] = pv
    return vals


@dataclass
class GridValue:
    n_points: int
    values: np.ndarray
    u_grid: np.ndarray
    r_sigma2: float
    residual: float
    iterations: int
    policy: np.ndarray  # boolean, True where the last policy funds

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_points)

    @property
    def h(self) -> float:
        return 1.0 / (self.n_points - 1)

    def __call__(self, p):
        return np.interp(p, self.grid, self.values)

    def gap(self) -> np.ndarray:
        return self.values - self.u_grid


def hjb_residual(w: np.ndarray, u: np.ndarray, r_sigma2: float) -> float:
    n = w.size
    p = np.linspace(0.0, 1.0, n)
    h = 1.0 / (n - 1)
    d2 = w[:-2] - 2.0 * w[1:-1] + w[2:]
    noise = D2_NOISE * (np.abs(w[:-2]) + 2.0 * np.abs(w[1:-1]) + np.abs(w[2:]))
    gap = w[1:-1] - u[1:-1]
    res = gap - diffusion_coeff(p[1:-1], r_sigma2) * np.maximum(d2, 0.0) / h**2
    # inside the noise band either branch is an acceptable reading
    flat = np.abs(d2) <= noise
    res = np.where(flat, np.minimum(np.abs(res), np.abs(gap)), res)
    ends = max(abs(w[0] - u[0]), abs(w[-1] - u[-1]))
    return float(max(np.abs(res).max(initial=0.0), ends))


def initial_policy(u_grid: np.ndarray) -> np.ndarray:
    """Fund where the discrete concave hull lies above ``u``.

    The value never exceeds the hull, so this contains the funding set and
    Howard's iterates only need to trim it.
    """
    n = u_grid.size
    cav = brute_force_envelope(np.linspace(0.0, 1.0, n), u_grid)
    fund = cav - u_grid > D2_NOISE * (1.0 + np.abs(u_grid))
    fund[0] = fund[-1] = False
    return fund


def solve_fd(u: PiecewiseFn, r_sigma2: float, n_points: int = DEFAULT_N, backend: str | None = None) -> GridValue:
    """Policy iteration on the uniform grid ``p_i = i / (n_points - 1)``."""
    if not (r_sigma2 > 0 and np.isfinite(r_sigma2)):
        raise ValueError(f"r_sigma2 must be positive, got {r_sigma2!r}")
    n_points = int(n_points)
    if n_points < 3 or n_points % 2 == 0:
        raise ValueError(f"n_points must be odd and >= 3, got {n_points}")
    ug = sample_u(u, n_points)
    p = np.linspace(0.0, 1.0, n_points)
    h = 1.0 / (n_points - 1)
    k = diffusion_coeff(p, r_sigma2) / h**2
    max_iter = 10 * n_points
    w, fund, it = policy_iteration(ug, k, max_iter, initial_policy(ug), backend=backend)
    if it < 0:
        raise NonConvergence(f"policy iteration did not settle within {max_iter} sweeps")
    w = np.maximum(w, ug)
    return GridValue(n_points, w, ug, float(r_sigma2), hjb_residual(w, ug, r_sigma2), int(it), np.asarray(fund))


def default_tol(u_grid: np.ndarray) -> float:
    rng = float(u_grid.max() - u_grid.min())
    return 1e-6 * (rng if rng > 0 else 1.0)


def funding_region_fd(gv: GridValue, tol: float | None = None, use_policy: bool = True) -> list[tuple[float, float]]:
    """Open intervals spanned by maximal runs of funded nodes.

    A node is funded when ``v - u > tol``. With ``use_policy`` the nodes
    where the converged discrete policy funds are added too; near 0 and 1
    the gap decays like a power of the distance and falls below any fixed
    tolerance long before the true free boundary.
    """
    if tol is None:
        tol = default_tol(gv.u_grid)
    if tol <= 0:
        raise ValueError("tol must be positive")
    on = gv.gap() > tol
    if use_policy:
        on |= gv.policy.astype(bool) & (gv.gap() > 0.0)
    p = gv.grid
    out = []
    i, n = 0, gv.n_points
    while i < n:
        if not on[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and on[j + 1]:
            j += 1
        out.append((float(p[max(i - 1, 0)]), float(p[min(j + 1, n - 1)])))
        i = j + 1
    return out
