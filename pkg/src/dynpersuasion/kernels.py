"""Hot loops: policy iteration for the discretised HJB and belief-path simulation.

Every kernel exists twice: a numba version (``*_nb``) and a pure-numpy
version (``*_np``). :func:`policy_iteration` and :func:`simulate_interval`
dispatch on ``backend``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import solve_banded

from ._accel import njit, prange, resolve_backend

# second differences below this multiple of the local magnitude are roundoff
D2_NOISE = 64.0 * np.finfo(float).eps
MAX_FLIPS = 4

_MASK64 = (1 << 64) - 1
_GAMMA_INT = 0x9E3779B97F4A7C15
_GAMMA = np.uint64(_GAMMA_INT)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO53_INV = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------- FD solver


@njit(cache=True)
def _thomas_nb(a, b, c, d):
    n = d.size
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = c[0] / b[0]
    dp[0] = d[0] / b[0]
    for i in range(1, n):
        m = b[i] - a[i] * cp[i - 1]
        cp[i] = c[i] / m
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


@njit(cache=True)
def _policy_iteration_nb(u, k, fund0, max_iter):
    n = u.size
    fund = fund0.copy()
    flips = np.zeros(n, dtype=np.int64)
    a = np.zeros(n)
    b = np.ones(n)
    c = np.zeros(n)
    w = u.copy()
    for it in range(max_iter):
        for i in range(n):
            if fund[i]:
                a[i] = -k[i]
                b[i] = 1.0 + 2.0 * k[i]
                c[i] = -k[i]
            else:
                a[i] = 0.0
                b[i] = 1.0
                c[i] = 0.0
        w = _thomas_nb(a, b, c, u)
        changed = False
        for i in range(1, n - 1):
            d2 = w[i - 1] - 2.0 * w[i] + w[i + 1]
            noise = D2_NOISE * (abs(w[i - 1]) + 2.0 * abs(w[i]) + abs(w[i + 1]))
            want = d2 > noise or flips[i] >= MAX_FLIPS
            if want != fund[i]:
                fund[i] = want
                flips[i] += 1
                changed = True
        if not changed:
            return w, fund, it + 1
    return w, fund, -1


def _policy_iteration_np(u, k, fund0, max_iter):
    n = u.size
    fund = fund0.copy()
    flips = np.zeros(n, dtype=np.int64)
    w = u.copy()
    ab = np.zeros((3, n))
    for it in range(max_iter):
        # rows scaled to unit diagonal so LAPACK never pivots; stop rows stay exact
        diag = 1.0 + 2.0 * np.where(fund, k, 0.0)
        off = np.where(fund, k, 0.0) / diag
        ab[0, 1:] = -off[:-1]  # super-diagonal
        ab[1, :] = 1.0
        ab[2, :-1] = -off[1:]  # sub-diagonal
        w = solve_banded((1, 1), ab, u / diag)
        d2 = w[:-2] - 2.0 * w[1:-1] + w[2:]
        noise = D2_NOISE * (np.abs(w[:-2]) + 2.0 * np.abs(w[1:-1]) + np.abs(w[2:]))
        want = (d2 > noise) | (flips[1:-1] >= MAX_FLIPS)
        ch = want != fund[1:-1]
        if not ch.any():
            return w, fund, it + 1
        flips[1:-1] += ch
        fund[1:-1] = want
    return w, fund, -1


def policy_iteration(u: np.ndarray, k: np.ndarray, max_iter: int, fund0: np.ndarray | None = None,
                     backend: str | None = None):
    """Howard iteration for ``w_i = u_i + k_i * max(0, w_{i-1} - 2 w_i + w_{i+1})``.

    ``u[0]`` and ``u[-1]`` are Dirichlet data; ``k[i] = c(p_i) / h**2``.
    ``fund0`` is the starting policy (default: fund every interior node).
    A node whose curvature sits at roundoff level can flip back and forth
    forever; after ``MAX_FLIPS`` switches it is pinned to funding, which
    solves its row to within the noise floor either way.
    Returns ``(w, fund, iterations)`` with ``iterations == -1`` on failure.
    """
    u = np.ascontiguousarray(u, dtype=float)
    k = np.ascontiguousarray(k, dtype=float)
    if fund0 is None:
        fund0 = np.ones(u.size, dtype=np.bool_)
    fund0 = np.array(fund0, dtype=np.bool_)
    fund0[0] = fund0[-1] = False
    if resolve_backend(backend) == "numba":
        return _policy_iteration_nb(u, k, fund0, max_iter)
    return _policy_iteration_np(u, k, fund0, max_iter)


# ------------------------------------------------------ counter-based normals


def _mix64_np(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def _mix64_nb(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def _path_key_nb(seed, path):
    return _mix64_nb(seed ^ _mix64_nb(np.uint64(path + 1) * _GAMMA))


@njit(cache=True)
def _normal_nb(key, step):
    h1 = _mix64_nb(key + np.uint64(2 * step + 1) * _GAMMA)
    h2 = _mix64_nb(key + np.uint64(2 * step + 2) * _GAMMA)
    u1 = (float(h1 >> _S11) + 1.0) * _TWO53_INV
    u2 = float(h2 >> _S11) * _TWO53_INV
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def path_keys_np(seed: int, paths: np.ndarray) -> np.ndarray:
    paths = np.asarray(paths, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64_np(np.uint64(seed) ^ _mix64_np((paths + _ONE) * _GAMMA))


def normals_np(keys: np.ndarray, step: int) -> np.ndarray:
    """Standard normals keyed by (seed, path, step); matches the numba kernel."""
    off1 = np.uint64(((2 * step + 1) * _GAMMA_INT) & _MASK64)
    off2 = np.uint64(((2 * step + 2) * _GAMMA_INT) & _MASK64)
    with np.errstate(over="ignore"):
        h1 = _mix64_np(keys + off1)
        h2 = _mix64_np(keys + off2)
    u1 = ((h1 >> _S11).astype(float) + 1.0) * _TWO53_INV
    u2 = (h2 >> _S11).astype(float) * _TWO53_INV
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


@njit(cache=True)
def normals_nb(seed, paths, step):
    out = np.empty(paths.size)
    for i in range(paths.size):
        out[i] = _normal_nb(_path_key_nb(seed, paths[i]), step)
    return out


# ----------------------------------------------------------------- simulation


@njit(cache=True)
def _u_eval_nb(p, bps, coeffs, pvals):
    n = bps.size
    for j in range(n):
        if abs(p - bps[j]) <= 1e-12:
            return pvals[j]
    k = 0
    while k < n - 2 and p > bps[k + 1]:
        k += 1
    acc = 0.0
    for j in range(coeffs.shape[1] - 1, -1, -1):
        acc = acc * p + coeffs[k, j]
    return acc


@njit(cache=True, parallel=True)
def _simulate_nb(p0, lo, hi, sig_inv, dt, r, n_steps, seed, n_paths,
                 bps, coeffs, pvals, store_n, store_every, store_len):
    terminal = np.empty(n_paths)
    side = np.zeros(n_paths, dtype=np.int8)
    steps = np.zeros(n_paths, dtype=np.int64)
    payoff = np.empty(n_paths)
    clamps = np.zeros(n_paths, dtype=np.int64)
    stored = np.full((store_n, store_len), np.nan)
    sqdt = math.sqrt(dt)
    decay = math.exp(-r * dt)
    for i in prange(n_paths):
        key = _path_key_nb(seed, i)
        p = p0
        disc = 1.0
        acc = 0.0
        s_final = n_steps
        sd = 0
        nclamp = 0
        for s in range(n_steps):
            if i < store_n and s % store_every == 0:
                slot = s // store_every
                if slot < store_len - 1:
                    stored[i, slot] = p
            acc += r * disc * _u_eval_nb(p, bps, coeffs, pvals) * dt
            pn = p + p * (1.0 - p) * sig_inv * sqdt * _normal_nb(key, s)
            if pn < 0.0:
                pn = 0.0
                nclamp += 1
            elif pn > 1.0:
                pn = 1.0
                nclamp += 1
            disc *= decay
            if pn <= lo:
                p = lo
                sd = -1
                s_final = s + 1
                break
            if pn >= hi:
                p = hi
                sd = 1
                s_final = s + 1
                break
            p = pn
        acc += disc * _u_eval_nb(p, bps, coeffs, pvals)
        if i < store_n:
            slot = min(s_final // store_every + 1, store_len - 1)
            stored[i, slot] = p
        terminal[i] = p
        side[i] = sd
        steps[i] = s_final
        payoff[i] = acc
        clamps[i] = nclamp
    return terminal, side, steps, payoff, clamps, stored


def _simulate_np(p0, lo, hi, sig_inv, dt, r, n_steps, seed, n_paths,
                 u_eval, store_n, store_every, store_len):
    terminal = np.full(n_paths, float(p0))
    side = np.zeros(n_paths, dtype=np.int8)
    steps = np.full(n_paths, n_steps, dtype=np.int64)
    payoff = np.zeros(n_paths)
    clamps = np.zeros(n_paths, dtype=np.int64)
    stored = np.full((store_n, store_len), np.nan)
    idx = np.arange(n_paths)
    keys = path_keys_np(seed, idx)
    p = terminal.copy()
    sqdt = math.sqrt(dt)
    decay = math.exp(-r * dt)
    disc = 1.0
    for s in range(n_steps):
        if idx.size == 0:
            break
        if store_n and s % store_every == 0 and s // store_every < store_len - 1:
            m = idx < store_n
            stored[idx[m], s // store_every] = p[m]
        payoff[idx] += r * disc * u_eval(p) * dt
        pn = p + p * (1.0 - p) * sig_inv * sqdt * normals_np(keys, s)
        lo_c, hi_c = pn < 0.0, pn > 1.0
        clamps[idx] += lo_c | hi_c
        pn = np.clip(pn, 0.0, 1.0)
        disc *= decay
        down, up = pn <= lo, pn >= hi
        pn[down] = lo
        pn[up] = hi
        done = down | up
        side[idx[down]] = -1
        side[idx[up]] = 1
        steps[idx[done]] = s + 1
        if done.any():
            finished = idx[done]
            payoff[finished] += disc * u_eval(pn[done])
            terminal[finished] = pn[done]
            m = finished < store_n
            for j, pf, sf in zip(finished[m], pn[done][m], steps[finished[m]]):
                stored[j, min(sf // store_every + 1, store_len - 1)] = pf
        keep = ~done
        idx, p, keys = idx[keep], pn[keep], keys[keep]
    if idx.size:
        payoff[idx] += disc * u_eval(p)
        terminal[idx] = p
        m = idx < store_n
        stored[idx[m], min(n_steps // store_every + 1, store_len - 1)] = p[m]
    return terminal, side, steps, payoff, clamps, stored


def simulate_interval(p0, lo, hi, sigma, dt, r, n_steps, seed, n_paths, u,
                      store_n=0, store_every=1, store_len=2, backend=None):
    """Run ``n_paths`` Euler paths from ``p0`` until they leave ``(lo, hi)``.

    ``u`` is a :class:`~dynpersuasion.piecewise.PiecewiseFn` used for the
    discounted payoff. Returns per-path arrays
    ``(terminal, side, steps, payoff, clamps, stored)``.
    """
    seed = np.uint64(int(seed) & _MASK64)
    store_n = min(int(store_n), int(n_paths))
    if resolve_backend(backend) == "numba":
        width = max(p.degree for p in u.pieces) + 1
        coeffs = np.zeros((len(u.pieces), width))
        for j, poly in enumerate(u.pieces):
            coeffs[j, : poly.degree + 1] = poly.coeffs
        return _simulate_nb(float(p0), float(lo), float(hi), 1.0 / sigma, float(dt), float(r),
                            int(n_steps), seed, int(n_paths),
                            np.asarray(u.breakpoints), coeffs, np.asarray(u.point_values),
                            store_n, int(store_every), int(store_len))
    return _simulate_np(float(p0), float(lo), float(hi), 1.0 / sigma, float(dt), float(r),
                        int(n_steps), seed, int(n_paths), u.eval_usc,
                        store_n, int(store_every), int(store_len))
