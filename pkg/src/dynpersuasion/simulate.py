"""Monte Carlo belief paths under a funding policy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .envelope import BeliefPair
from .equilibrium import Policy
from .kernels import simulate_interval
from .model import ModelSpec, induced_flow_payoff
from .piecewise import PiecewiseFn, containing_interval

NEAR_BOUNDARY = 1e-3
MAX_STORED = 100
STORE_POINTS = 2000


class SimConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-4
    horizon: float | None = None  # defaults to 50 / r
    n_paths: int = 1000
    seed: int = 0
    store_paths: bool = False

    def resolved_horizon(self, r: float) -> float:
        return 50.0 / r if self.horizon is None else float(self.horizon)

    def validate(self, sigma: float, r: float):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise SimConfigError(f"dt must be positive, got {self.dt!r}")
        T = self.resolved_horizon(r)
        if not (T > 0 and math.isfinite(T)):
            raise SimConfigError(f"horizon must be positive, got {T!r}")
        if self.dt > T:
            raise SimConfigError(f"dt={self.dt} exceeds horizon={T}")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise SimConfigError(f"n_paths must be a positive integer, got {self.n_paths!r}")
        if int(self.seed) != self.seed or not (0 <= self.seed < 2**64):
            raise SimConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        # largest diffusion coefficient is 1/(4 sigma) at p = 1/2
        if self.dt / sigma**2 / 16.0 > 0.1:
            raise SimConfigError(f"dt={self.dt} too coarse for sigma={sigma}: need dt/(16 sigma^2) <= 0.1")

    def n_steps(self, r: float) -> int:
        return max(1, int(math.ceil(self.resolved_horizon(r) / self.dt - 1e-9)))


@dataclass
class SimResult:
    p0: float
    interval: tuple[float, float] | None  # funding interval containing p0
    n_paths: int
    n_absorbed_low: int
    n_absorbed_high: int
    n_running: int
    n_running_near_boundary: int
    mean_terminal: float
    se_terminal: float
    mean_discounted_payoff: float
    se_discounted_payoff: float
    absorption_times: dict
    clamp_count: int
    total_steps: int
    dt: float
    horizon: float
    seed: int
    terminal: np.ndarray = field(repr=False)
    steps: np.ndarray = field(repr=False)
    stored: np.ndarray | None = field(default=None, repr=False)
    store_every: int = 1

    @property
    def clamp_fraction(self) -> float:
        return self.clamp_count / max(self.total_steps, 1)

    def summary(self) -> dict:
        return {
            "p0": self.p0,
            "interval": list(self.interval) if self.interval else None,
            "n_paths": self.n_paths,
            "n_absorbed_low": self.n_absorbed_low,
            "n_absorbed_high": self.n_absorbed_high,
            "n_running": self.n_running,
            "n_running_near_boundary": self.n_running_near_boundary,
            "mean_terminal": self.mean_terminal,
            "se_terminal": self.se_terminal,
            "mean_discounted_payoff": self.mean_discounted_payoff,
            "se_discounted_payoff": self.se_discounted_payoff,
            "absorption_times": self.absorption_times,
            "clamp_count": self.clamp_count,
            "total_steps": self.total_steps,
            "clamp_fraction": self.clamp_fraction,
            "dt": self.dt,
            "horizon": self.horizon,
            "seed": self.seed,
        }

    def path_rows(self) -> np.ndarray:
        """Rows ``(path, t, p)`` for the stored paths, ending at each path's stop."""
        if self.stored is None:
            return np.empty((0, 3))
        rows = []
        for i in range(self.stored.shape[0]):
            for j in range(self.stored.shape[1]):
                s = j * self.store_every
                if s >= self.steps[i]:
                    break
                if not np.isnan(self.stored[i, j]):
                    rows.append((i, s * self.dt, self.stored[i, j]))
            rows.append((i, self.steps[i] * self.dt, self.terminal[i]))
        return np.array(rows)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    m = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return m, se


def simulate_paths(model: ModelSpec, policy: Policy, p0: float | None = None, cfg: SimConfig = SimConfig(),
                   u: PiecewiseFn | None = None, backend: str | None = None) -> SimResult:
    """Euler paths of ``dp = sqrt(lambda(p)) p (1-p) / sigma dB`` from ``p0``.

    A path stops the first time it leaves the funding interval it started
    in and is placed on that interval's end, where the continuous path
    would have stopped. Paths that start outside every funding interval
    never move.
    """
    if p0 is None:
        p0 = model.p0
    if not (0.0 <= p0 <= 1.0):
        raise ValueError(f"prior must lie in [0, 1], got {p0!r}")
    cfg.validate(model.sigma, model.r)
    if u is None:
        u = induced_flow_payoff(model)
    n = int(cfg.n_paths)
    n_steps = cfg.n_steps(model.r)
    T = cfg.resolved_horizon(model.r)
    hit = containing_interval(policy.intervals, p0)
    store_n = min(MAX_STORED, n) if cfg.store_paths else 0
    store_every = max(1, n_steps // STORE_POINTS)
    store_len = n_steps // store_every + 2

    if hit is None:
        terminal = np.full(n, float(p0))
        side = np.full(n, -1, dtype=np.int8)
        steps = np.zeros(n, dtype=np.int64)
        payoff = np.full(n, float(u(p0)))
        clamps = np.zeros(n, dtype=np.int64)
        stored = np.full((store_n, store_len), np.nan) if store_n else None
    else:
        terminal, side, steps, payoff, clamps, stored = simulate_interval(
            p0, hit[0], hit[1], model.sigma, cfg.dt, model.r, n_steps, cfg.seed, n, u,
            store_n, store_every, store_len, backend=backend,
        )
        if not store_n:
            stored = None
    side = np.asarray(side)
    running = side == 0
    absorbed = ~running
    near = running & ((terminal < NEAR_BOUNDARY) | (terminal > 1.0 - NEAR_BOUNDARY))
    times = steps[absorbed] * cfg.dt
    if times.size:
        tstats = {
            "count": int(times.size),
            "mean": float(times.mean()),
            "median": float(np.median(times)),
            "min": float(times.min()),
            "max": float(times.max()),
        }
    else:
        tstats = {"count": 0, "mean": None, "median": None, "min": None, "max": None}
    mt, st = _mean_se(terminal)
    mp, sp = _mean_se(payoff)
    return SimResult(
        p0=float(p0),
        interval=hit,
        n_paths=n,
        n_absorbed_low=int(np.sum(side == -1)),
        n_absorbed_high=int(np.sum(side == 1)),
        n_running=int(running.sum()),
        n_running_near_boundary=int(near.sum()),
        mean_terminal=mt,
        se_terminal=st,
        mean_discounted_payoff=mp,
        se_discounted_payoff=sp,
        absorption_times=tstats,
        clamp_count=int(clamps.sum()),
        total_steps=int(steps.sum()),
        dt=cfg.dt,
        horizon=T,
        seed=int(cfg.seed),
        terminal=np.asarray(terminal),
        steps=np.asarray(steps),
        stored=stored,
        store_every=store_every,
    )


def absorption_stats(result: SimResult, expected: BeliefPair) -> dict:
    """z-scores of the high-absorption fraction against the split and of the mean against ``p0``."""
    lo, hi = expected.as_tuple()
    n = result.n_paths
    if hi > lo:
        q = (result.p0 - lo) / (hi - lo)  # probability of ending at hi
        frac = result.n_absorbed_high / n
        se = math.sqrt(q * (1.0 - q) / n)
        z_split = (frac - q) / se if se > 0 else 0.0
    else:
        frac, q, z_split = 0.0, 0.0, 0.0
    if result.se_terminal > 0:
        z_mean = (result.mean_terminal - result.p0) / result.se_terminal
    else:
        z_mean = 0.0
    return {"high_fraction": frac, "expected_high_fraction": q, "z_split": z_split, "z_mean": z_mean}
