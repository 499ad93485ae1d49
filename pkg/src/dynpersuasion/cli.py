"""Command-line driver.

Exit codes: 0 success, 2 invalid input or failed validation, 3 solver
failure, 4 I/O error. Failures print one line ``error code=<name> exit=<n>: ...``
to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .envelope import concave_envelope, persuasion_beliefs
from .equilibrium import (
    NotApplicable,
    NotSingleCrossing,
    Policy,
    compute_equilibrium,
    sweep,
)
from .fixtures import FIXTURES, load_fixture, materialize
from .hjb_closed import NoValidConfiguration, NotAffine, ClosedFormValue, verify_value
from .hjb_fd import DEFAULT_N, NonConvergence, funding_region_fd
from .io import ModelFileError, jsonable, load_model, write_csv, write_json
from .model import ModelValidationError, induced_flow_payoff
from .simulate import SimConfig, SimConfigError, simulate_paths
from .validation import validate_model

OUTPUT_ENV = "DYNPERSUASION_OUTPUT_DIR"

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3
EXIT_IO = 4


class ValidationFailed(RuntimeError):
    pass


# ------------------------------------------------------------ flag parsing


def _positive(s: str) -> float:
    try:
        x = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if not (x > 0 and np.isfinite(x)):
        raise argparse.ArgumentTypeError(f"must be positive, got {s!r}")
    return x


def _belief(s: str) -> float:
    try:
        x = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    if not (0.0 <= x <= 1.0):
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {s!r}")
    return x


def _odd_grid(s: str) -> int:
    try:
        n = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if n < 3 or n % 2 == 0:
        raise argparse.ArgumentTypeError(f"grid size must be odd and >= 3, got {n}")
    return n


def _count(s: str) -> int:
    try:
        n = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _seed(s: str) -> int:
    try:
        n = int(s, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if not (0 <= n < 2**64):
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return n


def _rs_list(s: str) -> list[float]:
    return [_positive(x) for x in s.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dynpersuasion", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def model_args(p, prior=True):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--model", help="model JSON file")
        g.add_argument("--fixture", choices=FIXTURES, help="bundled model")
        p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
        if prior:
            p.add_argument("--prior", type=_belief, help="principal prior (default from model)")

    p = sub.add_parser("envelope", help="u and its concave envelope on a grid")
    model_args(p)
    p.add_argument("--grid", type=_odd_grid, default=1001)

    p = sub.add_parser("solve", help="value function")
    model_args(p, prior=False)
    p.add_argument("--method", choices=("closed", "fd", "auto"), default="auto")
    p.add_argument("--rsigma2", type=_positive)
    p.add_argument("--grid", type=_odd_grid, default=DEFAULT_N)
    p.add_argument("--backend", choices=("numba", "numpy"))

    p = sub.add_parser("equilibrium", help="funding policy and long-run beliefs")
    model_args(p)
    p.add_argument("--method", choices=("closed", "fd", "auto"), default="auto")
    p.add_argument("--rsigma2", type=_positive)
    p.add_argument("--grid", type=_odd_grid, default=DEFAULT_N)
    p.add_argument("--tol", type=_positive, help="contact tolerance for v = u")
    p.add_argument("--backend", choices=("numba", "numpy"))

    p = sub.add_parser("sweep", help="comparative statics over r*sigma^2")
    model_args(p)
    p.add_argument("--rsigma2", type=_rs_list, required=True, help="comma-separated, strictly decreasing")
    p.add_argument("--method", choices=("closed", "fd", "auto"), default="auto")
    p.add_argument("--grid", type=_odd_grid, default=DEFAULT_N)
    p.add_argument("--tol", type=_positive)
    p.add_argument("--backend", choices=("numba", "numpy"))

    p = sub.add_parser("simulate", help="Monte Carlo belief paths under the equilibrium policy")
    model_args(p)
    p.add_argument("--paths", type=_count, default=1000)
    p.add_argument("--dt", type=_positive, default=1e-4)
    p.add_argument("--horizon", type=_positive, help="default 50 / r")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--store-paths", action="store_true", help="write (t, p) for the first 100 paths")
    p.add_argument("--method", choices=("closed", "fd", "auto"), default="auto")
    p.add_argument("--grid", type=_odd_grid, default=DEFAULT_N)
    p.add_argument("--backend", choices=("numba", "numpy"))

    p = sub.add_parser("validate", help="run every consistency check on a model")
    model_args(p, prior=False)
    p.add_argument("--grid", type=_odd_grid, default=DEFAULT_N)
    p.add_argument("--backend", choices=("numba", "numpy"))

    p = sub.add_parser("fixtures", help="write the bundled model files")
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    return ap


# ---------------------------------------------------------------- commands


def _outdir(args) -> Path:
    d = Path(args.out or os.environ.get(OUTPUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _model(args):
    return load_fixture(args.fixture) if args.fixture else load_model(args.model)


def _stem(args) -> str:
    if args.fixture:
        return args.fixture
    return Path(args.model).stem


def cmd_envelope(args) -> dict:
    m = _model(args)
    u = induced_flow_payoff(m)
    cav = concave_envelope(u)
    p = np.linspace(0.0, 1.0, args.grid)
    path = write_csv(_outdir(args) / f"{_stem(args)}_envelope.csv", ("p", "u", "cav_u"),
                     np.column_stack([p, u.eval_usc(p), cav.eval_usc(p)]))
    p0 = m.p0 if args.prior is None else args.prior
    pair, val = persuasion_beliefs(u, p0, cav)
    return {"csv": str(path), "prior": p0, "persuasion": list(pair.as_tuple()), "persuasion_value": val}


def _value_rows(v, u, funding):
    if isinstance(v, ClosedFormValue):
        p = np.linspace(0.0, 1.0, 10001)
        vals = v(p)
    else:
        p = v.grid
        vals = v.values
    pol = Policy(funding)
    return np.column_stack([p, u.eval_usc(p), vals, pol.fund_mask(p).astype(float)])


def cmd_solve(args) -> dict:
    from .equilibrium import solve_value

    m = _model(args)
    u = induced_flow_payoff(m)
    rs = m.r_sigma2 if args.rsigma2 is None else args.rsigma2
    v = solve_value(u, rs, args.method, args.grid, args.backend)
    out = _outdir(args)
    stem = f"{_stem(args)}_value"
    if isinstance(v, ClosedFormValue):
        funding = v.funding_region
        info = {"method": "closed", **v.to_dict(), "verification": verify_value(v, u).to_dict()}
    else:
        funding = funding_region_fd(v)
        info = {
            "method": "fd",
            "r_sigma2": rs,
            "n_points": v.n_points,
            "residual": v.residual,
            "iterations": v.iterations,
            "funding_region": [list(iv) for iv in funding],
        }
    csv = write_csv(out / f"{stem}.csv", ("p", "u", "v", "funding_flag"), _value_rows(v, u, funding))
    js = write_json(out / f"{stem}.json", info)
    return {"csv": str(csv), "json": str(js), "funding_region": [list(iv) for iv in funding]}


def cmd_equilibrium(args) -> dict:
    m = _model(args)
    rep = compute_equilibrium(m, args.rsigma2, args.prior, args.method, args.grid, args.tol, args.backend)
    js = write_json(_outdir(args) / f"{_stem(args)}_equilibrium.json", rep.to_dict())
    return {"json": str(js), **rep.to_dict()}


def cmd_sweep(args) -> dict:
    m = _model(args)
    table = sweep(m, args.rsigma2, args.method, args.prior, args.grid, args.tol, args.backend)
    csv = write_csv(_outdir(args) / f"{_stem(args)}_sweep.csv", table.COLUMNS, table.as_array())
    return {
        "csv": str(csv),
        "monotone_beliefs": table.monotone_beliefs(),
        "monotone_values": table.monotone_values(1e-9 if all(r.method == "closed" for r in table.rows) else 1e-4),
        "gap_strictly_decreasing": table.gap_strictly_decreasing(),
        "sandwich": table.sandwich_ok(),
        "rows": [dict(zip(table.COLUMNS, row)) for row in table.as_array().tolist()],
    }


def cmd_simulate(args) -> dict:
    m = _model(args)
    p0 = m.p0 if args.prior is None else args.prior
    rep = compute_equilibrium(m, None, p0, args.method, args.grid)
    cfg = SimConfig(dt=args.dt, horizon=args.horizon, n_paths=args.paths, seed=args.seed, store_paths=args.store_paths)
    res = simulate_paths(m, Policy(rep.funding_region), p0, cfg, backend=args.backend)
    out = _outdir(args)
    info = {**res.summary(), "long_run": list(rep.long_run.as_tuple()), "gamma": rep.gamma}
    js = write_json(out / f"{_stem(args)}_simulate.json", info)
    result = {"json": str(js), **info}
    if args.store_paths:
        result["paths_csv"] = str(write_csv(out / f"{_stem(args)}_paths.csv", ("path", "t", "p"), res.path_rows()))
    return result


def cmd_validate(args) -> dict:
    m = _model(args)
    report = validate_model(m, n_points=args.grid, backend=args.backend)
    if not report["passed"]:
        failed = [c["name"] for c in report["checks"] if not c["ok"]]
        raise ValidationFailed(f"{len(failed)} check(s) failed: {', '.join(failed)}")
    return report


def cmd_fixtures(args) -> dict:
    paths = materialize(_outdir(args))
    return {"written": [str(p) for p in paths]}


COMMANDS = {
    "envelope": cmd_envelope,
    "solve": cmd_solve,
    "equilibrium": cmd_equilibrium,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "fixtures": cmd_fixtures,
}


def _fail(code: str, status: int, msg: str) -> int:
    text = " ".join(str(msg).split())
    print(f"error code={code} exit={status}: {text}", file=sys.stderr)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = COMMANDS[args.command](args)
    except ValidationFailed as exc:
        return _fail("validation_failed", EXIT_INVALID, exc)
    except (ModelFileError, ModelValidationError, SimConfigError) as exc:
        return _fail("invalid_input", EXIT_INVALID, exc)
    except (NonConvergence, NoValidConfiguration, NotAffine, NotApplicable, NotSingleCrossing) as exc:
        return _fail("solver_failure", EXIT_SOLVER, f"{type(exc).__name__}: {exc}")
    except OSError as exc:
        return _fail("io_error", EXIT_IO, exc)
    except ValueError as exc:
        return _fail("invalid_input", EXIT_INVALID, exc)
    print(json.dumps(jsonable(result), indent=2))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
