"""Model files, CSV grids and JSON reports."""

from __future__ import annotations

import json
import math
import os
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .model import ModelSpec, ModelValidationError
from .polynomial import Polynomial

CSV_FMT = "%.17g"


class ModelFileError(ValueError):
    """Unparseable or malformed model file; carries line and field when known."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.field = field


def _line_of(text: str | None, key: str) -> int | None:
    if not text:
        return None
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def parse_number(x: Any, field: str, text: str | None = None) -> float:
    """Number or a decimal / fraction string such as ``"14/3"``, rounded once."""
    if isinstance(x, bool):
        raise ModelFileError(f"expected a number, got {x!r}", _line_of(text, field), field)
    if isinstance(x, (int, float)):
        val = float(x)
    elif isinstance(x, str):
        try:
            val = float(Fraction(x.strip()))
        except (ValueError, ZeroDivisionError):
            raise ModelFileError(f"cannot parse {x!r} as a number", _line_of(text, field), field) from None
    else:
        raise ModelFileError(f"expected a number, got {type(x).__name__}", _line_of(text, field), field)
    if not math.isfinite(val):
        raise ModelFileError(f"non-finite value {x!r}", _line_of(text, field), field)
    return val


def _payoff_table(raw: Any, field: str, text: str | None) -> dict[str, Polynomial]:
    if not isinstance(raw, dict):
        raise ModelFileError("expected an object mapping action -> coefficients", _line_of(text, field), field)
    out = {}
    for action, coeffs in raw.items():
        name = f"{field}.{action}"
        if not isinstance(coeffs, list):
            raise ModelFileError("expected a list of coefficients", _line_of(text, field), name)
        try:
            out[str(action)] = Polynomial([parse_number(c, field, text) for c in coeffs])
        except ModelFileError:
            raise
        except ValueError as exc:
            raise ModelFileError(str(exc), _line_of(text, field), name) from None
    return out


def model_from_dict(d: dict, text: str | None = None) -> ModelSpec:
    if not isinstance(d, dict):
        raise ModelFileError("top level must be a JSON object")
    for key in ("actions", "f_P", "f_a", "r", "sigma", "p0"):
        if key not in d:
            raise ModelFileError("missing required field", None, key)
    known = {"actions", "f_P", "f_a", "r", "sigma", "p0", "p_a0", "name"}
    extra = sorted(set(d) - known)
    if extra:
        raise ModelFileError(f"unknown field(s) {extra}", _line_of(text, extra[0]), extra[0])
    actions = d["actions"]
    if not isinstance(actions, list) or not all(isinstance(a, (str, int)) for a in actions):
        raise ModelFileError("expected a list of action labels", _line_of(text, "actions"), "actions")
    p_a0 = d.get("p_a0")
    kw = dict(
        actions=[str(a) for a in actions],
        principal_payoff=_payoff_table(d["f_P"], "f_P", text),
        agent_payoff=_payoff_table(d["f_a"], "f_a", text),
        r=parse_number(d["r"], "r", text),
        sigma=parse_number(d["sigma"], "sigma", text),
        p0=parse_number(d["p0"], "p0", text),
        p_a0=None if p_a0 is None else parse_number(p_a0, "p_a0", text),
        name=str(d.get("name", "")),
    )
    try:
        return ModelSpec(**kw)
    except ModelValidationError as exc:
        msg = str(exc).split(": ", 1)[-1]
        line = _line_of(text, exc.field)
        raise ModelValidationError(exc.field, msg if line is None else f"{msg} (line {line})") from None


def load_model(path: str | os.PathLike) -> ModelSpec:
    """Read a model file; ``p_a0`` defaults to ``p0``."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(exc.msg, exc.lineno) from None
    return model_from_dict(d, text)


def model_to_dict(spec: ModelSpec) -> dict:
    d = {
        "name": spec.name,
        "actions": list(spec.actions),
        "f_P": {a: list(spec.principal_payoff[a].coeffs) for a in spec.actions},
        "f_a": {a: list(spec.agent_payoff[a].coeffs) for a in spec.actions},
        "r": spec.r,
        "sigma": spec.sigma,
        "p0": spec.p0,
    }
    if not spec.common_prior:
        d["p_a0"] = spec.p_a0
    return d


def dump_model(spec: ModelSpec, path: str | os.PathLike):
    write_json(path, model_to_dict(spec))


def jsonable(obj):
    # strict JSON has no inf/nan
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, (np.floating, np.integer)):
        return jsonable(obj.item())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    return obj


def write_json(path: str | os.PathLike, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(obj), indent=2, allow_nan=False) + "\n", encoding="utf-8")
    return path


def write_csv(path: str | os.PathLike, columns: Sequence[str], data) -> Path:
    """Plain CSV with a header row and 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    np.savetxt(path, arr, fmt=CSV_FMT, delimiter=",", header=",".join(columns), comments="")
    return path


def read_csv(path: str | os.PathLike) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data
