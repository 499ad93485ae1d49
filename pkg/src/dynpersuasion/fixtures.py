"""Bundled example models."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .io import load_model
from .model import ModelSpec

FIXTURES = ("two_action", "three_action", "quartic", "common_payoff", "concave")


def fixture_path(name: str) -> Path:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {FIXTURES}")
    return Path(str(resources.files("dynpersuasion") / "data" / f"{name}.json"))


def load_fixture(name: str) -> ModelSpec:
    return load_model(fixture_path(name))


def materialize(outdir) -> list[Path]:
    """Copy every bundled model file into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    out = []
    for name in FIXTURES:
        dest = outdir / f"{name}.json"
        dest.write_text(fixture_path(name).read_text(encoding="utf-8"), encoding="utf-8")
        out.append(dest)
    return out
