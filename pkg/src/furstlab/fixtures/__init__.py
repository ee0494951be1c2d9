"""Access to the ensembles and oracle targets shipped with the package."""

from __future__ import annotations

import json
from importlib import resources

from ..ensemble import EnsembleSpec, load_spec

FIXTURE_NAMES = ("E1", "E2", "E3", "E4")


def fixture_path(name: str) -> str:
    """Filesystem path of a shipped ensemble config."""
    if name not in FIXTURE_NAMES:
        raise KeyError(f"unknown fixture {name!r}; have {FIXTURE_NAMES}")
    return str(resources.files("furstlab.fixtures").joinpath(f"{name}.json"))


def load_fixture(name: str) -> EnsembleSpec:
    return load_spec(fixture_path(name))


def load_targets() -> dict:
    """Oracle-computed targets recorded alongside the fixtures.

    Produced by scripts/compute_fixture_targets.py; see that script for
    the run budgets behind each number.
    """
    path = resources.files("furstlab.fixtures").joinpath("targets.json")
    with path.open("r", encoding="utf-8") as fh:
        return json.load(fh)
