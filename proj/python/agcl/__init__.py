"""Automaton-guided curriculum generation for reinforcement learning.

Thin Python layer over the native core: LTLf compilation, curriculum planning
and experiment runs. Configurations are plain dicts in the JSON run schema.
"""

from __future__ import annotations

import json
import os
from typing import Any, Mapping, Sequence

from . import _core
from ._core import AgclError, Dfa, SchemaError, selftest, time_to_threshold, welch_t_test

__all__ = [
    "AgclError",
    "Dfa",
    "SchemaError",
    "__version__",
    "compile",
    "default_learner",
    "dfa_json",
    "load_config",
    "plan",
    "run",
    "selftest",
    "time_to_threshold",
    "trace_paths",
    "welch_t_test",
]

__version__ = _core.__version__


def compile(formula: str, ap: Sequence[str]) -> Dfa:
    """Compile an LTLf formula over the propositions `ap` to a minimal DFA."""
    return _core.compile(formula, list(ap))


def trace_paths(dfa: Dfa) -> list[dict[str, Any]]:
    """Simple accepting paths, each as {"nodes": [...], "labels": [[prop, ...], ...]}."""
    return json.loads(dfa._trace_paths_json())


def dfa_json(dfa: Dfa) -> dict[str, Any]:
    return json.loads(dfa._to_json())


def default_learner() -> dict[str, Any]:
    """Default learner hyperparameters."""
    return json.loads(_core._default_learner_json())


def load_config(path: str | os.PathLike[str]) -> dict[str, Any]:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def plan(config: Mapping[str, Any]) -> dict[str, Any]:
    """Plan the configured curricula; returns the run manifest."""
    return json.loads(_core._plan_json(json.dumps(config)))


def run(
    config: Mapping[str, Any],
    *,
    seeds: int = 0,
    threads: int = 1,
    out_dir: str | os.PathLike[str] | None = None,
) -> dict[str, Any]:
    """Train curricula and baselines; returns statistics plus the CSV tables.

    `seeds` = 0 keeps the configured count. With `out_dir` every artifact the
    command-line tool writes is written there as well.
    """
    text = _core._run_json(json.dumps(config), seeds, threads, os.fspath(out_dir) if out_dir else "")
    return json.loads(text)
