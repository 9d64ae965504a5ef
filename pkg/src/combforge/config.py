"""Run configuration: a single JSON file, validated before anything runs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .grid import Grid
from .model import Params

TASKS = ("solve", "continue", "sweep", "small-eigs", "evolve", "diffusive", "comb", "verify")

COMMON = {"task", "params", "grid", "output_dir", "plots", "solution"}

# task-specific keys and their defaults
OPTIONS: dict[str, dict[str, Any]] = {
    "solve": {"branch": "stable", "centers": None},
    "continue": {"branch": "stable", "centers": None, "epsilons": None, "periods": None, "points_per_unit": None},
    "sweep": {"branch": "stable", "centers": None, "xi_count": 8, "periods": None, "points_per_unit": None},
    "small-eigs": {"branch": "stable", "centers": None, "delta0": 0.09},
    "evolve": {"branch": "stable", "centers": None, "copies": 2, "t_end": 60.0, "dt": 0.02, "seed": 0, "size": 1e-3, "sample_dt": 1.0},
    "diffusive": {"branch": "stable", "centers": None, "copies": 32, "t_end": 3000.0, "dt": 0.05, "seed": 0},
    "comb": {"branch": "stable", "centers": None},
    "verify": {"criteria": None},
}


@dataclass
class RunConfig:
    task: str
    params: Params
    grid: Grid
    options: dict = field(default_factory=dict)
    output_dir: Path | None = None
    plots: bool = True
    solution: Path | None = None
    raw: dict = field(default_factory=dict)


def _number(value, key: str, positive: bool = False, integer: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number", key)
    if integer and (not float(value).is_integer()):
        raise ConfigError(f"{key} must be an integer", key)
    if not math.isfinite(value) or (positive and value <= 0):
        raise ConfigError(f"{key} must be {'positive and ' if positive else ''}finite", key)
    return int(value) if integer else float(value)


def _number_list(value, key: str, positive: bool = False) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{key} must be a non-empty list of numbers", key)
    return [_number(v, f"{key}[{i}]", positive) for i, v in enumerate(value)]


def _check_keys(doc: dict, allowed: set, where: str = "") -> None:
    for k in doc:
        if k not in allowed:
            raise ConfigError(f"unknown key {where}{k!r}", where + k)


def parse(doc: Any, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", None)
    task = doc.get("task", "verify")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {', '.join(TASKS)}", "task")
    opts_spec = OPTIONS[task]
    _check_keys(doc, COMMON | set(opts_spec))

    pd = doc.get("params", {"zeta": 1.0, "f": 2.0, "epsilon": 0.05})
    if not isinstance(pd, dict):
        raise ConfigError("params must be an object", "params")
    _check_keys(pd, {"zeta", "f", "epsilon", "d"}, "params.")
    for k in ("zeta", "f", "epsilon"):
        if k not in pd:
            raise ConfigError(f"params.{k} is required", f"params.{k}")
    try:
        params = Params(
            zeta=_number(pd["zeta"], "params.zeta", positive=True),
            f=_number(pd["f"], "params.f", positive=True),
            epsilon=_number(pd["epsilon"], "params.epsilon"),
            d=_number(pd["d"], "params.d", positive=True) if pd.get("d") is not None else None,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "params") from exc

    gd = doc.get("grid", {"period": 60.0, "n": 512})
    if not isinstance(gd, dict):
        raise ConfigError("grid must be an object", "grid")
    _check_keys(gd, {"period", "n"}, "grid.")
    try:
        grid = Grid(_number(gd.get("period", 60.0), "grid.period", positive=True), _number(gd.get("n", 512), "grid.n", integer=True))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "grid.n") from exc

    options = dict(opts_spec)
    for k in opts_spec:
        if k in doc:
            options[k] = doc[k]
    _validate_options(task, options)

    plots = doc.get("plots", True)
    if not isinstance(plots, bool):
        raise ConfigError("plots must be true or false", "plots")
    solution = doc.get("solution")
    if solution is not None:
        if not isinstance(solution, str):
            raise ConfigError("solution must be a path", "solution")
        solution = Path(solution)
        if base_dir is not None and not solution.is_absolute():
            solution = base_dir / solution
    out = doc.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output_dir must be a path", "output_dir")
    return RunConfig(task, params, grid, options, Path(out) if out else None, plots, solution, doc)


def _validate_options(task: str, o: dict) -> None:
    if "branch" in o and o["branch"] not in ("stable", "unstable"):
        raise ConfigError("branch must be 'stable' or 'unstable'", "branch")
    if o.get("centers") is not None:
        c = _number_list(o["centers"], "centers")
        if c != sorted(c):
            raise ConfigError("centers must be sorted ascending", "centers")
        o["centers"] = c
    for k in ("epsilons",):
        if o.get(k) is not None:
            o[k] = _number_list(o[k], k)
            if any(v < 0 for v in o[k]):
                raise ConfigError(f"{k} must be non-negative", k)
    if o.get("periods") is not None:
        o["periods"] = _number_list(o["periods"], "periods", positive=True)
    if o.get("points_per_unit") is not None:
        o["points_per_unit"] = _number(o["points_per_unit"], "points_per_unit", positive=True)
    if task == "continue" and (o.get("epsilons") is None) == (o.get("periods") is None):
        raise ConfigError("continue needs exactly one of epsilons or periods", "epsilons")
    if "xi_count" in o:
        v = _number(o["xi_count"], "xi_count", positive=True, integer=True)
        if v % 2:
            raise ConfigError("xi_count must be even", "xi_count")
        o["xi_count"] = v
    for k in ("copies", "seed"):
        if k in o:
            o[k] = _number(o[k], k, integer=True)
            if o[k] < (0 if k == "seed" else 1) or o[k] >= 2**64:
                raise ConfigError(f"{k} out of range", k)
    if task == "diffusive" and o["copies"] < 16:
        raise ConfigError("diffusive needs copies >= 16", "copies")
    for k in ("t_end", "dt", "size", "sample_dt", "delta0"):
        if k in o:
            o[k] = _number(o[k], k, positive=True)
    if o.get("criteria") is not None:
        crit = o["criteria"]
        if not isinstance(crit, list) or not all(isinstance(v, int) and 1 <= v <= 13 for v in crit):
            raise ConfigError("criteria must be a list of integers in 1..13", "criteria")


def load(path: Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", "config") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", "config") from exc
    return parse(doc, path.parent)
