"""JSON and CSV serialization of solutions, sweeps, reports and traces.

JSON is written UTF-8 with sorted keys so reruns are byte-identical. CSV
uses a header row and 17 significant digits, enough to round-trip doubles.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import Field2, Grid
from .model import Params
from .stationary import Solution

CSV_FORMAT = "{:.17g}"


def _plain(obj):
    """Convert numpy scalars/arrays, complex numbers and dataclasses to JSON types."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: _plain(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _plain(obj.real), "im": _plain(obj.imag)}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        # JSON has no NaN or infinity; strings keep the file parseable
        return v if math.isfinite(v) else repr(v)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([CSV_FORMAT.format(float(v)) for v in row])
    return path


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r]
    return header, np.array(data, dtype=float).reshape(-1, len(header))


# --- solutions ------------------------------------------------------------


def solution_to_dict(sol: Solution) -> dict:
    p = sol.params
    return {
        "params": {"zeta": p.zeta, "f": p.f, "epsilon": p.epsilon, "d": p.d},
        "grid": {"period": sol.grid.period, "n": sol.grid.n},
        "u1": sol.field.u1,
        "u2": sol.field.u2,
        "pulse_centers": list(sol.pulse_centers),
        "residual_norm": sol.residual_norm,
        "is_even": sol.is_even,
        "source_epsilon": sol.source_epsilon,
    }


def solution_from_dict(doc: dict) -> Solution:
    pd = doc["params"]
    p = Params(zeta=float(pd["zeta"]), f=float(pd["f"]), epsilon=float(pd["epsilon"]), d=pd.get("d"))
    g = Grid(float(doc["grid"]["period"]), int(doc["grid"]["n"]))
    fld = Field2(g, np.asarray(doc["u1"], float), np.asarray(doc["u2"], float))
    return Solution(
        field=fld,
        params=p,
        residual_norm=float(doc["residual_norm"]),
        is_even=bool(doc["is_even"]),
        pulse_centers=tuple(float(c) for c in doc["pulse_centers"]),
        source_epsilon=doc.get("source_epsilon"),
    )


def write_solution(directory: Path, sol: Solution, stem: str = "solution") -> list[Path]:
    directory = Path(directory)
    js = write_json(directory / f"{stem}.json", solution_to_dict(sol))
    cs = write_csv(directory / f"{stem}.csv", ["x", "u1", "u2"], zip(sol.grid.x, sol.field.u1, sol.field.u2))
    return [js, cs]


def read_solution(path: Path) -> Solution:
    return solution_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# --- sweeps, reports and traces -------------------------------------------


def sweep_to_dict(sw, fit=None) -> dict:
    v = sw.verdict
    out = {
        "period": sw.period,
        "params": {"zeta": sw.params.zeta, "f": sw.params.f, "epsilon": sw.params.epsilon},
        "slices": [{"xi": s.xi, "eigenvalues": s.eigenvalues} for s in sw.slices],
        "critical_curve": [{"xi": xi, "lambda": lam} for xi, lam in sw.critical],
        "verdict": {
            "kind": v.kind,
            "theta_bound": v.theta_bound,
            "gap": v.gap,
            "zero_simple": v.zero_simple,
            "max_unstable_re": v.max_unstable_re,
            "note": v.note,
        },
        "box_violations": sw.box_violations,
    }
    if fit is not None:
        out["fit"] = fit
    return out


def sweep_rows(sw):
    for s in sw.slices:
        for lam in s.eigenvalues:
            yield (s.xi, lam.real, lam.imag)


def write_sweep(directory: Path, sw, stem: str = "sweep", fit=None) -> list[Path]:
    directory = Path(directory)
    js = write_json(directory / f"{stem}.json", sweep_to_dict(sw, fit))
    cs = write_csv(directory / f"{stem}.csv", ["xi", "re", "im"], sweep_rows(sw))
    return [js, cs]


def write_trace(path: Path, trace) -> Path:
    t, raw, mod, gam = trace.as_arrays()
    return write_csv(path, ["t", "raw_l2", "mod_l2", "gamma"], zip(t, raw, mod, gam))
