"""Command line front end.

    combforge run --config run.json [--output DIR] [--threads N]
    combforge verify [--config run.json] [--output DIR] [--threads N]

Exit codes: 0 success, 1 configuration error, 2 numerical failure or a
failed acceptance criterion. Errors go to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, config, evolve, export, spatial, spectra, verify
from .errors import ConfigError, NumericalFailure
from .grid import Field2, Grid, comb
from .model import SolitonTemplate, bifurcation_angles, build_guess
from .stationary import NewtonOpts, Solution, continue_in, multi_pulse, newton_solve, one_pulse

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _threads(arg: int | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("COMBFORGE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError("COMBFORGE_THREADS must be an integer", "COMBFORGE_THREADS") from exc
    return 1


# --- task implementations ---------------------------------------------------


def _solution(cfg: config.RunConfig, grid: Grid | None = None) -> Solution:
    if cfg.solution is not None:
        try:
            return export.read_solution(cfg.solution)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read solution: {exc}", "solution") from exc
    grid = grid or cfg.grid
    p = cfg.params
    o = cfg.options
    centers = o.get("centers")
    if p.epsilon == 0 and centers:
        ang = bifurcation_angles(p)
        theta = ang.theta_stable if o["branch"] == "stable" else ang.theta_unstable
        return newton_solve(build_guess(SolitonTemplate(theta, tuple(centers)), p, grid), p)
    s = one_pulse(p, grid, o.get("branch", "stable"))
    if centers and list(centers) != [0.0]:
        s = multi_pulse(s, centers)
    return s


def _summary(sol: Solution) -> dict:
    return {
        "residual_norm": sol.residual_norm,
        "pulse_centers": list(sol.pulse_centers),
        "sup_norm": sol.field.sup_norm(),
        "is_even": sol.is_even,
    }


def task_solve(cfg, out: Path, threads: int) -> tuple[list[Path], dict]:
    s = _solution(cfg)
    files = export.write_solution(out, s)
    if cfg.plots:
        from .plotting import plot_profile

        files.append(plot_profile(s.field, out / "profile.png"))
    return files, _summary(s)


def task_continue(cfg, out: Path, threads: int) -> tuple[list[Path], dict]:
    o = cfg.options
    p = cfg.params
    rows = []
    if o["epsilons"] is not None:
        start = one_pulse(p.with_epsilon(o["epsilons"][0]), cfg.grid, o["branch"])
        if o["centers"]:
            start = multi_pulse(start, o["centers"])
        path = [p.with_epsilon(e) for e in o["epsilons"]]
        sols = continue_in(path, start.field, NewtonOpts(restrict_even=start.is_even))
        for e, s in zip(o["epsilons"], sols):
            rows.append((e, s.period, s.residual_norm, s.field.sup_norm(), len(s.pulse_centers)))
        header = ["epsilon", "period", "residual", "sup_norm", "pulses"]
    else:
        ppu = o["points_per_unit"] or cfg.grid.n / cfg.grid.period
        grids = [Grid(P, int(round(P * ppu / 2)) * 2) for P in o["periods"]]
        start = _solution(cfg, grids[0])
        sols = continue_in([p] * len(grids), start.field, NewtonOpts(restrict_even=start.is_even), grids=grids)
        for s in sols:
            rows.append((s.period, s.grid.n, s.residual_norm, s.field.sup_norm(), len(s.pulse_centers)))
        header = ["period", "n", "residual", "sup_norm", "pulses"]
    files = [export.write_csv(out / "branch.csv", header, rows)]
    files += export.write_solution(out, sols[-1])
    return files, {"steps": len(sols), "final": _summary(sols[-1])}


def task_sweep(cfg, out: Path, threads: int) -> tuple[list[Path], dict]:
    o = cfg.options
    xi = spectra.default_xi_grid(o["xi_count"])
    if o["periods"] is None:
        s = _solution(cfg)
        sw = spectra.sweep(s, xi, threads=threads)
        files = export.write_sweep(out, sw)
        if cfg.plots:
            from .plotting import plot_spectrum

            files.append(plot_spectrum(sw, out / "spectrum.png"))
        v = sw.verdict
        return files, {"verdict": v.kind, "gap": v.gap, "theta_bound": v.theta_bound, "box_violations": sw.box_violations}
    ppu = o["points_per_unit"] or cfg.grid.n / cfg.grid.period
    files, sweeps, verdicts = [], [], {}
    for i, P in enumerate(o["periods"]):
        g = Grid(P, int(round(P * ppu / 2)) * 2)
        sw = spectra.sweep(_solution(cfg, g), xi, threads=threads)
        sweeps.append(sw)
        files += export.write_sweep(out, sw, stem=f"sweep_{i:03d}")
        verdicts[f"{P:.17g}"] = sw.verdict.kind
    summary = {"verdicts": verdicts}
    try:
        fit = spectra.fit_critical_curve(sweeps, spatial.equilibrium(cfg.params))
    except (NumericalFailure, ValueError) as exc:
        summary["fit_error"] = f"{type(exc).__name__}: {exc}"
    else:
        summary["fit"] = {"a": fit.a, "b": fit.b, "alpha": fit.alpha, "beta": fit.beta, "rms_relative": fit.rms_relative}
        files.append(export.write_json(out / "fit.json", summary["fit"]))
    return files, summary


def task_small_eigs(cfg, out: Path, threads: int) -> tuple[list[Path], dict]:
    s = _solution(cfg)
    r = spectra.small_eigs(s, cfg.options["delta0"])
    doc = {
        "delta0": r.delta0,
        "eigenvalues": r.eigenvalues,
        "n_stable": r.n_stable,
        "n_unstable": r.n_unstable,
        "zero_is_simple": r.zero_is_simple,
        "window_change": r.window_change,
        "pulse_centers": list(s.pulse_centers),
    }
    return [export.write_json(out / "small_eigs.json", doc)], doc


def task_evolve(cfg, out: Path, threads: int) -> tuple[list[Path], dict]:
    o = cfg.options
    s = _solution(cfg)
    g = Grid(s.period * o["copies"], s.grid.n * o["copies"])
    rng = np.random.default_rng(o["seed"])
    v = o["size"] * (rng.standard_normal(g.n) + 1j * rng.standard_normal(g.n)) / math.sqrt(2)
    tr = evolve.evolve_perturbed(s, Field2.from_complex(g, v), o["copies"], o["t_end"], o["dt"], sample_dt=o["sample_dt"])
    t, _, mod, _ = tr.as_arrays()
    files = [export.write_trace(out / "trace.csv", tr)]
    if cfg.plots:
        from .plotting import plot_trace

        files.append(plot_trace(tr, out / "trace.png"))
    rate = -evolve.fit_rate(t, mod, min(10.0, t[-1] / 2))
    return files, {"decay_rate": rate, "final_mod_l2": float(mod[-1])}


def task_diffusive(cfg, out: Path, threads: int) -> tuple[list[Path], dict]:
    o = cfg.options
    s = _solution(cfg)
    r = evolve.diffusive_experiment(s, o["copies"], o["seed"], o["t_end"], dt=o["dt"])
    summary = {
        "fitted_exponent_raw": r.fitted_exponent_raw,
        "fitted_exponent_mod": r.fitted_exponent_mod,
        "fitted_exponent_uniform": r.fitted_exponent_uniform,
        "degenerate": r.degenerate,
        "tail_fraction": r.tail_fraction,
    }
    files = [export.write_trace(out / "trace.csv", r.trace), export.write_json(out / "diffusive.json", summary)]
    if cfg.plots and r.trace.times:
        from .plotting import plot_trace

        files.append(plot_trace(r.trace, out / "trace.png", loglog=True))
    return files, summary


def task_comb(cfg, out: Path, threads: int) -> tuple[list[Path], dict]:
    s = _solution(cfg)
    c = comb(s.field)
    files = [export.write_csv(out / "comb.csv", ["k", "log_magnitude"], zip(c.wavenumbers, c.log_magnitude))]
    if cfg.plots:
        from .plotting import plot_comb

        files.append(plot_comb(c, out / "comb.png"))
    return files, {"lines": int(len(c.wavenumbers)), "max_log_magnitude": float(np.max(c.log_magnitude))}


TASKS = {
    "solve": task_solve,
    "continue": task_continue,
    "sweep": task_sweep,
    "small-eigs": task_small_eigs,
    "evolve": task_evolve,
    "diffusive": task_diffusive,
    "comb": task_comb,
}


# --- drivers ------------------------------------------------------------------


def _write_manifest(out: Path, cfg_path: Path | None, cfg: config.RunConfig, files, summary, started, wall) -> Path:
    inputs = {}
    if cfg_path is not None:
        inputs[str(cfg_path)] = _sha256(cfg_path)
    if cfg.solution is not None and cfg.solution.exists():
        inputs[str(cfg.solution)] = _sha256(cfg.solution)
    doc = {
        "tool": "combforge",
        "version": __version__,
        "task": cfg.task,
        "config": cfg.raw,
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_seconds": wall,
        "inputs": inputs,
        "outputs": {Path(f).name: _sha256(f) for f in files},
        "results": summary,
    }
    return export.write_json(out / "manifest.json", doc)


def _error(kind: str, message: str, **extra) -> None:
    doc = {"error": kind, "message": message, **extra}
    sys.stderr.write(json.dumps(export._plain(doc), sort_keys=True) + "\n")


def _prepare(args) -> tuple[config.RunConfig, Path]:
    cfg = config.load(args.config) if args.config else config.parse({"task": "verify"})
    out = Path(args.output) if args.output else (cfg.output_dir or Path("combforge-out"))
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def cmd_run(args) -> int:
    cfg, out = _prepare(args)
    if cfg.task == "verify":
        return cmd_verify(args, cfg, out)
    threads = _threads(args.threads)
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    files, summary = TASKS[cfg.task](cfg, out, threads)
    _write_manifest(out, args.config, cfg, files, summary, started, time.perf_counter() - t0)
    print(json.dumps(export._plain({"task": cfg.task, "output_dir": str(out), **summary}), sort_keys=True))
    return EXIT_OK


def cmd_verify(args, cfg: config.RunConfig | None = None, out: Path | None = None) -> int:
    if cfg is None:
        cfg, out = _prepare(args)
    threads = _threads(args.threads)
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    ctx = verify.Context(cfg.params, cfg.grid.period, cfg.grid.n, threads=threads)
    ids = cfg.options.get("criteria") if cfg.task == "verify" else None
    results = verify.run_all(ctx, ids, report=lambda r: print(r.line(), flush=True))
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    summary = {
        "passed": passed,
        "total": len(results),
        "criteria": [{"id": r.id, "name": r.name, "passed": r.passed, "detail": r.detail, "measured": r.measured} for r in results],
    }
    files = [export.write_json(out / "verify.json", summary)]
    _write_manifest(out, args.config, cfg, files, {"passed": passed, "total": len(results)}, started, time.perf_counter() - t0)
    failed = [r for r in results if not r.passed]
    if failed:
        first = failed[0]
        _error("CriterionFailed", first.detail, criterion=first.id, name=first.name)
        return EXIT_NUMERICAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="combforge", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"combforge {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, required in (("run", True), ("verify", False)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, required=required, help="JSON run configuration")
        sp.add_argument("--output", type=Path, help="output directory (overrides output_dir)")
        sp.add_argument("--threads", type=int, help="worker threads (default: $COMBFORGE_THREADS or 1)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        return cmd_verify(args)
    except ConfigError as exc:
        _error("ConfigError", str(exc), key=exc.key)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        _error(type(exc).__name__, str(exc))
        return EXIT_NUMERICAL
    except ValueError as exc:
        # precondition violations inside the library, e.g. a period too short
        _error(type(exc).__name__, str(exc), key=None)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
