import hashlib
import json
import math

import numpy as np
import pytest

from combforge import cli, export
from combforge.config import parse
from combforge.errors import ConfigError


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return path


def _run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


SOLVE0 = {"task": "solve", "params": {"zeta": 1, "f": 2, "epsilon": 0}, "grid": {"period": 60, "n": 512}}
SOLVE = {"task": "solve", "params": {"zeta": 1, "f": 2, "epsilon": 0.05}, "grid": {"period": 60, "n": 256}}


def test_solve_at_zero_eps(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", SOLVE0)
    code, out, _ = _run(["run", "--config", cfg, "--output", tmp_path / "o"], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "o" / "solution.json").read_text())
    assert doc["residual_norm"] < 1e-10
    assert json.loads(out)["task"] == "solve"


def test_sweep_on_written_solution(tmp_path, capsys):
    assert _run(["run", "--config", _write(tmp_path / "a.json", SOLVE), "--output", tmp_path / "a"], capsys)[0] == 0
    sw = {"task": "sweep", "params": SOLVE["params"], "solution": "a/solution.json", "xi_count": 4}
    code, out, _ = _run(["run", "--config", _write(tmp_path / "b.json", sw), "--output", tmp_path / "b"], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "b" / "sweep.json").read_text())
    assert doc["verdict"]["kind"] in ("DiffusivelyStable", "Unstable", "Indeterminate")
    assert (tmp_path / "b" / "spectrum.png").read_bytes()[:4] == b"\x89PNG"
    header, rows = export.read_csv(tmp_path / "b" / "sweep.csv")
    assert header == ["xi", "re", "im"] and rows.shape[1] == 3


def test_malformed_json_names_the_key(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"task": "solve",')
    code, _, err = _run(["run", "--config", bad], capsys)
    assert code == 1
    e = json.loads(err)
    assert e["error"] == "ConfigError" and e["key"] == "config"


@pytest.mark.parametrize(
    "doc, key",
    [
        ({"task": "solve", "parms": {}}, "parms"),
        ({"task": "solve", "params": {"zeta": -1, "f": 2, "epsilon": 0}}, "params.zeta"),
        ({"task": "solve", "params": {"zeta": 1, "f": 2}}, "params.epsilon"),
        ({"task": "solve", "grid": {"period": 60, "n": 15}}, "grid.n"),
        ({"task": "solve", "grid": {"period": 60, "n": 64, "dx": 1}}, "grid.dx"),
        ({"task": "teleport"}, "task"),
        ({"task": "evolve", "seed": -3}, "seed"),
        ({"task": "evolve", "dt": 0}, "dt"),
        ({"task": "diffusive", "copies": 4}, "copies"),
        ({"task": "continue"}, "epsilons"),
        ({"task": "verify", "criteria": [0, 99]}, "criteria"),
        ({"task": "sweep", "xi_count": 5}, "xi_count"),
    ],
)
def test_config_errors_name_the_key(tmp_path, capsys, doc, key):
    code, _, err = _run(["run", "--config", _write(tmp_path / "c.json", doc)], capsys)
    assert code == 1
    assert json.loads(err)["key"] == key
    with pytest.raises(ConfigError):
        parse(doc)


def test_reruns_are_byte_identical(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"task": "evolve", "params": {"zeta": 1, "f": 0.95, "epsilon": 0.55}, "grid": {"period": 10, "n": 100}, "seed": 7, "t_end": 5.0})
    for d in ("r1", "r2"):
        assert _run(["run", "--config", cfg, "--output", tmp_path / d, "--threads", 2], capsys)[0] == 0
    assert (tmp_path / "r1" / "trace.csv").read_bytes() == (tmp_path / "r2" / "trace.csv").read_bytes()


def test_manifest_digests_every_output(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"task": "comb", "params": {"zeta": 1, "f": 0.95, "epsilon": 0.55}, "grid": {"period": 10, "n": 100}})
    out = tmp_path / "o"
    assert _run(["run", "--config", cfg, "--output", out], capsys)[0] == 0
    man = json.loads((out / "manifest.json").read_text())
    files = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert set(man["outputs"]) == files == {"comb.csv", "comb.png"}
    for name, digest in man["outputs"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    assert man["version"] and man["config"]["task"] == "comb"
    assert str(cfg) in man["inputs"]


def test_continue_in_period(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"task": "continue", "params": {"zeta": 1, "f": 0.95, "epsilon": 0.55}, "grid": {"period": 10, "n": 100}, "periods": [10, 11, 12]})
    assert _run(["run", "--config", cfg, "--output", tmp_path / "o"], capsys)[0] == 0
    header, rows = export.read_csv(tmp_path / "o" / "branch.csv")
    assert header[0] == "period" and rows.shape == (3, 5)
    assert np.all(rows[:, 2] < 1e-10)


def test_small_eigs_task(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"task": "small-eigs", "params": {"zeta": 1, "f": 0.95, "epsilon": 0.55}, "grid": {"period": 10, "n": 100}, "delta0": 0.05})
    code, out, _ = _run(["run", "--config", cfg, "--output", tmp_path / "o"], capsys)
    assert code == 0
    assert json.loads(out)["zero_is_simple"] is True


def test_verify_subset_passes(tmp_path, capsys):
    cfg = _write(tmp_path / "v.json", {"task": "verify", "criteria": [1, 2, 4, 6]})
    code, out, _ = _run(["verify", "--config", cfg, "--output", tmp_path / "o"], capsys)
    assert code == 0
    lines = [l for l in out.splitlines() if l.startswith("[")]
    assert len(lines) == 4 and all(l.startswith("[PASS]") for l in lines)


def test_verify_outside_regime_fails_honestly(tmp_path, capsys):
    cfg = _write(tmp_path / "v.json", {"task": "verify", "params": {"zeta": 1, "f": 2, "epsilon": 0.5}, "criteria": [6]})
    code, out, err = _run(["verify", "--config", cfg, "--output", tmp_path / "o"], capsys)
    assert code == 2
    assert "[FAIL]" in out
    assert json.loads(err)["criterion"] == 6


def test_thread_resolution(monkeypatch):
    monkeypatch.setenv("COMBFORGE_THREADS", "3")
    assert cli._threads(None) == 3
    assert cli._threads(5) == 5
    monkeypatch.setenv("COMBFORGE_THREADS", "many")
    with pytest.raises(ConfigError):
        cli._threads(None)


def test_csv_round_trips_doubles(tmp_path):
    vals = [math.pi, 1 / 3, 1e-300, -2.5e17, 0.1 + 0.2]
    export.write_csv(tmp_path / "x.csv", ["v"], [[v] for v in vals])
    _, rows = export.read_csv(tmp_path / "x.csv")
    assert rows[:, 0].tolist() == vals


def test_json_is_sorted_and_finite():
    s = export.dumps({"b": 1.0, "a": [np.float64(float("nan")), 1 + 2j]})
    assert s.index('"a"') < s.index('"b"')
    doc = json.loads(s)
    assert doc["a"][0] == "nan" and doc["a"][1] == {"re": 1.0, "im": 2.0}


def test_solution_round_trip(tmp_path, stable_pulse):
    export.write_solution(tmp_path, stable_pulse)
    back = export.read_solution(tmp_path / "solution.json")
    assert np.array_equal(back.field.vector, stable_pulse.field.vector)
    assert back.params == stable_pulse.params
    assert back.pulse_centers == stable_pulse.pulse_centers
