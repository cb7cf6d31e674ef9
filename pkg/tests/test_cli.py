import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from crfolio import cli


def _write(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2))
    return str(path)


SMALL = {"schema": 1, "grids": {"circle": 64, "parameter": 64, "raster": 256}}


def _cfg(**kw):
    out = json.loads(json.dumps(SMALL))
    out.update(kw)
    return out


def test_catalog_is_sorted_and_stable(capsys):
    assert cli.main(["catalog"]) == 0
    first = capsys.readouterr().out
    assert cli.main(["catalog"]) == 0
    assert capsys.readouterr().out == first
    lines = [ln for ln in first.splitlines() if ln.startswith("  ")]
    assert any("rotating_circles" in ln and "[§2.3]" in ln for ln in lines)
    assert any("hopf_discs" in ln and "[§2.3 Hopf foliation]" in ln for ln in lines)
    assert first == cli.list_catalog()


def test_verdict_holomorphic(tmp_path, capsys):
    cfg = _cfg(family={"builder": "translated_circles", "rho": 1, "center_path": [0, 3]},
               function="z_sq")
    code = cli.main(["verdict", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)])
    assert code == 0
    assert capsys.readouterr().out.strip() == "HOLOMORPHIC_CONFIRMED"
    report = json.loads((tmp_path / "report.json").read_text())
    assert set(report) == {"meta", "config_echo", "evidence", "verdict"}
    assert report["verdict"]["verdict"] == "HOLOMORPHIC_CONFIRMED"
    assert report["meta"]["exit_code"] == 0


def test_counterexamples_task(tmp_path):
    cfg = {"schema": 1, "grids": {"circle": 128, "parameter": 128}}
    assert cli.main(["counterexamples", "--config", _write(tmp_path, cfg),
                     "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert all(c["passed"] for c in report["evidence"]["checks"])


def test_malformed_family_names_the_key(tmp_path, capsys):
    text = '{\n  "schema": 1,\n  "family": {"builder": "rotating_circles",\n' \
           '             "R": "x", "r": 2},\n  "function": "z_sq"\n}\n'
    path = tmp_path / "bad.json"
    path.write_text(text)
    assert cli.main(["extend", "--config", str(path), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "family.R" in err and "bad.json:4:" in err


def test_json_syntax_error_has_a_line(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "schema": 1,\n  "task": \n}\n')
    assert cli.main(["extend", "--config", str(path)]) == 2
    assert "broken.json:4:" in capsys.readouterr().err


@pytest.mark.parametrize("raw,task,key", [
    ({"schema": 2}, "extend", "schema"),
    ({"schema": 1, "task": "verdict"}, "extend", "task"),
    ({"schema": 1, "family": {"builder": "moebius"}}, "extend", "family.builder"),
    ({"schema": 1, "family": {"builder": "hopf_discs"}, "function": "z_sq", "extra": 1},
     "extend", "extra"),
    ({"schema": 1, "family": {"builder": "rotating_circles", "R": 1, "r": 2}}, "fibers",
     "probes"),
    ({"schema": 1, "seed": -1}, "extend", "seed"),
])
def test_config_errors(raw, task, key):
    with pytest.raises(cli.ConfigError) as info:
        cli.normalize_config(raw, task)
    assert info.value.key == key


def test_unknown_task_is_rejected():
    with pytest.raises(cli.ConfigError):
        cli.normalize_config({"schema": 1}, "bogus")
    assert cli.main(["bogus"]) == 2


def test_family_builder_errors_are_config_errors(tmp_path):
    cfg = _cfg(family={"builder": "tangent_lines", "ball_radius": 1, "inner_radius": 2},
               function="z_sq")
    assert cli.main(["extend", "--config", _write(tmp_path, cfg), "--out", str(tmp_path)]) == 2


def test_seed_override_and_csv(tmp_path):
    cfg = _cfg(family={"builder": "rotating_circles", "R": 1, "r": 2}, function="globevnik_n",
               seed=5)
    assert cli.main(["extend", "--config", _write(tmp_path, cfg), "--out", str(tmp_path),
                     "--seed", "17"]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["meta"]["seed"] == 17
    assert report["meta"]["csv"] == ["extension_residual.csv"]
    rows = list(csv.reader(open(tmp_path / "extension_residual.csv")))
    assert len(rows) == 1 + 64


def test_fibers_task_records_bad_probes(tmp_path):
    cfg = {"schema": 1, "family": {"builder": "rotating_circles", "R": 1, "r": 2},
           "probes": [[0, 0], [1, 0]]}
    code, report = cli.run(cli.normalize_config(cfg, "fibers"), tmp_path)
    assert code == 0
    probes = report["evidence"]["probes"]
    assert "error" not in probes[0] and "NotRegularValue" in json.dumps(probes[1])


def test_degenerate_jacobian_is_reported(tmp_path):
    cfg = _cfg(family={"builder": "rotating_circles", "R": 1, "r": 2}, function="z_sq")
    code, report = cli.run(cli.normalize_config(cfg, "jacobian"), tmp_path)
    assert code == 0 and report["evidence"]["degenerate"]


def test_task_exception_becomes_report_error(tmp_path):
    cfg = _cfg(family={"builder": "translated_circles", "rho": 1, "center_path": [0, 0]},
               function={"expr": "1 / (z - 1)"})
    code, report = cli.run(cli.normalize_config(cfg, "extend"), tmp_path)
    assert code == 1
    assert report["error"]["type"] == "SingularFunction"
    assert json.loads((tmp_path / "report.json").read_text())["meta"]["exit_code"] == 1


def test_jsonable():
    obj = {"a": 1 + 2j, "b": float("nan"), "c": np.array([1.0, np.inf]), "d": np.int64(3)}
    assert cli.jsonable(obj) == {"a": [1.0, 2.0], "b": None, "c": [1.0, None], "d": 3}


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "crfolio", "catalog"], capture_output=True,
                         text=True, timeout=60)
    assert out.returncode == 0 and "rotating_circles" in out.stdout
