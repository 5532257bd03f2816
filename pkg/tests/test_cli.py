import json
import subprocess
import sys
from pathlib import Path

import pytest

from turnpike_hyp.cli import Artifact, emit_outputs, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def _write(path, text):
    path.write_text(text)
    return path


def test_emit_outputs_empty(tmp_path):
    assert emit_outputs([], tmp_path, True) == {"files": []}
    assert json.loads((tmp_path / "manifest.json").read_text()) == {"files": []}


def test_emit_outputs_names_and_svg_switch(tmp_path):
    arts = [
        Artifact("csv", lambda p: p.write_text("a\n")),
        Artifact("svg", lambda p: p.write_text("<svg/>")),
        Artifact("csv", lambda p: p.write_text("b\n")),
    ]
    m = emit_outputs(arts, tmp_path / "x", False, "demo")
    assert [f["name"] for f in m["files"]] == ["demo_0.csv", "demo_1.csv"]
    m = emit_outputs(arts, tmp_path / "y", True, "demo")
    assert [f["name"] for f in m["files"]] == ["demo_0.csv", "demo_0.svg", "demo_1.csv"]


@pytest.mark.parametrize(
    "command, config",
    [
        ("certify", "example1.ini"),
        ("simulate", "simulate.ini"),
        ("solve-static", "example1.ini"),
        ("solve-dynamic", "example1.ini"),
        ("solve-integer", "integer.ini"),
        ("sweep", "example1.ini"),
        ("pipeline", "pipeline.ini"),
    ],
)
def test_every_command_runs_and_is_reproducible(tmp_path, capsys, command, config):
    hashes = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        code, stdout, _ = _run([command, "--config", str(CONFIGS / config), "--out", str(out), "--svg"], capsys)
        assert code == 0
        assert stdout.startswith("command")
        manifest = json.loads((out / "manifest.json").read_text())
        names = [f["name"] for f in manifest["files"]]
        assert any(n.endswith(".csv") for n in names) and any(n.endswith(".svg") for n in names)
        assert all(n.startswith(command + "_") for n in names)
        hashes.append(manifest)
    assert hashes[0] == hashes[1]


def test_sweep_prints_exponent(tmp_path, capsys):
    code, stdout, _ = _run(["sweep", "--config", str(CONFIGS / "example1.ini"), "--out", str(tmp_path)], capsys)
    assert code == 0
    line = next(ln for ln in stdout.splitlines() if ln.startswith("fitted exponent"))
    assert abs(float(line.split()[-1]) + 1.0) <= 0.15
    assert not list(tmp_path.glob("*.svg"))


def test_turnpike_out_env_overrides(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("TURNPIKE_OUT", str(tmp_path / "env"))
    code, _, _ = _run(["solve-static", "--config", str(CONFIGS / "example1.ini"), "--out", str(tmp_path / "flag")], capsys)
    assert code == 0
    assert (tmp_path / "env" / "manifest.json").exists() and not (tmp_path / "flag").exists()


def test_validation_failure_exit_3(tmp_path, capsys):
    cfg = _write(tmp_path / "bad.ini", (CONFIGS / "example1.ini").read_text().replace("lambda = 0.5", "lambda = 1.5"))
    code, _, err = _run(["sweep", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 3 and "lambda" in err


def test_parse_failure_exit_3(tmp_path, capsys):
    cfg = _write(tmp_path / "bad.ini", "[run]\ncommand = certify\n[system]\nL = abc\n")
    code, _, err = _run(["certify", "--config", str(cfg)], capsys)
    assert code == 3 and "line 4" in err


def test_unknown_command_usage_exit_3(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--config", "x.ini"])
    assert exc.value.code == 3
    assert "usage" in capsys.readouterr().err


def test_precondition_failure_exit_3(tmp_path, capsys):
    text = (CONFIGS / "integer.ini").read_text().replace("nu = 1.0", "nu = 0.5")
    cfg = _write(tmp_path / "low.ini", text)
    code, _, err = _run(["solve-integer", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 3 and "ThresholdNotMet" in err


def test_nonconvergence_exit_2(tmp_path, capsys):
    text = (CONFIGS / "example1.ini").read_text().replace("M = 1 0 0 1", "M = 1 0.8 -0.5 1")
    cfg = _write(tmp_path / "coupled.ini", text)
    code, _, err = _run(["solve-dynamic", "--config", str(cfg), "--out", str(tmp_path), "--tol", "1e-300"], capsys)
    assert code == 2 and "error" in err


def test_console_script_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "turnpike_hyp.cli", "certify", "--config", str(CONFIGS / "example1.ini"),
         "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0 and "valid" in res.stdout
