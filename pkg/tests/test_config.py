from pathlib import Path

import pytest

from turnpike_hyp.config import RunConfig, dumps_config, load_config, loads_config
from turnpike_hyp.errors import ParseError, ValidationError
from turnpike_hyp.pipeline import PipelineParams

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_minimal_pipeline_config_fills_defaults():
    cfg = loads_config("[run]\ncommand = pipeline\n[pipeline]\nT = 1200\nalpha = 0.02\n")
    assert cfg.command == "pipeline"
    assert cfg.tol == 1e-10 and cfg.seed == 42 and cfg.grid.quad_rule == "rectangle"
    assert cfg.pipeline.params == PipelineParams(T=1200.0, alpha=0.02)
    assert cfg.pipeline.n_x == 40 and cfg.pipeline.n_t == 816


def test_lambda_out_of_range_named():
    text = (CONFIGS / "example1.ini").read_text().replace("lambda = 0.5", "lambda = 1.5")
    with pytest.raises(ValidationError) as exc:
        loads_config(text)
    assert any("lambda" in p for p in exc.value.problems)


def test_validation_lists_every_problem():
    text = "[run]\ncommand = sweep\n[cost]\nlambda = 2\n[grid]\nT = -1\nn_x = 0\n"
    with pytest.raises(ValidationError) as exc:
        loads_config(text)
    msgs = " ".join(exc.value.problems)
    for word in ("[system]", "[sweep]", "lambda", "T must", "n_x"):
        assert word in msgs


def test_missing_command():
    with pytest.raises(ParseError):
        loads_config("[system]\nL = 1\n")


def test_unknown_command_key_and_section():
    with pytest.raises(ParseError):
        loads_config("[run]\ncommand = fly\n")
    with pytest.raises(ParseError, match="line 3"):
        loads_config("[run]\ncommand = pipeline\nbogus = 1\n")
    with pytest.raises(ParseError, match="unknown section"):
        loads_config("[run]\ncommand = pipeline\n[extra]\na = 1\n")


def test_bad_value_reports_line_and_key():
    with pytest.raises(ParseError, match=r"line 4, \[system\] L"):
        loads_config("[run]\ncommand = certify\n[system]\nL = abc\n")


def test_command_override():
    cfg = load_config(CONFIGS / "example1.ini", command="sweep")
    assert cfg.command == "sweep"


@pytest.mark.parametrize("name", ["example1.ini", "integer.ini", "pipeline.ini", "simulate.ini"])
def test_round_trip(name):
    cfg = load_config(CONFIGS / name)
    again = loads_config(dumps_config(cfg))
    assert again == cfg
    assert isinstance(again, RunConfig)


def test_missing_file():
    with pytest.raises(ParseError):
        load_config("/nonexistent/config.ini")
