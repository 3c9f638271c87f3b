import json

import pytest

from core.codes import ConfigError, OutOfRange
from core.config import CLAIM_TRIALS, OUTPUT_DIR_ENV, LossModel, RunConfig, load_config_file, parse_grid, resolve_config


def test_loss_model_products():
    lm = LossModel(0.9, 0.8)
    assert lm.eta == pytest.approx(0.72)
    assert lm.r == pytest.approx(1 - 1 / 1.28)
    assert not lm.is_lossless
    assert LossModel.from_eta(0.8) == LossModel(0.8, 1.0)
    assert LossModel.ideal().is_lossless


def test_loss_model_range():
    with pytest.raises(OutOfRange):
        LossModel(1.1, 1.0)


def test_parse_grid_inclusive():
    assert parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    with pytest.raises(ConfigError):
        parse_grid("0:1")
    with pytest.raises(ConfigError):
        parse_grid("0.5:1.5:0.5")


def test_flags_override_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"p": 0.02, "trials": 10, "cutoff": 2}), encoding="utf-8")
    cfg = resolve_config("grow", {"p": 0.05, "trials": None}, load_config_file(str(path)))
    assert cfg.p == 0.05
    assert cfg.trials == 10
    assert cfg.cutoff == 2
    assert cfg.command == "grow"


def test_unknown_config_key(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"photons": 3}), encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config_file(str(path))


def test_missing_and_broken_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config_file(str(tmp_path / "nope.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config_file(str(bad))


@pytest.mark.parametrize("flags", [
    {"eta_e": 1.5},
    {"mode": "sampled"},
    {"fmt": "xml"},
    {"cutoff": 0},
    {"processes": 0},
    {"rate": "fast"},
])
def test_invalid_settings(flags):
    with pytest.raises(ConfigError):
        resolve_config("ghz", flags, {})


def test_grow_needs_positive_rate():
    with pytest.raises(ConfigError):
        resolve_config("grow", {"p": 0.0}, {})
    assert resolve_config("ghz", {"p": 0.0}, {}).p == 0.0


def test_output_dir_env(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    cfg = RunConfig(output="out.csv")
    assert cfg.output_path() == tmp_path / "out.csv"
    monkeypatch.delenv(OUTPUT_DIR_ENV)
    assert RunConfig().output_path() is None


def test_claim_trials_default():
    assert CLAIM_TRIALS == 100_000
    assert resolve_config("verify-claims", {}, {}).trials == CLAIM_TRIALS
    assert resolve_config("verify-claims", {"trials": 500}, {}).trials == 500
    assert resolve_config("grow", {}, {}).trials != CLAIM_TRIALS
