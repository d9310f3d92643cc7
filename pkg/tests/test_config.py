"""Tests for configuration validation and typo-friendly diagnostics."""

import json
import textwrap
from pathlib import Path

import pytest

from config import (
    Config,
    ConfigError,
    OutputConfig,
    ParametersConfig,
    ProcessingConfig,
    TolerancesConfig,
    VerifyConfig,
    default_config,
    load_config,
    parse_beta_range,
    parse_grid,
    update_section,
)

ROOT = Path(__file__).resolve().parent.parent


# --------------------------------------------------------------------
# Individual dataclass validation
# --------------------------------------------------------------------

def test_parameters_default_to_spin_25():
    params = ParametersConfig()
    assert params.j == 25.0
    assert params.k == 50


def test_j_and_k_derive_each_other():
    assert ParametersConfig(j=12.5, m1=0.5, m2=-3.5).k == 25
    assert ParametersConfig(k=60).j == 30.0
    assert ParametersConfig(j=25, k=50).k == 50
    with pytest.raises(ValueError, match="disagree"):
        ParametersConfig(j=25, k=48)


def test_j_must_be_half_integer():
    with pytest.raises(ValueError, match="half-integer"):
        ParametersConfig(j=25.3)


def test_k_bounds():
    with pytest.raises(ValueError, match="k must be between"):
        ParametersConfig(k=5000, m1=0, m2=0)
    with pytest.raises(ValueError, match="k must be an integer"):
        ParametersConfig(k=50.5)


def test_magnetic_numbers_checked_against_j():
    with pytest.raises(ValueError, match="integrality"):
        ParametersConfig(j=25, m1=10.5)
    with pytest.raises(ValueError, match="between -j and j"):
        ParametersConfig(j=25, m2=26)
    with pytest.raises(ValueError, match="m2"):
        ParametersConfig(j=12.5, m1=0.5)


def test_beta_range_parsing():
    assert parse_beta_range("0.1:0.5:0.1") == (0.1, 0.5, 0.1)
    with pytest.raises(ValueError, match="start:stop:step"):
        parse_beta_range("0.1:0.5")
    with pytest.raises(ValueError, match="step"):
        parse_beta_range("0.1:0.5:0")
    with pytest.raises(ValueError, match="empty"):
        parse_beta_range("0.5:0.1:0.1")


def test_default_beta_sweep_is_inclusive():
    values = ParametersConfig().beta_values
    assert len(values) == 306
    assert values[0] == pytest.approx(0.05)
    assert values[-1] == pytest.approx(3.10)


def test_grid_parsing():
    assert parse_grid("64x32") == (64, 32)
    assert parse_grid("8X8") == (8, 8)
    assert ParametersConfig(grid="16x4").grid_shape == (16, 4)
    with pytest.raises(ValueError, match="NxM"):
        parse_grid("64")
    with pytest.raises(ValueError, match="between"):
        parse_grid("1x5")


def test_vary_and_state_whitelists():
    ParametersConfig(vary="m2", state="coherent")
    ParametersConfig(state="pair")
    with pytest.raises(ValueError, match="vary"):
        ParametersConfig(vary="m1")
    with pytest.raises(ValueError, match="state"):
        ParametersConfig(state="squeezed")


def test_tolerances_positive():
    TolerancesConfig(tol=1e-3, tol_scale=0.01)
    with pytest.raises(ValueError, match="tol must"):
        TolerancesConfig(tol=0.0)
    with pytest.raises(ValueError, match="tol_scale"):
        TolerancesConfig(tol_scale=-1.0)


def test_output_path_and_format():
    assert OutputConfig().path is None
    assert OutputConfig(path="").path is None
    assert OutputConfig(path="out/table.csv").path == Path("out/table.csv")
    with pytest.raises(ValueError, match="format"):
        OutputConfig(format="xlsx")


def test_log_level_whitelist_and_normalisation():
    cfg = ProcessingConfig(log_level="debug")
    assert cfg.log_level == "DEBUG"
    with pytest.raises(ValueError, match="log_level"):
        ProcessingConfig(log_level="TRACE")


def test_workers_positive():
    ProcessingConfig(workers=1)
    with pytest.raises(ValueError, match="workers"):
        ProcessingConfig(workers=0)


def test_verify_section_validation():
    VerifyConfig(trials=1, lift_sign=1)
    with pytest.raises(ValueError, match="trials"):
        VerifyConfig(trials=0)
    with pytest.raises(ValueError, match="lift_sign"):
        VerifyConfig(lift_sign=0)


def test_command_whitelist():
    assert Config(command="torus").command == "torus"
    with pytest.raises(ConfigError, match="command"):
        Config(command="plot")


def test_update_section_revalidates():
    params = default_config().parameters
    updated = update_section("parameters", params, j=None, k=60)
    assert updated.j == 30.0
    with pytest.raises(ConfigError, match=r"\[parameters\]"):
        update_section("parameters", params, m1=40)


# --------------------------------------------------------------------
# load_config: end-to-end round-trip + unknown-key detection
# --------------------------------------------------------------------

def _write_config(tmp_path: Path, body: str, name: str = "config.toml") -> Path:
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return path


def test_shipped_config_loads():
    config = load_config(ROOT / "config.toml")
    assert config.parameters.k == 50
    assert config.parameters.m1 == 11
    assert config.verify.lift_sign == -1


def test_minimal_config_roundtrip(tmp_path):
    cfg_path = _write_config(tmp_path, """
        [parameters]
        j = 10
        m1 = 2
        m2 = -3
    """)
    config = load_config(cfg_path)
    assert config.parameters.k == 20
    assert config.tolerances.tol == 1e-8  # default
    assert config.output.path is None     # default


def test_empty_config_gives_defaults(tmp_path):
    config = load_config(_write_config(tmp_path, ""))
    assert config.parameters.k == 50
    assert config.processing.workers == 4


def test_json_config(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"parameters": {"k": 30, "m1": 3, "m2": -5},
                                "output": {"format": "json"}}))
    config = load_config(path)
    assert config.parameters.j == 15.0
    assert config.output.format == "json"


def test_malformed_json(tmp_path):
    path = tmp_path / "run.json"
    path.write_text("{\"parameters\": ")
    with pytest.raises(ConfigError, match="Malformed JSON"):
        load_config(path)


def test_malformed_toml(tmp_path):
    with pytest.raises(ConfigError, match="Malformed TOML"):
        load_config(_write_config(tmp_path, "[parameters\nj = 3\n"))


def test_unknown_key_in_section(tmp_path):
    cfg_path = _write_config(tmp_path, """
        [parameters]
        beat = 1.0
    """)
    with pytest.raises(ConfigError) as excinfo:
        load_config(cfg_path)
    msg = str(excinfo.value)
    assert "parameters" in msg
    assert "beat" in msg
    # The error should also hint at the valid keys.
    assert "beta_range" in msg


def test_unknown_section(tmp_path):
    cfg_path = _write_config(tmp_path, """
        [paramaters]
        j = 10
    """)
    with pytest.raises(ConfigError, match="Unknown section"):
        load_config(cfg_path)


def test_invalid_value_is_wrapped_with_section(tmp_path):
    cfg_path = _write_config(tmp_path, """
        [verify]
        trials = 0
    """)
    with pytest.raises(ConfigError) as excinfo:
        load_config(cfg_path)
    assert "[verify]" in str(excinfo.value)
    assert "trials" in str(excinfo.value)


def test_section_must_be_a_table(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"output": "stdout"}))
    with pytest.raises(ConfigError, match="must be a table"):
        load_config(path)


def test_missing_file_raises_filenotfound(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "nope.toml")
