"""
Test suite for configuration and experiment-document validation in mflab.
Covers the environment-backed lab configuration, schema defaults, rejection
of malformed documents and the round trip through the echoed document.
"""
import pytest

from src.mflab_config import ConfigManager, get_lab_config
from src.mflab_logging import handle_exception, get_logger
from src.mflab_validation import ValidationError, dump_experiment, load_experiment


def _document(**overrides):
    document = {"schema": 1, "command": "critical-points", "potential": {"kind": "quartic1d"}}
    document.update(overrides)
    return document


def test_env_overrides_defaults(monkeypatch):
    """Test that MFLAB_* variables override the dataclass defaults."""
    monkeypatch.setenv("MFLAB_WORKERS", "4")
    monkeypatch.setenv("MFLAB_CENSORING_THRESHOLD", "0.1")
    config = ConfigManager().load_from_env()
    assert config.workers == 4
    assert config.censoring_threshold == 0.1
    assert config.output_dir == "reports"


def test_validate_config_rejects_bad_values():
    """Test that invalid settings are refused."""
    manager = ConfigManager()
    manager.load_from_dict({"workers": 0})
    with pytest.raises(ValueError):
        manager.validate_config()


def test_unknown_config_keys_are_ignored():
    """Test that load_from_dict skips unknown keys."""
    config = ConfigManager().load_from_dict({"nonsense": 1, "block_size": 8})
    assert config.block_size == 8
    assert not hasattr(config, "nonsense")


def test_get_lab_config_falls_back_to_defaults():
    """Test that the shared configuration is always available."""
    assert get_lab_config().max_assignment_size == 512


def test_load_experiment_fills_defaults():
    """Test that command and potential defaults are materialized."""
    config = load_experiment(_document())
    assert config["seed"] == 0
    assert config["workers"] == 1
    assert config["potential"]["kappa"] == 1.0
    assert config["params"]["grid_per_axis"] == 9


def test_load_experiment_rejects_unknown_key():
    """Test that a typo anywhere in the document is a configuration error."""
    with pytest.raises(ValidationError) as excinfo:
        load_experiment(_document(sede=3))
    assert excinfo.value.exit_code == 2

    with pytest.raises(ValidationError):
        load_experiment(_document(params={"grid_per_axes": 5}))


def test_load_experiment_requires_kind_parameters():
    """Test the per-kind potential requirements."""
    with pytest.raises(ValidationError):
        load_experiment(_document(potential={"kind": "pca"}))
    with pytest.raises(ValidationError):
        load_experiment(_document(potential={"kind": "curie_weiss", "kappa0": 1.0, "kappa": 2.0}))
    with pytest.raises(ValidationError):
        load_experiment(_document(schema=2))


def test_echo_reloads_to_the_same_document():
    """Test that the echoed document validates to the same configuration."""
    config = load_experiment(_document(command="transition", seed=7))
    echo = dump_experiment(config)
    again = load_experiment(echo)
    assert dump_experiment(again) == echo
    assert echo["params"]["N_list"] == config["params"]["N_list"]


def test_handle_exception_maps_exit_codes():
    """Test that lab errors keep their exit code and operation."""
    logger = get_logger("tests")
    report = handle_exception(ValidationError("bad", "cli.run"), logger)
    assert report["error"]["exit_code"] == 2
    assert report["error"]["operation"] == "cli.run"
    assert handle_exception(FloatingPointError("overflow"), logger)["error"]["exit_code"] == 3
    assert handle_exception(RuntimeError("boom"), logger)["error"]["code"] == "INTERNAL_ERROR"
