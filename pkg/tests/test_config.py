import json

import pytest

from msmmt.config import ConfigError, RunConfig, load_config


def test_empty_config_gets_all_defaults():
    cfg = RunConfig({})
    assert cfg.sections["train"]["batch_size"] == 16
    assert cfg.sections["train"]["epochs"] == 50
    assert cfg.sections["train"]["lr"] == 5e-5
    assert cfg.sections["train"]["weight_decay"] == 0.05
    assert cfg.sections["loss"]["alpha"] == 0.1
    assert cfg.sections["prep"]["evm"]["alpha"] == 10.0
    assert cfg.seed == 0


def test_partial_override_keeps_other_defaults():
    cfg = RunConfig({"train": {"epochs": 3}, "loss": {"alpha": 0.4}})
    assert cfg.sections["train"]["epochs"] == 3
    assert cfg.sections["train"]["batch_size"] == 16
    assert cfg.sections["loss"]["alpha"] == 0.4
    assert cfg.sections["loss"]["temperature"] == 0.1


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown config key"):
        RunConfig({"train": {"learning_rate": 1e-3}})
    with pytest.raises(ConfigError, match="unknown config key"):
        RunConfig({"nonsense": {}})


def test_alpha_bounds():
    with pytest.raises(ConfigError, match="alpha"):
        RunConfig({"loss": {"alpha": 1.2}})


def test_temperature_positive():
    with pytest.raises(ConfigError, match="temperature"):
        RunConfig({"loss": {"temperature": 0.0}})


def test_model_validation_surfaces_as_config_error():
    with pytest.raises(ConfigError, match="2x2"):
        RunConfig({"model": {"scales": [1, 2, 4]}})  # 64 px cannot host scale 4


def test_with_seed_override():
    cfg = RunConfig({"data": {"seed": 5}})
    assert cfg.seed == 5
    assert cfg.with_seed(9).seed == 9
    assert cfg.seed == 5  # original untouched


def test_typed_views():
    cfg = RunConfig({})
    assert cfg.model_config().embed_dim == 64
    assert cfg.synthetic_spec().subjects == 8
    assert cfg.synthetic_spec().total_clips == 144
    assert cfg.train_config().alpha == 0.1
    assert cfg.train_config(alpha=0.7).alpha == 0.7
    assert cfg.tvl1_params().attachment == 0.15


def test_load_from_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"data": {"seed": 3}}))
    assert load_config(p).seed == 3


def test_invalid_json(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("{nope")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(p)


def test_shipped_synthetic_recipe_is_valid():
    from pathlib import Path

    root = Path(__file__).resolve().parent.parent
    cfg = load_config(root / "configs" / "synthetic.json")
    assert cfg.synthetic_spec().total_clips == 144
    assert cfg.model_config().scales == (1, 2)
    assert cfg.train_config().epochs == 30
    assert cfg.train_config().lr == 5e-4
