import json

import pytest

from mando.config import ConfigError, RunConfig, load_config, write_echo


def test_defaults_reproduce_reported_settings():
    cfg = RunConfig()
    assert cfg.embed_dim == 128 and cfg.heads == 8 and cfg.head_dim == 32
    assert (cfg.coarse_lr_start, cfg.coarse_lr_max, cfg.coarse_epochs) == (0.0005, 0.01, 50)
    assert (cfg.fine_lr_start, cfg.fine_lr_max, cfg.fine_epochs) == (0.0002, 0.005, 100)
    assert cfg.seeds == 20 and cfg.train_frac == 0.7
    assert cfg.model_config().out_dim == 256


def test_toml_and_json_load(tmp_path):
    t = tmp_path / "c.toml"
    t.write_text('task = "coarse"\nseed = 7\ncategory = "Reentrancy"\n')
    cfg = load_config(t)
    assert cfg.task == "coarse" and cfg.seed == 7
    echo = write_echo(cfg, tmp_path)
    assert load_config(echo) == cfg
    assert json.loads(echo.read_text())["category"] == "Reentrancy"


@pytest.mark.parametrize(
    "text",
    ['task = "all"\n', 'category = "Gas"\n', "seeds = 0\n", "train_frac = 1.5\n", "nope = 1\n", "task = \n"],
)
def test_invalid_configs(tmp_path, text):
    p = tmp_path / "c.toml"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


def test_replace_ignores_unset_overrides():
    cfg = RunConfig(seed=3).replace(seed=None, task="fine")
    assert cfg.seed == 3 and cfg.task == "fine"
