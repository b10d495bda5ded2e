import pytest

from fvib import config
from fvib.errors import ConfigError


def test_standard_grid_has_fifteen_points():
    grid = config.beta_grid("standard")
    assert len(grid) == 15 and grid[0] == 1e-6 and grid[-1] == 1.0
    assert grid[5:] == [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]


def test_grid_parsing():
    assert config.beta_grid("0.5, 0,1") == [0.0, 0.5, 1.0]
    for bad in ("0.5,1.2", "a,b", ""):
        with pytest.raises(ConfigError):
            config.beta_grid(bad)


def test_full_profile_values():
    p = config.PROFILES["full"]
    assert p["model"]["hidden"] == [1024, 1024] and p["model"]["kappa"] == 256
    assert p["train"]["epochs"] == 200 and p["train"]["lr"] == 1e-4
    assert (p["train"]["lr_decay"], p["train"]["lr_decay_every"]) == (0.97, 2)


def test_load_merges_profile(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("profile: full\ntrain: {epochs: 3}\n")
    cfg = config.load(path)
    assert cfg["train"]["epochs"] == 3 and cfg["model"]["hidden"] == [1024, 1024]


def test_every_problem_reported(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("data: {source: synth, d: 1, bogus: 2}\nmodel: {method: vib}\n"
                    "train: {lr: -1}\neval: {samples: 0}\n")
    with pytest.raises(ConfigError) as info:
        config.load(path)
    text = " | ".join(info.value.problems)
    for key in ("data.bogus", "data.d", "model.beta", "train.lr", "eval.samples"):
        assert key in text


def test_json_config_and_errors(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"train": {"epochs": 2}}')
    assert config.load(path)["train"]["epochs"] == 2
    with pytest.raises(ConfigError):
        config.load(tmp_path / "missing.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n")
    with pytest.raises(ConfigError):
        config.load(tmp_path / "list.yaml")
    (tmp_path / "prof.yaml").write_text("profile: huge\n")
    with pytest.raises(ConfigError):
        config.load(tmp_path / "prof.yaml")
