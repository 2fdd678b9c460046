import json

import pytest

from dualexpert.config import TrainConfig
from dualexpert.errors import ParameterError


def test_defaults():
    cfg = TrainConfig()
    assert cfg.alpha == cfg.beta == 0.2
    assert cfg.lambda1 == cfg.lambda2 == cfg.lambda3 == 0.1
    assert cfg.tau == 0.01
    assert cfg.epochs == 50
    assert cfg.batch_size == 32


def test_gamma_complement():
    assert TrainConfig().gamma == pytest.approx(0.6)
    assert TrainConfig(alpha=0.0, beta=0.0).gamma == 1.0
    assert TrainConfig(alpha=0.5, beta=0.5).gamma == pytest.approx(0.0)


@pytest.mark.parametrize("kw", [
    {"alpha": -0.1},
    {"beta": -0.1},
    {"alpha": 0.7, "beta": 0.4},
    {"lambda1": -1.0},
    {"tau": 0.0},
    {"tau": -0.5},
    {"b": 0.0},
    {"epochs": -1},
    {"warmup_lr": 0.0},
    {"warmup_lr": 0.1, "peak_lr": 0.01},
    {"batch_size": 0},
    {"hidden_dim": -4},
])
def test_rejects_bad_values(kw):
    with pytest.raises(ParameterError):
        TrainConfig(**kw)


def test_with_overrides_returns_new_instance():
    base = TrainConfig()
    other = base.with_overrides(lambda3=0.0)
    assert other.lambda3 == 0.0
    assert base.lambda3 == 0.1
    assert other.alpha == base.alpha


def test_with_overrides_still_validates():
    with pytest.raises(ParameterError):
        TrainConfig().with_overrides(alpha=0.9, beta=0.9)


def test_json_round_trip(tmp_path):
    cfg = TrainConfig(alpha=0.3, epochs=7, tau=0.5)
    f = tmp_path / "cfg.json"
    f.write_text(cfg.to_json())
    assert TrainConfig.from_json_file(f) == cfg


def test_from_dict_rejects_unknown_fields():
    with pytest.raises(ParameterError, match="unknown"):
        TrainConfig.from_dict({"alpha": 0.2, "learning_rate": 0.1})


def test_partial_dict_fills_defaults(tmp_path):
    f = tmp_path / "cfg.json"
    f.write_text(json.dumps({"epochs": 3}))
    cfg = TrainConfig.from_json_file(f)
    assert cfg.epochs == 3
    assert cfg.alpha == 0.2
