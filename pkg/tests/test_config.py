import json

import pytest

from randla import config
from randla.leverage import fast_leverage_sizes


def test_defaults_without_override(monkeypatch):
    monkeypatch.delenv("RANDLA_CONFIG", raising=False)
    assert config.load() == config.DEFAULTS


def test_override_file(monkeypatch, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"fastlev_c1": 2.0}))
    monkeypatch.setenv("RANDLA_CONFIG", str(path))
    assert config.get("fastlev_c1") == 2.0
    assert config.get("fastlev_c2") == config.DEFAULTS["fastlev_c2"]
    assert fast_leverage_sizes(512, 8, 0.5) == fast_leverage_sizes(512, 8, 0.5, c1=2.0)


def test_unknown_key_rejected(monkeypatch, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"not_a_constant": 1}))
    monkeypatch.setenv("RANDLA_CONFIG", str(path))
    with pytest.raises(KeyError):
        config.load()
