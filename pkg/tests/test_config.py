"""Config file loading and validation."""

import json

import pytest

from aha.config import (
    Config,
    ConfigError,
    apply_fast_profile,
    config_from_dict,
    config_to_dict,
    load_config,
    save_config,
)


class TestValidation:
    def test_defaults_roundtrip(self, tmp_path):
        cfg = Config()
        path = tmp_path / "c.json"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="unknown top-level"):
            config_from_dict({"ltm2": {}})

    def test_unknown_nested_key(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            config_from_dict({"ltm": {"filterz": 10}})

    def test_range_violation_reported_with_section(self):
        with pytest.raises(ConfigError, match="aha.ps"):
            config_from_dict({"aha": {"ps": {"k": 0}}})
        with pytest.raises(ConfigError, match="sweep"):
            config_from_dict({"sweep": {"levels": 99}})

    def test_invalid_json_reported(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    def test_nested_override(self):
        cfg = config_from_dict({
            "ltm": {"filters": 16, "interest": {"top_m": 5}},
            "sweep": {"tasks": ["instance"], "seeds": 2},
        })
        assert cfg.ltm.filters == 16
        assert cfg.ltm.interest.top_m == 5
        assert cfg.sweep.tasks == ("instance",)
        assert cfg.sweep.seeds == 2

    def test_to_dict_is_json_serializable(self):
        json.dumps(config_to_dict(Config()))


class TestFastProfile:
    def test_overrides_counts_only(self):
        cfg = apply_fast_profile(Config())
        assert (cfg.sweep.levels, cfg.sweep.seeds, cfg.sweep.runs) == (5, 3, 5)
        assert cfg.ltm == Config().ltm
        assert cfg.sweep.tasks == Config().sweep.tasks
