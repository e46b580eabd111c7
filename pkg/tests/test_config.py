"""Config tree: defaults, validation paths, suggestions, round trips."""

import json

import pytest

from renderopt.config import DEFAULTS, load_config, parse_config
from renderopt.errors import ConfigError


class TestDefaults:
    def test_empty_text_yields_documented_defaults(self):
        cfg = parse_config("")
        assert cfg.data["prerender"]["spacing"] == 0.02
        assert cfg.data["diffusion"]["steps"] == 700
        assert cfg.data["diffusion"]["beta_start"] == 0.0001
        assert cfg.data["diffusion"]["beta_end"] == 0.04
        assert cfg.data["diffusion"]["learning_rate"] == 0.0001
        assert cfg.data["bench"]["mdp_discount"] == 0.95
        assert cfg.data["bench"]["ro_samples"] == 21
        assert cfg.data["bench"]["scenes"] == 20
        assert cfg.data["bench"]["frames_per_scene"] == 3600
        assert cfg.seed == 0

    def test_empty_file_loads(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text("")
        assert load_config(path).data == parse_config("").data

    def test_none_path_loads_defaults(self):
        assert load_config(None).data == DEFAULTS


class TestValidation:
    def test_negative_learning_rate_names_key_path(self):
        with pytest.raises(ConfigError, match="diffusion.learning_rate"):
            parse_config(json.dumps({"diffusion": {"learning_rate": -0.1}}))

    def test_unknown_top_key_suggests_neighbor(self):
        with pytest.raises(ConfigError, match="diffusoin.*did you mean 'diffusion'"):
            parse_config(json.dumps({"diffusoin": {}}))

    def test_unknown_nested_key_names_full_path(self):
        with pytest.raises(ConfigError, match="prerender.timing.bandwdith"):
            parse_config(json.dumps({"prerender": {"timing": {"bandwdith": 1}}}))

    def test_cross_field_rules(self):
        with pytest.raises(ConfigError, match="frames_per_scene"):
            parse_config(json.dumps({"bench": {"frames_per_scene": 100}}))
        with pytest.raises(ConfigError, match="d_model"):
            parse_config(json.dumps({"diffusion": {"d_model": 62, "heads": 4}}))
        with pytest.raises(ConfigError, match="beta_start"):
            parse_config(json.dumps({"diffusion": {"beta_start": 0.05}}))
        with pytest.raises(ConfigError, match="stride"):
            parse_config(json.dumps({"bench": {"stride": 33}}))

    def test_game_section_rules(self):
        with pytest.raises(ConfigError, match="game.nodes"):
            parse_config(json.dumps({"game": {"nodes": []}}))
        with pytest.raises(ConfigError, match=r"game.nodes\[0\].alpha"):
            parse_config(json.dumps({"game": {"nodes": [
                {"id": "a", "alpha": -1.0, "beta": 0.0, "demand_max": 1.0}]}}))
        with pytest.raises(ConfigError, match="game.cloud"):
            parse_config(json.dumps({"game": {"cloud": {
                "unit_cost": 0.5, "price_min": 0.4, "price_max": 2.0,
                "capacity": 8.0}}}))

    def test_bool_is_not_a_number(self):
        with pytest.raises(ConfigError, match="prerender.spacing"):
            parse_config(json.dumps({"prerender": {"spacing": True}}))

    def test_parse_error_reported(self):
        with pytest.raises(ConfigError, match="parse error"):
            parse_config("{not json")

    def test_missing_file_reported(self):
        with pytest.raises(ConfigError, match="not found"):
            load_config("/nonexistent/config.json")


class TestRoundTrip:
    def test_serialize_parse_idempotent(self):
        first = parse_config(json.dumps({"seed": 7, "diffusion": {"epochs": 3}}))
        second = parse_config(first.serialize())
        assert first.data == second.data
        assert first.serialize() == second.serialize()

    def test_digest_stable_under_key_order(self):
        a = parse_config('{"seed": 1, "out_dir": "x"}')
        b = parse_config('{"out_dir": "x", "seed": 1}')
        assert a.digest() == b.digest()

    def test_digest_sensitive_to_values(self):
        a = parse_config('{"seed": 1}')
        b = parse_config('{"seed": 2}')
        assert a.digest() != b.digest()

    def test_user_overrides_survive(self):
        cfg = parse_config(json.dumps({"bench": {"scenes": 5, "fps": 30,
                                                 "frames_per_scene": 1800}}))
        assert cfg.data["bench"]["scenes"] == 5
        assert cfg.data["bench"]["frames_per_scene"] == 1800
        assert cfg.data["bench"]["ro_samples"] == 21
