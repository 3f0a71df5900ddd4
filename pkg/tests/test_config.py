"""Config document resolution and validation."""

import json

import pytest

from trimodal import config as cfg_mod
from trimodal.errors import ConfigError


class TestDefaults:
    def test_empty_document_resolves(self):
        cfg = cfg_mod.resolve_config()
        assert cfg["data"]["n_samples"] == 480
        assert cfg["data"]["p_available"] == 0.625
        assert cfg["loss"]["tau"] == 0.07
        assert cfg["train"]["epochs"] == 25
        assert cfg["train"]["batch_size"] == 32
        assert cfg["train"]["seed"] is None
        assert cfg["eval"]["probe_lr"] == 1e-4
        assert cfg["eval"]["probe_batch_size"] == 32

    def test_partial_override_merges(self):
        cfg = cfg_mod.resolve_config(overrides={"train": {"epochs": 3}})
        assert cfg["train"]["epochs"] == 3
        assert cfg["train"]["batch_size"] == 32

    def test_section_objects_build(self):
        cfg = cfg_mod.resolve_config()
        assert cfg_mod.synthetic_config(cfg).n_samples == 480
        assert cfg_mod.loss_config(cfg).tau == 0.07
        assert cfg_mod.probe_config(cfg).lr == 1e-4


class TestRejection:
    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            cfg_mod.resolve_config(overrides={"bogus": {}})

    def test_unknown_nested_key_has_dotted_path(self):
        with pytest.raises(ConfigError, match="train.lr"):
            cfg_mod.resolve_config(overrides={"train": {"lr": 1.0}})

    def test_unknown_weight_key(self):
        with pytest.raises(ConfigError, match="loss.weights.xy"):
            cfg_mod.resolve_config(overrides={"loss": {"weights": {"xy": 1.0}}})

    def test_bad_terms(self):
        with pytest.raises(ConfigError, match="terms"):
            cfg_mod.resolve_config(overrides={"loss": {"terms": []}})

    def test_batch_size_floor(self):
        with pytest.raises(ConfigError, match="batch_size"):
            cfg_mod.resolve_config(overrides={"train": {"batch_size": 1}})

    def test_heads_divide_width(self):
        with pytest.raises(ConfigError, match="divisible"):
            cfg_mod.resolve_config(overrides={"model": {"d_model": 10, "n_heads": 4}})

    def test_tau_positive(self):
        with pytest.raises(ConfigError, match="tau"):
            cfg_mod.resolve_config(overrides={"loss": {"tau": 0}})

    def test_lr_ordering(self):
        with pytest.raises(ConfigError, match="lr_max"):
            cfg_mod.resolve_config(overrides={"optim": {"lr_max": 1e-6, "lr_min": 1e-3}})

    def test_seed_type(self):
        with pytest.raises(ConfigError, match="seed"):
            cfg_mod.resolve_config(overrides={"train": {"seed": "forty-two"}})


class TestFiles:
    def test_file_loading(self, tmp_path):
        doc = {"train": {"epochs": 2, "seed": 1}}
        path = tmp_path / "c.json"
        path.write_text(json.dumps(doc))
        cfg = cfg_mod.resolve_config(path)
        assert cfg["train"]["epochs"] == 2

    def test_invalid_json_reports_line_and_column(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "train": {,}\n}\n')
        with pytest.raises(ConfigError, match=r"line 2, column"):
            cfg_mod.resolve_config(path)

    def test_non_object_top_level(self, tmp_path):
        path = tmp_path / "arr.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="object"):
            cfg_mod.resolve_config(path)

    def test_overrides_beat_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"train": {"epochs": 2}}))
        cfg = cfg_mod.resolve_config(path, overrides={"train": {"epochs": 9}})
        assert cfg["train"]["epochs"] == 9
