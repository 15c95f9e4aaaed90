import json

import pytest

from lightbeam import ConfigError, PROFILES, config_from_dict, load_config


def test_b2t24_profile_values():
    cfg = PROFILES["b2t24"]
    assert cfg.acoustic_scale == 0.6
    assert cfg.beam_size == 1000
    assert cfg.beam_prune_threshold == 22.0
    assert cfg.ortho_beams == 3
    assert cfg.homophone_prune_threshold == 4.0
    assert cfg.token_insertion_bonus == 1.5
    assert cfg.word_boundary_bonus == 1.0
    assert cfg.ngram_weight == 0.8
    assert cfg.llm_weight == 1.2
    assert cfg.llm_rescore_interval == 10
    assert cfg.llm_chunk_size == 256


def test_b2t25_profile_values():
    cfg = PROFILES["b2t25"]
    assert cfg.acoustic_scale == 0.4
    assert cfg.beam_size == 900
    assert cfg.beam_prune_threshold == 18.0
    assert cfg.ngram_weight == 1.0
    assert cfg.llm_rescore_interval == 15
    # shared values
    assert cfg.ortho_beams == 3
    assert cfg.homophone_prune_threshold == 4.0
    assert cfg.token_insertion_bonus == 1.5
    assert cfg.word_boundary_bonus == 1.0
    assert cfg.llm_weight == 1.2
    assert cfg.llm_chunk_size == 256


def test_profile_with_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"profile": "b2t24", "beam_size": 64}))
    cfg = load_config(path)
    assert cfg.beam_size == 64
    assert cfg.acoustic_scale == 0.6


def test_full_explicit_config():
    cfg = config_from_dict(PROFILES["b2t25"].as_dict())
    assert cfg == PROFILES["b2t25"]


def test_missing_keys_without_profile():
    with pytest.raises(ConfigError, match="missing"):
        config_from_dict({"beam_size": 8})


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        config_from_dict({"profile": "b2t24", "beem_size": 8})


def test_unknown_profile_rejected():
    with pytest.raises(ConfigError, match="profile"):
        config_from_dict({"profile": "b2t99"})


@pytest.mark.parametrize(
    "field,value",
    [
        ("acoustic_scale", 0.0),
        ("beam_size", 0),
        ("ortho_beams", 0),
        ("beam_prune_threshold", 0.0),
        ("homophone_prune_threshold", -1.0),
        ("ngram_weight", -0.1),
        ("llm_weight", -0.1),
        ("llm_rescore_interval", 0),
        ("llm_chunk_size", 0),
        ("token_insertion_bonus", float("inf")),
    ],
)
def test_invalid_values_rejected(field, value):
    with pytest.raises(ConfigError):
        config_from_dict({"profile": "b2t24", field: value})


def test_zero_homophone_threshold_allowed():
    cfg = config_from_dict({"profile": "b2t24", "homophone_prune_threshold": 0.0})
    assert cfg.homophone_prune_threshold == 0.0
