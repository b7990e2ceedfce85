import pytest

from prethermal.config import (ConfigError, DEFAULTS, emit_config,
                               load_config, parse_config)


def test_defaults_fill_in():
    cfg = parse_config({})
    assert cfg.experiment["preset"] == "ising-domain-wall"
    assert cfg.dynamics["threshold"] == 0.1
    assert cfg.sweep["nu_ratios"] == [4.0, 6.0, 8.0, 12.0, 16.0, 20.0]


def test_unknown_section_fatal():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config({"experimnt": {}})


def test_unknown_key_fatal():
    with pytest.raises(ConfigError, match="unknown key 'nuu'"):
        parse_config({"model": {"nuu": 3.0}})


def test_wrong_type_fatal():
    with pytest.raises(ConfigError, match="wrong type"):
        parse_config({"renorm": {"max_steps": "six"}})
    # bools are not numbers
    with pytest.raises(ConfigError, match="wrong type"):
        parse_config({"model": {"nu_ratio": True}})


def test_semantic_checks():
    with pytest.raises(ConfigError, match="unknown theorem"):
        parse_config({"experiment": {"theorem": "u2"}})
    with pytest.raises(ConfigError, match="unknown mode"):
        parse_config({"experiment": {"mode": "sloppy"}})
    with pytest.raises(ConfigError, match="unknown preset"):
        parse_config({"experiment": {"preset": "nope"}})
    with pytest.raises(ConfigError, match="positive"):
        parse_config({"sweep": {"nu_ratios": [4.0, -1.0]}})
    with pytest.raises(ConfigError, match="budget"):
        parse_config({"sweep": {"nu_ratios": [1.0] * 65}})
    with pytest.raises(ConfigError, match="threshold"):
        parse_config({"dynamics": {"threshold": 0.0}})
    with pytest.raises(ConfigError, match="dt_factor"):
        parse_config({"dynamics": {"dt_factor": 0.5}})


def test_emit_round_trip():
    cfg = parse_config({"experiment": {"preset": "number-chain",
                                       "mode": "rigorous"},
                        "model": {"nu_ratio": 12.5},
                        "sweep": {"nu_ratios": [3.0, 5.0]}})
    text = emit_config(cfg)
    cfg2 = parse_config(_toml_loads(text))
    for section in DEFAULTS:
        assert cfg[section] == cfg2[section]


def test_load_config_file(tmp_path):
    p = tmp_path / "cfg.toml"
    p.write_text('[experiment]\npreset = "single-site-zeeman"\nseed = 7\n')
    cfg = load_config(p)
    assert cfg.experiment["preset"] == "single-site-zeeman"
    assert cfg.experiment["seed"] == 7


def _toml_loads(text):
    import tomli
    return tomli.loads(text)
