import json

import pytest

from stochvort.config import ConfigError, build, config_dict, env_overrides, parse_config


def test_minimal_config_fills_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{}")
    cfg, opts = parse_config(p, environ={})
    assert (cfg.K, cfg.n, cfg.p, cfg.N) == (21, 64, 6.0, 1e6)
    assert opts.samples == 1000


def test_negative_b_rejected():
    with pytest.raises(ConfigError, match="requires b > 0"):
        build({"b": -1})


def test_malliavin_requires_p_above_four():
    build({"p": 3})
    with pytest.raises(ConfigError, match="requires p > 4"):
        build({"p": 3}, "malliavin")
    with pytest.raises(ConfigError, match="requires b > 1"):
        build({"b": 1.0}, "malliavin")


@pytest.mark.parametrize(
    "raw,match",
    [
        ({"p": 2}, "p > 2"),
        ({"N": 0.5}, "N >= 1"),
        ({"samples": 1}, "samples >= 2"),
        ({"K": 1.5}, "invalid value"),
        ({"nonlinear": "yes"}, "invalid value"),
        ({"bogus": 1}, "unknown config keys: bogus"),
        ({"K": None}, "must not be null"),
        ({"n": 8}, "n >= 2K\\+2"),
        ({"probe_x": [1.0]}, "two coordinates"),
    ],
)
def test_named_errors(raw, match):
    with pytest.raises(ConfigError, match=match):
        build(raw)


def test_precedence(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"K": 10, "n": 32, "seed": 1, "T": 0.5}))
    env = {"STOCHVORT_SEED": "2", "STOCHVORT_dt": "0.05"}
    cfg, _ = parse_config(p, environ=env, overrides={"T": 0.2})
    assert (cfg.K, cfg.seed, cfg.dt, cfg.T) == (10, 2, 0.05, 0.2)
    assert cfg.steps == 4


def test_env_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="STOCHVORT_FOO"):
        env_overrides({"STOCHVORT_FOO": "1"})


def test_file_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        parse_config(tmp_path / "missing.json", environ={})
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_config(bad, environ={})
    arr = tmp_path / "arr.json"
    arr.write_text("[]")
    with pytest.raises(ConfigError, match="JSON object"):
        parse_config(arr, environ={})


def test_config_dict_round_trips():
    cfg, opts = build({"K": 9, "n": 20, "eps": [0.1, 0.2], "noise_cutoff": None})
    again = build(config_dict(cfg, opts))
    assert again == (cfg, opts)
