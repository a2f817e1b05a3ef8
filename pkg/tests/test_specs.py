from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import pytest

from bbastar.errors import ConfigError
from bbastar.specs import (
    CONFIG_ENV,
    ModelParams,
    SimConfig,
    default_config_path,
    get_preset,
    load_config,
    parse_config,
    resolve,
)


def test_defaults_are_derived() -> None:
    p = ModelParams()
    assert (p.n_honest, p.n_malicious, p.committee_size) == (4, 0, 3)
    assert p.vote_threshold == 2
    assert p.p_in == Fraction(3, 4)
    assert p.p_zero == Fraction("0.7424")
    assert not p.pinned


def test_explicit_values_override_derivation() -> None:
    p = ModelParams(p_in="0.5", p_zero=0.9, vote_threshold=3)
    assert p.p_in == Fraction(1, 2)
    assert p.p_zero == Fraction(9, 10)
    assert p.vote_threshold == 3


@pytest.mark.parametrize(
    "kwargs",
    [
        {"n_honest": 0, "n_malicious": 0},
        {"n_honest": -1},
        {"committee_size": 0},
        {"committee_size": 5},
        {"vote_threshold": 0},
        {"vote_threshold": 5},
        {"p_in": 0},
        {"p_zero": "1.5"},
        {"h_fraction": 0},
        {"boycott_rule": "sometimes"},
        {"schedule": "lockstep"},
    ],
)
def test_invalid_params(kwargs) -> None:
    with pytest.raises(ConfigError):
        ModelParams(**kwargs)


def test_presets() -> None:
    assert (get_preset("honest").n_honest, get_preset("honest").n_malicious) == (4, 0)
    single = get_preset("3-1")
    assert (single.n_honest, single.n_malicious) == (3, 1)
    assert not single.pinned
    even = get_preset("EVEN")
    assert even.pinned
    tiny = get_preset("tiny")
    assert (tiny.total, tiny.vote_threshold, tiny.p_in) == (2, 1, 1)
    with pytest.raises(ValueError, match="Unknown preset"):
        get_preset("nope")


def test_parse_config() -> None:
    text = """
    # network
    nHonest = 3
    nMalicious = 1   # one attacker
    pZero = 0.7424
    reduceCounters = off
    schedule = interleaved
    """
    got = parse_config(text)
    assert got == {
        "n_honest": 3,
        "n_malicious": 1,
        "p_zero": Fraction("0.7424"),
        "reduce_counters": False,
        "schedule": "interleaved",
    }


@pytest.mark.parametrize(
    ("text", "needle"),
    [
        ("nHonest 3\n", "cfg:1"),
        ("\nfoo = 1\n", "cfg:2: unknown key"),
        ("pZero = abc\n", "bad value for pZero"),
        ("reduceCounters = maybe\n", "bad value"),
    ],
)
def test_parse_config_errors_name_the_line(text: str, needle: str) -> None:
    with pytest.raises(ConfigError, match=needle):
        parse_config(text, source="cfg")


def test_missing_config_file(tmp_path: Path) -> None:
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "absent.cfg")


def test_config_path_from_environment(monkeypatch, tmp_path: Path) -> None:
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    assert default_config_path() is None
    monkeypatch.setenv(CONFIG_ENV, str(tmp_path / "run.cfg"))
    assert default_config_path() == tmp_path / "run.cfg"


def test_resolve_precedence() -> None:
    file_values = {"n_honest": 3, "n_malicious": 1, "trials": 50, "max_states": 1000}
    cli = {"n_malicious": 2, "trials": None, "seed": 9}
    cfg = resolve("simulate", file_values, cli, preset="honest", config_name="x")
    assert (cfg.params.n_honest, cfg.params.n_malicious) == (3, 2)
    assert cfg.sim.trials == 50
    assert cfg.sim.seed == 9
    assert cfg.limits.max_states == 1000
    assert cfg.config_name == "x"
    assert cfg.reduce_counters


def test_resolve_uses_preset_as_base() -> None:
    cfg = resolve("explore", {}, {"committee_size": None}, preset="tiny")
    assert cfg.params == get_preset("tiny")


def test_sim_config_validates() -> None:
    with pytest.raises(ConfigError):
        SimConfig(trials=0)
    with pytest.raises(ConfigError):
        SimConfig(seed=-1)
