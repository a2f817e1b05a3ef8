from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from .errors import BbaError, ConfigError
from .lts import ExploreLimits
from .numerics import as_fraction, p_h, p_v, probability

CONFIG_ENV = "BBASTAR_CONFIG"

BOYCOTT_RULES = ("blocking", "always")
SCHEDULES = ("synchronous", "interleaved")


@dataclass(frozen=True)
class ModelParams:
    """
    Population and protocol constants of one network instance.

    Unset derived fields are filled in at construction:
      vote_threshold = ceil(2c/3), p_in = c/n, p_zero = h^2 (1 + h - h^2).
    """

    n_honest: int = 4
    n_malicious: int = 0
    committee_size: int = 3  # expected committee size c
    vote_threshold: int | None = None  # V; votes needed to pass a step
    p_in: Fraction | None = None  # probability of being selected into a step committee
    h_fraction: Fraction = Fraction("0.8")  # honest money fraction
    p_zero: Fraction | None = None  # probability that the initial bit is 0
    boycott_rule: str = "blocking"  # "blocking": pin bit 1 only if the coalition can block V
    schedule: str = "synchronous"  # order of node-local work against network gates

    def __post_init__(self) -> None:
        for name in ("n_honest", "n_malicious", "committee_size"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ConfigError(f"{name} must be a natural number, got {v!r}")
        n = self.n_honest + self.n_malicious
        if n < 1:
            raise ConfigError("total population nHonest + nMalicious must be >= 1")
        if not (1 <= self.committee_size <= n):
            raise ConfigError(f"committeeSize must be in 1..{n}, got {self.committee_size}")
        if self.boycott_rule not in BOYCOTT_RULES:
            raise ConfigError(
                f"boycottRule must be one of {BOYCOTT_RULES}, got {self.boycott_rule!r}"
            )
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")

        try:
            h = probability(self.h_fraction, allow_zero=True)
            object.__setattr__(self, "h_fraction", h)
            if self.vote_threshold is None:
                V = math.ceil(Fraction(2 * self.committee_size, 3))
                object.__setattr__(self, "vote_threshold", V)
            if self.p_in is None:
                object.__setattr__(self, "p_in", p_v(self.committee_size, n))
            else:
                object.__setattr__(self, "p_in", probability(self.p_in))
            if self.p_zero is None:
                object.__setattr__(self, "p_zero", p_h(h))
            else:
                object.__setattr__(self, "p_zero", probability(self.p_zero))
        except BbaError as e:
            raise ConfigError(str(e)) from e

        V = self.vote_threshold
        if isinstance(V, bool) or not isinstance(V, int) or not (1 <= V <= n):
            raise ConfigError(f"voteThreshold must be in 1..{n}, got {V!r}")
        if self.p_zero == 0:
            raise ConfigError("pZero must be in (0, 1]; a derived pH(h) of 0 needs h > 0")

    @property
    def total(self) -> int:
        return self.n_honest + self.n_malicious

    @property
    def pinned(self) -> bool:
        """Whether a boycotting malicious node propagates bit 1 only."""
        if self.n_malicious == 0:
            return False
        if self.boycott_rule == "always":
            return True
        return 3 * self.n_malicious > self.total

    def node_ids(self) -> tuple[range, range]:
        """(honest ids, malicious ids); malicious ids follow the honest ones."""
        return range(1, self.n_honest + 1), range(self.n_honest + 1, self.total + 1)


@dataclass(frozen=True)
class SimConfig:
    trials: int = 1000
    seed: int = 1
    adversary: str = "never-boycott"
    step_cap: int = 10_000  # sync actions per round before giving up

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not (0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be a 64-bit value, got {self.seed}")
        if self.step_cap < 1:
            raise ConfigError(f"step cap must be >= 1, got {self.step_cap}")


@dataclass(frozen=True)
class RunConfig:
    cmd: str
    params: ModelParams = field(default_factory=ModelParams)
    limits: ExploreLimits = field(default_factory=ExploreLimits)
    sim: SimConfig = field(default_factory=SimConfig)
    kinds: tuple[str, ...] = ("weak", "branching")
    high_gates: frozenset[str] = frozenset({"boycott"})
    reduce_counters: bool = True  # reset dead counters during exploration
    output: Path | None = None
    config_name: str = "custom"


# --- presets -------------------------------------------------------------------------------

PRESETS: dict[str, dict[str, Any]] = {
    "honest": {"n_honest": 4, "n_malicious": 0},
    "single": {"n_honest": 3, "n_malicious": 1},
    "even": {"n_honest": 2, "n_malicious": 2},
    "tiny": {"n_honest": 2, "n_malicious": 0, "committee_size": 2, "vote_threshold": 1},
}


_ALIASES = {"algorand": "honest", "4-0": "honest", "3-1": "single", "2-2": "even", "2-0": "tiny"}


def _preset_key(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in PRESETS:
        raise ValueError(f"Unknown preset: {name!r} (use {', '.join(PRESETS)})")
    return key


def get_preset(name: str) -> ModelParams:
    return ModelParams(**PRESETS[_preset_key(name)])


# --- key = value files -----------------------------------------------------------------------

# file key -> (attribute, parser)
_KEYS: dict[str, tuple[str, Any]] = {
    "nHonest": ("n_honest", int),
    "nMalicious": ("n_malicious", int),
    "committeeSize": ("committee_size", int),
    "voteThreshold": ("vote_threshold", int),
    "pIn": ("p_in", as_fraction),
    "hFraction": ("h_fraction", as_fraction),
    "pZero": ("p_zero", as_fraction),
    "boycottRule": ("boycott_rule", str),
    "schedule": ("schedule", str),
    "maxStates": ("max_states", int),
    "maxTransitions": ("max_transitions", int),
    "seed": ("seed", int),
    "trials": ("trials", int),
    "adversary": ("adversary", str),
    "reduceCounters": ("reduce_counters", lambda s: _parse_bool(s)),
}

MODEL_FIELDS = (
    "n_honest",
    "n_malicious",
    "committee_size",
    "vote_threshold",
    "p_in",
    "h_fraction",
    "p_zero",
    "boycott_rule",
    "schedule",
)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in {"1", "true", "yes", "on"}:
        return True
    if t in {"0", "false", "no", "off"}:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(text: str, *, source: str = "<config>") -> dict[str, Any]:
    """Parse `key = value` lines into attribute-named overrides."""
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (p.strip() for p in line.partition("="))
        if not sep or not key or not value:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        entry = _KEYS.get(key)
        if entry is None:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        attr, conv = entry
        try:
            out[attr] = conv(value)
        except (ValueError, BbaError) as e:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {value!r}") from e
    return out


def load_config(path: Path) -> dict[str, Any]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    return parse_config(text, source=str(path))


def default_config_path() -> Path | None:
    p = os.environ.get(CONFIG_ENV)
    return Path(p) if p else None


def resolve(
    cmd: str,
    file_values: dict[str, Any],
    cli_values: dict[str, Any],
    *,
    preset: str | None = None,
    **extra: Any,
) -> RunConfig:
    """Merge preset < config file < CLI flags; CLI entries that are None do not count."""
    merged = dict(file_values)
    merged.update({k: v for k, v in cli_values.items() if v is not None})

    model: dict[str, Any] = dict(PRESETS[_preset_key(preset)]) if preset else {}
    model.update({k: merged[k] for k in MODEL_FIELDS if k in merged})

    lim = ExploreLimits()
    sim = SimConfig()
    return RunConfig(
        cmd=cmd,
        params=ModelParams(**model),
        limits=ExploreLimits(
            max_states=merged.get("max_states", lim.max_states),
            max_transitions=merged.get("max_transitions", lim.max_transitions),
        ),
        sim=SimConfig(
            trials=merged.get("trials", sim.trials),
            seed=merged.get("seed", sim.seed),
            adversary=merged.get("adversary", sim.adversary),
            step_cap=merged.get("step_cap", sim.step_cap),
        ),
        reduce_counters=merged.get("reduce_counters", True),
        **extra,
    )
