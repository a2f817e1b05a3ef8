from __future__ import annotations

import logging
import re
from collections import deque
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any

import numpy as np

from .calculus import Environment, Move, Term
from .errors import BbaError, ConfigError, OracleScaleError, RoundDeadlock, StepCapExceeded
from .lts import COMMIT_GATES
from .model import (
    BOYCOTT,
    COMMIT_PROPOSED_BLOCK,
    SYNC,
    DeadCounterReset,
    build_model,
    model_moves,
)
from .numerics import probability, render_fraction
from .specs import ModelParams

logger = logging.getLogger(__name__)

STEP_CAP = 10_000
ORACLE_MAX_STATES = 5_000

SeedLike = int | np.random.SeedSequence | np.random.Generator


# --- adversary -----------------------------------------------------------------------------


class Mode(Enum):
    """How the coalition has settled the boycott question for the current round."""

    UNDECIDED = "undecided"
    BOYCOTT = "boycott"
    REFUSE = "refuse"


_PROBABILISTIC = re.compile(r"^probabilistic\s*[(:]\s*([^)]+?)\s*\)?$")


@dataclass(frozen=True)
class Adversary:
    """
    Policy for the malicious boycott choice.

    never: boycott moves are never scheduled; always: when enabled, only boycott moves
    are scheduled; probabilistic(q): the first time boycott is enabled in a round the
    coalition boycotts with probability q and sticks to that decision.
    """

    policy: str = "never"
    q: Fraction | None = None

    def __post_init__(self) -> None:
        if self.policy not in ("never", "always", "probabilistic"):
            raise ConfigError(f"unknown adversary policy {self.policy!r}")
        if (self.policy == "probabilistic") != (self.q is not None):
            raise ConfigError("q is given exactly for the probabilistic policy")
        if self.q is not None:
            object.__setattr__(self, "q", probability(self.q, allow_zero=True))

    @classmethod
    def parse(cls, text: str) -> Adversary:
        key = text.strip().lower()
        if key in {"never", "never-boycott"}:
            return cls("never")
        if key in {"always", "always-boycott"}:
            return cls("always")
        m = _PROBABILISTIC.match(key)
        if m is not None:
            try:
                return cls("probabilistic", probability(m.group(1), allow_zero=True))
            except BbaError as e:
                raise ConfigError(f"bad adversary {text!r}: {e}") from e
        raise ConfigError(
            f"Unknown adversary: {text!r} (use never-boycott|always-boycott|probabilistic(q))"
        )

    def __str__(self) -> str:
        if self.policy == "probabilistic":
            return f"probabilistic({render_fraction(self.q)})"
        return f"{self.policy}-boycott"

    def options(self, ms: tuple[Move, ...], mode: Mode) -> list[tuple[Fraction, Mode, list[Move]]]:
        """
        Weighted scheduling sets: [(weight, next mode, moves)], weights summing to 1.

        Moves not touching boycott are kept in every set.
        """
        boycott = [m for m in ms if m.label.gate == BOYCOTT]
        if not boycott:
            return [(Fraction(1), mode, list(ms))]
        rest = [m for m in ms if m.label.gate != BOYCOTT]
        if self.policy == "never" or mode is Mode.REFUSE:
            return [(Fraction(1), mode, rest)]
        if self.policy == "always" or mode is Mode.BOYCOTT:
            return [(Fraction(1), mode, boycott)]
        q = self.q
        out = []
        if q > 0:
            out.append((q, Mode.BOYCOTT, boycott))
        if q < 1:
            out.append((1 - q, Mode.REFUSE, rest))
        return out


# --- one round -----------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundOutcome:
    committed: str  # "proposed" | "empty"
    steps_taken: int  # sync actions before the commit
    boycotted: bool

    def __post_init__(self) -> None:
        if self.committed not in ("proposed", "empty"):
            raise ValueError(f"unknown outcome {self.committed!r}")
        if self.steps_taken < 1:
            raise ValueError("a round commits after at least one sync")


def _rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _pick_branch(m: Move, rng: np.random.Generator):
    if len(m.branches) == 1:
        return m.branches[0]
    u = rng.random()
    acc = 0.0
    for b in m.branches:
        acc += float(b[0])
        if u < acc:
            return b
    return m.branches[-1]


def run_round(
    params: ModelParams,
    adversary: Adversary | str,
    seed: SeedLike,
    *,
    step_cap: int = STEP_CAP,
    model: tuple[Term, Environment] | None = None,
) -> RoundOutcome:
    """
    Simulate from the initial state to the first commit.

    Probabilistic branches are sampled with their weights, the boycott choice follows
    `adversary`, every other choice is uniform over the moves the model schedule offers.
    """
    adv = Adversary.parse(adversary) if isinstance(adversary, str) else adversary
    rng = _rng(seed)
    term, env = model if model is not None else build_model(params)
    step = model_moves(params, env)

    mode = Mode.UNDECIDED
    steps = 0
    boycotted = False
    while True:
        options = adv.options(step(term), mode)
        if len(options) > 1:
            u = rng.random()
            chosen = options[0] if u < float(options[0][0]) else options[1]
        else:
            chosen = options[0]
        _, mode, ms = chosen
        if not ms:
            raise RoundDeadlock(steps)
        _, a, term = _pick_branch(ms[int(rng.integers(len(ms)))], rng)
        if a.gate == BOYCOTT:
            boycotted = True
        elif a.gate == SYNC:
            steps += 1
            if steps > step_cap:
                raise StepCapExceeded(step_cap)
        elif a.gate in COMMIT_GATES:
            committed = "proposed" if a.gate == COMMIT_PROPOSED_BLOCK else "empty"
            return RoundOutcome(committed, steps, boycotted)


# --- many rounds ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimStats:
    trials: int
    completed: int
    deadlocked: int
    capped: int
    frac_proposed: float
    frac_empty: float
    mean_steps: float
    seed: int

    def record(self, config_name: str, params: ModelParams, adversary: Adversary) -> dict[str, Any]:
        """Line record; the key order is part of the output format."""
        return {
            "config": config_name,
            "nHonest": params.n_honest,
            "nMalicious": params.n_malicious,
            "adversary": str(adversary),
            "trials": self.trials,
            "completed": self.completed,
            "deadlocked": self.deadlocked,
            "capped": self.capped,
            "fracProposed": self.frac_proposed,
            "fracEmpty": self.frac_empty,
            "meanSteps": self.mean_steps,
            "seed": self.seed,
        }


def estimate(
    params: ModelParams,
    adversary: Adversary | str,
    trials: int,
    seed: int,
    *,
    step_cap: int = STEP_CAP,
) -> SimStats:
    """
    Aggregate `trials` independently seeded rounds.

    Trial i draws from the i-th child of SeedSequence(seed), so a serial run and any
    split of the trials over workers see the same streams.
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    if not (0 <= seed < 2**64):
        raise ConfigError(f"seed must be a 64-bit value, got {seed}")
    adv = Adversary.parse(adversary) if isinstance(adversary, str) else adversary
    model = build_model(params)

    proposed = empty = deadlocked = capped = 0
    steps_total = 0
    for child in np.random.SeedSequence(seed).spawn(trials):
        try:
            out = run_round(params, adv, child, step_cap=step_cap, model=model)
        except RoundDeadlock:
            deadlocked += 1
            continue
        except StepCapExceeded:
            capped += 1
            continue
        steps_total += out.steps_taken
        if out.committed == "proposed":
            proposed += 1
        else:
            empty += 1

    completed = proposed + empty
    if deadlocked or capped:
        logger.info("estimate: %d deadlocked, %d capped of %d trials", deadlocked, capped, trials)
    if completed == 0:
        return SimStats(trials, 0, deadlocked, capped, 0.0, 0.0, 0.0, seed)
    return SimStats(
        trials=trials,
        completed=completed,
        deadlocked=deadlocked,
        capped=capped,
        frac_proposed=proposed / completed,
        frac_empty=empty / completed,
        mean_steps=steps_total / completed,
        seed=seed,
    )


# --- exact oracle --------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundDistribution:
    """Absorption probabilities of one round, choosing uniformly among scheduled moves."""

    proposed: float
    empty: float
    deadlock: float
    states: int

    @property
    def proposed_given_commit(self) -> float:
        done = self.proposed + self.empty
        return self.proposed / done if done > 0 else 0.0


def markov_oracle(
    params: ModelParams,
    adversary: Adversary | str = "never-boycott",
    *,
    max_states: int = ORACLE_MAX_STATES,
) -> RoundDistribution:
    """
    Exact outcome distribution of `run_round` for small instances.

    The round is a Markov chain over (term, adversary mode); commits and deadlocks
    absorb. States are taken modulo dead counters. Absorption probabilities come from one
    dense solve, so keep `max_states` modest.
    """
    adv = Adversary.parse(adversary) if isinstance(adversary, str) else adversary
    term, env = build_model(params)
    step = model_moves(params, env)
    canon = DeadCounterReset()
    term = canon(term)
    start = (term, Mode.UNDECIDED)
    index: dict[tuple[Term, Mode], int] = {start: 0}
    queue: deque[tuple[Term, Mode]] = deque([start])
    rows: list[dict[int, float]] = []
    absorb: list[tuple[float, float, float]] = []  # proposed, empty, deadlock

    while queue:
        t, mode = queue.popleft()
        row: dict[int, float] = {}
        hit = [0.0, 0.0, 0.0]
        for w_opt, nmode, ms in adv.options(step(t), mode):
            if not ms:
                hit[2] += float(w_opt)
                continue
            w_move = float(w_opt) / len(ms)
            for m in ms:
                for w, a, nxt in m.branches:
                    p = w_move * float(w)
                    if a.gate in COMMIT_GATES:
                        hit[0 if a.gate == COMMIT_PROPOSED_BLOCK else 1] += p
                        continue
                    key = (canon(nxt), nmode)
                    j = index.get(key)
                    if j is None:
                        if len(index) >= max_states:
                            raise OracleScaleError(
                                f"round chain exceeds {max_states} states; use the simulator"
                            )
                        j = index[key] = len(index)
                        queue.append(key)
                    row[j] = row.get(j, 0.0) + p
        rows.append(row)
        absorb.append((hit[0], hit[1], hit[2]))

    n = len(rows)
    A = np.eye(n)
    for i, row in enumerate(rows):
        for j, p in row.items():
            A[i, j] -= p
    B = np.asarray(absorb, dtype=float)
    try:
        X = np.linalg.solve(A, B)
    except np.linalg.LinAlgError as e:
        raise BbaError("round does not terminate with probability 1 under this scheduler") from e
    proposed, empty, dead = (float(v) for v in X[0])
    logger.info("markov oracle: %d states, P(proposed)=%.6f P(empty)=%.6f", n, proposed, empty)
    return RoundDistribution(proposed, empty, dead, n)
