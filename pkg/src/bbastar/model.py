"""
Process terms of the Algorand network: nodes, vote counters and their composition.

A node is a behaviour term running next to its vote counter; nodes are composed
over the round-level gates so that block proposal, step synchronisation, vote
propagation and commits are global actions.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterator
from enum import IntEnum

from .calculus import (
    TAU,
    Call,
    Choice,
    Environment,
    Move,
    Parallel,
    Prefix,
    ProbChoice,
    Term,
    action,
    choice,
)
from .errors import ConfigError
from .lts import COMMIT_GATES, RECEIVE_BLOCK_PROPOSAL, ExploreLimits, Lts, explore
from .numerics import p_h, p_v
from .specs import ModelParams

__all__ = [
    "COMMIT_EMPTY_BLOCK",
    "COMMIT_PROPOSED_BLOCK",
    "DeadCounterReset",
    "NODE_SYNC",
    "ROUND_SYNC",
    "StepClass",
    "SynchronousSchedule",
    "build_counter",
    "build_honest_node",
    "build_malicious_node",
    "build_model",
    "build_network",
    "explore_model",
    "model_moves",
    "p_h",
    "p_v",
]

logger = logging.getLogger(__name__)

COMPUTE_BIT = "compute_bit"
ADJUST_BIT = "adjust_bit"
SELF_VERIFY = "self_verify"
SYNC = "sync"
PROPAGATE = "propagate"
ASK = "ask"
REPLY = "reply"
BOYCOTT = "boycott"
COMMIT_PROPOSED_BLOCK = "commit_proposed_block"
COMMIT_EMPTY_BLOCK = "commit_empty_block"

# node-internal: behaviour <-> own counter
NODE_SYNC = frozenset({ASK, REPLY, SELF_VERIFY})
# network-wide
ROUND_SYNC = frozenset({RECEIVE_BLOCK_PROPOSAL, SYNC, PROPAGATE}) | COMMIT_GATES

COUNTER = "C"


class StepClass(IntEnum):
    """Step index modulo 3, plus the entry step of a fresh round."""

    S_INIT = 0
    S_ZERO = 1
    S_ONE = 2
    S_TWO = 3


# --- counter -------------------------------------------------------------------------------


def _check_id(node_id: int, ids: range, what: str) -> None:
    if node_id not in ids:
        raise ConfigError(f"{what} id {node_id} outside {ids.start}..{ids.stop - 1}")


def build_counter(node_id: int, params: ModelParams, env: Environment) -> Term:
    """Define the vote counter family in `env` and return the counter of `node_id` at (0, 0)."""
    n = params.total
    _check_id(node_id, range(1, n + 1), "node")

    if COUNTER not in env:

        def counter(i: int, k0: int, k1: int) -> Term:
            here = Call(COUNTER, (i, k0, k1))
            summands: list[Term] = []
            for j in range(1, n + 1):
                if j == i:
                    continue
                up0 = Call(COUNTER, (i, min(k0 + 1, n), k1))
                up1 = Call(COUNTER, (i, k0, min(k1 + 1, n)))
                summands.append(Prefix(action(PROPAGATE, j, 0), up0))
                summands.append(Prefix(action(PROPAGATE, j, 1), up1))
            summands.append(Prefix(action(ASK, 0), Prefix(action(REPLY, k0), here)))
            summands.append(Prefix(action(ASK, 1), Prefix(action(REPLY, k1), here)))
            summands.append(Prefix(action(SELF_VERIFY), Call(COUNTER, (i, 0, 0))))
            return choice(*summands)

        env.define(COUNTER, ("i", "k0", "k1"), counter)
    return Call(COUNTER, (node_id, 0, 0))


# --- node behaviour ------------------------------------------------------------------------


class _Family:
    """
    One copy of the per-node equations.

    `prefix` names the definitions ("" for honest nodes, "HN_"/"MN_" for the two
    continuations of a malicious node), `restart` is the entry reached after a
    commit, and `pinned` forces every propagated bit to 1.
    """

    def __init__(self, params: ModelParams, prefix: str, restart: str, *, pinned: bool) -> None:
        self.params = params
        self.restart = restart
        self.pinned = pinned
        self.prime = f"{prefix}N_PRIME" if prefix == "" else f"{prefix}PRIME"
        self.second = f"{prefix}N_SECOND" if prefix == "" else f"{prefix}SECOND"
        self.third = f"{prefix}N_THIRD" if prefix == "" else f"{prefix}THIRD"
        self.fourth = f"{prefix}N_FOURTH" if prefix == "" else f"{prefix}FOURTH"

    def define(self, env: Environment) -> None:
        if self.prime in env:
            return
        env.define(self.prime, ("i",), self._prime)
        env.define(self.second, ("i", "s", "b"), self._second)
        env.define(self.third, ("i", "s"), self._third)
        env.define(self.fourth, ("i", "s"), self._fourth)

    def _replies(self, on_count: Callable[[int], Term]) -> Term:
        n = self.params.total
        return choice(*(Prefix(action(REPLY, k), on_count(k)) for k in range(n + 1)))

    def _passes(self, k: int) -> bool:
        return k >= self.params.vote_threshold

    def _prime(self, i: int) -> Term:
        return Prefix(
            action(COMPUTE_BIT),
            ProbChoice(
                self.params.p_zero,
                Call(self.second, (i, StepClass.S_INIT, 0)),
                Call(self.second, (i, StepClass.S_INIT, 1)),
            ),
        )

    def _second(self, i: int, s: int, b: int) -> Term:
        if s == StepClass.S_INIT:
            nxt = Call(self.third, (i, StepClass.S_ZERO))
        elif s == StepClass.S_ZERO:
            nxt = Call(self.third, (i, StepClass.S_ONE))
        elif s == StepClass.S_ONE:
            nxt = Call(self.fourth, (i, StepClass.S_TWO))
        else:
            raise ConfigError(f"no step follows {StepClass(s).name} directly")
        bit = 1 if self.pinned else b
        return Prefix(
            action(SELF_VERIFY),
            ProbChoice(
                self.params.p_in,
                Prefix(action(PROPAGATE, i, bit), Prefix(action(SYNC), nxt)),
                Prefix(action(SYNC), nxt),
            ),
        )

    def _third(self, i: int, s: int) -> Term:
        if s == StepClass.S_ZERO:
            asked, commit = 0, COMMIT_PROPOSED_BLOCK
        elif s == StepClass.S_ONE:
            asked, commit = 1, COMMIT_EMPTY_BLOCK
        else:
            raise ConfigError(f"no commit check in {StepClass(s).name}")
        fallback = Call(self.fourth, (i, s))
        restart = Call(self.restart, (i,))
        return Prefix(
            action(ASK, asked),
            self._replies(
                lambda k: Prefix(action(commit), restart) if self._passes(k) else fallback
            ),
        )

    def _fourth(self, i: int, s: int) -> Term:
        def second(step: StepClass, b: int) -> Term:
            return Call(self.second, (i, step, b))

        if s == StepClass.S_ZERO:
            body = Prefix(
                action(ASK, 1),
                self._replies(lambda k: second(StepClass.S_ZERO, 1 if self._passes(k) else 0)),
            )
        elif s == StepClass.S_ONE:
            body = Prefix(
                action(ASK, 0),
                self._replies(lambda k: second(StepClass.S_ONE, 0 if self._passes(k) else 1)),
            )
        elif s == StepClass.S_TWO:
            # coin step: neither bit reached the threshold -> fresh random bit
            coin = Prefix(
                action(ASK, 1),
                self._replies(
                    lambda k: (
                        second(StepClass.S_INIT, 1) if self._passes(k) else Call(self.prime, (i,))
                    )
                ),
            )
            body = Prefix(
                action(ASK, 0),
                self._replies(lambda k: second(StepClass.S_INIT, 0) if self._passes(k) else coin),
            )
        else:
            raise ConfigError(f"no bit adjustment in {StepClass(s).name}")
        return Prefix(action(ADJUST_BIT), body)


def build_honest_node(node_id: int, params: ModelParams, env: Environment) -> Term:
    honest, _ = params.node_ids()
    _check_id(node_id, honest, "honest node")
    if "N" not in env:
        fam = _Family(params, "", "N", pinned=False)
        fam.define(env)
        env.define(
            "N", ("i",), lambda i: Prefix(action(RECEIVE_BLOCK_PROPOSAL), Call(fam.prime, (i,)))
        )
    return Parallel(NODE_SYNC, Call("N", (node_id,)), build_counter(node_id, params, env))


def build_malicious_node(node_id: int, params: ModelParams, env: Environment) -> Term:
    """
    A node that, on each block proposal, either boycotts (visible) or silently
    behaves honestly for the round. A pinned boycott propagates bit 1 only.
    """
    _, malicious = params.node_ids()
    _check_id(node_id, malicious, "malicious node")
    if "MN" not in env:
        hn = _Family(params, "HN_", "MN", pinned=False)
        hn.define(env)
        if params.pinned:
            mn = _Family(params, "MN_", "MN", pinned=True)
            mn.define(env)
            boycott_target = mn.prime
        else:
            boycott_target = hn.prime

        def entry(i: int) -> Term:
            return Prefix(
                action(RECEIVE_BLOCK_PROPOSAL),
                Choice(
                    Prefix(action(BOYCOTT), Call(boycott_target, (i,))),
                    Prefix(TAU, Call(hn.prime, (i,))),
                ),
            )

        env.define("MN", ("i",), entry)
    return Parallel(NODE_SYNC, Call("MN", (node_id,)), build_counter(node_id, params, env))


def _compose(sync: frozenset[str], terms: list[Term]) -> Term:
    out = terms[0]
    for t in terms[1:]:
        out = Parallel(sync, out, t)
    return out


def build_network(params: ModelParams, env: Environment | None = None) -> tuple[Term, Environment]:
    """The whole network term; malicious nodes also synchronise among themselves on boycott."""
    env = env if env is not None else Environment()
    honest_ids, malicious_ids = params.node_ids()
    honest = [build_honest_node(i, params, env) for i in honest_ids]
    malicious = [build_malicious_node(i, params, env) for i in malicious_ids]
    groups: list[Term] = []
    if honest:
        groups.append(_compose(ROUND_SYNC, honest))
    if malicious:
        groups.append(_compose(ROUND_SYNC | {BOYCOTT}, malicious))
    term = _compose(ROUND_SYNC, groups)
    logger.debug(
        "network n=%d m=%d V=%d pinned=%s",
        params.n_honest,
        params.n_malicious,
        params.vote_threshold,
        params.pinned,
    )
    return term, env


def build_model(params: ModelParams) -> tuple[Term, Environment]:
    """Fresh environment plus network term, with every reachable definition checked."""
    term, env = build_network(params)
    calls = env.validate(term)
    logger.debug("model validated: %d distinct calls", calls)
    return term, env


# --- dead-counter reduction ----------------------------------------------------------------

# definitions whose next interaction with the counter is self_verify
_BEFORE_VERIFY = frozenset(
    {"N", "N_PRIME", "N_SECOND", "MN", "HN_PRIME", "HN_SECOND", "MN_PRIME", "MN_SECOND"}
)


def _awaits_self_verify(t: Term) -> bool:
    while True:
        if isinstance(t, Call):
            return t.name in _BEFORE_VERIFY
        if isinstance(t, Prefix):
            g = t.label.gate
            if g == SELF_VERIFY:
                return True
            if g in (ASK, REPLY):
                return False
            t = t.cont
            continue
        if isinstance(t, (Choice, ProbChoice)):
            return _awaits_self_verify(t.left) and _awaits_self_verify(t.right)
        return False


class DeadCounterReset:
    """
    Canonical form for exploration: a counter whose node will self-verify before
    asking again holds values nobody reads, so it is reset to (0, 0).

    Preserves strong bisimilarity; pass an instance as `canonical` to `explore`.
    The per-node memo is dropped whenever it reaches `cache_limit` entries.
    """

    def __init__(self, *, cache_limit: int = 200_000) -> None:
        self._nodes: dict[Parallel, Parallel] = {}
        self.cache_limit = int(cache_limit)

    def __call__(self, term: Term) -> Term:
        if not isinstance(term, Parallel):
            return term
        if term.sync == NODE_SYNC:
            return self._node(term)
        left = self(term.left)
        right = self(term.right)
        if left is term.left and right is term.right:
            return term
        return Parallel(term.sync, left, right)

    @property
    def cached(self) -> int:
        return len(self._nodes)

    def _node(self, term: Parallel) -> Parallel:
        hit = self._nodes.get(term)
        if hit is not None:
            return hit
        out = term
        c = term.right
        if (
            isinstance(c, Call)
            and c.name == COUNTER
            and (c.args[1], c.args[2]) != (0, 0)
            and _awaits_self_verify(term.left)
        ):
            out = Parallel(term.sync, term.left, Call(COUNTER, (c.args[0], 0, 0)))
        if len(self._nodes) >= self.cache_limit:
            logger.debug("dead-counter memo full (%d entries), clearing", len(self._nodes))
            self._nodes.clear()
        self._nodes[term] = out
        return out


# --- synchronous schedule ------------------------------------------------------------------

# gates a node cannot fire on its own
_NETWORK_GATES = ROUND_SYNC | {BOYCOTT}

SlotPath = tuple[int, ...]


def _node_slots(term: Term, path: SlotPath = ()) -> Iterator[tuple[SlotPath, Parallel]]:
    """Node components of a network term, left to right, i.e. in id order."""
    if isinstance(term, Parallel):
        if term.sync == NODE_SYNC:
            yield path, term
        else:
            yield from _node_slots(term.left, (*path, 0))
            yield from _node_slots(term.right, (*path, 1))


def _replace(term: Term, path: SlotPath, new: Term) -> Term:
    if not path:
        return new
    if not isinstance(term, Parallel):
        raise TypeError(f"no node slot at {path} in {type(term).__name__}")
    if path[0] == 0:
        return Parallel(term.sync, _replace(term.left, path[1:], new), term.right)
    return Parallel(term.sync, term.left, _replace(term.right, path[1:], new))


class SynchronousSchedule:
    """
    Moves of a network term under the synchronous step discipline.

    Malicious nodes still facing the boycott question decide first. Then the
    lowest-id node with local work (bit computation, counter queries, committee
    draws) runs it, one node at a time, until every node waits on a network gate;
    only then do block proposal, vote propagation, step sync and commits fire.
    A vote is therefore always counted in the step it was cast for.

    Use in place of `Environment.moves`; a term without node components gets its
    full move set.
    """

    def __init__(self, env: Environment) -> None:
        self.env = env

    def __call__(self, term: Term) -> tuple[Move, ...]:
        slots = list(_node_slots(term))
        if not slots:
            return self.env.moves(term)

        undecided = [(path, node) for path, node in slots if BOYCOTT in self._offers(node.left)]
        if undecided:
            out = [m for m in self.env.moves(term) if m.label.gate == BOYCOTT]
            for path, node in undecided:
                out.extend(self._lift(term, path, self._local(node)))
            if out:
                return tuple(out)

        for path, node in slots:
            if self._offers(node.left) & _NETWORK_GATES:
                continue  # waiting on the network
            local = self._local(node)
            if local:
                return self._lift(term, path, local)
        return self.env.moves(term)

    def _offers(self, behaviour: Term) -> set[str | None]:
        return {m.label.gate for m in self.env.moves(behaviour)}

    def _local(self, node: Parallel) -> list[Move]:
        return [m for m in self.env.moves(node) if m.label.gate not in _NETWORK_GATES]

    @staticmethod
    def _lift(term: Term, path: SlotPath, ms: list[Move]) -> tuple[Move, ...]:
        return tuple(
            Move(tuple((w, a, _replace(term, path, t)) for w, a, t in m.branches)) for m in ms
        )


def model_moves(params: ModelParams, env: Environment) -> Callable[[Term], tuple[Move, ...]]:
    """The move function a network built from `params` is explored and simulated with."""
    if params.schedule == "synchronous":
        return SynchronousSchedule(env)
    return env.moves


def explore_model(
    params: ModelParams,
    limits: ExploreLimits | None = None,
    *,
    reduce_counters: bool = True,
) -> Lts:
    """Build the network for `params` and generate its state space."""
    term, env = build_model(params)
    canonical = DeadCounterReset() if reduce_counters else None
    logger.info(
        "exploring n=%d m=%d schedule=%s reduce_counters=%s",
        params.n_honest,
        params.n_malicious,
        params.schedule,
        reduce_counters,
    )
    return explore(term, env, limits, canonical=canonical, moves=model_moves(params, env))
