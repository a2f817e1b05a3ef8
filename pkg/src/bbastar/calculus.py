from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import LabelError, UnguardedRecursionError, UnresolvedCallError
from .numerics import ONE, probability, render_fraction

logger = logging.getLogger(__name__)

Value = int | Fraction

SILENT = "silent"
VISIBLE = "visible"

PROB = "prob"

# gates with a fixed argument shape
_ARITY = {"propagate": 2, "reply": 1, "ask": 1, PROB: 1}


def _check_args(gate: str, args: tuple[Value, ...]) -> tuple[Value, ...]:
    for a in args:
        if isinstance(a, bool) or not isinstance(a, (int, Fraction)):
            raise LabelError(f"{gate}: argument {a!r} is not a nat or rational")
    want = _ARITY.get(gate)
    if want is None:
        return args
    if len(args) != want:
        raise LabelError(f"{gate} carries exactly {want} argument(s), got {len(args)}")
    if gate == "propagate":
        node, bit = args
        if not (isinstance(node, int) and node >= 1):
            raise LabelError(f"propagate: bad node id {node!r}")
        if bit not in (0, 1):
            raise LabelError(f"propagate: bad bit {bit!r}")
    elif gate == "ask":
        if args[0] not in (0, 1):
            raise LabelError(f"ask: bad bit {args[0]!r}")
    elif gate == "reply":
        if not (isinstance(args[0], int) and args[0] >= 0):
            raise LabelError(f"reply: bad count {args[0]!r}")
    else:
        return (probability(args[0]),)
    return args


@dataclass(frozen=True, slots=True)
class ActionLabel:
    kind: str
    gate: str | None = None
    args: tuple[Value, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == SILENT:
            if self.gate is not None or self.args:
                raise LabelError("silent labels carry no gate and no args")
            return
        if self.kind != VISIBLE:
            raise LabelError(f"unknown label kind {self.kind!r}")
        if not self.gate or not self.gate.isidentifier() or self.gate == "i":
            raise LabelError(f"bad gate name {self.gate!r}")
        object.__setattr__(self, "args", _check_args(self.gate, tuple(self.args)))

    @property
    def is_silent(self) -> bool:
        return self.kind == SILENT

    def __str__(self) -> str:
        if self.gate is None:
            return "tau"
        if not self.args:
            return self.gate
        rendered = [render_fraction(a) if isinstance(a, Fraction) else str(a) for a in self.args]
        return f"{self.gate}({', '.join(rendered)})"


TAU = ActionLabel(SILENT)


def action(gate: str, *args: Value) -> ActionLabel:
    return ActionLabel(VISIBLE, gate, args)


def prob(p: Value) -> ActionLabel:
    return ActionLabel(VISIBLE, PROB, (p,))


# --- terms ---------------------------------------------------------------------------------


class Term:
    """Closed syntax of the calculus; immutable, with structural equality and hashing."""

    __slots__ = ()


def _gate_set(gates: Iterable[str]) -> frozenset[str]:
    if isinstance(gates, str):
        raise TypeError("gate sets are collections of names, not a single string")
    return frozenset(gates)


@dataclass(frozen=True, slots=True)
class Nil(Term):
    def __hash__(self) -> int:
        return 0x5EED

    def __repr__(self) -> str:
        return "Nil"


NIL = Nil()


@dataclass(frozen=True, slots=True)
class Prefix(Term):
    label: ActionLabel
    cont: Term
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_hash", hash((1, self.label, self.cont)))

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True, slots=True)
class Choice(Term):
    left: Term
    right: Term
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_hash", hash((2, self.left, self.right)))

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True, slots=True)
class ProbChoice(Term):
    p: Fraction
    left: Term
    right: Term
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", probability(self.p))
        object.__setattr__(self, "_hash", hash((3, self.p, self.left, self.right)))

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True, slots=True)
class Parallel(Term):
    sync: frozenset[str]
    left: Term
    right: Term
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        sync = _gate_set(self.sync)
        if PROB in sync:
            raise LabelError("probabilistic branches cannot be synchronized")
        object.__setattr__(self, "sync", sync)
        object.__setattr__(self, "_hash", hash((4, sync, self.left, self.right)))

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True, slots=True)
class Restrict(Term):
    gates: frozenset[str]
    body: Term
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", _gate_set(self.gates))
        object.__setattr__(self, "_hash", hash((5, self.gates, self.body)))

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True, slots=True)
class Hide(Term):
    gates: frozenset[str]
    body: Term
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", _gate_set(self.gates))
        object.__setattr__(self, "_hash", hash((6, self.gates, self.body)))

    def __hash__(self) -> int:
        return self._hash


@dataclass(frozen=True, slots=True)
class Call(Term):
    name: str
    args: tuple[Value, ...] = ()
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))
        object.__setattr__(self, "_hash", hash((7, self.name, self.args)))

    def __hash__(self) -> int:
        return self._hash


def choice(*terms: Term) -> Term:
    """Right-nested Choice over `terms`; Nil when empty."""
    if not terms:
        return NIL
    out = terms[-1]
    for t in reversed(terms[:-1]):
        out = Choice(t, out)
    return out


# --- moves -------------------------------------------------------------------------------

Branch = tuple[Fraction, ActionLabel, Term]


@dataclass(frozen=True, slots=True)
class Move:
    """
    One scheduler-visible step. An ordinary transition is a single branch of weight 1;
    a ProbChoice contributes one move whose branches carry the weights p and 1-p.
    """

    branches: tuple[Branch, ...]

    @property
    def label(self) -> ActionLabel:
        return self.branches[0][1]

    @property
    def is_probabilistic(self) -> bool:
        return self.label.gate == PROB or len(self.branches) > 1


def _single(label: ActionLabel, target: Term) -> Move:
    return Move(((ONE, label, target),))


# --- environment -------------------------------------------------------------------------


@dataclass(frozen=True)
class Definition:
    name: str
    params: tuple[str, ...]
    body: Callable[..., Term]


class Environment:
    """
    Table of named recursive equations.

    A body is a function from concrete arguments to a term, so guards on data
    (k >= V and the like) are decided when a Call is unfolded.
    """

    def __init__(self, *, cache_limit: int = 500_000) -> None:
        self._defs: dict[str, Definition] = {}
        self._unfolded: dict[Call, Term] = {}
        self._moves: dict[Term, tuple[Move, ...]] = {}
        self._active: set[Call] = set()
        self.cache_limit = int(cache_limit)

    def define(self, name: str, params: Iterable[str], body: Callable[..., Term]) -> None:
        params = tuple(params)
        old = self._defs.get(name)
        if old is not None and old.params != params:
            raise UnresolvedCallError(f"{name} redefined with parameters {params}")
        self._defs[name] = Definition(name, params, body)

    def __contains__(self, name: object) -> bool:
        return name in self._defs

    def names(self) -> list[str]:
        return sorted(self._defs)

    def unfold(self, call: Call) -> Term:
        hit = self._unfolded.get(call)
        if hit is not None:
            return hit
        d = self._defs.get(call.name)
        if d is None:
            raise UnresolvedCallError(f"no definition for {call.name!r}")
        if len(call.args) != len(d.params):
            raise UnresolvedCallError(
                f"{call.name} expects {len(d.params)} argument(s), got {len(call.args)}"
            )
        body = d.body(*call.args)
        if not isinstance(body, Term):
            raise TypeError(f"definition {call.name} returned {type(body).__name__}, not a term")
        self._unfolded[call] = body
        return body

    def validate(self, term: Term) -> int:
        """Unfold every reachable Call once; returns how many distinct calls were seen."""
        return sum(1 for t in _walk(term, self) if isinstance(t, Call))

    def moves(self, term: Term) -> tuple[Move, ...]:
        hit = self._moves.get(term)
        if hit is not None:
            return hit
        out = self._compute_moves(term)
        if len(self._moves) >= self.cache_limit:
            logger.debug("moves cache full (%d entries), clearing", len(self._moves))
            self._moves.clear()
        self._moves[term] = out
        return out

    def _compute_moves(self, term: Term) -> tuple[Move, ...]:
        if isinstance(term, Prefix):
            return (_single(term.label, term.cont),)
        if isinstance(term, Nil):
            return ()
        if isinstance(term, Choice):
            return tuple(dict.fromkeys(self.moves(term.left) + self.moves(term.right)))
        if isinstance(term, ProbChoice):
            if term.p == ONE:
                return (_single(prob(ONE), term.left),)
            q = ONE - term.p
            return (Move(((term.p, prob(term.p), term.left), (q, prob(q), term.right))),)
        if isinstance(term, Parallel):
            return self._parallel_moves(term)
        if isinstance(term, Restrict):
            out = []
            for m in self.moves(term.body):
                kept = tuple(b for b in m.branches if b[1].gate not in term.gates)
                if kept:
                    out.append(Move(tuple((w, a, Restrict(term.gates, t)) for w, a, t in kept)))
            return tuple(dict.fromkeys(out))
        if isinstance(term, Hide):
            out = []
            for m in self.moves(term.body):
                out.append(
                    Move(
                        tuple(
                            (w, TAU if a.gate in term.gates else a, Hide(term.gates, t))
                            for w, a, t in m.branches
                        )
                    )
                )
            return tuple(dict.fromkeys(out))
        if isinstance(term, Call):
            if term in self._active:
                raise UnguardedRecursionError(f"unguarded recursion through {term.name}")
            self._active.add(term)
            try:
                return self.moves(self.unfold(term))
            finally:
                self._active.discard(term)
        raise TypeError(f"not a process term: {term!r}")

    def _parallel_moves(self, term: Parallel) -> tuple[Move, ...]:
        sync = term.sync
        out: list[Move] = []
        waiting_left: dict[ActionLabel, list[Term]] = {}
        waiting_right: dict[ActionLabel, list[Term]] = {}

        for m in self.moves(term.left):
            a = m.label
            if len(m.branches) == 1 and a.gate in sync:
                waiting_left.setdefault(a, []).append(m.branches[0][2])
            else:
                out.append(
                    Move(tuple((w, b, Parallel(sync, t, term.right)) for w, b, t in m.branches))
                )
        for m in self.moves(term.right):
            a = m.label
            if len(m.branches) == 1 and a.gate in sync:
                waiting_right.setdefault(a, []).append(m.branches[0][2])
            else:
                out.append(
                    Move(tuple((w, b, Parallel(sync, term.left, t)) for w, b, t in m.branches))
                )
        for a, lefts in waiting_left.items():
            rights = waiting_right.get(a)
            if not rights:
                continue
            for lt in lefts:
                for rt in rights:
                    out.append(_single(a, Parallel(sync, lt, rt)))
        return tuple(dict.fromkeys(out))


def _walk(term: Term, env: Environment) -> Iterator[Term]:
    seen: set[Term] = set()
    stack = [term]
    while stack:
        t = stack.pop()
        if t in seen:
            continue
        seen.add(t)
        yield t
        if isinstance(t, Prefix):
            stack.append(t.cont)
        elif isinstance(t, (Choice, ProbChoice, Parallel)):
            stack.append(t.right)
            stack.append(t.left)
        elif isinstance(t, (Restrict, Hide)):
            stack.append(t.body)
        elif isinstance(t, Call):
            stack.append(env.unfold(t))


def moves(term: Term, env: Environment | None = None) -> tuple[Move, ...]:
    return (env or Environment()).moves(term)


def successors(term: Term, env: Environment | None = None) -> tuple[tuple[ActionLabel, Term], ...]:
    """Every one-step derivative (label, target), duplicate-free, in a fixed order."""
    found = (
        (label, target) for m in moves(term, env) for _, label, target in m.branches
    )
    return tuple(dict.fromkeys(found))


def alphabet(term: Term, env: Environment | None = None) -> set[str]:
    """Gates occurring syntactically in prefixes reachable through definitions."""
    env = env or Environment()
    gates: set[str] = set()
    for t in _walk(term, env):
        if isinstance(t, Prefix) and t.label.gate is not None:
            gates.add(t.label.gate)
        elif isinstance(t, ProbChoice):
            gates.add(PROB)
    return gates
