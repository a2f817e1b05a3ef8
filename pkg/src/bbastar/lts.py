from __future__ import annotations

import logging
from array import array
from collections import deque
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .calculus import TAU, ActionLabel, Environment, Move, Term
from .errors import ConfigError, LimitExceeded

logger = logging.getLogger(__name__)

RECEIVE_BLOCK_PROPOSAL = "receive_block_proposal"
COMMIT_GATES = frozenset({"commit_proposed_block", "commit_empty_block"})


@dataclass(frozen=True)
class ExploreLimits:
    max_states: int = 5_000_000  # hard stop, never truncate silently
    max_transitions: int = 20_000_000

    def __post_init__(self) -> None:
        if self.max_states <= 0 or self.max_transitions <= 0:
            raise ConfigError("exploration limits must be > 0")


def _as_index_array(x: Iterable[int] | np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(x, dtype=np.int64).reshape(-1))
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Lts:
    """
    Explicit LTS. Transitions are three parallel int arrays; `lab` indexes `labels`.

    Equality is on (numStates, initial, ordered transition triples with label values),
    so two systems built with different label tables still compare equal.
    """

    num_states: int
    initial: int
    labels: tuple[ActionLabel, ...]
    src: np.ndarray
    lab: np.ndarray
    dst: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(self.labels))
        for name in ("src", "lab", "dst"):
            object.__setattr__(self, name, _as_index_array(getattr(self, name)))
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("duplicate entries in the label table")
        n = int(self.num_states)
        if n < 1:
            raise ValueError("an LTS has at least one state")
        if not (0 <= self.initial < n):
            raise ValueError(f"initial state {self.initial} out of range")
        if not (self.src.size == self.lab.size == self.dst.size):
            raise ValueError("src/lab/dst lengths differ")
        if self.src.size:
            if self.src.min() < 0 or self.dst.min() < 0 or max(self.src.max(), self.dst.max()) >= n:
                raise ValueError("transition endpoint out of range")
            if self.lab.min() < 0 or self.lab.max() >= len(self.labels):
                raise ValueError("label index out of range")

    @classmethod
    def from_triples(
        cls,
        num_states: int,
        initial: int,
        triples: Iterable[tuple[int, ActionLabel, int]],
    ) -> Lts:
        ids: dict[ActionLabel, int] = {}
        seen: dict[tuple[int, int, int], None] = {}
        for s, a, t in triples:
            k = ids.setdefault(a, len(ids))
            seen.setdefault((int(s), k, int(t)), None)
        rows = np.array(list(seen), dtype=np.int64).reshape(-1, 3)
        return cls(num_states, initial, tuple(ids), rows[:, 0], rows[:, 1], rows[:, 2])

    @property
    def num_transitions(self) -> int:
        return int(self.src.size)

    def transitions(self) -> list[tuple[int, ActionLabel, int]]:
        labels = self.labels
        return [
            (int(s), labels[a], int(t))
            for s, a, t in zip(self.src.tolist(), self.lab.tolist(), self.dst.tolist(), strict=True)
        ]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lts):
            return NotImplemented
        if (self.num_states, self.initial, self.num_transitions) != (
            other.num_states,
            other.initial,
            other.num_transitions,
        ):
            return False
        ids = {a: i for i, a in enumerate(other.labels)}
        mapping = np.array([ids.get(a, -1) for a in self.labels], dtype=np.int64)
        return (
            np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(mapping[self.lab], other.lab)
        )

    __hash__ = None  # type: ignore[assignment]

    def label_mask(self, gates: Iterable[str]) -> np.ndarray:
        """Bool per label id: does its gate belong to `gates`."""
        gs = frozenset(gates)
        return np.array([a.gate in gs for a in self.labels], dtype=bool)

    def gates(self) -> set[str]:
        used = np.unique(self.lab)
        return {self.labels[i].gate for i in used.tolist() if self.labels[i].gate is not None}

    @cached_property
    def tau_mask(self) -> np.ndarray:
        return np.array([a.is_silent for a in self.labels], dtype=bool)

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray]:
        order = np.argsort(self.src, kind="stable")
        counts = np.bincount(self.src, minlength=self.num_states)
        offsets = np.zeros(self.num_states + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        return offsets, order

    def out_edges(self, states: np.ndarray) -> np.ndarray:
        """Transition indices leaving any of `states` (vectorised CSR gather)."""
        offsets, order = self._csr
        states = np.asarray(states, dtype=np.int64)
        starts = offsets[states]
        counts = offsets[states + 1] - starts
        total = int(counts.sum())
        if total == 0:
            return np.empty(0, dtype=np.int64)
        base = np.repeat(starts - np.cumsum(counts) + counts, counts)
        return order[base + np.arange(total, dtype=np.int64)]

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.num_states)


# --- exploration -------------------------------------------------------------------------


def explore(
    term: Term,
    env: Environment | None = None,
    limits: ExploreLimits | None = None,
    *,
    canonical: Callable[[Term], Term] | None = None,
    moves: Callable[[Term], Sequence[Move]] | None = None,
    progress_every: int = 100_000,
) -> Lts:
    """
    Breadth-first generation of the reachable state space of `term`.

    States are numbered in discovery order, so two runs give the same numbering.
    `canonical` (optional) maps each successor term to a representative before lookup;
    it must preserve strong bisimilarity. `moves` (optional) replaces `env.moves` as the
    step function, e.g. a scheduler that prunes interleavings.
    """
    env = env or Environment()
    step = moves if moves is not None else env.moves
    limits = limits or ExploreLimits()
    if canonical is not None:
        term = canonical(term)

    index: dict[Term, int] = {term: 0}
    queue: deque[Term] = deque([term])
    label_ids: dict[ActionLabel, int] = {}
    src = array("q")
    lab = array("q")
    dst = array("q")

    s = 0
    while queue:
        t = queue.popleft()
        emitted: set[tuple[int, int]] | None = set() if canonical is not None else None
        for m in step(t):
            for _, a, nxt in m.branches:
                if canonical is not None:
                    nxt = canonical(nxt)
                j = index.get(nxt)
                if j is None:
                    if len(index) >= limits.max_states:
                        raise LimitExceeded("maxStates", limits.max_states)
                    j = len(index)
                    index[nxt] = j
                    queue.append(nxt)
                k = label_ids.get(a)
                if k is None:
                    k = label_ids[a] = len(label_ids)
                if emitted is not None:
                    if (k, j) in emitted:
                        continue
                    emitted.add((k, j))
                src.append(s)
                lab.append(k)
                dst.append(j)
                if len(src) > limits.max_transitions:
                    raise LimitExceeded("maxTransitions", limits.max_transitions)
        s += 1
        if progress_every and s % progress_every == 0:
            logger.info("explored %d states, %d transitions, %d queued", s, len(src), len(queue))

    # distinct moves may still share a branch
    out = Lts(len(index), 0, tuple(label_ids), src, lab, dst)
    out = _dedupe(out)
    logger.info("exploration done: %d states, %d transitions", out.num_states, out.num_transitions)
    return out


def _dedupe(
    lts: Lts,
    labels: tuple[ActionLabel, ...] | None = None,
    lab: np.ndarray | None = None,
) -> Lts:
    labels = lts.labels if labels is None else labels
    lab = lts.lab if lab is None else np.asarray(lab, dtype=np.int64)
    n, nl = lts.num_states, max(len(labels), 1)
    if n * n * nl < 2**62:
        key = (lts.src * nl + lab) * n + lts.dst
        _, first = np.unique(key, return_index=True)
    else:
        rows = np.stack([lts.src, lab, lts.dst], axis=1)
        _, first = np.unique(rows, axis=0, return_index=True)
    keep = np.sort(first)
    if keep.size == lts.src.size and labels is lts.labels:
        return lts
    return Lts(n, lts.initial, labels, lts.src[keep], lab[keep], lts.dst[keep])


# --- transformations ---------------------------------------------------------------------


def hide_labels(lts: Lts, gates: Iterable[str]) -> Lts:
    """Rename every label whose gate is in `gates` to the silent action."""
    gates = frozenset(gates)
    mask = lts.label_mask(gates)
    if not mask.any():
        return lts
    ids: dict[ActionLabel, int] = {}
    mapping = np.empty(len(lts.labels), dtype=np.int64)
    for i, a in enumerate(lts.labels):
        mapping[i] = ids.setdefault(TAU if mask[i] else a, len(ids))
    return _dedupe(lts, tuple(ids), mapping[lts.lab])


def reachable_states(
    lts: Lts,
    starts: Iterable[int] | np.ndarray,
    *,
    edge_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Bool mask of states reachable from `starts` using only transitions in `edge_mask`."""
    seen = np.zeros(lts.num_states, dtype=bool)
    if not isinstance(starts, np.ndarray):
        starts = np.fromiter(starts, dtype=np.int64)
    frontier = np.unique(starts.astype(np.int64))
    seen[frontier] = True
    while frontier.size:
        e = lts.out_edges(frontier)
        if edge_mask is not None:
            e = e[edge_mask[e]]
        t = np.unique(lts.dst[e])
        frontier = t[~seen[t]]
        seen[frontier] = True
    return seen


def cut_labels(lts: Lts, gates: Iterable[str]) -> Lts:
    """Delete transitions whose gate is in `gates`, then prune unreachable states."""
    mask = lts.label_mask(gates)
    if not mask.any():
        return lts
    keep_edge = ~mask[lts.lab]
    alive = reachable_states(lts, [lts.initial], edge_mask=keep_edge)
    renumber = np.cumsum(alive) - 1
    keep = keep_edge & alive[lts.src]
    return Lts(
        int(alive.sum()),
        int(renumber[lts.initial]),
        lts.labels,
        renumber[lts.src[keep]],
        lts.lab[keep],
        renumber[lts.dst[keep]],
    )


def reachable_gates(
    lts: Lts,
    start: int,
    *,
    stop_gates: Iterable[str] = (),
) -> set[str]:
    """
    Gates of every transition reachable from `start`.

    A transition whose gate is in `stop_gates` is reported but not traversed.
    """
    if not (0 <= start < lts.num_states):
        raise IndexError(f"state {start} out of range (numStates={lts.num_states})")
    stop = lts.label_mask(stop_gates)
    seen = np.zeros(lts.num_states, dtype=bool)
    used = np.zeros(len(lts.labels), dtype=bool)
    seen[start] = True
    frontier = np.array([start], dtype=np.int64)
    while frontier.size:
        e = lts.out_edges(frontier)
        used[lts.lab[e]] = True
        e = e[~stop[lts.lab[e]]]
        t = np.unique(lts.dst[e])
        frontier = t[~seen[t]]
        seen[frontier] = True
    return {lts.labels[i].gate for i in np.flatnonzero(used).tolist() if lts.labels[i].gate}


def reaching_gate(lts: Lts, gate: str, *, stop_gates: Iterable[str] = ()) -> np.ndarray:
    """
    Bool mask of states from which a `gate` transition is reachable without traversing
    a transition whose gate is in `stop_gates`.
    """
    target = lts.label_mask([gate])[lts.lab]
    reverse = Lts(lts.num_states, lts.initial, lts.labels, lts.dst, lts.lab, lts.src)
    keep = ~lts.label_mask(stop_gates)[lts.lab]
    return reachable_states(reverse, lts.src[target], edge_mask=keep)


def states_after(lts: Lts, gate: str) -> np.ndarray:
    """Sorted targets of transitions labelled with `gate`."""
    m = lts.label_mask([gate])
    return np.unique(lts.dst[m[lts.lab]])


def states_enabling(lts: Lts, gate: str) -> np.ndarray:
    """Bool mask of states with an outgoing `gate` transition."""
    m = lts.label_mask([gate])
    out = np.zeros(lts.num_states, dtype=bool)
    out[lts.src[m[lts.lab]]] = True
    return out


def deadlock_states(lts: Lts) -> np.ndarray:
    return np.flatnonzero(lts.out_degree() == 0)


def disjoint_union(a: Lts, b: Lts) -> Lts:
    """`a` keeps its indices, `b` is shifted by a.num_states; initial is a.initial."""
    ids: dict[ActionLabel, int] = {}
    map_a = np.array([ids.setdefault(x, len(ids)) for x in a.labels], dtype=np.int64)
    map_b = np.array([ids.setdefault(x, len(ids)) for x in b.labels], dtype=np.int64)
    off = a.num_states
    return Lts(
        a.num_states + b.num_states,
        a.initial,
        tuple(ids),
        np.concatenate([a.src, b.src + off]),
        np.concatenate([map_a[a.lab], map_b[b.lab]]),
        np.concatenate([a.dst, b.dst + off]),
    )


# --- round safety observer -----------------------------------------------------------------

_WAITING, _IN_ROUND, _ERROR = 0, 1, 2

# rows: observer state; columns: 0 other label, 1 opening gate, 2 closing gate
_OBSERVER = np.array(
    [
        [_WAITING, _IN_ROUND, _ERROR],
        [_IN_ROUND, _ERROR, _WAITING],
    ],
    dtype=np.int8,
)


@dataclass(frozen=True)
class SafetyResult:
    holds: bool
    product_states: int


def check_safety(
    lts: Lts,
    *,
    opening: str = RECEIVE_BLOCK_PROPOSAL,
    closing: Iterable[str] = COMMIT_GATES,
) -> SafetyResult:
    """
    Product with a three-state observer: between two consecutive `opening` labels there
    must be exactly one `closing` label, and none before the first opening.
    """
    cls = np.zeros(len(lts.labels), dtype=np.int8)
    cls[lts.label_mask([opening])] = 1
    cls[lts.label_mask(closing)] = 2
    edge_cls = cls[lts.lab]

    seen = np.zeros((2, lts.num_states), dtype=bool)
    seen[_WAITING, lts.initial] = True
    frontier = {_WAITING: np.array([lts.initial], dtype=np.int64), _IN_ROUND: np.empty(0, np.int64)}
    while any(f.size for f in frontier.values()):
        nxt: dict[int, list[np.ndarray]] = {_WAITING: [], _IN_ROUND: []}
        for q, states in frontier.items():
            if not states.size:
                continue
            e = lts.out_edges(states)
            q2 = _OBSERVER[q][edge_cls[e]]
            if (q2 == _ERROR).any():
                return SafetyResult(False, int(seen.sum()))
            t = lts.dst[e]
            for qq in (_WAITING, _IN_ROUND):
                cand = np.unique(t[q2 == qq])
                cand = cand[~seen[qq, cand]]
                seen[qq, cand] = True
                nxt[qq].append(cand)
        frontier = {
            q: (np.concatenate(parts) if parts else np.empty(0, np.int64))
            for q, parts in nxt.items()
        }
    return SafetyResult(True, int(seen.sum()))
