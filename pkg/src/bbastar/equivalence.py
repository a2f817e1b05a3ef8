from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .calculus import TAU, ActionLabel
from .errors import BbaError, OracleScaleError
from .lts import Lts, disjoint_union

logger = logging.getLogger(__name__)

ORACLE_MAX_STATES = 64


class EquivalenceKind(str, Enum):
    STRONG = "strong"
    WEAK = "weak"
    BRANCHING = "branching"

    @classmethod
    def parse(cls, text: str) -> EquivalenceKind:
        key = text.strip().lower()
        if key in {"observational", "weak"}:
            return cls.WEAK
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"Unknown equivalence: {text!r} (use strong|weak|branching)") from None


@dataclass(frozen=True, eq=False)
class Partition:
    block_of: np.ndarray

    @property
    def num_blocks(self) -> int:
        return int(self.block_of.max()) + 1 if self.block_of.size else 0

    def blocks(self) -> list[np.ndarray]:
        order = np.argsort(self.block_of, kind="stable")
        cuts = np.flatnonzero(np.diff(self.block_of[order])) + 1
        return np.split(order, cuts)

    def same_block(self, a: int, b: int) -> bool:
        return bool(self.block_of[a] == self.block_of[b])


@dataclass(frozen=True)
class Verdict:
    equivalent: bool
    witness: tuple[ActionLabel, ...] | None = None

    def __post_init__(self) -> None:
        if self.equivalent and self.witness is not None:
            raise ValueError("an equivalent verdict carries no witness")


# --- signature refinement -------------------------------------------------------------------


def _compact(block: np.ndarray) -> tuple[np.ndarray, int]:
    _, inv = np.unique(block, return_inverse=True)
    inv = np.asarray(inv, dtype=np.int64).reshape(-1)
    return inv, int(inv.max()) + 1 if inv.size else 0


def _split(n: int, block: np.ndarray, codes: np.ndarray, width: int) -> tuple[np.ndarray, int]:
    """
    New block per state: (old block, set of signature keys).

    `codes` are sorted unique `state * width + key`; states are grouped by degree so
    each group is one np.unique over fixed-width rows.
    """
    s = codes // width
    k = codes % width
    deg = np.bincount(s, minlength=n)
    starts = np.zeros(n, dtype=np.int64)
    np.cumsum(deg[:-1], out=starts[1:])
    new = np.empty(n, dtype=np.int64)
    nxt = 0
    for d in np.unique(deg).tolist():
        states = np.flatnonzero(deg == d)
        if d:
            idx = starts[states][:, None] + np.arange(d, dtype=np.int64)
            rows = np.column_stack([block[states], k[idx]])
        else:
            rows = block[states][:, None]
        _, inv = np.unique(rows, axis=0, return_inverse=True)
        inv = np.asarray(inv, dtype=np.int64).reshape(-1)
        new[states] = inv + nxt
        nxt += int(inv.max()) + 1
    return new, nxt


def _check_width(n: int, width: int) -> None:
    if n * width >= 2**62:
        raise BbaError(f"refinement keys overflow int64 (states={n}, width={width})")


def _strong_blocks(
    n: int,
    src: np.ndarray,
    lab: np.ndarray,
    dst: np.ndarray,
    nlabels: int,
    block: np.ndarray | None = None,
) -> np.ndarray:
    block, nb = _compact(np.zeros(n, dtype=np.int64) if block is None else block)
    rounds = 0
    while True:
        width = max(nlabels, 1) * nb
        _check_width(n, width)
        codes = np.unique(src * width + lab * nb + block[dst])
        new, nb2 = _split(n, block, codes, width)
        rounds += 1
        logger.debug("strong refinement round %d: %d -> %d blocks", rounds, nb, nb2)
        if nb2 == nb:
            return new
        block, nb = new, nb2


def _gather(offsets: np.ndarray, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For each node its CSR range; returns (owner position in `nodes`, CSR position)."""
    starts = offsets[nodes]
    counts = offsets[nodes + 1] - starts
    total = int(counts.sum())
    if total == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty
    owner = np.repeat(np.arange(nodes.size, dtype=np.int64), counts)
    pos = np.repeat(starts - np.cumsum(counts) + counts, counts) + np.arange(total, dtype=np.int64)
    return owner, pos


def _offsets(n: int, keys_sorted: np.ndarray) -> np.ndarray:
    off = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys_sorted, minlength=n), out=off[1:])
    return off


def _branching_blocks(
    n: int,
    src: np.ndarray,
    lab: np.ndarray,
    dst: np.ndarray,
    nlabels: int,
    is_tau: np.ndarray,
) -> np.ndarray:
    """
    Signature refinement for branching bisimilarity.

    sig(s) = {(a, [t]) : s ->inert* s' -a-> t, not (a silent and [s'] == [t])}, where an
    inert step is a silent step inside the current block.
    """
    tau_edge = is_tau[lab]
    block, nb = _compact(np.zeros(n, dtype=np.int64))
    rounds = 0
    while True:
        width = max(nlabels, 1) * nb
        _check_width(n, width)
        inert = tau_edge & (block[src] == block[dst])
        codes = np.unique(src[~inert] * width + lab[~inert] * nb + block[dst[~inert]])

        # close over inert predecessors: (s, k) for s -inert-> t and (t, k) already present
        isrc = src[inert]
        idst = dst[inert]
        delta = codes
        while delta.size and isrc.size:
            ds = delta // width
            off = _offsets(n, ds)
            owner, pos = _gather(off, idst)
            if not pos.size:
                break
            fresh = np.unique(isrc[owner] * width + delta[pos] % width)
            fresh = fresh[~np.isin(fresh, codes, assume_unique=True)]
            if not fresh.size:
                break
            codes = np.union1d(codes, fresh)
            delta = fresh

        new, nb2 = _split(n, block, codes, width)
        rounds += 1
        logger.debug("branching refinement round %d: %d -> %d blocks", rounds, nb, nb2)
        if nb2 == nb:
            return new
        block, nb = new, nb2


def _tau_id(labels: tuple[ActionLabel, ...]) -> tuple[tuple[ActionLabel, ...], int]:
    for i, a in enumerate(labels):
        if a.is_silent:
            return labels, i
    return labels + (TAU,), len(labels)


def _quotient_arrays(
    src: np.ndarray,
    lab: np.ndarray,
    dst: np.ndarray,
    block: np.ndarray,
    nlabels: int,
    silent: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Block-level transitions, sorted and unique; silent edges inside a block dropped if given."""
    s = block[src]
    t = block[dst]
    a = lab
    if silent is not None:
        keep = ~(silent[lab] & (s == t))
        s, t, a = s[keep], t[keep], a[keep]
    nb = int(block.max()) + 1
    nl = max(nlabels, 1)
    _check_width(nb, nl * nb)
    codes = np.unique((s * nl + a) * nb + t)
    return codes // (nl * nb), (codes // nb) % nl, codes % nb


def _saturate(
    n: int, src: np.ndarray, lab: np.ndarray, dst: np.ndarray, tau: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Observational closure: tau => tau* (reflexive), a => tau* a tau*."""
    tau_edge = lab == tau
    ts, td = src[tau_edge], dst[tau_edge]
    order = np.argsort(ts, kind="stable")
    ts, td = ts[order], td[order]
    tau_off = _offsets(n, ts)

    _check_width(n, n)
    closure = np.unique(np.concatenate([np.arange(n, dtype=np.int64) * (n + 1), ts * n + td]))
    delta = closure
    while delta.size:
        owner, pos = _gather(tau_off, delta % n)
        fresh = np.unique((delta[owner] // n) * n + td[pos])
        fresh = fresh[~np.isin(fresh, closure, assume_unique=True)]
        if not fresh.size:
            break
        closure = np.union1d(closure, fresh)
        delta = fresh
    c_src, c_dst = closure // n, closure % n
    c_off = _offsets(n, c_src)

    vis = ~tau_edge
    vs, va, vd = src[vis], lab[vis], dst[vis]
    order = np.argsort(vs, kind="stable")
    vs, va, vd = vs[order], va[order], vd[order]
    v_off = _offsets(n, vs)

    # tau* then a visible step
    owner, pos = _gather(v_off, c_dst)
    head, a, mid = c_src[owner], va[pos], vd[pos]
    # then tau*
    owner2, pos2 = _gather(c_off, mid)
    out_s = np.concatenate([c_src, head[owner2]])
    out_a = np.concatenate([np.full(c_src.size, tau, dtype=np.int64), a[owner2]])
    out_d = np.concatenate([c_dst, c_dst[pos2]])
    nl = int(max(tau, int(lab.max()) if lab.size else 0)) + 1
    _check_width(n, nl * n)
    codes = np.unique((out_s * nl + out_a) * n + out_d)
    return codes // (nl * n), (codes // n) % nl, codes % n


def _blocks(lts: Lts, kind: EquivalenceKind) -> np.ndarray:
    n = lts.num_states
    if kind is EquivalenceKind.STRONG:
        return _strong_blocks(n, lts.src, lts.lab, lts.dst, len(lts.labels))
    labels, tau = _tau_id(lts.labels)
    is_tau = np.zeros(len(labels), dtype=bool)
    is_tau[tau] = True
    branching = _branching_blocks(n, lts.src, lts.lab, lts.dst, len(labels), is_tau)
    if kind is EquivalenceKind.BRANCHING:
        return branching
    # weak: branching is finer, so saturate the branching quotient only
    nq = int(branching.max()) + 1
    qs, qa, qd = _quotient_arrays(lts.src, lts.lab, lts.dst, branching, len(labels), is_tau)
    ss, sa, sd = _saturate(nq, qs, qa, qd, tau)
    return _strong_blocks(nq, ss, sa, sd, len(labels))[branching]


def partition(lts: Lts, kind: EquivalenceKind | str) -> Partition:
    """Coarsest bisimulation of `kind` over the states of `lts`."""
    kind = EquivalenceKind.parse(kind) if isinstance(kind, str) else kind
    block, _ = _compact(_blocks(lts, kind))
    return Partition(block)


# --- public operations ---------------------------------------------------------------------


def compare(l1: Lts, l2: Lts, kind: EquivalenceKind | str) -> Verdict:
    kind = EquivalenceKind.parse(kind) if isinstance(kind, str) else kind
    u = disjoint_union(l1, l2)
    block = _blocks(u, kind)
    p, q = l1.initial, l1.num_states + l2.initial
    if block[p] == block[q]:
        return Verdict(True)
    return Verdict(False, _witness(u, block, kind, p, q))


def minimize(lts: Lts, kind: EquivalenceKind | str) -> Lts:
    """Quotient by the coarsest bisimulation; weak/branching kinds drop inert silent loops."""
    kind = EquivalenceKind.parse(kind) if isinstance(kind, str) else kind
    block, nb = _compact(_blocks(lts, kind))
    silent = None if kind is EquivalenceKind.STRONG else lts.tau_mask
    s, a, t = _quotient_arrays(lts.src, lts.lab, lts.dst, block, len(lts.labels), silent)

    # renumber blocks breadth-first from the initial block
    off = _offsets(nb, s)
    rank = np.full(nb, -1, dtype=np.int64)
    frontier = np.array([block[lts.initial]], dtype=np.int64)
    rank[frontier] = 0
    nxt = 1
    while frontier.size:
        _, pos = _gather(off, frontier)
        cand = np.unique(t[pos])
        cand = cand[rank[cand] < 0]
        rank[cand] = np.arange(nxt, nxt + cand.size)
        nxt += cand.size
        frontier = cand
    # blocks of unreachable states are dropped with their transitions
    live = rank[s] >= 0
    rs, a, rt = rank[s[live]], a[live], rank[t[live]]
    order = np.lexsort((rt, a, rs))
    out = Lts(nxt, 0, lts.labels, rs[order], a[order], rt[order])
    logger.info("minimize(%s): %d -> %d states", kind.value, lts.num_states, out.num_states)
    return out


# --- witness -------------------------------------------------------------------------------


def _witness(
    u: Lts, block: np.ndarray, kind: EquivalenceKind, p: int, q: int, max_len: int = 64
) -> tuple[ActionLabel, ...]:
    """Greedy descent along moves the other side cannot match into the same block."""
    tau = u.tau_mask
    succ: dict[int, list[tuple[int, int]]] = {}

    def strong_moves(x: int) -> list[tuple[int, int]]:
        hit = succ.get(x)
        if hit is None:
            e = u.out_edges(np.array([x]))
            hit = succ[x] = list(zip(u.lab[e].tolist(), u.dst[e].tolist(), strict=True))
        return hit

    def closure(x: int) -> list[int]:
        seen = {x}
        stack = [x]
        while stack:
            y = stack.pop()
            for a, z in strong_moves(y):
                if tau[a] and z not in seen:
                    seen.add(z)
                    stack.append(z)
        return sorted(seen)

    tau_id = next((i for i, a in enumerate(u.labels) if a.is_silent), -1)

    def weak_moves(x: int) -> list[tuple[int, int]]:
        out: dict[tuple[int, int], None] = {}
        for y in closure(x):
            out[(tau_id, y)] = None
            for a, z in strong_moves(y):
                for w in closure(z):
                    out[(tau_id if tau[a] else a, w)] = None
        return list(out)

    strong = kind is EquivalenceKind.STRONG
    moves = strong_moves if strong else weak_moves
    trace: list[ActionLabel] = []
    visited: set[tuple[int, int]] = set()
    for _ in range(max_len):
        if (p, q) in visited:
            break
        visited.add((p, q))
        found = None
        for x, y in ((p, q), (q, p)):
            answers: dict[int, list[int]] = {}
            for a, y2 in moves(y):
                answers.setdefault(a, []).append(y2)
            for a, x2 in moves(x):
                if not strong and a == tau_id and block[x2] == block[x]:
                    continue
                ys = answers.get(a, [])
                if all(block[y2] != block[x2] for y2 in ys):
                    found = (a, x2, ys)
                    break
            if found:
                break
        if found is None:
            break
        a, x2, ys = found
        if strong or a != tau_id:
            trace.append(u.labels[a])
        if not ys:
            break
        p, q = x2, ys[0]
    return tuple(trace)


# --- brute-force oracle --------------------------------------------------------------------


def brute_force_bisim(l1: Lts, l2: Lts, kind: EquivalenceKind | str) -> bool:
    """
    Greatest fixed point over all state pairs of the disjoint union: pairs violating the
    transfer condition of `kind` are removed until nothing changes.
    """
    kind = EquivalenceKind.parse(kind) if isinstance(kind, str) else kind
    n = l1.num_states + l2.num_states
    if n > ORACLE_MAX_STATES:
        raise OracleScaleError(f"oracle limited to {ORACLE_MAX_STATES} states, got {n}")
    u = disjoint_union(l1, l2)
    silent = [a.is_silent for a in u.labels]
    succ: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for s, a, t in zip(u.src.tolist(), u.lab.tolist(), u.dst.tolist(), strict=True):
        succ[s].append((a, t))

    clo: list[set[int]] = []
    for x in range(n):
        seen = {x}
        stack = [x]
        while stack:
            y = stack.pop()
            for a, z in succ[y]:
                if silent[a] and z not in seen:
                    seen.add(z)
                    stack.append(z)
        clo.append(seen)

    def weak_after(y: int, a: int) -> set[int]:
        out: set[int] = set()
        for y1 in clo[y]:
            for b, y2 in succ[y1]:
                if b == a:
                    out |= clo[y2]
        return out

    rel = {(x, y) for x in range(n) for y in range(n)}

    def transfer(x: int, y: int) -> bool:
        for a, x2 in succ[x]:
            if kind is EquivalenceKind.STRONG:
                ok = any(b == a and (x2, y2) in rel for b, y2 in succ[y])
            elif kind is EquivalenceKind.WEAK:
                cands = clo[y] if silent[a] else weak_after(y, a)
                ok = any((x2, y2) in rel for y2 in cands)
            else:
                ok = (silent[a] and (x2, y) in rel) or any(
                    (x, y1) in rel and (x2, y2) in rel
                    for y1 in clo[y]
                    for b, y2 in succ[y1]
                    if b == a
                )
            if not ok:
                return False
        return True

    changed = True
    while changed:
        changed = False
        for x, y in sorted(rel):
            if (x, y) in rel and not (transfer(x, y) and transfer(y, x)):
                rel.discard((x, y))
                rel.discard((y, x))
                changed = True
    return (l1.initial, l1.num_states + l2.initial) in rel
