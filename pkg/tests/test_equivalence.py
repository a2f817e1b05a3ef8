from __future__ import annotations

import numpy as np
import pytest

from bbastar.calculus import NIL, TAU, Choice, Prefix, action
from bbastar.equivalence import (
    EquivalenceKind,
    brute_force_bisim,
    compare,
    minimize,
    partition,
)
from bbastar.errors import OracleScaleError
from bbastar.io import read_aut
from bbastar.lts import Lts, explore

a, b, c = action("a"), action("b"), action("c")
KINDS = list(EquivalenceKind)
SMALL = {"max_states": 6, "max_transitions": 12, "gates": ("a", "b", "c")}


def test_identical_systems_are_equivalent() -> None:
    for kind in KINDS:
        assert compare(explore(Prefix(a, NIL)), explore(Prefix(a, NIL)), kind).equivalent


def test_silent_prefix_is_weakly_but_not_strongly_invisible() -> None:
    x, y = explore(Prefix(TAU, Prefix(a, NIL))), explore(Prefix(a, NIL))
    assert compare(x, y, "weak").equivalent
    assert compare(x, y, "branching").equivalent
    v = compare(x, y, "strong")
    assert not v.equivalent
    assert v.witness is not None


def test_branching_time_difference_has_witness_starting_with_a() -> None:
    x = explore(Prefix(a, Choice(Prefix(b, NIL), Prefix(c, NIL))))
    y = explore(Choice(Prefix(a, Prefix(b, NIL)), Prefix(a, Prefix(c, NIL))))
    for kind in KINDS:
        v = compare(x, y, kind)
        assert not v.equivalent
        assert v.witness and v.witness[0] == a


def test_small_oracle_cases() -> None:
    nil = explore(NIL)
    a_nil = explore(Prefix(a, NIL))
    tau_nil = explore(Prefix(TAU, NIL))
    for kind in KINDS:
        assert not brute_force_bisim(a_nil, nil, kind)
        assert not compare(a_nil, nil, kind).equivalent
    assert brute_force_bisim(tau_nil, nil, "weak")
    assert brute_force_bisim(tau_nil, nil, "branching")
    assert not brute_force_bisim(tau_nil, nil, "strong")


def test_weak_and_branching_differ() -> None:
    # a.(tau.b + c) + a.b  vs  a.(tau.b + c): weakly equal, branching-distinct
    left = Choice(
        Prefix(a, Choice(Prefix(TAU, Prefix(b, NIL)), Prefix(c, NIL))),
        Prefix(a, Prefix(b, NIL)),
    )
    right = Prefix(a, Choice(Prefix(TAU, Prefix(b, NIL)), Prefix(c, NIL)))
    x, y = explore(left), explore(right)
    assert brute_force_bisim(x, y, "weak")
    assert not brute_force_bisim(x, y, "branching")
    assert compare(x, y, "weak").equivalent
    assert not compare(x, y, "branching").equivalent


def test_refinement_agrees_with_brute_force_oracle(random_lts) -> None:
    rng = np.random.default_rng(2024)
    checked = {k: [0, 0] for k in KINDS}
    for i in range(1000):
        x = random_lts(rng, **SMALL)
        # every fourth pair compares against a quotient, which is equivalent
        y = minimize(x, "strong") if i % 4 == 0 else random_lts(rng, **SMALL)
        for kind in KINDS:
            got = compare(x, y, kind).equivalent
            assert got == brute_force_bisim(x, y, kind), (kind, x.transitions(), y.transitions())
            checked[kind][int(got)] += 1
    # both outcomes are exercised for every kind
    assert all(neg > 0 and pos > 0 for neg, pos in checked.values())


def test_strong_implies_branching_implies_weak(random_lts) -> None:
    rng = np.random.default_rng(7)
    for _ in range(1000):
        x = random_lts(rng, **SMALL)
        y = random_lts(rng, **SMALL)
        s = compare(x, y, "strong").equivalent
        br = compare(x, y, "branching").equivalent
        w = compare(x, y, "weak").equivalent
        assert (not s) or br
        assert (not br) or w


def test_minimize_merges_duplicate_branches() -> None:
    lts = explore(Choice(Prefix(a, Prefix(b, NIL)), Prefix(a, Prefix(b, Prefix(TAU, NIL)))))
    assert lts.num_states == 5
    m = minimize(Lts.from_triples(4, 0, [(0, a, 1), (0, a, 2), (1, b, 3), (2, b, 3)]), "strong")
    assert (m.num_states, m.num_transitions) == (3, 2)


def test_minimize_weak_drops_inert_silent_steps() -> None:
    m = minimize(explore(Prefix(TAU, Prefix(a, NIL))), "weak")
    assert (m.num_states, m.num_transitions) == (2, 1)
    assert m.transitions() == [(0, a, 1)]


def test_minimize_is_idempotent_and_preserves_class(random_lts) -> None:
    rng = np.random.default_rng(11)
    for _ in range(100):
        lts = random_lts(rng, max_states=8)
        for kind in KINDS:
            once = minimize(lts, kind)
            twice = minimize(once, kind)
            assert twice.num_states == once.num_states
            assert compare(lts, once, kind).equivalent


def test_partition_blocks_cover_all_states(random_lts) -> None:
    lts = random_lts(np.random.default_rng(3), max_states=10)
    p = partition(lts, "branching")
    covered = np.sort(np.concatenate(p.blocks()))
    assert covered.tolist() == list(range(lts.num_states))
    assert p.num_blocks == len(p.blocks())


def test_kind_parsing() -> None:
    assert EquivalenceKind.parse("Observational") is EquivalenceKind.WEAK
    assert EquivalenceKind.parse("branching") is EquivalenceKind.BRANCHING
    with pytest.raises(ValueError):
        EquivalenceKind.parse("trace")


def test_oracle_refuses_large_inputs() -> None:
    big = Lts.from_triples(40, 0, [(i, a, i + 1) for i in range(39)])
    with pytest.raises(OracleScaleError):
        brute_force_bisim(big, big, "strong")


def test_branching_and_weak_coincide_without_silent_steps(random_lts) -> None:
    rng = np.random.default_rng(19)
    for _ in range(200):
        x = random_lts(rng, max_states=6, tau_weight=0.0)
        y = random_lts(rng, max_states=6, tau_weight=0.0)
        assert compare(x, y, "branching").equivalent == compare(x, y, "weak").equivalent


@pytest.mark.parametrize("kind", KINDS)
def test_minimize_drops_unreachable_states(kind: EquivalenceKind) -> None:
    orphan = Lts.from_triples(2, 0, [(1, a, 0)])
    m = minimize(orphan, kind)
    assert (m.num_states, m.num_transitions) == (1, 0)

    lts = read_aut('des (0, 1, 3)\n(1, "A", 2)\n')
    m = minimize(lts, kind)
    assert (m.num_states, m.num_transitions) == (1, 0)
    assert compare(lts, explore(NIL), kind).equivalent

    # the reachable part survives intact
    lts = Lts.from_triples(4, 0, [(0, a, 1), (1, b, 0), (2, c, 3), (3, a, 0)])
    m = minimize(lts, kind)
    assert (m.num_states, m.num_transitions) == (2, 2)
    assert compare(lts, m, kind).equivalent
