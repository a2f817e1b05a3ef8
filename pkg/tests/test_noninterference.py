from __future__ import annotations

import pytest

from bbastar.calculus import TAU, action
from bbastar.equivalence import EquivalenceKind
from bbastar.lts import Lts
from bbastar.model import explore_model
from bbastar.noninterference import NiVerdict, bsnni
from bbastar.specs import ModelParams

low, high, out = action("low"), action("boycott"), action("commit_empty_block")


def _leaky() -> Lts:
    # the high action removes the option to do `low`
    return Lts.from_triples(3, 0, [(0, low, 1), (0, high, 2)])


def _harmless() -> Lts:
    # the high action leads to a copy of the initial state
    return Lts.from_triples(4, 0, [(0, low, 1), (0, high, 3), (3, low, 1), (1, out, 2)])


@pytest.mark.parametrize("kind", ["weak", "branching"])
def test_high_action_that_disables_low_behaviour_fails(kind: str) -> None:
    v = bsnni(_leaky(), {"boycott"}, kind)
    assert not v.passed
    assert v.witness is not None
    assert v.fast_path is None
    assert v.line() == f"{kind.upper()}_BSNNI: FAIL"


@pytest.mark.parametrize("kind", ["weak", "branching"])
def test_high_shortcut_to_low_state_passes(kind: str) -> None:
    v = bsnni(_harmless(), {"boycott"}, kind)
    assert v.passed
    assert v.witness is None
    assert v.line() == f"{kind.upper()}_BSNNI: PASS"


def test_strong_kind_sees_the_hidden_step() -> None:
    assert not bsnni(_harmless(), {"boycott"}, "strong").passed


def test_fast_paths() -> None:
    v = bsnni(_leaky(), set(), "branching")
    assert v.passed and v.fast_path == "no-high-gate"

    v = bsnni(_leaky(), {"absent"}, "weak")
    assert v.passed and v.fast_path == "no-high-gate"

    # a high action from an unreachable state
    unreachable = Lts.from_triples(3, 0, [(0, low, 1), (2, high, 0)])
    v = bsnni(unreachable, {"boycott"}, "weak")
    assert v.passed
    assert v.fast_path in ("identical", None)

    # boycott racing a silent step to the same state: hiding merges the two edges
    twin = Lts.from_triples(3, 0, [(0, TAU, 1), (0, high, 1), (1, low, 2)])
    v = bsnni(twin, {"boycott"}, "branching")
    assert v.passed and v.fast_path == "identical"


def test_silent_cycles_are_not_observable() -> None:
    lts = Lts.from_triples(2, 0, [(0, low, 1), (1, TAU, 0)])
    v = bsnni(lts, {"low"}, "weak")
    assert v.passed
    assert v.sizes == ((2, 2), (1, 0))


def test_minimization_is_optional() -> None:
    for lts in (_leaky(), _harmless()):
        for kind in ("weak", "branching"):
            a = bsnni(lts, {"boycott"}, kind)
            b = bsnni(lts, {"boycott"}, kind, minimize_operands=False)
            assert a.passed == b.passed
            assert b.minimized_sizes is None
            assert a.minimized_sizes is not None


def test_verdict_names_and_validation() -> None:
    v = NiVerdict(EquivalenceKind.WEAK, True, None, ((1, 0), (1, 0)))
    assert v.property_name == "WEAK_BSNNI"
    with pytest.raises(ValueError):
        NiVerdict(EquivalenceKind.WEAK, True, (low,), ((1, 0), (1, 0)))


@pytest.mark.parametrize("kind", ["weak", "branching"])
def test_pinning_a_minority_makes_its_boycott_observable(kind: str) -> None:
    pinned = explore_model(ModelParams(n_honest=2, n_malicious=1, boycott_rule="always"))
    v = bsnni(pinned, {"boycott"}, kind)
    assert not v.passed
    assert v.witness is not None


@pytest.mark.parametrize("kind", ["weak", "branching"])
def test_unpinned_minority_boycott_lands_on_the_silent_branch(kind: str) -> None:
    v = bsnni(explore_model(ModelParams(n_honest=2, n_malicious=1)), {"boycott"}, kind)
    assert v.passed
    assert v.fast_path == "identical"
