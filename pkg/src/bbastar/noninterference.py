from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass

from .calculus import ActionLabel
from .equivalence import EquivalenceKind, compare, minimize
from .lts import Lts, cut_labels, hide_labels

logger = logging.getLogger(__name__)

DEFAULT_HIGH_GATES = frozenset({"boycott"})


@dataclass(frozen=True)
class NiVerdict:
    """
    Outcome of one noninterference check.

    `sizes` are (states, transitions) of the hide-variant and the cut-variant, in that
    order; `minimized_sizes` the same after minimization (None when it was skipped).
    """

    kind: EquivalenceKind
    passed: bool
    witness: tuple[ActionLabel, ...] | None
    sizes: tuple[tuple[int, int], tuple[int, int]]
    minimized_sizes: tuple[tuple[int, int], tuple[int, int]] | None = None
    fast_path: str | None = None

    def __post_init__(self) -> None:
        if self.passed and self.witness is not None:
            raise ValueError("a passing verdict carries no witness")

    @property
    def property_name(self) -> str:
        return f"{self.kind.value.upper()}_BSNNI"

    def line(self) -> str:
        return f"{self.property_name}: {'PASS' if self.passed else 'FAIL'}"


def _size(lts: Lts) -> tuple[int, int]:
    return (lts.num_states, lts.num_transitions)


def bsnni(
    lts: Lts,
    high_gates: Iterable[str] = DEFAULT_HIGH_GATES,
    kind: EquivalenceKind | str = EquivalenceKind.BRANCHING,
    *,
    minimize_operands: bool = True,
) -> NiVerdict:
    """
    Bisimulation-based strong nondeterministic non-interference: the system with the
    high gates hidden must be equivalent to the system with them removed.
    """
    kind = EquivalenceKind.parse(kind) if isinstance(kind, str) else kind
    high = frozenset(high_gates)
    hidden = hide_labels(lts, high)
    cut = cut_labels(lts, high)
    sizes = (_size(hidden), _size(cut))

    if not (high & lts.gates()):
        logger.info("bsnni(%s): no high gate occurs, pass", kind.value)
        return NiVerdict(kind, True, None, sizes, fast_path="no-high-gate")
    if hidden == cut:
        logger.info("bsnni(%s): hide and cut variants coincide, pass", kind.value)
        return NiVerdict(kind, True, None, sizes, fast_path="identical")

    minimized_sizes = None
    if minimize_operands:
        hidden = minimize(hidden, kind)
        cut = minimize(cut, kind)
        minimized_sizes = (_size(hidden), _size(cut))
    verdict = compare(hidden, cut, kind)
    logger.info(
        "bsnni(%s): %s (operands %s, minimized %s)",
        kind.value,
        "pass" if verdict.equivalent else "fail",
        sizes,
        minimized_sizes,
    )
    return NiVerdict(kind, verdict.equivalent, verdict.witness, sizes, minimized_sizes)
