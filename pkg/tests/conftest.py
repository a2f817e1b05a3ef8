from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np
import pytest

from bbastar.calculus import TAU, ActionLabel, action
from bbastar.lts import Lts

RandomLts = Callable[..., Lts]


@pytest.fixture
def random_lts() -> RandomLts:
    """Factory for small random LTSs over a few gates plus the silent action."""

    def make(
        rng: np.random.Generator,
        *,
        max_states: int = 6,
        gates: Sequence[str] = ("a", "b"),
        tau_weight: float = 0.3,
        density: float = 1.5,
        max_transitions: int | None = None,
    ) -> Lts:
        n = int(rng.integers(1, max_states + 1))
        m = int(rng.poisson(density * n))
        if max_transitions is not None:
            m = min(m, max_transitions)
        labels: list[ActionLabel] = [action(g) for g in gates] + [TAU]
        weights = np.full(len(labels), (1.0 - tau_weight) / len(gates))
        weights[-1] = tau_weight
        picks = rng.choice(len(labels), size=m, p=weights)
        triples = [
            (int(rng.integers(n)), labels[int(k)], int(rng.integers(n))) for k in picks
        ]
        return Lts.from_triples(n, 0, triples)

    return make
