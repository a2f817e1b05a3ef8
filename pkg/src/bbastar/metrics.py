from __future__ import annotations

from collections import Counter

import numpy as np

from .lts import Lts, deadlock_states


def gate_counts(lts: Lts) -> dict[str, int]:
    """Transitions per gate ("i" for silent), sorted by gate name."""
    per_label = np.bincount(lts.lab, minlength=len(lts.labels))
    out: Counter[str] = Counter()
    for a, c in zip(lts.labels, per_label.tolist(), strict=True):
        out[a.gate or "i"] += c
    return dict(sorted(out.items()))


def lts_metrics(lts: Lts) -> dict[str, float | int | dict[str, int]]:
    deg = lts.out_degree()
    return {
        "states": lts.num_states,
        "transitions": lts.num_transitions,
        "labels": len(lts.labels),
        "deadlock_states": int(deadlock_states(lts).size),
        "max_out_degree": int(deg.max()) if deg.size else 0,
        "mean_out_degree": float(deg.mean()) if deg.size else 0.0,
        "silent_transitions": int(lts.tau_mask[lts.lab].sum()),
        "gates": gate_counts(lts),
    }
