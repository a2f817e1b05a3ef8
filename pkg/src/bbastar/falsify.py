from __future__ import annotations

from dataclasses import dataclass

from .lts import (
    COMMIT_GATES,
    RECEIVE_BLOCK_PROPOSAL,
    Lts,
    check_safety,
    reachable_states,
    reaching_gate,
    states_after,
    states_enabling,
)
from .model import BOYCOTT, COMMIT_EMPTY_BLOCK, COMMIT_PROPOSED_BLOCK


@dataclass(frozen=True)
class FalsifierConfig:
    # gates
    check_safety: bool = True
    check_exclusivity: bool = True
    check_boycott_forcing: bool = True  # only applied when boycott occurs in the LTS
    round_gate: str = RECEIVE_BLOCK_PROPOSAL


def commit_exclusive(lts: Lts) -> bool:
    """No state enables both commit gates."""
    both = states_enabling(lts, COMMIT_PROPOSED_BLOCK) & states_enabling(lts, COMMIT_EMPTY_BLOCK)
    return not bool(both.any())


def boycott_forcing(lts: Lts, *, round_gate: str = RECEIVE_BLOCK_PROPOSAL) -> bool:
    """
    From every state entered by a boycott, the rest of the round (up to the next
    `round_gate`) can commit the empty block and can never commit the proposed one.
    """
    after = states_after(lts, BOYCOTT)
    if not after.size:
        return True
    keep = ~lts.label_mask([round_gate])[lts.lab]
    within = reachable_states(lts, after, edge_mask=keep)
    if states_enabling(lts, COMMIT_PROPOSED_BLOCK)[within].any():
        return False
    empty = reaching_gate(lts, COMMIT_EMPTY_BLOCK, stop_gates=[round_gate])
    return bool(empty[after].all())


def falsify_model(
    lts: Lts,
    cfg: FalsifierConfig | None = None,
) -> tuple[dict[str, bool], dict[str, float]]:
    """
    Returns (gates, extras); extras holds the sizes the checks worked on.
    """
    cfg = cfg or FalsifierConfig()
    gates: dict[str, bool] = {}
    extras: dict[str, float] = {}

    if cfg.check_safety:
        res = check_safety(lts, opening=cfg.round_gate, closing=COMMIT_GATES)
        gates["SafetyGate"] = res.holds
        extras["safety_product_states"] = float(res.product_states)
    if cfg.check_exclusivity:
        gates["CommitExclusivityGate"] = commit_exclusive(lts)
    if cfg.check_boycott_forcing and BOYCOTT in lts.gates():
        gates["BoycottForcingGate"] = boycott_forcing(lts, round_gate=cfg.round_gate)
        extras["boycott_targets"] = float(states_after(lts, BOYCOTT).size)
    return gates, extras
