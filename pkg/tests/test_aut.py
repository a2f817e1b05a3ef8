from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from bbastar.calculus import TAU, action, prob
from bbastar.errors import AutParseError
from bbastar.io import load_aut, parse_label, read_aut, render_label, save_aut, write_aut
from bbastar.lts import Lts, explore
from bbastar.model import DeadCounterReset, build_model
from bbastar.specs import get_preset


def test_write_aut_format() -> None:
    lts = Lts.from_triples(2, 0, [(0, action("a"), 1)])
    assert write_aut(lts) == 'des (0, 1, 2)\n(0, "A", 1)\n'
    assert read_aut(write_aut(lts)) == lts


def test_label_rendering() -> None:
    assert render_label(TAU) == "i"
    assert render_label(action("propagate", 3, 1)) == "PROPAGATE !3 !1"
    assert render_label(prob(Fraction("0.7424"))) == "PROB !0.7424"
    assert render_label(prob(1)) == "PROB !1.0"
    assert render_label(prob(Fraction(1, 3))) == "PROB !1/3"


@pytest.mark.parametrize(
    "label",
    [TAU, action("boycott"), action("reply", 4), prob(Fraction(1, 4)), prob(Fraction(2, 3))],
)
def test_label_text_reads_back(label) -> None:
    assert parse_label(render_label(label)) == label


def test_read_accepts_unquoted_labels_and_blank_lines() -> None:
    text = "des (1, 2, 3)\n\n(1, i, 0)\n(0, RECEIVE_BLOCK_PROPOSAL, 2)\n"
    lts = read_aut(text)
    assert lts.initial == 1
    assert lts.transitions() == [(1, TAU, 0), (0, action("receive_block_proposal"), 2)]


def test_file_roundtrip_keeps_state_order(tmp_path: Path, random_lts) -> None:
    rng = np.random.default_rng(5)
    lts = random_lts(rng, max_states=8, gates=("x", "commit_empty_block"))
    path = tmp_path / "sub" / "model.aut"
    save_aut(path, lts)
    assert load_aut(path) == lts


@pytest.mark.parametrize(
    ("text", "line"),
    [
        ("", 1),
        ("des (0, 1)\n", 1),
        ("des (2, 0, 2)\n", 1),
        ('des (0, 1, 2)\n(0, "A", 2)\n', 2),
        ('des (0, 1, 2)\n(0 "A" 1)\n', 2),
        ('des (0, 1, 2)\n(0, "PROPAGATE !x !1", 1)\n', 2),
        ('des (0, 2, 2)\n(0, "A", 1)\n', 1),
    ],
)
def test_malformed_input_names_the_line(text: str, line: int) -> None:
    with pytest.raises(AutParseError) as ei:
        read_aut(text)
    assert ei.value.line_number == line
    assert f"line {line}" in str(ei.value)


@pytest.mark.parametrize("reduce", [True, False])
def test_explored_model_reads_back(tmp_path: Path, reduce: bool) -> None:
    term, env = build_model(get_preset("tiny"))
    lts = explore(term, env, canonical=DeadCounterReset() if reduce else None)
    path = tmp_path / "tiny.aut"
    save_aut(path, lts)
    assert load_aut(path) == lts
