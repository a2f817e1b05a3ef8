from __future__ import annotations

import json
from pathlib import Path

import pytest

from bbastar.calculus import action
from bbastar.engine import main
from bbastar.io import load_aut, save_aut
from bbastar.lts import Lts
from bbastar.specs import CONFIG_ENV

RBP = action("receive_block_proposal")
BOYCOTT = action("boycott")
EMPTY = action("commit_empty_block")
PROPOSED = action("commit_proposed_block")


def _exit_code(argv: list[str]) -> int:
    with pytest.raises(SystemExit) as ei:
        main(argv)
    return ei.value.code


@pytest.fixture
def round_aut(tmp_path: Path) -> Path:
    # after a boycott only an empty block can follow; otherwise either commit
    lts = Lts.from_triples(
        5,
        0,
        [
            (0, RBP, 1),
            (1, BOYCOTT, 2),
            (1, action("sync"), 3),
            (2, EMPTY, 0),
            (3, EMPTY, 0),
            (3, PROPOSED, 4),
            (4, RBP, 1),
        ],
    )
    path = tmp_path / "round.aut"
    save_aut(path, lts)
    return path


def test_explore_writes_aut(tmp_path: Path, capsys) -> None:
    out = tmp_path / "tiny.aut"
    main(["explore", "--preset", "tiny", "-o", str(out)])
    text = capsys.readouterr().out
    assert text.startswith("states: ")
    assert f"OK: wrote {out}" in text
    lts = load_aut(out)
    assert lts.num_states > 1
    assert "receive_block_proposal" in lts.gates()

    free = tmp_path / "tiny-interleaved.aut"
    main(["explore", "--preset", "tiny", "--schedule", "interleaved", "-o", str(free)])
    assert load_aut(free).num_states > lts.num_states


def test_explore_limit_exceeded(capsys) -> None:
    assert _exit_code(["explore", "--preset", "honest", "--max-states", "10"]) == 2
    err = capsys.readouterr().err
    assert err.startswith("ERROR: ")
    assert "maxStates" in err


def test_unknown_preset_is_a_usage_error(capsys) -> None:
    assert _exit_code(["explore", "--preset", "nope"]) == 2
    assert "Unknown preset" in capsys.readouterr().err


def test_argparse_rejects_bad_numbers(capsys) -> None:
    assert _exit_code(["simulate", "--preset", "tiny", "--trials", "0"]) == 2
    assert _exit_code(["explore", "--max-states", "-3"]) == 2
    assert _exit_code(["explore", "--preset", "tiny", "--schedule", "lockstep"]) == 2


def test_compare_with_itself_passes(round_aut: Path, capsys) -> None:
    main(["compare", str(round_aut), str(round_aut)])
    assert capsys.readouterr().out.strip() == "BRANCHING_EQUIVALENCE: PASS"


def test_compare_difference_exits_one(tmp_path: Path, round_aut: Path, capsys) -> None:
    other = tmp_path / "other.aut"
    save_aut(other, Lts.from_triples(2, 0, [(0, RBP, 1)]))
    assert _exit_code(["compare", "--kind", "strong", str(round_aut), str(other)]) == 1
    out = capsys.readouterr().out
    assert "STRONG_EQUIVALENCE: FAIL" in out
    assert "witness: " in out


def test_compare_malformed_file(tmp_path: Path, round_aut: Path, capsys) -> None:
    bad = tmp_path / "bad.aut"
    bad.write_text("des (0, 1, 1)\n(0, A, 5)\n", encoding="utf-8")
    assert _exit_code(["compare", str(bad), str(round_aut)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_compare_missing_file(tmp_path: Path, capsys) -> None:
    missing = str(tmp_path / "missing.aut")
    assert _exit_code(["compare", missing, missing]) == 2
    assert capsys.readouterr().err.startswith("ERROR: ")


def test_query_reachability(round_aut: Path, capsys) -> None:
    main(["query", str(round_aut), "commit_proposed_block"])
    assert capsys.readouterr().out.strip() == "COMMIT_PROPOSED_BLOCK: reachable"


def test_query_after_boycott(round_aut: Path, capsys) -> None:
    code = _exit_code(["query", str(round_aut), "commit_proposed_block", "--after", "boycott"])
    assert code == 1
    out = capsys.readouterr().out.strip()
    assert out == "COMMIT_PROPOSED_BLOCK after BOYCOTT: unreachable from all 1 states"

    main(["query", str(round_aut), "commit_empty_block", "--after", "boycott"])
    out = capsys.readouterr().out.strip()
    assert out == "COMMIT_EMPTY_BLOCK after BOYCOTT: reachable from all 1 states"


def test_query_unknown_gate(round_aut: Path, capsys) -> None:
    assert _exit_code(["query", str(round_aut), "nothing"]) == 1
    assert capsys.readouterr().out.strip() == "NOTHING: unreachable"


def test_simulate_is_reproducible(capsys) -> None:
    argv = ["simulate", "--preset", "tiny", "--trials", "40", "--seed", "7"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    second = capsys.readouterr().out
    assert first == second
    rec = json.loads(first)
    assert rec["config"] == "tiny"
    assert rec["trials"] == 40
    assert rec["seed"] == 7
    assert rec["adversary"] == "never-boycott"


def test_simulate_rejects_unknown_adversary(capsys) -> None:
    assert _exit_code(["simulate", "--preset", "tiny", "--adversary", "grumpy"]) == 2
    assert "Unknown adversary" in capsys.readouterr().err


def test_config_file_from_environment(tmp_path: Path, monkeypatch, capsys) -> None:
    cfg = tmp_path / "duel.cfg"
    cfg.write_text(
        "nHonest = 1\nnMalicious = 1\ncommitteeSize = 2\nvoteThreshold = 1\ntrials = 5\n",
        encoding="utf-8",
    )
    monkeypatch.setenv(CONFIG_ENV, str(cfg))
    main(["simulate", "--seed", "3"])
    rec = json.loads(capsys.readouterr().out)
    assert rec["config"] == "duel"
    assert (rec["nHonest"], rec["nMalicious"], rec["trials"]) == (1, 1, 5)

    # command-line flags win over the file
    main(["simulate", "--seed", "3", "--trials", "6", "--name", "cli"])
    rec = json.loads(capsys.readouterr().out)
    assert (rec["config"], rec["trials"]) == ("cli", 6)


def test_bad_config_file_names_the_line(tmp_path: Path, capsys) -> None:
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("nHonest = 2\nbogus = 1\n", encoding="utf-8")
    assert _exit_code(["simulate", "--config", str(cfg)]) == 2
    assert f"{cfg}:2" in capsys.readouterr().err


def test_bsnni_without_high_gates_passes(capsys) -> None:
    main(["bsnni", "--preset", "tiny"])
    out = capsys.readouterr().out.splitlines()
    assert out == ["WEAK_BSNNI: PASS", "BRANCHING_BSNNI: PASS"]
