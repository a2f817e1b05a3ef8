from __future__ import annotations

import subprocess
import sys

from bbastar.engine import main


def test_cli_smoke_runs(capsys) -> None:
    main(["smoke"])
    out = capsys.readouterr().out
    assert "CLI is live" in out


def test_module_entry_point_runs() -> None:
    res = subprocess.run(
        [sys.executable, "-m", "bbastar", "smoke"], capture_output=True, text=True, check=False
    )
    assert res.returncode == 0
    assert res.stdout.startswith("OK: bbastar")
