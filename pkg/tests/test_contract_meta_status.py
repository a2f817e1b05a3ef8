from __future__ import annotations

import json
from pathlib import Path

from bbastar.engine import ENGINE_VERSION, main


def test_meta_includes_status_fields(tmp_path: Path) -> None:
    out_dir = tmp_path / "run"
    main(["bsnni", "--preset", "tiny", "--out", str(out_dir)])

    meta = json.loads((out_dir / "meta.json").read_text(encoding="utf-8"))

    assert meta["status"] == "ok"
    assert meta["engine_version"] == ENGINE_VERSION
    assert meta["cmd"] == "bsnni"
    assert meta["config"] == "tiny"
    assert meta["high_gates"] == ["boycott"]
    assert meta["reduce_counters"] is True
    for key in ("utc", "python", "platform", "limits"):
        assert key in meta
