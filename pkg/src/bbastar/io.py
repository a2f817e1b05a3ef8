from __future__ import annotations

import json
import platform
import re
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .calculus import TAU, VISIBLE, ActionLabel
from .errors import AutParseError, BbaError
from .lts import Lts
from .numerics import parse_value, render_fraction

UTC = timezone.utc  # datetime.UTC alias (3.11+); identical object

# --- Aldebaran .aut -------------------------------------------------------------------------

_HEADER = re.compile(r"^des\s*\(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*\)$")
_EDGE = re.compile(r'^\(\s*(\d+)\s*,\s*("(?:[^"\\]|\\.)*"|[^,"]+?)\s*,\s*(\d+)\s*\)$')


def render_label(a: ActionLabel) -> str:
    if a.is_silent:
        return "i"
    parts = [a.gate.upper()]
    for v in a.args:
        parts.append("!" + (render_fraction(v) if isinstance(v, Fraction) else str(v)))
    return " ".join(parts)


def parse_label(text: str) -> ActionLabel:
    t = text.strip()
    if t == "i":
        return TAU
    gate, *args = (p.strip() for p in t.split("!"))
    if not gate:
        raise ValueError(f"empty gate in label {text!r}")
    return ActionLabel(VISIBLE, gate.lower(), tuple(parse_value(x) for x in args))


def write_aut(lts: Lts) -> str:
    lines = [f"des ({lts.initial}, {lts.num_transitions}, {lts.num_states})"]
    rendered = [render_label(a) for a in lts.labels]
    for s, k, t in zip(lts.src.tolist(), lts.lab.tolist(), lts.dst.tolist(), strict=True):
        lines.append(f'({s}, "{rendered[k]}", {t})')
    return "\n".join(lines) + "\n"


def read_aut(text: str) -> Lts:
    rows = [(i, ln.strip()) for i, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not rows:
        raise AutParseError(1, "empty input, expected 'des (...)' header")
    lineno, head = rows[0]
    m = _HEADER.match(head)
    if m is None:
        raise AutParseError(lineno, f"malformed header {head!r}")
    initial, ntrans, nstates = (int(g) for g in m.groups())
    if nstates < 1 or initial >= nstates:
        raise AutParseError(lineno, f"initial state {initial} not below numStates {nstates}")

    cache: dict[str, ActionLabel] = {}
    triples: list[tuple[int, ActionLabel, int]] = []
    for lineno, ln in rows[1:]:
        m = _EDGE.match(ln)
        if m is None:
            raise AutParseError(lineno, f"malformed transition {ln!r}")
        s, raw, t = int(m.group(1)), m.group(2), int(m.group(3))
        if s >= nstates or t >= nstates:
            raise AutParseError(lineno, f"state index >= numStates ({nstates})")
        if raw.startswith('"'):
            raw = raw[1:-1]
        label = cache.get(raw)
        if label is None:
            try:
                label = cache[raw] = parse_label(raw)
            except (ValueError, ZeroDivisionError, BbaError) as e:
                raise AutParseError(lineno, f"unparsable label {raw!r}: {e}") from e
        triples.append((s, label, t))
    if len(triples) != ntrans:
        raise AutParseError(
            rows[0][0], f"header announces {ntrans} transitions, found {len(triples)}"
        )
    return Lts.from_triples(nstates, initial, triples)


def save_aut(path: Path, lts: Lts) -> None:
    ensure_dir(path.parent)
    path.write_text(write_aut(lts), encoding="utf-8")


def load_aut(path: Path) -> Lts:
    return read_aut(path.read_text(encoding="utf-8"))


# --- run artifacts -------------------------------------------------------------------------


def _json_default(o: Any):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return {"__ndarray__": True, "shape": o.shape, "dtype": str(o.dtype)}
    if isinstance(o, Fraction):
        return render_fraction(o)
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    return str(o)


def ensure_dir(p: Path) -> Path:
    p.mkdir(parents=True, exist_ok=True)
    return p


def write_json(path: Path, obj: Any) -> None:
    ensure_dir(path.parent)
    path.write_text(
        json.dumps(obj, indent=2, default=_json_default) + "\n",
        encoding="utf-8",
    )


def json_line(obj: dict[str, Any]) -> str:
    """One compact record; key order is the insertion order of `obj`."""
    return json.dumps(obj, default=_json_default)


def run_meta(
    engine_version: str,
    config_name: str,
    extra: dict[str, Any],
) -> dict[str, Any]:
    meta = {
        "engine_version": engine_version,
        "config": config_name,
        "utc": datetime.now(UTC).isoformat(),
        "python": sys.version,
        "platform": platform.platform(),
    }
    meta.update(extra)
    return meta


def write_report_md(
    path: Path,
    meta: dict[str, Any],
    metrics: dict[str, Any],
    gates: dict[str, bool],
    verdicts: dict[str, bool],
) -> None:
    lines: list[str] = []
    lines.append(f"# Report: {meta.get('config')}")
    lines.append("")

    # verdicts first, so a FAIL is visible without scrolling
    lines.append("## Verdicts")
    lines.append("")
    for k, v in verdicts.items():
        lines.append(f"- **{k}**: {'PASS' if v else 'FAIL'}")
    lines.append("")

    status = meta.get("status", "ok")
    if status != "ok":
        lines.append("## Status")
        lines.append(f"- **status**: `{status}`")
        failed = [k for k, ok in {**verdicts, **gates}.items() if not ok]
        lines.append(f"- **failed**: {', '.join(failed)}")
        lines.append("")

    lines.append("## Meta")
    lines.append("```json")
    lines.append(json.dumps(meta, indent=2, default=_json_default))
    lines.append("```")
    lines.append("")
    lines.append("## Metrics")
    lines.append("```json")
    lines.append(json.dumps(metrics, indent=2, default=_json_default))
    lines.append("```")
    lines.append("")
    lines.append("## Falsifiers")
    lines.append("")
    for k, v in gates.items():
        lines.append(f"- **{k}**: {'PASS' if v else 'FAIL'}")
    lines.append("")
    ensure_dir(path.parent)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def asdict_safe(obj: Any) -> dict[str, Any]:
    try:
        return asdict(obj)
    except Exception:
        return {"repr": repr(obj)}
