from __future__ import annotations

import argparse
import json
from pathlib import Path
from typing import Any


def _read_json(p: Path) -> dict[str, Any]:
    return json.loads(p.read_text(encoding="utf-8"))


def _fmt(x: Any) -> str:
    if x is None:
        return "-"
    if isinstance(x, bool):
        return "PASS" if x else "FAIL"
    if isinstance(x, float):
        return f"{x:.4g}"
    return str(x)


def _bsnni_row(name: str, metrics: dict[str, Any], verdicts: dict[str, Any]) -> str:
    cells = [name, _fmt(metrics.get("states")), _fmt(metrics.get("transitions"))]
    cells += [_fmt(verdicts.get(k, {}).get("pass")) for k in ("WEAK_BSNNI", "BRANCHING_BSNNI")]
    return "| " + " | ".join(cells) + " |"


def main() -> None:
    ap = argparse.ArgumentParser(description="Generate the evidence pack markdown from results/")
    ap.add_argument("--root", default="results", help="root results directory")
    ap.add_argument("--out", default="results/EVIDENCE_PACK.md", help="markdown output path")
    args = ap.parse_args()

    root = Path(args.root)
    runs = sorted(p.parent for p in root.glob("*/meta.json"))

    lines: list[str] = []
    lines.append("# BBA* GroundTruth: Evidence Pack")
    lines.append("")
    lines.append("Generated from `scripts/run_bench.py` output. It summarizes:")
    lines.append("- noninterference verdicts (boycott hidden vs boycott cut)")
    lines.append("- property gates over each explored state space")
    lines.append("- Monte Carlo outcome fractions per adversary")
    lines.append("")

    lines.append("## Noninterference")
    lines.append("")
    lines.append("| Config | States | Transitions | Weak | Branching |")
    lines.append("|---|---:|---:|---|---|")
    for run in runs:
        lines.append(
            _bsnni_row(
                run.name, _read_json(run / "metrics.json"), _read_json(run / "verdicts.json")
            )
        )
    lines.append("")

    for run in runs:
        gates = _read_json(run / "falsifiers.json")
        verdicts = _read_json(run / "verdicts.json")
        lines.append(f"## Run: `{run.name}`")
        lines.append("")
        lines.append("### Falsifiers")
        for k in sorted(gates):
            lines.append(f"- **{k}**: {_fmt(gates[k])}")
        witnesses = {k: v["witness"] for k, v in verdicts.items() if v.get("witness")}
        if witnesses:
            lines.append("")
            lines.append("### Distinguishing traces")
            for k, w in witnesses.items():
                lines.append(f"- **{k}**: `{' '.join(w)}`")
        lines.append("")

    sim_path = root / "simulate.jsonl"
    if sim_path.exists():
        lines.append("## Monte Carlo")
        lines.append("")
        lines.append("| Config | Adversary | Completed | fracProposed | fracEmpty | meanSteps |")
        lines.append("|---|---|---:|---:|---:|---:|")
        for raw in sim_path.read_text(encoding="utf-8").splitlines():
            if not raw.strip():
                continue
            r = json.loads(raw)
            lines.append(
                f"| {r['config']} | {r['adversary']} | {r['completed']}/{r['trials']} "
                f"| {_fmt(r['fracProposed'])} | {_fmt(r['fracEmpty'])} | {_fmt(r['meanSteps'])} |"
            )
        lines.append("")

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"OK: wrote {out_path}")


if __name__ == "__main__":
    main()
