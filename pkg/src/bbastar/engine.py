from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any

import numpy as np

from .equivalence import EquivalenceKind, compare
from .errors import BbaError
from .falsify import FalsifierConfig, falsify_model
from .io import asdict_safe, json_line, load_aut, run_meta, save_aut, write_json, write_report_md
from .lts import RECEIVE_BLOCK_PROPOSAL, Lts, reachable_gates, reaching_gate, states_after
from .metrics import lts_metrics
from .model import explore_model
from .noninterference import NiVerdict, bsnni
from .sim import Adversary, estimate
from .specs import SCHEDULES, RunConfig, default_config_path, load_config, resolve

ENGINE_VERSION = "0.1.0"

logger = logging.getLogger(__name__)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _gate_list(text: str) -> frozenset[str]:
    return frozenset(g.strip().lower() for g in text.split(",") if g.strip())


def _add_model_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--preset", default=None, help="honest | single | even | tiny")
    g.add_argument("--config", default=None, help="key = value file (default: $BBASTAR_CONFIG)")
    g.add_argument("--honest", dest="n_honest", type=int, default=None)
    g.add_argument("--malicious", dest="n_malicious", type=int, default=None)
    g.add_argument("--committee", dest="committee_size", type=int, default=None)
    g.add_argument("--threshold", dest="vote_threshold", type=int, default=None)
    g.add_argument("--p-in", dest="p_in", default=None)
    g.add_argument("--h", dest="h_fraction", default=None, help="honest money fraction")
    g.add_argument("--p-zero", dest="p_zero", default=None)
    g.add_argument(
        "--boycott-rule", dest="boycott_rule", choices=["blocking", "always"], default=None
    )
    g.add_argument(
        "--schedule",
        choices=list(SCHEDULES),
        default=None,
        help="synchronous (default): local work before network gates; interleaved: free",
    )

    lim = p.add_argument_group("limits")
    lim.add_argument("--max-states", dest="max_states", type=_positive_int, default=None)
    lim.add_argument("--max-transitions", dest="max_transitions", type=_positive_int, default=None)
    lim.add_argument(
        "--no-reduction",
        dest="reduce_counters",
        action="store_const",
        const=False,
        default=None,
        help="keep dead counter values during exploration",
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bbastar",
        description="BBA* process-algebra workbench: explore, compare, BSNNI, simulate",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="cmd", required=True)

    ex = sub.add_parser("explore", help="build the network and write its state space")
    _add_model_args(ex)
    ex.add_argument("-o", "--output", default=None, help=".aut output path")

    cmp_ = sub.add_parser("compare", help="compare two .aut files")
    cmp_.add_argument("file1")
    cmp_.add_argument("file2")
    cmp_.add_argument("--kind", default="branching", choices=[k.value for k in EquivalenceKind])

    ni = sub.add_parser("bsnni", help="noninterference of the high gates (hide vs cut)")
    _add_model_args(ni)
    ni.add_argument(
        "--kind",
        action="append",
        choices=[k.value for k in EquivalenceKind],
        help="repeatable; default weak and branching",
    )
    ni.add_argument("--high", type=_gate_list, default=frozenset({"boycott"}), help="gate,...")
    ni.add_argument("--no-minimize", action="store_true", help="compare operands unminimized")
    ni.add_argument("--out", default=None, help="write run artifacts to this directory")

    q = sub.add_parser("query", help="gate reachability in an .aut file")
    q.add_argument("file")
    q.add_argument("gate")
    q.add_argument("--after", default=None, help="start from every state entered by this gate")
    q.add_argument(
        "--until",
        default=RECEIVE_BLOCK_PROPOSAL,
        help="with --after: do not search past this gate (default: next block proposal)",
    )

    sim = sub.add_parser("simulate", help="Monte Carlo estimate of round outcomes")
    _add_model_args(sim)
    sim.add_argument("--trials", type=_positive_int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument(
        "--adversary", default=None, help="never-boycott | always-boycott | probabilistic(q)"
    )
    sim.add_argument("--step-cap", dest="step_cap", type=_positive_int, default=None)
    sim.add_argument("--name", default=None, help="config name in the output record")

    sub.add_parser("smoke", help="minimal smoke command")
    return p


_CLI_KEYS = (
    "n_honest",
    "n_malicious",
    "committee_size",
    "vote_threshold",
    "p_in",
    "h_fraction",
    "p_zero",
    "boycott_rule",
    "schedule",
    "max_states",
    "max_transitions",
    "reduce_counters",
    "trials",
    "seed",
    "adversary",
    "step_cap",
)


def _run_config(args: argparse.Namespace, **extra: Any) -> RunConfig:
    path = Path(args.config) if args.config else default_config_path()
    file_values = load_config(path) if path is not None else {}
    cli = {k: getattr(args, k, None) for k in _CLI_KEYS}
    name = getattr(args, "name", None) or args.preset or (path.stem if path else "custom")
    return resolve(args.cmd, file_values, cli, preset=args.preset, config_name=name, **extra)


def _explore(cfg: RunConfig) -> Lts:
    return explore_model(cfg.params, cfg.limits, reduce_counters=cfg.reduce_counters)


def cmd_explore(cfg: RunConfig) -> None:
    lts = _explore(cfg)
    print(f"states: {lts.num_states} transitions: {lts.num_transitions}")
    if cfg.output is not None:
        save_aut(cfg.output, lts)
        print(f"OK: wrote {cfg.output}")


def cmd_compare(file1: Path, file2: Path, kind: str) -> bool:
    k = EquivalenceKind.parse(kind)
    v = compare(load_aut(file1), load_aut(file2), k)
    print(f"{k.value.upper()}_EQUIVALENCE: {'PASS' if v.equivalent else 'FAIL'}")
    if v.witness is not None:
        print("witness: " + " ".join(str(a) for a in v.witness))
    return v.equivalent


def _verdict_record(v: NiVerdict) -> dict[str, Any]:
    return {
        "pass": v.passed,
        "witness": None if v.witness is None else [str(a) for a in v.witness],
        "sizes": {"hide": v.sizes[0], "cut": v.sizes[1]},
        "minimized_sizes": None
        if v.minimized_sizes is None
        else {"hide": v.minimized_sizes[0], "cut": v.minimized_sizes[1]},
        "fast_path": v.fast_path,
    }


def cmd_bsnni(cfg: RunConfig, *, minimize_operands: bool = True) -> bool:
    lts = _explore(cfg)
    verdicts = [
        bsnni(lts, cfg.high_gates, k, minimize_operands=minimize_operands) for k in cfg.kinds
    ]
    for v in verdicts:
        print(v.line())
        if v.witness is not None:
            print("witness: " + " ".join(str(a) for a in v.witness))

    if cfg.output is not None:
        out_dir = cfg.output
        gates, extras = falsify_model(lts, FalsifierConfig())
        held = all(v.passed for v in verdicts) and all(gates.values())
        metrics: dict[str, Any] = dict(lts_metrics(lts))
        metrics.update(extras)
        meta = run_meta(
            engine_version=ENGINE_VERSION,
            config_name=cfg.config_name,
            extra={
                "cmd": "bsnni",
                "params": asdict_safe(cfg.params),
                "limits": asdict_safe(cfg.limits),
                "high_gates": cfg.high_gates,
                "reduce_counters": cfg.reduce_counters,
                "status": "ok" if held else "property-failed",
            },
        )
        out_dir.mkdir(parents=True, exist_ok=True)
        write_json(out_dir / "meta.json", meta)
        write_json(out_dir / "metrics.json", metrics)
        write_json(out_dir / "falsifiers.json", gates)
        write_json(
            out_dir / "verdicts.json", {v.property_name: _verdict_record(v) for v in verdicts}
        )
        passed = {v.property_name: v.passed for v in verdicts}
        write_report_md(out_dir / "report.md", meta, metrics, gates, passed)
        print(f"OK: wrote {out_dir}")
    return all(v.passed for v in verdicts)


def cmd_query(file: Path, gate: str, after: str | None, until: str) -> bool:
    lts = load_aut(file)
    gate, until = gate.lower(), until.lower()
    if gate not in lts.gates():
        logger.warning("gate %r does not occur in %s", gate, file)
    if after is None:
        ok = gate in reachable_gates(lts, lts.initial)
        print(f"{gate.upper()}: {'reachable' if ok else 'unreachable'}")
        return ok

    starts = states_after(lts, after.lower())
    if not starts.size:
        logger.warning("no transition labelled %r in %s", after, file)
        print(f"{gate.upper()} after {after.upper()}: unreachable from all 0 states")
        return False
    hits = int(reaching_gate(lts, gate, stop_gates=[until])[starts].sum())
    n = int(starts.size)
    if hits == n:
        status = f"reachable from all {n} states"
    elif hits == 0:
        status = f"unreachable from all {n} states"
    else:
        status = f"reachable from {hits} of {n} states"
    print(f"{gate.upper()} after {after.upper()}: {status}")
    return hits == n


def cmd_simulate(cfg: RunConfig) -> None:
    adv = Adversary.parse(cfg.sim.adversary)
    stats = estimate(cfg.params, adv, cfg.sim.trials, cfg.sim.seed, step_cap=cfg.sim.step_cap)
    print(json_line(stats.record(cfg.config_name, cfg.params, adv)))


def _dispatch(args: argparse.Namespace) -> bool:
    """Runs one subcommand; False means a property failed."""
    if args.cmd == "explore":
        cfg = _run_config(args, output=Path(args.output) if args.output else None)
        cmd_explore(cfg)
        return True

    if args.cmd == "compare":
        return cmd_compare(Path(args.file1), Path(args.file2), args.kind)

    if args.cmd == "bsnni":
        kinds = tuple(dict.fromkeys(args.kind or ["weak", "branching"]))
        cfg = _run_config(
            args,
            kinds=kinds,
            high_gates=args.high,
            output=Path(args.out) if args.out else None,
        )
        return cmd_bsnni(cfg, minimize_operands=not args.no_minimize)

    if args.cmd == "query":
        return cmd_query(Path(args.file), args.gate, args.after, args.until)

    if args.cmd == "simulate":
        cmd_simulate(_run_config(args))
        return True

    raise SystemExit(2)


def main(argv=None) -> None:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.cmd == "smoke":
        print(f"OK: bbastar {ENGINE_VERSION} CLI is live (numpy {np.__version__}).")
        return

    try:
        ok = _dispatch(args)
    except (BbaError, OSError, ValueError) as e:
        print(f"ERROR: {e}", file=sys.stderr)
        raise SystemExit(2) from None
    if not ok:
        raise SystemExit(1)
