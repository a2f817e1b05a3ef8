from __future__ import annotations

import argparse
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from bbastar.errors import BbaError
from bbastar.sim import estimate, markov_oracle
from bbastar.specs import get_preset


def _sweep(preset: str, adversary: str, p_zeros: np.ndarray, trials: int, seed: int):
    base = get_preset(preset)
    sim, exact = [], []
    for pz in p_zeros:
        params = replace(base, p_zero=Fraction(str(round(float(pz), 4))))
        sim.append(estimate(params, adversary, trials, seed).frac_proposed)
        try:
            exact.append(markov_oracle(params, adversary).proposed_given_commit)
        except BbaError:
            exact.append(np.nan)
    return np.asarray(sim), np.asarray(exact)


def main() -> None:
    ap = argparse.ArgumentParser(description="Plot fracProposed against pZero.")
    ap.add_argument("--preset", default="tiny")
    ap.add_argument("--adversary", default="never-boycott")
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--points", type=int, default=9)
    ap.add_argument("--figdir", default="results/figures", help="directory to write figures")
    args = ap.parse_args()

    figdir = Path(args.figdir)
    figdir.mkdir(parents=True, exist_ok=True)

    p_zeros = np.linspace(0.1, 0.9, args.points)
    sim, exact = _sweep(args.preset, args.adversary, p_zeros, args.trials, args.seed)

    plt.figure()
    plt.plot(p_zeros, sim, "o", label=f"simulation ({args.trials} trials)")
    if np.isfinite(exact).any():
        plt.plot(p_zeros, exact, "-", label="exact (Markov chain)")
    plt.title(f"{args.preset}, {args.adversary}")
    plt.xlabel("pZero")
    plt.ylabel("fraction of proposed blocks")
    plt.ylim(-0.02, 1.02)
    plt.legend()
    out1 = figdir / f"{args.preset}_{args.adversary}_proposed.png"
    plt.savefig(out1, dpi=200, bbox_inches="tight")
    plt.close()

    note = figdir / f"{args.preset}_{args.adversary}_proposed.txt"
    rows = ["pZero\tsimulated\texact"]
    rows += [f"{p:.4f}\t{s:.6f}\t{e:.6f}" for p, s, e in zip(p_zeros, sim, exact, strict=True)]
    note.write_text("\n".join(rows) + "\n", encoding="utf-8")

    print(f"OK: wrote {out1}")
    print(f"OK: wrote {note}")


if __name__ == "__main__":
    main()
