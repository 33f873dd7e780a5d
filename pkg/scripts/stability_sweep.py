"""Eigenvalue sweep of the reduced coefficient system for both modes.

Writes one CSV per mode and prints the critical couplings.
"""

import argparse
from pathlib import Path

import numpy as np

from qduffing.coeff_flow import FlowMode, NoTransition, StabilityReport, find_alpha_crit, stability_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha-max", type=float, default=0.5)
    ap.add_argument("--steps", type=int, default=501)
    ap.add_argument("--outdir", type=Path, default=Path("results"))
    args = ap.parse_args()
    args.outdir.mkdir(parents=True, exist_ok=True)
    grid = np.linspace(0.0, args.alpha_max, args.steps)
    for mode in FlowMode:
        try:
            ac = find_alpha_crit(mode, 1e-6, hi=args.alpha_max)
        except NoTransition:
            ac = None
        rep = StabilityReport(mode=mode, alpha_grid=grid, spectra=stability_sweep(grid, mode), alpha_crit=ac)
        path = args.outdir / f"stability_{mode.value}.csv"
        path.write_text(rep.to_csv())
        print(f"{mode.value:15s} alpha_c = {ac if ac is None else f'{ac:.6f}'}  -> {path}")


if __name__ == "__main__":
    main()
