"""Convergence of rescaled solutions to the unit-mass profile for several initial data."""
import argparse
from pathlib import Path

import numpy as np

from apme.diagnostics import track_asymptotics
from apme.experiments import plateau_data, two_bump_data
from apme.profile import ProfileOptions, compute_profile


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=float, nargs="+", default=[2.0, 2.0])
    ap.add_argument("--cells", type=int, default=256)
    ap.add_argument("--half-width", type=float, nargs="+", default=None)
    ap.add_argument("--tau", type=float, default=12.0)
    ap.add_argument("--out", type=Path, default=Path("out/asymptotics"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    P = compute_profile(tuple(args.m), 1.0, ProfileOptions(cells=args.cells, half_width=args.half_width))
    g = P.grid
    data = {
        "plateau": (plateau_data(g), True),
        "offcenter": (plateau_data(g, center=(0.1,) * g.N), False),
        "twobump": (two_bump_data(g), False),
    }
    taus = np.arange(0.0, args.tau + 1e-9, 0.5)
    for name, (u0, sym) in data.items():
        rep = track_asymptotics(u0, P, taus, supports=True, symmetric=sym)
        for key, tr in rep.traces.items():
            tr.to_csv(args.out / f"{name}_{key}.csv")
        l1 = rep.traces["L1"]
        dh = rep.traces["dH_support"]
        print(f"{name:10s} L1(6) {l1.at(6.0):.4f}  L1({args.tau:g}) {l1.final:.2e}  "
              f"dH(6) {dh.at(6.0) / rep.cell:.2f} cells  tau(eps) {rep.tau_eps}")


if __name__ == "__main__":
    main()
