"""Hull-White two-term implied-vol curves for several distortions.

    python scripts/figure1_asymptotic.py --out results/figure1.csv
"""

import argparse
from pathlib import Path

import numpy as np

from indiffskew.asymptotics import HwAsymptoticParams, curve_rows
from indiffskew.cli import atomic_write, csv_text


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kappa", type=float, default=7.0)
    ap.add_argument("--mu", type=float, default=6.0)
    ap.add_argument("--y", type=float, default=0.3)
    ap.add_argument("--tau", type=float, default=0.1)
    ap.add_argument("--etas", type=float, nargs="+", default=[0.0, 0.2, 0.4])
    ap.add_argument("--out", type=Path, default=Path("results/figure1.csv"))
    args = ap.parse_args()

    xs = np.round(np.linspace(-1, 1, 81), 10)
    rows = []
    for eta in args.etas:
        p = HwAsymptoticParams(args.kappa, args.mu, eta, args.y, args.tau)
        rows += [(eta, *r) for r in curve_rows(p, xs)]
    atomic_write(args.out, csv_text(["eta", "log_moneyness", "i0", "i1", "implied_vol"], rows))

    print(f"{'x':>6} " + " ".join(f"eta={e:<6g}" for e in args.etas))
    for x in (-1.0, -0.5, -0.2, 0.0, 0.2, 0.5, 1.0):
        vols = [r[4] for r in rows if r[1] == x]
        print(f"{x:6.2f} " + " ".join(f"{v:10.5f}" for v in vols))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
