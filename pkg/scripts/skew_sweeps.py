"""Arctan-OU indifference skews: eta sweep at fixed gamma and gamma sweep at fixed eta.

One PDE solve per (parameter, strike) on the study grid; the implied vol is read
at x = log(S0/K).  Writes one long-format CSV per sweep.

    python scripts/skew_sweeps.py --out-dir results          # ~1 min per sweep value
    python scripts/skew_sweeps.py --out-dir results --fast   # coarse grid smoke run
"""

import argparse
import math
from pathlib import Path

import numpy as np

from indiffskew.blackscholes import implied_vol
from indiffskew.cli import atomic_write, csv_text
from indiffskew.pdepricer import GridSpec, PutContract, indifference_price, solve_value
from indiffskew.riskdrivers import DistortedEntropic
from indiffskew.svmodels import make_arctan_ou, y_for_sigma

S0, T = 100.0, 0.25


def sweep(model, y0, grid, params, log_moneyness):
    rows = []
    for gamma, eta in params:
        for k in log_moneyness:
            strike = S0 * math.exp(k)
            sol = solve_value(model, DistortedEntropic(gamma, eta), PutContract(strike, T), grid)
            x = -k
            price = indifference_price(sol, T, x, y0)
            vol = implied_vol(price / strike, T, x, (0.5 * model.sigma_low, 2 * model.sigma_high))
            rows.append((gamma, eta, float(k), strike, price, vol))
            print(f"gamma={gamma:<5g} eta={eta:<4g} log(K/S0)={k:+.2f}  price={price:9.5f}  vol={vol:.5f}")
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    ap.add_argument("--fast", action="store_true", help="80x40x50 grid instead of 200x100x200")
    args = ap.parse_args()

    model = make_arctan_ou()
    y0 = y_for_sigma(model, 0.223)
    n = (80, 40, 50) if args.fast else (200, 100, 200)
    grid = GridSpec(-2.0, 2.0, -4.0, 4.0, *n, T)
    ks = np.round(np.arange(-0.35, 0.1001, 0.05), 10)
    header = ["gamma", "eta", "log_moneyness", "strike", "price", "implied_vol"]

    eta_rows = sweep(model, y0, grid, [(0.5, e) for e in (0.0, 0.2, 0.4)], ks)
    atomic_write(args.out_dir / "eta_sweep.csv", csv_text(header, eta_rows))
    gamma_rows = sweep(model, y0, grid, [(g, 0.2) for g in (0.25, 0.5, 1.0)], ks)
    atomic_write(args.out_dir / "gamma_sweep.csv", csv_text(header, gamma_rows))

    for e in (0.0, 0.2, 0.4):
        v = {r[2]: r[5] for r in eta_rows if r[1] == e}
        print(f"eta={e:g}: I(-0.2) - I(0) = {v[-0.2] - v[0.0]:.5f}")


if __name__ == "__main__":
    main()
