"""Price deltas under successive dx, dy, dt halvings for BDF2 and backward Euler.

    python scripts/convergence_study.py --levels 3
"""

import argparse

import numpy as np

from indiffskew.pdepricer import GridSpec, PutContract, SolverOptions, indifference_price, solve_value
from indiffskew.riskdrivers import DistortedEntropic
from indiffskew.svmodels import make_arctan_ou

T = 0.25
PROBES = [(x, y) for x in (-0.2, 0.0, 0.2) for y in (0.0, 0.25)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, default=3)
    args = ap.parse_args()
    model = make_arctan_ou()
    driver = DistortedEntropic(0.5, 0.2)
    for scheme in ("bdf2", "euler"):
        g = GridSpec(-2.0, 2.0, -4.0, 4.0, 99, 33, 50, T)
        prices = []
        for _ in range(args.levels):
            sol = solve_value(model, driver, PutContract(100.0, T), g, SolverOptions(scheme=scheme))
            prices.append(np.array([indifference_price(sol, T, x, y) for x, y in PROBES]))
            print(f"{scheme:5s} nx={g.nx:4d} ny={g.ny:4d} nt={g.nt:4d}  " + " ".join(f"{p:.6f}" for p in prices[-1]))
            g = g.refined()
        deltas = [np.abs(b - a) for a, b in zip(prices, prices[1:])]
        for d0, d1 in zip(deltas, deltas[1:]):
            print(f"{scheme:5s} ratios " + " ".join(f"{r:6.2f}" for r in d0 / d1))


if __name__ == "__main__":
    main()
