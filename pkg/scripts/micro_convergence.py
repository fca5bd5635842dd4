"""Finite-population matching versus the continuum equilibrium as scale grows.

Prints ||mu_hat - mu*||_inf for a 2x2 assortative logit market over a range
of scales and seeds.

    python3 scripts/micro_convergence.py --scales 1e2 1e3 1e4 1e5 --seeds 0 1 2
"""

import argparse
import time

import numpy as np

from matchkit.equilibrium import solve_equilibrium
from matchkit.heterogeneity import MEN, WOMEN, Logit
from matchkit.market import make_market
from matchkit.micro import aggregate, realized_market, sample_population, solve_assignment


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    p.add_argument("--scales", type=float, nargs="+", default=[1e2, 1e3, 1e4, 1e5])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--assortative", type=float, default=1.0, help="diagonal surplus")
    args = p.parse_args()

    market = make_market([1.0, 1.0], [1.0, 1.0])
    phi = args.assortative * np.eye(2)
    hm, hw = Logit(side=MEN), Logit(side=WOMEN)
    star = solve_equilibrium(market, hm, hw, phi).mu
    print(f"continuum mu*: {np.array2string(star, precision=5)}")
    print(f"{'scale':>8} {'seed':>5} {'gap vs mu*':>11} {'gap vs realized':>16} {'secs':>6}")
    for scale in args.scales:
        for seed in args.seeds:
            t0 = time.perf_counter()
            pop = sample_population(market, hm, hw, scale=scale, seed=seed)
            emp = aggregate(pop, solve_assignment(pop, phi))
            realized = solve_equilibrium(realized_market(pop, market), hm, hw, phi).mu
            print(f"{scale:8.0f} {seed:5d} {np.max(np.abs(emp.mu - star)):11.5f} "
                  f"{np.max(np.abs(emp.mu - realized)):16.5f} {time.perf_counter() - t0:6.2f}")


if __name__ == "__main__":
    main()
