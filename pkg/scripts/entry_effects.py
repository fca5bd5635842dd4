"""Welfare effects of entry: analytic derivatives against re-solved equilibria.

For a random logit market, adds ``--step`` mass of each men's type in turn and
compares the re-solved change in (u, v) with the linear prediction from the
welfare-derivative blocks.

    python3 scripts/entry_effects.py --size 4 3 --seed 0 --step 0.01
"""

import argparse

import numpy as np

from matchkit.comparative_statics import comparative_statics
from matchkit.equilibrium import solve_equilibrium
from matchkit.heterogeneity import MEN, WOMEN, Logit
from matchkit.market import ValidatedMarket, make_market


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    p.add_argument("--size", type=int, nargs=2, default=[4, 3], metavar=("X", "Y"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=0.01)
    args = p.parse_args()

    rng = np.random.default_rng(args.seed)
    X, Y = args.size
    market = make_market(rng.uniform(0.5, 2.0, X), rng.uniform(0.5, 2.0, Y))
    phi = rng.uniform(-2.0, 2.0, (X, Y))
    hm, hw = Logit(side=MEN), Logit(side=WOMEN)
    eq = solve_equilibrium(market, hm, hw, phi, tolerance=1e-12)
    blocks = comparative_statics(market, hm, hw, eq).blocks
    np.set_printoptions(precision=5, suppress=True)
    for x in range(X):
        dn = np.zeros(X)
        dn[x] = args.step
        moved = ValidatedMarket(market.types, market.n + dn, market.m)
        new = solve_equilibrium(moved, hm, hw, phi, tolerance=1e-12)
        du, dv = new.welfare.u - eq.welfare.u, new.welfare.v - eq.welfare.v
        print(f"entry of type {market.types.x_types[x]} men (+{args.step}):")
        print(f"  du resolved  {du}   predicted {blocks.du_dn[:, x] * args.step}")
        print(f"  dv resolved  {dv}   predicted {blocks.dv_dn[:, x] * args.step}")
        print(f"  men worse off: {bool(np.all(du <= 1e-9))}, "
              f"women better off: {bool(np.all(dv >= -1e-9))}")


if __name__ == "__main__":
    main()
