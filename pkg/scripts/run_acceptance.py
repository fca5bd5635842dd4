"""Run the acceptance criteria and print the pass/fail table.

    python3 scripts/run_acceptance.py [--only 3 7] [--json results.json]
"""

import argparse
import json
import sys

from matchkit.acceptance import CRITERIA, run_criterion


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    p.add_argument("--only", type=int, nargs="*", help="criterion numbers to run")
    p.add_argument("--json", default=None, help="also write results as JSON")
    args = p.parse_args()
    numbers = args.only or [num for num, _, _ in CRITERIA]
    results = []
    for num in numbers:
        r = run_criterion(num)
        print(r.line(), flush=True)
        results.append(r)
    print(f"{sum(r.passed for r in results)}/{len(results)} passed, "
          f"{sum(r.seconds for r in results):.1f}s total")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump([r.__dict__ for r in results], fh, indent=2)
    return 0 if all(r.passed for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
