"""Run the property suites and print one verdict line per suite.

    python scripts/run_suite.py --seed 7 [--quick] [--only abel signs]
"""

import argparse
import json
import time

from liouville_conj import suites
from liouville_conj.config import SuiteSizes


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--only", nargs="*", choices=suites.SUITES)
    ap.add_argument("--json", help="also write the verdicts to this file")
    args = ap.parse_args()
    sizes = SuiteSizes.quick() if args.quick else SuiteSizes()
    t0 = time.perf_counter()
    out = suites.run_all(args.seed, sizes, only=args.only)
    for name, v in out.items():
        print(f"{name:13s} {'pass' if v['pass'] else 'FAIL'}")
    print(f"total {time.perf_counter() - t0:.1f}s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
