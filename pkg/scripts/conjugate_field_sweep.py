"""Conjugate radius fields on an n=3 ellipsoid at several grid sizes.

Reports runtime, hole rate, ordering violations and the first-locus
classification counts for each grid.

    python scripts/conjugate_field_sweep.py --grids 24 48 96
"""

import argparse
import collections
import time

from liouville_conj import conjugate as cj
from liouville_conj.manifold import Manifold, general_base_point


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", type=float, nargs="+", default=[4.0, 3.0, 2.0, 1.0])
    ap.add_argument("--grids", type=int, nargs="+", default=[24, 48, 96])
    ap.add_argument("--no-classify", action="store_true")
    args = ap.parse_args()
    M = Manifold.build(args.a)
    p0 = general_base_point(M)
    for N in args.grids:
        t0 = time.perf_counter()
        f = cj.r_field(M, p0, cj.GridSpec((N,) * (M.n - 1)))
        t_field = time.perf_counter() - t0
        rep = cj.ordering_report(f)
        line = (f"N={N:4d} field {t_field:7.1f}s holes {rep.hole_rate:.3%} "
                f"violations {rep.violations} equalities {rep.equalities}")
        if not args.no_classify:
            t0 = time.perf_counter()
            labels = collections.Counter(s.label.tag for s in cj.first_conjugate_locus(f))
            line += f" classify {time.perf_counter() - t0:6.1f}s {dict(labels)}"
        print(line, flush=True)


if __name__ == "__main__":
    main()
