"""Cusp counts of the first conjugate locus on 2-dimensional ellipsoids.

Samples random base points for a few spectra and tallies the cusp counts
(the expected count is 4 everywhere).

    python scripts/cusp_count_sweep.py --points 20 --seed 1
"""

import argparse
import collections

import numpy as np

from liouville_conj import conjugate as cj
from liouville_conj.manifold import Manifold, general_base_point


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--N", type=int, default=256)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    for a in ([3.0, 2.0, 1.0], [2.0, 1.5, 1.0], [5.0, 2.0, 1.0]):
        M = Manifold.build(a)
        tally = collections.Counter()
        for _ in range(args.points):
            p0 = general_base_point(M, rng.uniform(0.05, 0.95, M.n))
            tally[cj.count_cusps_2d(M, p0, N=args.N).count] += 1
        print(f"a={a} cusp counts {dict(tally)}", flush=True)


if __name__ == "__main__":
    main()
