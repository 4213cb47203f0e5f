"""Readout transfer under coupling tolerances on a two-layer delay cascade.

Trains each readout on the nominal cascade and scores it after the
inter-layer couplings are perturbed by relative Gaussian noise of size sigma.

    python scripts/tolerance_sweep.py --sigmas 0 0.02 0.05 0.1 0.3 --seeds 20
"""

import argparse

from photonrc.core import RandomSource
from photonrc.deep import CascadeSpec, DelayLayer, tolerance_experiment
from photonrc.delay import DelayParams
from photonrc.io import TOLERANCE_COLUMNS, write_rows
from photonrc.readout import RidgeConfig
from photonrc.tasks import TaskSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sigmas", type=float, nargs="+", default=[0.0, 0.1, 0.3])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--n-virtual", type=int, default=200)
    ap.add_argument("--coupling-scale", type=float, default=0.05)
    ap.add_argument("--mode", choices=("multiplicative", "additive"), default="multiplicative")
    ap.add_argument("--master-seed", type=int, default=0)
    ap.add_argument("--out", default="results/tolerance_sweep.csv")
    args = ap.parse_args()

    layer = DelayLayer(DelayParams(n_virtual=args.n_virtual))
    spec = CascadeSpec((layer, layer), coupling_scale=args.coupling_scale)
    res = tolerance_experiment(
        spec, TaskSpec(), args.sigmas, args.seeds, RandomSource(args.master_seed), RidgeConfig(), args.mode
    )
    for row in res.rows():
        print(f"sigma={row['sigma']:<6g} median NMSE={row['median_nmse']:.4g}")
    write_rows(args.out, TOLERANCE_COLUMNS, [[r[c] for c in TOLERANCE_COLUMNS] for r in res.rows()])


if __name__ == "__main__":
    main()
