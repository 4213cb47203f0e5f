"""NARMA10: delay reservoir vs ESN vs 20-tap linear baseline, per seed.

    python scripts/narma_benchmark.py --seeds 12 --out results/narma_benchmark.csv
"""

import argparse

from photonrc.core import RandomSource
from photonrc.delay import DelayParams, delay_runner, make_mask
from photonrc.esn import EsnParams, build_esn, esn_runner
from photonrc.io import write_rows
from photonrc.readout import RidgeConfig
from photonrc.tasks import TaskSpec, evaluate, tapped_delay_runner


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, default=12)
    ap.add_argument("--n-virtual", type=int, default=400)
    ap.add_argument("--esn-nodes", type=int, default=100)
    ap.add_argument("--lam", type=float, default=1e-6)
    ap.add_argument("--out", default="results/narma_benchmark.csv")
    args = ap.parse_args()

    task, ridge = TaskSpec(), RidgeConfig(args.lam)
    p = DelayParams(n_virtual=args.n_virtual)
    rows = []
    for seed in range(args.seeds):
        rng = RandomSource(seed)
        runners = {
            "delay": delay_runner(p, make_mask(p.n_virtual, "uniform", rng.child("mask"), p.node_separation)),
            "esn": esn_runner(build_esn(EsnParams(n_nodes=args.esn_nodes), rng.child("reservoir"))),
            "linear20": tapped_delay_runner(20),
        }
        scores = {k: evaluate(task, run, ridge, rng.child("task"))["test_nmse"] for k, run in runners.items()}
        rows.append([seed, scores["delay"], scores["esn"], scores["linear20"]])
        print(f"seed {seed:2d}  " + "  ".join(f"{k}={v:.4f}" for k, v in scores.items()))
    wins = sum(r[1] < r[3] for r in rows)
    print(f"delay beats linear baseline on {wins}/{len(rows)} seeds")
    write_rows(args.out, ["seed", "delay_nmse", "esn_nmse", "linear20_nmse"], rows)


if __name__ == "__main__":
    main()
