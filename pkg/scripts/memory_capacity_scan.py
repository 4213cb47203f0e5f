"""Memory capacity against spectral radius (ESN) and feedback gain (delay)."""

import argparse

import numpy as np

from photonrc.core import RandomSource
from photonrc.delay import DelayParams, delay_runner, make_mask
from photonrc.esn import EsnParams, build_esn, esn_runner
from photonrc.io import write_rows
from photonrc.tasks import memory_capacity


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--max-lag", type=int, default=60)
    ap.add_argument("--length", type=int, default=3000)
    ap.add_argument("--out", default="results/memory_capacity_scan.csv")
    args = ap.parse_args()
    washout = max(100, args.max_lag)

    rows = []
    for rho in (0.1, 0.5, 0.8, 0.9, 0.95, 1.0):
        for act in ("identity", "tanh"):
            mc = [
                memory_capacity(
                    esn_runner(build_esn(EsnParams(n_nodes=50, spectral_radius_target=rho, activation=act), RandomSource(s))),
                    args.max_lag,
                    args.length,
                    RandomSource(s).child("mc"),
                    washout,
                ).total
                for s in range(args.seeds)
            ]
            rows.append([f"esn-{act}", "spectral_radius", rho, float(np.mean(mc)), float(np.std(mc))])
            print(f"esn {act:8s} rho={rho:<5g} MC={np.mean(mc):6.2f} +- {np.std(mc):.2f}")
    for beta in (0.2, 0.5, 0.9, 1.2):
        p = DelayParams(n_virtual=50, feedback_gain=beta)
        mc = []
        for s in range(args.seeds):
            mask = make_mask(50, "uniform", RandomSource(s).child("mask"), p.node_separation)
            mc.append(memory_capacity(delay_runner(p, mask), args.max_lag, args.length, RandomSource(s).child("mc"), washout).total)
        rows.append(["delay", "feedback_gain", beta, float(np.mean(mc)), float(np.std(mc))])
        print(f"delay beta={beta:<5g} MC={np.mean(mc):6.2f} +- {np.std(mc):.2f}")
    write_rows(args.out, ["reservoir", "parameter", "value", "mc_mean", "mc_std"], rows)


if __name__ == "__main__":
    main()
