"""Mutual information of continuous and discrete inputs over power.

Writes one CSV per distribution and an SVG overlay with the AWGN reference,
then prints the Gaussian peak and the high/low-power landmarks.
"""

import argparse
import csv
import math
import os

from capx.cli import main as capx_main

HERE = os.path.dirname(os.path.abspath(__file__))


def read(path):
    with open(path) as fh:
        return [(float(r["p"]), float(r["mi_bits"])) for r in csv.DictReader(fh)]


def run(args):
    cfg = os.path.join(HERE, "..", "configs", "fig2_mi_curves.json")
    code = capx_main(["mi-curve", "--config", cfg, "--out", args.out, "--jobs", str(args.jobs)])
    if code:
        return code
    gauss = read(os.path.join(args.out, "mi_gaussian.csv"))
    p_best, mi_best = max(gauss, key=lambda r: r[1])
    print(f"Gaussian peak: {mi_best:.4f} bits at p = {p_best:.4g}")
    for name in ("gaussian", "uniform", "bpsk", "pam3", "pam4"):
        p, mi = read(os.path.join(args.out, f"mi_{name}.csv"))[-1]
        print(f"{name:>11s} at p = {p:g}: {mi:.6f} bits")
    low = {n: read(os.path.join(args.out, f"mi_{n}.csv"))[0][1] for n in ("gaussian", "exponential", "bpsk", "ook")}
    print(f"exponential/gaussian at p = 0.1: {low['exponential'] / low['gaussian']:.3f}")
    print(f"ook/bpsk at p = 0.1: {low['ook'] / low['bpsk']:.3f}")
    print(f"log2(3) = {math.log2(3):.5f}")
    return 0


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/fig2")
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    raise SystemExit(run(ap.parse_args()))
