"""DUE throughput against the blockage weight for the four-node preset, and lam* per W."""

import argparse

import numpy as np

from d2dsim.policy import four_node_preset
from d2dsim.throughput import DEFAULT_QUAD, ThroughputProfile, lambda_star


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--W", type=int, nargs="+", default=[1, 3, 6])
    ap.add_argument("--points", type=int, default=12)
    args = ap.parse_args()
    ctx = four_node_preset(1.0)
    lams = np.geomspace(0.05, 5.0, args.points)
    print("lam      " + "  ".join(f"tau(W={W})" for W in args.W))
    profiles = [ThroughputProfile(ctx, W, DEFAULT_QUAD) for W in args.W]
    for lam in lams:
        print(f"{lam:7.4f}  " + "  ".join(f"{p.tau(lam):9.5f}" for p in profiles))
    for W in args.W:
        ls = lambda_star(ctx, W, DEFAULT_QUAD)
        print(f"W={W}: lam*={ls.lam:.4f} tau={ls.tau:.5f} sigma={ls.sigma:.5f}")


if __name__ == "__main__":
    main()
