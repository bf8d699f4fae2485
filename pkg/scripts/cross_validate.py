"""Compare analytic and simulated rates of random single pairs."""

import argparse

import numpy as np

from d2dsim.allocation import PowerPlan, pair_context
from d2dsim.simulator import simulate_pair
from d2dsim.system import SystemParams, db_to_linear, generate_topology
from d2dsim.throughput import DEFAULT_QUAD, analyze, lambda_star


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", type=int, default=5)
    ap.add_argument("--levels", type=int, default=1)
    ap.add_argument("--slots", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(" W  lam       tau(an)  tau(sim)  z_tau   sig(an)  sig(sim)  z_sig")
    for _ in range(args.pairs):
        W = int(rng.integers(1, 5))
        p = SystemParams(blockage_W=W)
        top = generate_topology(rng, 1, 1, p)
        if args.levels == 1:
            plan = PowerPlan(1, xi=float(db_to_linear(rng.uniform(0, 20))))
        else:
            plan = PowerPlan(args.levels)
        ctx = pair_context(top, p, plan, 0, 0)
        for lam in (0.3, lambda_star(ctx, W).lam, 3.0):
            c = ctx.with_lambda(lam)
            r = analyze(c, W, DEFAULT_QUAD)
            e = simulate_pair(c, p, args.slots, rng)
            zt = (e.tau - r.tau) / e.tau_se if e.tau_se > 0 else float("nan")
            zs = (e.sigma - r.sigma) / e.sigma_se if e.sigma_se > 0 else float("nan")
            print(f"{W:2d}  {lam:8.4f}  {r.tau:7.4f}  {e.tau:8.4f}  {zt:5.2f}   "
                  f"{r.sigma:7.4f}  {e.sigma:8.4f}  {zs:5.2f}")


if __name__ == "__main__":
    main()
