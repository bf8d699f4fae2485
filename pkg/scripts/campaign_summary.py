"""Headline campaign points: no reuse, CMP and GEO at low and high target SNR, 20 levels."""

import argparse
from dataclasses import replace

from d2dsim.simulator import CampaignConfig, run_campaign


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--topologies", type=int, default=300)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--skip-levels", action="store_true", help="skip the slow N=20 points")
    args = ap.parse_args()
    base = CampaignConfig(n_topologies=args.topologies, seed=args.seed, workers=args.workers)
    points = [("NONE", replace(base, scheme="NONE")),
              ("GEO", replace(base, scheme="GEO")),
              ("CMP W=1 xi=4dB", replace(base, W=1, xi_db=4.0)),
              ("CMP W=1 xi=16dB", replace(base, W=1, xi_db=16.0))]
    if not args.skip_levels:
        points += [(f"CMP N=20 W={W}", replace(base, W=W, n_levels=20)) for W in (2, 3)]
    print(f"{'point':18s} omega_c  omega_d  omega_total  stderr_total")
    for name, cfg in points:
        m = run_campaign(cfg)
        print(f"{name:18s} {m.omega_c:.4f}   {m.omega_d:.4f}   {m.omega_total:.4f}       {m.stderr_total:.4f}")


if __name__ == "__main__":
    main()
