"""Print the MR level map of the four-node preset for a few blockage weights."""

import argparse

from d2dsim.policy import four_node_preset, region_census, region_map_text


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    ap.add_argument("--grid", type=int, default=41)
    ap.add_argument("--h-max", type=float, default=5.0)
    args = ap.parse_args()
    for lam in args.lam:
        ctx = four_node_preset(lam)
        print(f"lam = {lam:g}: {region_census(ctx)} regions "
              "(rows: h_b from high to low, columns: h_d from low to high)")
        print(region_map_text(ctx, args.h_max, args.grid))


if __name__ == "__main__":
    main()
