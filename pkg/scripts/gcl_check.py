"""Largest sampled GCL residual per motion and time rule."""
import argparse

from oseen_ale.analysis import max_gcl_residual
from oseen_ale.mesh_motion import MOTIONS, build_discrete_map, make_motion, uniform_grid, unit_square

RULES = ("midpoint", "left", "right", "gauss5")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--dt", type=float, default=0.1)
    ap.add_argument("--steps", type=int, default=10)
    ap.add_argument("--samples", type=int, default=50)
    args = ap.parse_args()

    print("motion," + ",".join(RULES))
    for name in sorted(MOTIONS):
        amap = build_discrete_map(unit_square(args.n, args.n), make_motion(name),
                                  uniform_grid(args.dt, args.steps))
        res = [max_gcl_residual(amap, args.samples, rule) for rule in RULES]
        print(name + "," + ",".join(f"{r:.3e}" for r in res))


if __name__ == "__main__":
    main()
