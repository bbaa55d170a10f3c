"""Deficit and variance rates of weighted random polygons across geometries.

Fits log-log slopes of ``1 - E Psi`` and ``Var Psi`` against ``n`` and
compares the extrapolated scaled deficit with the boundary-integral limit.
"""
import sys

from randpoly import experiments as X

NS = (128, 256, 512, 1024, 2048, 4096)


def main(replications: int = 200, seed: int = 0):
    print(f"{'geometry':<12} {'deficit':>8} {'variance':>9} {'limit rhs':>10} {'extrapolated':>13}")
    for g in ("euclidean", "spherical", "hyperbolic", "hilbert-bu", "hilbert-ht", "dual"):
        cfg = X.ExperimentConfig.reference(g, NS, replications, seed)
        _, s = X.run_experiment(cfg, X.default_workers())
        rhs = "" if s.limit_rhs is None else f"{s.limit_rhs:.4f}"
        emp = "" if s.limit_empirical is None else f"{s.limit_empirical:.4f}"
        print(f"{g:<12} {s.deficit_slope:>8.3f} {s.variance_slope:>9.3f} {rhs:>10} {emp:>13}")
    print("targets: deficit -2/3, variance -5/3")


if __name__ == "__main__":
    main(*map(int, sys.argv[1:]))
