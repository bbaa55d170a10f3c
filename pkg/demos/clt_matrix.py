"""Normality diagnostics of the standardised functional for every geometry.

The acceptance run uses n = 4096 and R = 2000; pass smaller values on the
command line for a quick look, e.g. ``python demos/clt_matrix.py 1024 400``.
"""
import sys

from randpoly import experiments as X


def main(n: int = 1024, R: int = 400, seed: int = 0):
    out = X.clt_matrix(n, R, seed, X.default_workers())
    print(f"n = {n}, R = {R}")
    print(f"{'geometry':<12} {'KS':>7} {'skew':>7} {'kurt':>7} {'W1':>7}")
    for g, s in out.items():
        print(f"{g:<12} {s.ks:>7.4f} {s.skewness:>7.3f} {s.excess_kurtosis:>7.3f} {s.w1:>7.4f}")


if __name__ == "__main__":
    main(*map(int, sys.argv[1:]))
