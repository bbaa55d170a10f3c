"""Moment estimates and the assembled normal-approximation bound on the disc."""
import numpy as np

from randpoly import stein
from randpoly.geometry import parse_body
from randpoly.weights import make_weight

K = parse_body("disc:1")
w = make_weight("uniform", K)
bc = stein.bound_curve(K, w, w, (128, 256, 512, 1024), 200, 12, np.random.default_rng(0), S=8)
rows = bc.rows()
cols = [k for k in rows[0] if k != "n"]
print("n     " + " ".join(f"{c:>11}" for c in cols))
for r in rows:
    print(f"{r['n']:<5} " + " ".join(f"{r[c]:>11.4g}" for c in cols))
print(f"gamma3 slope {bc.slope('gamma3'):.2f}, bound slope {bc.slope():.2f}, decreasing: {bc.decreasing}")
