"""Dual volumes of random polygons: radial formula against random sections."""
import math

import numpy as np

from randpoly import experiments as X
from randpoly.geometry import parse_body
from randpoly.hull import convex_hull

rng = np.random.default_rng(3)
print(f"{'vertices':>8} {'radial':>9} {'sections':>9} {'se':>7} {'z':>6}")
for _ in range(8):
    t = np.sort(rng.uniform(0, 2 * math.pi, 10))
    r = rng.uniform(0.4, 1.6, 10)
    P = convex_hull(np.stack([r * np.cos(t), r * np.sin(t)], axis=1))
    exact = X.dual_volume(P, 1)
    est = X.dual_volume_section_oracle(P, 1, rng, 4000)
    print(f"{len(P):>8d} {exact:>9.5f} {est.value:>9.5f} {est.se:>7.4f} {(est.value - exact) / est.se:>6.2f}")

K = parse_body("ellipse:1.5:1")
print(f"\nV~_1(ellipse 1.5 x 1) = {X.dual_volume_of_body(K, 1):.8f}")
print(f"limit constant of its expected deficit: {X.dual_expectation_limit_rhs(K, 1):.6f}")
