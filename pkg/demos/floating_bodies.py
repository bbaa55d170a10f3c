"""Weighted floating bodies of an ellipse under three weights.

Prints area, wet part and sandwich constant over a delta sweep, then the
log-log slope of the wet part (2/3 for a smooth planar body).
"""
import numpy as np

from randpoly import floating as FL
from randpoly.geometry import parse_body
from randpoly.weights import make_weight

K = parse_body("ellipse:2:1")
DELTAS = np.logspace(-4, -1, 7)

for spec in ("uniform", "spherical", "hilbert-ht:disc:3"):
    w = make_weight(spec, K)
    wet = []
    print(f"\nweight {spec}")
    print(f"{'delta':>9} {'area':>9} {'wet part':>10} {'sandwich c':>11}")
    for delta in DELTAS:
        fb = FL.floating_body(K, w, delta, 360)
        wet.append(K.volume - fb.area)
        c = FL.sandwich_constant(K, w, delta, 360)
        print(f"{delta:>9.1e} {fb.area:>9.5f} {wet[-1]:>10.3e} {c:>11.4f}")
    slope = np.polyfit(np.log(DELTAS[:4]), np.log(wet[:4]), 1)[0]
    print(f"wet-part slope over the first decade: {slope:.3f}")
