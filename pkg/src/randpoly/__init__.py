"""Weighted random polytopes in planar and spatial models of constant curvature
and Hilbert geometry: sampling, hulls, floating bodies, normal-approximation
diagnostics and rate experiments."""

from .geometry import Cap, HalfSpace, SmoothBody, cap_measure, parse_body
from .hull import Polytope, convex_hull
from .weights import WeightFunction, make_weight, weighted_volume

__all__ = [
    "Cap",
    "HalfSpace",
    "Polytope",
    "SmoothBody",
    "WeightFunction",
    "cap_measure",
    "convex_hull",
    "make_weight",
    "parse_body",
    "weighted_volume",
]

__version__ = "0.1.0"
