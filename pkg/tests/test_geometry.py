import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from randpoly.geometry import (Cap, HalfSpace, ball_binomial, ball_binomial_beta, ball_volume, boundary_integral,
                               cap_measure, parse_body)
from randpoly.weights import make_weight

BODIES = ["disc:1", "disc:0.9", "ellipse:2:1", "fourier:1:0.05:3", "fourier:1:0.08:3"]


# -- boundary points and curvature ------------------------------------------------------------


def test_boundary_point_examples():
    assert np.allclose(parse_body("disc:1").boundary_point(0.0), [1.0, 0.0], atol=1e-15)
    assert np.allclose(parse_body("ellipse:2:1").boundary_point(math.pi / 2), [0.0, 1.0], atol=1e-15)
    # h(0) = h0 + eps and h'(0) = 0
    assert parse_body("fourier:1:0.05:3").boundary_point(0.0)[0] == pytest.approx(1.05, abs=1e-15)


@pytest.mark.parametrize("name", BODIES)
def test_boundary_point_has_outward_normal(name):
    # the support line in direction u(theta) touches the curve at x(theta)
    K = parse_body(name)
    theta = np.linspace(0, 2 * math.pi, 257)
    x = K.boundary_point(theta)
    u = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    assert np.allclose(np.einsum("ij,ij->i", x, u), K.support(theta), atol=1e-13)
    dense = K.boundary_point(np.linspace(0, 2 * math.pi, 4096, endpoint=False))
    assert np.all(dense @ u.T <= K.support(theta)[None, :] + 1e-12)


@pytest.mark.parametrize("name", BODIES)
def test_boundary_traces_convex_curve(name):
    x = parse_body(name).boundary_point(np.linspace(0, 2 * math.pi, 2048, endpoint=False))
    e = np.roll(x, -1, axis=0) - x
    cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
    assert np.all(cross > 0)


def test_curvature_disc():
    assert np.allclose(parse_body("disc:2").curvature(np.linspace(0, 6, 7)), 0.5)


def test_curvature_ellipse_matches_parametric_formula():
    a, b = 2.0, 1.0
    K = parse_body("ellipse:2:1")
    assert K.curvature(0.0) == pytest.approx(a / b ** 2, rel=1e-12)
    theta = np.linspace(0.1, 6.0, 13)
    x = K.boundary_point(theta)
    s = np.arctan2(x[:, 1] / b, x[:, 0] / a)
    oracle = a * b / (a ** 2 * np.sin(s) ** 2 + b ** 2 * np.cos(s) ** 2) ** 1.5
    assert np.allclose(K.curvature(theta), oracle, rtol=1e-10)


def test_curvature_fourier_closed_form():
    eps, k = 0.05, 3
    K = parse_body(f"fourier:1:{eps}:{k}")
    theta = np.linspace(0, 2 * math.pi, 50)
    assert np.allclose(K.curvature(theta), 1 / (1 + eps * (1 - k * k) * np.cos(k * theta)), rtol=1e-13)


def test_fourier_requires_positive_curvature():
    with pytest.raises(ValueError):
        parse_body("fourier:1:0.2:3")  # 0.2 * 8 >= 1


def test_parse_body_round_trip_and_errors():
    for name in BODIES + ["ball3:1", "ellipsoid3:1:2:3", "disc:1@0.1,-0.2"]:
        assert parse_body(name).id == name
    with pytest.raises(ValueError):
        parse_body("square:1")
    with pytest.raises(ValueError):
        parse_body("ellipse:2")
    with pytest.raises(ValueError):
        parse_body("disc:x")
    with pytest.raises(ValueError):
        parse_body("ball3:1").boundary_point(0.0)


# -- boundary quadrature -------------------------------------------------------------------------


def test_boundary_integral_disc():
    K = parse_body("disc:1")
    assert boundary_integral(K, lambda x, k: np.ones(len(x))) == pytest.approx(2 * math.pi, rel=1e-14)
    assert boundary_integral(K, lambda x, k: k ** (1 / 3)) == pytest.approx(2 * math.pi, rel=1e-14)


def test_boundary_integral_ellipse_perimeter():
    # complete elliptic integral of the second kind
    oracle = 4 * 2 * special.ellipe(1 - 0.25)
    assert oracle == pytest.approx(9.688448, abs=1e-6)
    val = boundary_integral(parse_body("ellipse:2:1"), lambda x, k: np.ones(len(x)))
    assert val == pytest.approx(oracle, rel=1e-12)


@pytest.mark.parametrize("name", BODIES)
def test_boundary_integral_matches_proxy_perimeter(name):
    K = parse_body(name)
    P = K.proxy()
    per = np.sum(np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1))
    assert boundary_integral(K, lambda x, k: np.ones(len(x))) == pytest.approx(per, rel=1e-6)


@pytest.mark.parametrize("name", BODIES)
def test_area_matches_arc_integral(name):
    # area = 1/2 int h (h + h'') dtheta, against adaptive quadrature
    K = parse_body(name)
    oracle = 0.5 * integrate.quad(lambda t: K.support(t) * K.radius_of_curvature(t), 0, 2 * math.pi,
                                  limit=200, epsabs=1e-13)[0]
    assert K.volume == pytest.approx(oracle, rel=1e-10)


# -- caps ----------------------------------------------------------------------------------------


def segment(t):
    return math.acos(1 - t) - (1 - t) * math.sqrt(2 * t - t * t)


def test_cap_measure_examples():
    K = parse_body("disc:1")
    w = make_weight("uniform", K)
    for u in (0.0, 1.0, 2.5):
        assert cap_measure(K, w, u, 0.0) == pytest.approx(0.5, abs=1e-6)
        assert cap_measure(K, w, u, 0.0, method="boundary") == pytest.approx(0.5, abs=1e-14)
        assert cap_measure(K, w, u, 1.0) == 0.0
        assert cap_measure(K, w, u, -1.0) == 1.0
    oracle = (math.acos(0.5) - 0.5 * math.sqrt(0.75)) / math.pi
    assert oracle == pytest.approx(0.19550, abs=1e-5)
    assert cap_measure(K, w, 0.3, 0.5) == pytest.approx(oracle, abs=1e-6)
    assert cap_measure(K, w, 0.3, 0.5, method="boundary") == pytest.approx(oracle, abs=1e-14)


@pytest.mark.parametrize("t", [1e-4, 1e-2, 0.3, 1.0])
def test_cap_area_disc_formula(t):
    assert Cap(parse_body("disc:1"), 0.7, t).area == pytest.approx(segment(t), rel=1e-10)


def test_cap_zero_height_and_validation():
    K = parse_body("ellipse:2:1")
    assert Cap(K, 0.4, 0.0).area == 0.0
    with pytest.raises(ValueError):
        Cap(K, 0.4, -0.1)
    with pytest.raises(ValueError):
        HalfSpace((1.0, 1.0), 0.0)
    H = HalfSpace.from_angle(0.3, 0.2)
    assert np.linalg.norm(H.normal) == pytest.approx(1.0)


@given(st.sampled_from(["ellipse:2:1", "fourier:1:0.05:3"]), st.floats(0, 2 * math.pi),
       st.lists(st.floats(-2.5, 2.5), min_size=2, max_size=6))
def test_cap_measure_monotone_in_offset(name, u, ts):
    K = parse_body(name)
    w = make_weight("uniform", K)
    ts = sorted(ts)
    m = [cap_measure(K, w, u, t) for t in ts]
    assert all(0.0 <= v <= 1.0 for v in m)
    assert all(a >= b - 1e-12 for a, b in zip(m, m[1:]))


def test_cap_measure_methods_agree_for_radial_weight():
    K = parse_body("ellipse:2:1")
    w = make_weight("spherical", K)
    for u, t in [(0.2, 1.5), (1.3, 0.4), (2.9, -0.3)]:
        assert cap_measure(K, w, u, t) == pytest.approx(cap_measure(K, w, u, t, method="boundary"), abs=1e-6)


# -- ball constants ------------------------------------------------------------------------------


def test_ball_volume_examples():
    assert ball_volume(1) == pytest.approx(2.0)
    assert ball_volume(2) == pytest.approx(math.pi)
    assert ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert ball_volume(0) == 1.0
    with pytest.raises(ValueError):
        ball_volume(-1)


def test_ball_binomial_examples():
    assert ball_binomial(2, 1) == pytest.approx(math.pi / 2, rel=1e-15)
    for d in range(0, 8):
        assert ball_binomial(d, 0) == pytest.approx(1.0)
        assert ball_binomial(d, d) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ball_binomial(2, 3)
    with pytest.raises(ValueError):
        ball_binomial(-1, 0)


@pytest.mark.parametrize("d", range(2, 9))
def test_ball_binomial_beta_identity(d):
    for j in range(1, d):
        assert ball_binomial_beta(d, j) == pytest.approx(ball_binomial(d, j), rel=1e-12)
