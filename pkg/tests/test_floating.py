import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from randpoly.floating import (cap_limit_check, cap_limit_constant, cap_height_asymptotic, classical_floating_body,
                               cut_height, floating_body, floating_threshold, min_cap_measure, polygon_contains,
                               sandwich_check, sandwich_constant, visibility_region, visibility_union_area,
                               vu_containment, wet_part_volume)
from randpoly.geometry import Cap, cap_measure, parse_body
from randpoly.weights import make_weight

WEIGHTED = [("ellipse:2:1", "uniform"), ("disc:0.9", "hyperbolic"), ("fourier:1:0.08:3", "spherical")]


def segment(t):
    return math.acos(1 - t) - (1 - t) * math.sqrt(2 * t - t * t)


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# -- cut heights ------------------------------------------------------------------------------------------


def test_cut_height_examples():
    K = parse_body("disc:1")
    w = make_weight("uniform", K)
    assert cut_height(K, w, 0.3, 0.5) == pytest.approx(0.0, abs=1e-12)
    delta = (math.acos(0.5) - 0.5 * math.sqrt(0.75)) / math.pi
    assert cut_height(K, w, 1.1, delta) == pytest.approx(0.5, abs=1e-12)
    assert cut_height(K, w, 1.1, delta, method="proxy") == pytest.approx(0.5, abs=1e-6)
    with pytest.raises(ValueError):
        cut_height(K, w, 0.0, 1.0)


@pytest.mark.parametrize("spec", ["uniform", "spherical", "hyperbolic"])
def test_cut_heights_rotationally_symmetric(spec):
    K = parse_body("disc:0.9")
    w = make_weight(spec, K)
    ts = [cut_height(K, w, th, 0.05) for th in np.linspace(0, 2 * math.pi, 9)]
    assert np.ptp(ts) < 1e-8
    ts = [cut_height(K, w, th, 0.05, method="proxy") for th in np.linspace(0, 2 * math.pi, 9)]
    assert np.ptp(ts) < 1e-8


@given(st.sampled_from(WEIGHTED), st.floats(0, 2 * math.pi), st.floats(1e-4, 0.9))
def test_cut_height_inverts_cap_measure(pair, theta, delta):
    K, spec = parse_body(pair[0]), pair[1]
    w = make_weight(spec, K)
    t = cut_height(K, w, theta, delta)
    assert cap_measure(K, w, theta, t, method="boundary") == pytest.approx(delta, abs=1e-9)


# -- floating bodies -------------------------------------------------------------------------------------


def test_disc_floating_body_is_concentric():
    fb = floating_body("disc:1", None, 0.01, 720)
    assert fb.circumradius_gap() < 1e-4
    t = cut_height(parse_body("disc:1"), make_weight("uniform", "disc:1"), 0.0, 0.01)
    assert np.allclose(fb.offsets, t)
    assert segment(1 - t) / math.pi == pytest.approx(0.01, abs=1e-9)


def test_small_delta_recovers_the_body():
    fb = floating_body("disc:1", None, 1e-6, 720)
    assert fb.area == pytest.approx(math.pi, abs=1e-3)
    gaps = [2 * math.pi - floating_body("ellipse:2:1", "spherical", d, 720).area for d in (1e-4, 1e-6)]
    assert 0 < gaps[1] < gaps[0] / 10


@pytest.mark.parametrize("body,spec", WEIGHTED)
def test_monotone_in_delta(body, spec):
    fbs = [floating_body(body, spec, d, 360) for d in (1e-3, 1e-2, 0.05, 0.2)]
    K = parse_body(body)
    assert polygon_contains(fbs[0], fbs[0].polygon) and K.contains(fbs[0].vertices).all()
    for small, big in zip(fbs, fbs[1:]):
        assert polygon_contains(small, big, 1e-10)
        assert big.area < small.area


def test_empty_above_threshold():
    alpha = floating_threshold("disc:1")
    assert alpha == pytest.approx(0.5, abs=1e-6)
    assert not floating_body("disc:1", None, 0.49, 360).empty
    assert floating_body("ellipse:2:1", None, 0.6, 360).empty


def test_uniform_matches_classical():
    for body in ("disc:1", "ellipse:2:1", "fourier:1:0.05:3"):
        for delta in (1e-3, 1e-2):
            a = floating_body(body, "uniform", delta, 180).area
            b = classical_floating_body(body, delta, 180).area
            assert abs(a - b) < 1e-6


@pytest.mark.parametrize("body,spec", WEIGHTED + [("disc:1", "uniform")])
def test_refinement_of_directions(body, spec):
    a = floating_body(body, spec, 1e-3, 720).area
    b = floating_body(body, spec, 1e-3, 1440).area
    print(f"{body} / {spec}: area change on doubling M = {abs(a - b):.3g} (target 1e-5, reported)")
    assert abs(a - b) / b < 1e-4


# -- sandwich -------------------------------------------------------------------------------------------------


def test_sandwich_hyperbolic_disc():
    deltas = [1e-3, 1e-2, 0.05, 0.1, 0.15]
    out = sandwich_check("disc:0.9", "hyperbolic", deltas)
    print(f"sandwich constants c_delta = {np.round(out['c_delta'], 4).tolist()}, c = {out['c']:.4f}")
    assert 0 < out["c"] < 1
    assert all(out["contained"])


def test_sandwich_uniform_is_trivial():
    assert sandwich_constant("ellipse:2:1", "uniform", 0.01) == pytest.approx(1.0, abs=1e-6)


# -- minimal cap measure ---------------------------------------------------------------------------------


def test_min_cap_measure_examples():
    K = parse_body("disc:1")
    w = make_weight("uniform", K)
    assert min_cap_measure(K, w, [0.0, 0.0]) == pytest.approx(0.5, abs=1e-6)
    assert min_cap_measure(K, w, K.boundary_point(0.7) * (1 - 1e-12)) <= 1e-3
    with pytest.raises(ValueError):
        min_cap_measure(K, w, [1.5, 0.0])


def test_superlevel_set_is_the_floating_body():
    K = parse_body("ellipse:2:1")
    w = make_weight("spherical", K)
    fb = floating_body(K, w, 0.1, 720)
    pts = make_weight("uniform", K).sample(np.random.default_rng(6), 1000)
    f = np.array([min_cap_measure(K, w, p) for p in pts])
    clear = np.abs(f - 0.1) > 2e-3  # grid tolerance around the level set
    assert clear.sum() > 900
    assert np.array_equal(fb.contains(pts[clear]), f[clear] >= 0.1)


# -- wet part --------------------------------------------------------------------------------------------------


@pytest.mark.parametrize("body", ["disc:1", "ellipse:2:1"])
def test_wet_part_slope(body):
    deltas = np.logspace(-4, -2, 7)
    wet = [wet_part_volume(body, None, d) for d in deltas]
    assert loglog_slope(deltas, wet) == pytest.approx(2 / 3, abs=0.03)


def test_wet_part_bounded():
    alpha = floating_threshold("ellipse:2:1")
    assert 0 < wet_part_volume("ellipse:2:1", None, 0.5 * alpha) <= parse_body("ellipse:2:1").volume


# -- visibility regions -----------------------------------------------------------------------------------


@pytest.mark.parametrize("body", ["disc:1", "ellipse:2:1"])
def test_visibility_area_doubles_with_delta(body):
    for delta in (1e-4, 1e-3):
        a = visibility_region(body, 0.4, delta).area
        b = visibility_region(body, 0.4, 2 * delta).area
        assert 1.8 <= b / a <= 2.2


def test_visibility_cap_sandwich():
    K = parse_body("disc:1")
    deltas = np.logspace(-5, -3, 5)
    regions = [visibility_region(K, 0.0, d) for d in deltas]
    c1 = np.array([r.t_in for r in regions]) / deltas ** (2 / 3)
    c2 = np.array([r.t_out for r in regions]) / deltas ** (2 / 3)
    assert np.all(c1 > 0) and np.all(c1 <= c2)
    assert c1.max() / c1.min() <= 1.25 and c2.max() / c2.min() <= 1.25
    # points of the inner cap lie in the region, and region vertices lie in the outer cap
    rng = np.random.default_rng(1)
    for r in regions:
        inner = Cap(K, 0.0, 0.999 * r.t_in)
        pts = K.boundary_point(rng.uniform(-0.5, 0.5, 200)) * rng.uniform(0.9, 1, 200)[:, None]
        pts = pts[inner.contains(pts)]
        assert np.all(r.contains(pts, 1e-12))
        depth = 1.0 - r.vertices[:, 0]
        assert np.all(depth <= r.t_out + 1e-12)


def test_visibility_union_area_scales_like_delta():
    ratios = []
    for delta in np.logspace(-5, -3, 4):
        r = visibility_region("ellipse:2:1", 1.0, delta)
        u = visibility_union_area(r)
        assert u >= r.area
        ratios.append(u / delta)
    assert max(ratios) / min(ratios) <= 1.25


def test_visibility_guards():
    with pytest.raises(ValueError):
        visibility_region("disc:1", 0.0, 0.6)


# -- cap asymptotics ------------------------------------------------------------------------------------


def test_cap_limit_disc():
    assert cap_limit_constant(1.0) == pytest.approx(4 * math.sqrt(2) / 3, rel=1e-15)
    out = cap_limit_check("disc:1", 0.3)
    assert out["rel_error"][-1] < 0.01
    # cap area as the integral of the chord length, free of cancellation
    area = integrate.quad(lambda s: 2 * math.sqrt(2 * s - s * s), 0, 1e-5, epsabs=0, epsrel=1e-13)[0]
    assert out["ratios"][-1] == pytest.approx(area / 1e-5 ** 1.5, rel=1e-9)


def test_cap_limit_ellipse():
    out = cap_limit_check("ellipse:2:1", 0.0)
    assert out["kappa"] == pytest.approx(2.0)
    assert out["limit"] == pytest.approx(4 * math.sqrt(2) / 3 * 2 ** -0.5, rel=1e-14)
    assert out["rel_error"][-1] < 0.01


def test_cap_ratio_two_sided_bound():
    K = parse_body("ellipse:2:1")
    ratios = np.array([cap_limit_check(K, th)["ratios"] for th in 2 * math.pi * np.arange(8) / 8])
    kappa = K.curvature(np.linspace(0, 2 * math.pi, 1000))
    c1, c2 = ratios.min(), ratios.max()
    print(f"cap ratio bounds on an 8-point grid: c1 = {c1:.4f}, c2 = {c2:.4f}")
    assert c2 / c1 <= 1.05 * math.sqrt(kappa.max() / kappa.min())


def test_cap_height_inverts_the_limit():
    for kappa in (0.5, 1.0, 2.0):
        t = cap_height_asymptotic(1e-9, kappa)
        assert cap_limit_constant(kappa) * t ** 1.5 == pytest.approx(1e-9, rel=1e-12)


# -- containment in random polytopes ---------------------------------------------------------------------


def test_vu_containment_monotone_in_c():
    out = vu_containment("disc:0.9", "uniform", ns=(256,), c_grid=(0.5, 1.0, 2.0, 4.0), reps=40, M=180)
    fail = np.array(out["failure"])[0]
    assert np.all(np.diff(fail) <= 0)
    assert fail[-1] == 0.0 and fail[0] > 0.5
