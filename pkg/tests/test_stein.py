import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from randpoly.geometry import parse_body
from randpoly.stein import (Estimate, Functional, bound_curve, diff1, diff2, diff2_nonzero, gamma_moments,
                            gamma_recombination_estimates, local_differences, normal_approximation_bound,
                            normality_summary, standardize, wasserstein1_to_normal)
from randpoly.weights import make_weight


def functional(n, body="disc:1", phi="uniform", psi="uniform"):
    K = parse_body(body)
    return Functional(K, make_weight(phi, K), make_weight(psi, K), n)


# -- first-order differences -------------------------------------------------------------------------------


def test_diff1_examples():
    F = functional(5)
    x = np.array([[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [-0.5, -0.5], [0.1, 0.1]])
    assert diff1(F, x, 4) == 0.0
    out = x.copy()
    out[4] = [0.9, 0.3]
    assert diff1(F, out, 4) > 0
    with pytest.raises(ValueError):
        diff1(F, x[:3], 0)


def test_diff1_mean_telescopes():
    # E D_1 f at size n equals E Psi(K(n)) - E Psi(K(n - 1)), estimated from independent runs
    n = 10
    F = functional(n)
    rng = np.random.default_rng(12)
    d = np.array([diff1(F, F.sample(rng), 0) for _ in range(1000)])
    a = np.array([F(F.sample(rng, n)) for _ in range(20000)])
    b = np.array([F(F.sample(rng, n - 1)) for _ in range(20000)])
    se = math.sqrt(d.var(ddof=1) / len(d) + a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b))
    assert abs(d.mean() - (a.mean() - b.mean())) < 3 * se


@pytest.mark.parametrize("psi", ["uniform", "spherical"])
def test_local_differences_match_recomputation(psi):
    F = functional(60, psi=psi)
    x = F.sample(np.random.default_rng(3))
    loc = local_differences(F, x)
    for i, v in loc.as_dict().items():
        full = F(x) - F(np.delete(x, i, axis=0))
        assert v == pytest.approx(full, abs=1e-14)
    for i in set(range(60)) - set(loc.ring.tolist()):
        assert diff1(F, x, i) == 0.0


def test_diff1_in_three_dimensions():
    K = parse_body("ball3:1")
    w = make_weight("uniform", K)
    F = Functional(K, w, w, 40)
    x = F.sample(np.random.default_rng(2))
    P_rest = [F(np.delete(x, i, axis=0)) for i in range(3)]
    assert [diff1(F, x, i) for i in range(3)] == pytest.approx([F(x) - p for p in P_rest], abs=1e-14)


def test_differences_are_free_of_the_centring_constant():
    F = functional(30)
    G = F.with_mean(0.37)
    x = F.sample(np.random.default_rng(4))
    for i in range(30):
        assert diff1(F, x, i) == diff1(G, x, i)
    assert diff2(F, x, 0, 1) == diff2(G, x, 0, 1)
    assert F(x) - G(x) == pytest.approx(0.37, abs=1e-15)


@given(st.integers(0, 10 ** 6))
def test_functional_is_symmetric(seed):
    rng = np.random.default_rng(seed)
    F = functional(25, psi="spherical")
    x = F.sample(rng)
    assert F(x[rng.permutation(25)]) == pytest.approx(F(x), abs=1e-15)


def test_telescoping_chain():
    F = functional(50, psi="spherical")
    x = F.sample(np.random.default_rng(5))
    steps = [diff1(F, x[:k], k - 1) for k in range(4, 51)]
    assert sum(steps) == pytest.approx(F(x) - F(x[:3]), abs=1e-10)


# -- second-order differences ----------------------------------------------------------------------------


def test_diff2_examples():
    F = functional(6)
    x = np.array([[1, 0], [0, 1], [-1, 0], [0, -1], [0.1, 0.0], [0.0, 0.1]], dtype=float)
    assert diff2(F, x, 4, 5) == 0.0
    with pytest.raises(ValueError):
        diff2(F, x, 1, 1)


@given(st.integers(0, 10 ** 6))
def test_diff2_symmetry_and_triangle_bound(seed):
    rng = np.random.default_rng(seed)
    F = functional(20)
    x = F.sample(rng)
    i, j = rng.choice(20, 2, replace=False)
    a, b = diff2(F, x, i, j), diff2(F, x, j, i)
    assert a == pytest.approx(b, abs=1e-14)
    rest = np.delete(x, j, axis=0)
    assert abs(a) <= abs(diff1(F, x, i)) + abs(diff1(F, rest, i - (i > j))) + 1e-15


def test_structural_second_differences():
    F = functional(30)
    x = F.sample(np.random.default_rng(7))
    nb = local_differences(F, x).interacting()
    for i in range(30):
        for j in range(i + 1, 30):
            numeric = abs(diff2(F, x, i, j)) > 1e-15
            assert numeric == (j in nb.get(i, ()))
    assert diff2_nonzero(F, x, *next((i, min(js)) for i, js in nb.items()))


# -- moment quantities -------------------------------------------------------------------------------------


def test_lyapunov_inequality_and_estimates():
    F = functional(128)
    g3, g4 = gamma_moments(F, 200, np.random.default_rng(8))
    assert g3.value <= g4.value ** 0.75
    assert g3.reliable and g4.reliable


def test_gamma_estimates_are_consistent_under_more_replications():
    F = functional(64)
    a3, a4 = gamma_moments(F, 200, np.random.default_rng(21))
    b3, b4 = gamma_moments(F, 800, np.random.default_rng(22))
    for a, b in ((a3, b3), (a4, b4)):
        assert abs(a.value - b.value) <= 2 * math.hypot(a.se, b.se)


def test_gamma_moments_return_values():
    F = functional(32)
    g3, g4, vals = gamma_moments(F, 20, np.random.default_rng(1), return_values=True)
    assert vals.shape == (20,) and np.all((vals > 0) & (vals < 1))


def test_recombination_surrogates():
    F = functional(64)
    est = gamma_recombination_estimates(F, 12, np.random.default_rng(9), S=8)
    assert est.patterns == 8 and len(est.per_pattern) == 8
    for g1, g2, g1r in est.per_pattern:
        assert g1.value <= g1r.value + 1e-18
    assert est.gamma1.value == max(r[0].value for r in est.per_pattern)
    assert est.gamma2.value == max(r[1].value for r in est.per_pattern)
    wider = gamma_recombination_estimates(F, 12, np.random.default_rng(10), S=16)
    print(f"gamma2 surrogate S = 8 -> 16: {est.gamma2.value:.4g} -> {wider.gamma2.value:.4g} (stability, reported)")


def test_estimate_helpers():
    e = Estimate.from_samples([1.0, 2.0, 3.0])
    assert e.value == 2.0 and e.se == pytest.approx(1 / math.sqrt(3))
    assert Estimate(1.0, 0.3).reliable is False
    assert Estimate(0.0, 0.1).rel_se == math.inf


def test_bound_formula():
    n, V, g = 100, 0.5, (1e-8, 1e-6, 1e-4, 1e-5)
    hand = math.sqrt(n) / V * (math.sqrt(n * n * g[0]) + math.sqrt(n * g[1]) + math.sqrt(n / V) * g[2]
                               + math.sqrt(g[3]))
    assert normal_approximation_bound(n, V, *g) == pytest.approx(hand, rel=1e-15)
    assert normal_approximation_bound(n, V, *g, c=3.0) == pytest.approx(3 * hand, rel=1e-15)


def test_bound_curve_small():
    K = parse_body("disc:1")
    w = make_weight("uniform", K)
    bc = bound_curve(K, w, w, (32, 64), 40, 4, np.random.default_rng(0), S=4)
    rows = bc.rows()
    assert [r["n"] for r in rows] == [32, 64]
    assert all(r["bound"] > 0 and 0 <= r["w1"] < 1 for r in rows)
    assert bc.slope("gamma3") < 0


# -- Wasserstein distance and normality ----------------------------------------------------------------------


def w1_quadrature(samples):
    s = np.sort(samples)

    def gap(t):
        return abs(np.searchsorted(s, t, side="right") / len(s) - special.ndtr(t))

    pts = sorted(set(s.tolist()))
    return integrate.quad(gap, -np.inf, pts[0])[0] + integrate.quad(gap, pts[-1], np.inf)[0] + sum(
        integrate.quad(gap, a, b, points=[special.ndtri(k / len(s)) for k in range(1, len(s))
                                          if a < special.ndtri(k / len(s)) < b] or None, epsabs=1e-13)[0]
        for a, b in zip(pts, pts[1:]))


def test_w1_two_point_example():
    # closed form 4 G(-1) + 1 - 2 phi(0) with G(t) = t Phi(t) + phi(t)
    exact = 4 * (math.exp(-0.5) / math.sqrt(2 * math.pi) - special.ndtr(-1)) + 1 - 2 / math.sqrt(2 * math.pi)
    val = wasserstein1_to_normal([-1.0, 1.0])
    assert val == pytest.approx(exact, abs=1e-14)
    assert val == pytest.approx(w1_quadrature(np.array([-1.0, 1.0])), abs=1e-9)
    assert val == pytest.approx(0.53545, abs=1e-3)


@given(st.lists(st.floats(-4, 4), min_size=2, max_size=12, unique=True))
def test_w1_matches_quadrature(xs):
    s = np.array(xs)
    assert wasserstein1_to_normal(s) == pytest.approx(w1_quadrature(s), abs=1e-8)


def test_w1_of_normal_draws():
    # stated target: W1 <= 0.05 with probability >= 0.99 at R = 2000
    vals = np.array([wasserstein1_to_normal(np.random.default_rng(s).normal(size=2000)) for s in range(400)])
    print(f"P(W1 <= 0.05) = {np.mean(vals <= 0.05):.3f}, 99% quantile {np.quantile(vals, 0.99):.4f}")
    assert np.mean(vals <= 0.05) >= 0.99


def test_w1_location_shift():
    x = np.random.default_rng(13).normal(size=100_000) + 1.0
    assert wasserstein1_to_normal(x) == pytest.approx(1.0, abs=0.02)


@given(st.integers(0, 10 ** 6))
def test_w1_permutation_invariant_and_positive(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=50)
    assert wasserstein1_to_normal(x) == pytest.approx(wasserstein1_to_normal(rng.permutation(x)), abs=1e-14)
    assert wasserstein1_to_normal(x) > 0
    with pytest.raises(ValueError):
        wasserstein1_to_normal(x[:1])


def test_normality_summary():
    s = normality_summary(np.zeros(20))
    assert s.degenerate and s.ks == pytest.approx(0.5) and not s.passes()
    with pytest.raises(ValueError):
        normality_summary(np.zeros(7))
    ks = [normality_summary(np.random.default_rng(s).normal(size=2000)).ks for s in range(20)]
    assert np.median(ks) <= 0.035
    e = normality_summary(np.random.default_rng(0).exponential(size=100_000))
    assert abs(e.skewness - 2) <= 0.2
    good = normality_summary(np.random.default_rng(1).normal(size=2000))
    assert good.passes()


def test_standardize():
    z = standardize([1.0, 2.0, 4.0, 7.0])
    assert z.mean() == pytest.approx(0.0, abs=1e-15) and z.std(ddof=1) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        standardize([2.0, 2.0])
