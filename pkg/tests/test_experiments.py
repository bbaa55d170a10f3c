import json
import math

import numpy as np
import pytest
from scipy import integrate

from randpoly import experiments as X
from randpoly.geometry import ball_volume, parse_body
from randpoly.hull import Polytope, convex_hull
from randpoly.weights import make_weight


def disc_polygon(k, r=1.0):
    t = 2 * math.pi * np.arange(k) / k
    return Polytope(2, r * np.stack([np.cos(t), np.sin(t)], axis=1))


def random_polygon(rng, k=12):
    t = np.sort(rng.uniform(0, 2 * math.pi, k))
    r = rng.uniform(0.5, 1.5, k)
    return convex_hull(np.stack([r * np.cos(t), r * np.sin(t)], axis=1))


# -- configuration -------------------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(X.ConfigError, match="n:"):
        X.ExperimentConfig.reference("euclidean", (64, 32), 10)
    with pytest.raises(X.ConfigError, match="replications"):
        X.ExperimentConfig.reference("euclidean", (32, 64), 7)
    with pytest.raises(X.ConfigError, match="geometry"):
        X.ExperimentConfig("cubic", "disc:1", "uniform", "uniform", (32,), 10)
    with pytest.raises(X.ConfigError, match="weight_psi"):
        X.ExperimentConfig("dual", "disc:1", "uniform", "dual:3", (32,), 10)
    with pytest.raises(X.ConfigError, match="body"):
        X.ExperimentConfig("dual", "disc:1@2,0", "uniform", "dual:1", (32,), 10)
    with pytest.raises(X.ConfigError, match="schema_version"):
        X.ExperimentConfig.from_mapping({"geometry": "euclidean", "n": "32", "schema_version": "2"})


def test_unknown_key_is_named():
    with pytest.raises(X.ConfigError, match="unknown key\\(s\\): bogus"):
        X.ExperimentConfig.from_mapping({"geometry": "euclidean", "n": "32", "bogus": "1"})
    with pytest.raises(X.ConfigError, match="replications: malformed"):
        X.ExperimentConfig.from_mapping({"geometry": "euclidean", "n": "32", "replications": "many"})


def test_ini_round_trip(tmp_path):
    cfg = X.ExperimentConfig.reference("hilbert-ht", (32, 64, 128), 12, seed=9, hilbert_directions=256)
    path = tmp_path / "exp.ini"
    path.write_text(cfg.to_ini())
    assert X.ExperimentConfig.from_ini(str(path)) == cfg
    over = X.ExperimentConfig.from_ini(str(path), {"seed": "3", "n": "16, 32"})
    assert over.seed == 3 and over.ns == (16, 32) and over.geometry == "hilbert-ht"
    assert cfg.phi_id.endswith("#M=256")


def test_ini_rejects_extra_sections(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text("[experiment]\ngeometry = euclidean\nn = 32\n[other]\nx = 1\n")
    with pytest.raises(X.ConfigError, match="sections"):
        X.ExperimentConfig.from_ini(str(path))


def test_replication_seeds():
    s = X.replication_seed(0, "euclidean", 128, 3)
    assert s == X.replication_seed(0, "euclidean", 128, 3)
    assert 0 <= s < 2 ** 128
    others = {X.replication_seed(0, "euclidean", 128, 4), X.replication_seed(1, "euclidean", 128, 3),
              X.replication_seed(0, "spherical", 128, 3), X.replication_seed(0, "euclidean", 256, 3)}
    assert s not in others and len(others) == 4


# -- replications and determinism -----------------------------------------------------------------------


@pytest.mark.parametrize("geometry", sorted(X.GEOMETRIES))
def test_records_are_valid(geometry):
    cfg = X.ExperimentConfig.reference(geometry, (32, 64), 8, seed=2, hilbert_directions=128)
    records, discarded = X.run_replications(cfg)
    assert discarded == 0 and len(records) == 16
    assert [(r.n, r.rep) for r in records] == [(n, k) for n in (32, 64) for k in range(8)]
    vals = np.array([r.psi_value for r in records])
    assert np.all((vals > 0) & (vals <= 1))
    assert all(3 <= r.hull_vertices <= r.n for r in records)


def test_records_independent_of_workers_and_chunking():
    cfg = X.ExperimentConfig.reference("spherical", (32, 64), 10, seed=4)
    a = X.records_csv(X.run_replications(cfg, workers=1)[0])
    b = X.records_csv(X.run_replications(cfg, workers=2, chunk=3)[0])
    c = X.records_csv(X.run_replications(cfg, workers=1, chunk=7)[0])
    assert a == b == c


def test_records_csv_round_trip():
    cfg = X.ExperimentConfig.reference("dual", (32,), 8, seed=1)
    records, _ = X.run_replications(cfg)
    text = X.records_csv(records)
    assert text.splitlines()[0] == ",".join((*X.RECORD_COLUMNS, "dual_volume", "schema_version"))
    assert X.read_records_csv(text) == records
    with pytest.raises(X.ConfigError, match="schema_version"):
        X.read_records_csv(text.replace(",1\n", ",2\n"))


def test_summary_json_layout():
    cfg = X.ExperimentConfig.reference("euclidean", (64, 128, 256), 16, seed=3)
    records, summary = X.run_experiment(cfg)
    out = json.loads(X.summary_json(summary))
    assert out["schema_version"] == X.SCHEMA_VERSION
    for key in ("deficit_slope", "variance_slope", "limit_rhs", "limit_empirical"):
        assert key in out["global"]
    for s in out["per_n"].values():
        assert {"mean", "var", "ks", "skew", "kurt", "w1"} <= set(s)
    assert summary.flagged() == []
    assert out["per_n"]["64"]["mean"] == pytest.approx(np.mean([r.psi_value for r in records if r.n == 64]))


def test_dual_summary_reports_variance_slope():
    cfg = X.ExperimentConfig.reference("dual", (64, 128, 256), 16, seed=3)
    _, summary = X.run_experiment(cfg)
    assert "dual_volume_variance_slope" in summary.extra
    assert summary.extra["dual_volume_body"] == pytest.approx(X.dual_volume_of_body(parse_body("ellipse:1.5:1"), 1))


# -- rate fits -------------------------------------------------------------------------------------------


def test_fit_rate_examples():
    ns = 2.0 ** np.arange(7, 14)
    slope, _, res = X.fit_rate(ns, ns ** (-2 / 3))
    assert slope == pytest.approx(-2 / 3, abs=1e-12) and res == pytest.approx(0.0, abs=1e-12)
    slope, icpt, _ = X.fit_rate(ns, 3 * ns ** (-5 / 3))
    assert slope == pytest.approx(-5 / 3, abs=1e-12) and icpt == pytest.approx(math.log(3), abs=1e-10)
    with pytest.raises(ValueError):
        X.fit_rate(ns, np.zeros(7))


def test_fit_rate_noisy_synthetic():
    ns = 2.0 ** np.arange(7, 14)
    rng = np.random.default_rng(17)
    errors = [X.fit_rate(ns, ns ** -1.5 * (1 + 0.2 * rng.uniform(-1, 1, 7)))[0] + 1.5 for _ in range(200)]
    assert np.max(np.abs(errors)) <= 0.1


def test_extrapolate_limit_exact_model():
    ns = 2.0 ** np.arange(7, 14)
    deficits = (2.5 + 0.8 * ns ** (-1 / 3)) * ns ** (-2 / 3)
    assert X.extrapolate_limit(ns, deficits) == pytest.approx(2.5, rel=1e-12)
    assert X.extrapolate_limit(ns, deficits, se=1e-3 * deficits) == pytest.approx(2.5, rel=1e-12)


# -- limit constants -----------------------------------------------------------------------------------


@pytest.mark.parametrize("d", range(2, 7))
def test_constants_agree_at_top_index(d):
    assert X.limit_constant_c(d, d) == X.limit_constant_c_tilde(d, d)


def test_c_tilde_golden():
    # Gamma(11/3) = (8/3)(5/3)(2/3) Gamma(2/3), Gamma(2/3) from the reflection formula
    g23 = 2 * math.pi / (math.sqrt(3) * math.gamma(1 / 3))
    value = 0.25 * 0.6 * 0.5 * (8 / 3) * (5 / 3) * (2 / 3) * g23 * 1.5 ** (2 / 3)
    assert value == pytest.approx(0.394310, abs=1e-6)
    assert X.limit_constant_c_tilde(2, 1) == pytest.approx(value, rel=1e-14)


def test_constants_domain():
    for d, j in ((2, 0), (2, 3), (2.0, 1)):
        with pytest.raises(ValueError):
            X.limit_constant_c(d, j)
    rows = X.constants_table(3)
    assert [r["j"] for r in rows] == [1, 2, 3] and rows[-1]["c"] == rows[-1]["c_tilde"]


def test_expectation_rhs_disc():
    K = parse_body("disc:1")
    w = make_weight("uniform", K)
    expected = X.limit_constant_c(2, 2) * math.pi ** (2 / 3) / math.pi * 2 * math.pi
    assert X.expectation_limit_rhs(K, w, w) == pytest.approx(expected, rel=1e-10)


def test_dual_expectation_rhs_disc():
    expected = X.limit_constant_c_tilde(2, 1) * math.pi ** (2 / 3) * 2
    rhs = X.dual_expectation_limit_rhs(parse_body("disc:1"), 1)
    # the dual-power boundary density on the unit circle is (1/pi) |x|^{-1} Vol^{2/3}
    assert rhs * math.pi ** (2 / 3) / math.pi == pytest.approx(expected, rel=1e-10)
    print(f"dual RHS on the unit disc (uniform phi, c~ weight): {expected:.8f}")


def test_spherical_limit_extrapolation():
    cfg = X.ExperimentConfig.reference("spherical", tuple(2 ** k for k in range(9, 14)), 200, seed=5)
    _, summary = X.run_experiment(cfg)
    print(f"spherical disc(0.8): RHS {summary.limit_rhs:.4f}, extrapolated {summary.limit_empirical:.4f}, "
          f"at n = 8192 {summary.extra['limit_at_max_n']:.4f}")
    assert summary.limit_empirical == pytest.approx(summary.limit_rhs, rel=0.07)


# -- dual volumes -----------------------------------------------------------------------------------------


def test_dual_volume_of_fine_disc_polygon():
    assert X.dual_volume(disc_polygon(8192), 1) == pytest.approx(math.pi, abs=1e-4)
    assert X.dual_volume_of_body(parse_body("disc:1"), 1) == pytest.approx(math.pi, rel=1e-8)
    assert X.dual_prefactor(2, 1) == pytest.approx(0.5)


def test_dual_volume_top_index_is_volume(rng):
    P = random_polygon(rng)
    assert X.dual_volume(P, 2) == P.volume
    Q = convex_hull(rng.normal(size=(40, 3)))
    assert X.dual_volume(Q, 3) == Q.volume


def test_dual_volume_needs_origin():
    with pytest.raises(ValueError):
        X.dual_volume(Polytope(2, disc_polygon(64).vertices + 2.0), 1)
    with pytest.raises(ValueError):
        X.dual_volume_section_oracle(Polytope(2, disc_polygon(64).vertices + 2.0), 1, np.random.default_rng(0))


def test_dual_volume_3d_by_quadrature(rng):
    # V~_1 of a centred cube [-1, 1]^3: binom(2, 0) / Vol(B^2) * int |x|^{-2}
    cube = convex_hull(np.array([[a, b, c] for a in (-1, 1) for b in (-1, 1) for c in (-1, 1)], dtype=float))
    raw = 48 * integrate.tplquad(lambda z, y, x: 1.0 / (x * x + y * y + z * z),
                                 0, 1, 0, lambda x: x, 0, lambda x, y: y, epsabs=1e-11)[0]
    assert X.dual_volume(cube, 1) == pytest.approx(raw / math.pi, rel=1e-6)


def test_section_oracle_disc_is_exact():
    est = X.dual_volume_section_oracle(disc_polygon(8192), 1, np.random.default_rng(0), 500)
    assert est.value == pytest.approx(math.pi, abs=1e-6)
    assert est.se < 1e-6


def test_section_oracle_square():
    sq = Polytope(2, [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
    # mean chord through the centre over a uniform direction, by symmetry on [0, pi/4]
    mean_chord = 4 / math.pi * integrate.quad(lambda t: 2 / math.cos(t), 0, math.pi / 4)[0]
    exact = math.pi / 2 * mean_chord
    est = X.dual_volume_section_oracle(sq, 1, np.random.default_rng(1), 20000)
    assert abs(est.value - exact) <= 3 * est.se
    assert X.dual_volume(sq, 1) == pytest.approx(exact, rel=1e-10)


def test_section_oracle_matches_radial_formula():
    rng = np.random.default_rng(2)
    z = []
    for _ in range(20):
        P = random_polygon(rng)
        est = X.dual_volume_section_oracle(P, 1, rng, 4000)
        z.append((est.value - X.dual_volume(P, 1)) / est.se)
    print(f"section oracle z-scores: max |z| = {np.max(np.abs(z)):.2f}")
    assert np.all(np.abs(z) <= 3)


def test_polygon_radial_function_square():
    sq = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]
    th = np.array([0.0, math.pi / 4, math.pi / 3])
    assert np.allclose(X.polygon_radial_function(sq, th), [1.0, math.sqrt(2), 1 / math.cos(math.pi / 6)])
    assert ball_volume(2) == pytest.approx(math.pi)
