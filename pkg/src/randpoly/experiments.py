"""Replicated random-polytope experiments, rate fits, limit constants and dual volumes.

Every replication draws ``n`` points from the sampling weight ``phi`` on the
body ``K``, takes their convex hull and records the measured weighted volume
``Psi`` under ``psi``.  Non-Euclidean geometries enter through their planar
pushforward densities, so a spherical or hyperbolic random polygon is
simulated as a weighted Euclidean one.

Seeds are a 128-bit hash of (master seed, geometry, n, replication), so
records do not depend on how replications are scheduled over workers.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import special

from . import hull
from .geometry import SmoothBody, ball_volume, boundary_integral, parse_body
from .stein import normality_summary, standardize
from .weights import SamplingBudgetError, WeightFunction, _profile, make_weight, radial_polygon_integral
from .weights import radial_tetra_integral, weighted_volume

SCHEMA_VERSION = 1

#: Reference body and weights (sampling, measuring) per geometry.
GEOMETRIES = {
    "euclidean": ("disc:1", "uniform", "uniform"),
    "spherical": ("disc:0.8", "spherical", "spherical"),
    "hyperbolic": ("disc:0.9", "hyperbolic", "hyperbolic"),
    "hilbert-bu": ("disc:0.5", "hilbert-bu:fourier:1:0.08:3", "hilbert-bu:fourier:1:0.08:3"),
    "hilbert-ht": ("disc:0.5", "hilbert-ht:fourier:1:0.08:3", "hilbert-ht:fourier:1:0.08:3"),
    "dual": ("ellipse:1.5:1", "uniform", "dual:1"),
}

RECORD_COLUMNS = ("geometry", "body", "weight_phi", "weight_psi", "n", "rep", "seed", "psi_value", "hull_vertices")


class ConfigError(ValueError):
    """Malformed experiment configuration; the message names the offending key."""


class ExperimentError(RuntimeError):
    """A replication failed; the message names ``(n, rep, seed)``."""


# -- configuration -----------------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: str
    body: str
    weight_phi: str
    weight_psi: str
    ns: tuple
    replications: int
    seed: int = 0
    hilbert_directions: int | None = None
    records: str | None = None
    summary: str | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ConfigError(f"geometry: unknown value {self.geometry!r}")
        ns = tuple(int(n) for n in self.ns)
        object.__setattr__(self, "ns", ns)
        if not ns or any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigError("n: grid must be nonempty and strictly increasing")
        if min(ns) < 4:
            raise ConfigError("n: every sample size must be at least 4")
        if self.replications < 8:
            raise ConfigError("replications: need at least 8")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {self.schema_version}")
        K = parse_body(self.body)
        if self.geometry == "dual":
            head, _, j = self.weight_psi.partition(":")
            if head != "dual" or not 1 <= int(j) <= K.dimension:
                raise ConfigError("weight_psi: dual geometry needs dual:<j> with 1 <= j <= d")
            if not np.all(K.contains(np.zeros((1, K.dimension)), -1e-12)):
                raise ConfigError("body: dual geometry needs the origin in the interior")

    @classmethod
    def reference(cls, geometry: str, ns, replications: int, seed: int = 0, **kw) -> "ExperimentConfig":
        body, phi, psi = GEOMETRIES[geometry]
        return cls(geometry, body, phi, psi, tuple(ns), replications, seed, **kw)

    @property
    def phi_id(self) -> str:
        return self._with_directions(self.weight_phi)

    @property
    def psi_id(self) -> str:
        return self._with_directions(self.weight_psi)

    def _with_directions(self, w: str) -> str:
        if self.hilbert_directions and w.startswith("hilbert") and "#M=" not in w:
            return f"{w}#M={self.hilbert_directions}"
        return w

    def weights(self) -> tuple:
        K = parse_body(self.body)
        return K, make_weight(self.phi_id, K), make_weight(self.psi_id, K)

    # INI files: one [experiment] section, keys mirror the fields

    _KEYS = {"schema_version", "geometry", "body", "weight_phi", "weight_psi", "n", "replications", "seed",
             "hilbert_directions", "records", "summary"}

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        unknown = sorted(set(values) - cls._KEYS)
        if unknown:
            raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
        if "geometry" not in values:
            raise ConfigError("geometry: missing")
        geometry = str(values["geometry"]).strip()
        if geometry not in GEOMETRIES:
            raise ConfigError(f"geometry: unknown value {geometry!r}")
        body, phi, psi = GEOMETRIES[geometry]

        def num(key, conv, default):
            if key not in values or values[key] in (None, ""):
                return default
            try:
                return conv(values[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: malformed value {values[key]!r}") from exc

        ns = values.get("n")
        if ns is None:
            raise ConfigError("n: missing")
        if isinstance(ns, str):
            try:
                ns = tuple(int(t) for t in ns.replace(",", " ").split())
            except ValueError as exc:
                raise ConfigError(f"n: malformed value {values['n']!r}") from exc
        return cls(
            geometry=geometry,
            body=str(values.get("body") or body).strip(),
            weight_phi=str(values.get("weight_phi") or phi).strip(),
            weight_psi=str(values.get("weight_psi") or psi).strip(),
            ns=tuple(ns),
            replications=num("replications", int, 400),
            seed=num("seed", int, 0),
            hilbert_directions=num("hilbert_directions", int, None),
            records=values.get("records") or None,
            summary=values.get("summary") or None,
            schema_version=num("schema_version", int, SCHEMA_VERSION),
        )

    @classmethod
    def from_ini(cls, path: str, overrides: dict | None = None) -> "ExperimentConfig":
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        extra = sorted(set(parser.sections()) - {"experiment"})
        if extra or not parser.has_section("experiment"):
            raise ConfigError(f"sections: expected only [experiment], found {parser.sections()}")
        values = dict(parser["experiment"])
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_mapping(values)

    def to_ini(self) -> str:
        parser = configparser.ConfigParser()
        d = {"schema_version": self.schema_version, "geometry": self.geometry, "body": self.body,
             "weight_phi": self.weight_phi, "weight_psi": self.weight_psi,
             "n": ", ".join(map(str, self.ns)), "replications": self.replications, "seed": self.seed}
        for key in ("hilbert_directions", "records", "summary"):
            if getattr(self, key) is not None:
                d[key] = getattr(self, key)
        parser["experiment"] = {k: str(v) for k, v in d.items()}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


def replication_seed(master: int, geometry: str, n: int, rep: int) -> int:
    """128-bit seed from a keyed hash of the replication coordinates."""
    key = f"{int(master)}|{geometry}|{int(n)}|{int(rep)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=16).digest(), "little")


# -- replications ---------------------------------------------------------------------------------------


@dataclass(frozen=True)
class ReplicationRecord:
    geometry: str
    body: str
    weight_phi: str
    weight_psi: str
    n: int
    rep: int
    seed: int
    psi_value: float
    hull_vertices: int
    dual_volume: float | None = None

    def row(self) -> list:
        return [self.geometry, self.body, self.weight_phi, self.weight_psi, str(self.n), str(self.rep),
                str(self.seed), repr(float(self.psi_value)), str(self.hull_vertices),
                "" if self.dual_volume is None else repr(float(self.dual_volume))]


def _replicate(task) -> ReplicationRecord | None:
    cfg, n, rep = task
    K, phi, psi = cfg.weights()
    seed = replication_seed(cfg.seed, cfg.geometry, n, rep)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    try:
        pts = phi.sample(rng, n)
    except SamplingBudgetError as exc:
        raise ExperimentError(f"sampling budget exhausted at n={n}, rep={rep}, seed={seed}: {exc}") from exc
    P = hull.convex_hull(pts)
    if P.degenerate:
        return None
    value = weighted_volume(P, psi)
    dv = None
    if cfg.geometry == "dual":
        dv = value * dual_volume_of_body(K, psi.j)
    return ReplicationRecord(cfg.geometry, cfg.body, cfg.weight_phi, cfg.weight_psi, n, rep, seed, value,
                             len(P), dv)


def _replicate_chunk(tasks):
    return [_replicate(t) for t in tasks]


def default_workers() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:
        return max(1, os.cpu_count() or 1)


def run_replications(config: ExperimentConfig, workers: int = 1, chunk: int = 64) -> tuple[list, int]:
    """All records in ``(n, rep)`` order and the number of discarded (degenerate) hulls."""
    tasks = [(config, n, r) for n in config.ns for r in range(config.replications)]
    chunks = [tasks[i:i + chunk] for i in range(0, len(tasks), chunk)]
    if workers <= 1:
        results = [_replicate_chunk(c) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_chunk, chunks))
    records = [r for part in results for r in part]
    kept = [r for r in records if r is not None]
    return kept, len(records) - len(kept)


# -- summaries ----------------------------------------------------------------------------------------------


@dataclass
class ExperimentSummary:
    config: ExperimentConfig
    per_n: dict
    deficit_slope: float
    variance_slope: float
    limit_rhs: float | None
    limit_empirical: float | None
    discarded: int = 0
    extra: dict = field(default_factory=dict)

    def flagged(self) -> list:
        """Sample sizes with nonpositive variance."""
        return [n for n, s in self.per_n.items() if not s["var"] > 0]

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.config).items()},
            "per_n": {str(n): s for n, s in self.per_n.items()},
            "global": {"deficit_slope": self.deficit_slope, "variance_slope": self.variance_slope,
                       "limit_rhs": self.limit_rhs, "limit_empirical": self.limit_empirical,
                       "discarded": self.discarded, **self.extra},
        }


def fit_rate(ns, ys) -> tuple[float, float, float]:
    """Least squares on ``(ln n, ln y)``: slope, intercept and residual norm."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.asarray(ys, dtype=float)
    if np.any(~(y > 0)):
        raise ValueError("fit_rate needs positive values")
    y = np.log(y)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.linalg.norm(A @ coef - y))
    return float(coef[0]), float(coef[1]), res


def extrapolate_limit(ns, deficits, se=None, d: int = 2) -> float:
    """Limit of ``n^{2/(d+1)} (1 - E Psi)`` from a fit ``L + a n^{-1/(d+1)}``.

    The scaled deficit approaches its limit with a first-order correction in
    ``n^{-1/(d+1)}``; the fit is weighted by the standard errors when given.
    """
    ns = np.asarray(ns, dtype=float)
    y = ns ** (2 / (d + 1)) * np.asarray(deficits, dtype=float)
    A = np.stack([np.ones_like(ns), ns ** (-1 / (d + 1))], axis=1)
    if se is not None:
        wts = 1.0 / (ns ** (2 / (d + 1)) * np.asarray(se, dtype=float))
        A, y = A * wts[:, None], y * wts
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


def summarize(config: ExperimentConfig, records, discarded: int = 0) -> ExperimentSummary:
    per_n = {}
    means, variances, ses = [], [], []
    for n in config.ns:
        v = np.array([r.psi_value for r in records if r.n == n])
        mean, var = float(v.mean()), float(v.var(ddof=1))
        stats_ = {"mean": mean, "var": var, "replications": len(v),
                  "hull_vertices": float(np.mean([r.hull_vertices for r in records if r.n == n]))}
        if len(v) >= 8 and var > 0:
            ns_ = normality_summary(standardize(v))
            stats_.update(ks=ns_.ks, skew=ns_.skewness, kurt=ns_.excess_kurtosis, w1=ns_.w1)
        per_n[n] = stats_
        means.append(mean)
        variances.append(var)
        ses.append(math.sqrt(var / len(v)))
    deficits = 1.0 - np.array(means)
    d_slope = fit_rate(config.ns, deficits)[0] if np.all(deficits > 0) else math.nan
    v_slope = fit_rate(config.ns, variances)[0] if np.all(np.array(variances) > 0) else math.nan
    K, phi, psi = config.weights()
    rhs = emp = None
    extra = {}
    if K.dimension == 2:
        rhs = expectation_limit_rhs(K, phi, psi)
        if len(config.ns) >= 2:
            emp = extrapolate_limit(config.ns, deficits, ses)
        extra["limit_at_max_n"] = float(config.ns[-1] ** (2 / 3) * deficits[-1])
    if config.geometry == "dual":
        vj = dual_volume_of_body(K, psi.j)
        extra["dual_volume_body"] = vj
        extra["dual_volume_variance_slope"] = fit_rate(config.ns, np.array(variances) * vj * vj)[0]
    return ExperimentSummary(config, per_n, d_slope, v_slope, rhs, emp, discarded, extra)


def run_experiment(config: ExperimentConfig, workers: int = 1) -> tuple[list, ExperimentSummary]:
    """Run every replication and summarise (records are in ``(n, rep)`` order)."""
    records, discarded = run_replications(config, workers)
    return records, summarize(config, records, discarded)


# -- output ---------------------------------------------------------------------------------------------------


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((*RECORD_COLUMNS, "dual_volume", "schema_version"))
    for r in records:
        w.writerow((*r.row(), SCHEMA_VERSION))
    return buf.getvalue()


def read_records_csv(text: str) -> list:
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        if int(row.get("schema_version", SCHEMA_VERSION)) != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {row['schema_version']}")
        out.append(ReplicationRecord(row["geometry"], row["body"], row["weight_phi"], row["weight_psi"],
                                     int(row["n"]), int(row["rep"]), int(row["seed"]), float(row["psi_value"]),
                                     int(row["hull_vertices"]),
                                     float(row["dual_volume"]) if row.get("dual_volume") else None))
    return out


def summary_json(summary: ExperimentSummary) -> str:
    return json.dumps(summary.to_json(), indent=2, sort_keys=True, default=float)


# -- limit constants ---------------------------------------------------------------------------------------------


def _check_dj(d: int, j: int):
    if not (isinstance(d, (int, np.integer)) and isinstance(j, (int, np.integer)) and 1 <= j <= d):
        raise ValueError(f"need integers 1 <= j <= d, got d={d}, j={j}")


def limit_constant_c(d: int, j: int) -> float:
    """Constant of the expected intrinsic-volume deficit of uniform random polytopes."""
    _check_dj(d, j)
    return (1.0 / (2.0 * ball_volume(d - j)) * math.comb(d - 1, j - 1) * (d + 1) / (d + 3)
            / math.factorial(j) * special.gamma(j + (d + 3) / (d + 1))
            * ((d + 1) / ball_volume(d - 1)) ** (2 / (d + 1)))


def limit_constant_c_tilde(d: int, j: int) -> float:
    """Constant of the expected dual-volume deficit of uniform random polytopes."""
    _check_dj(d, j)
    return (1.0 / (2.0 * ball_volume(d - j)) * math.comb(d - 1, j - 1) * (d + 1) / (d + 3)
            / math.factorial(d) * special.gamma(d + (d + 3) / (d + 1))
            * ((d + 1) / ball_volume(d - 1)) ** (2 / (d + 1)))


def _boundary_density(w: WeightFunction, x: np.ndarray) -> np.ndarray:
    return np.asarray(w.raw(x), dtype=float) / w.normalization


def expectation_limit_rhs(K: SmoothBody, phi: WeightFunction, psi: WeightFunction) -> float:
    """``lim n^{2/(d+1)} (1 - E Psi(K_phi(n)))`` for planar ``K``.

    ``c(d, d) int_{bd K} phi^{-2/(d+1)} H^{1/(d+1)} psi`` with probability
    densities ``phi`` and ``psi`` (``H`` is the curvature).
    """
    d = K.dimension
    if d != 2:
        raise ValueError("boundary integration is planar")

    def integrand(x, kappa):
        return _boundary_density(phi, x) ** (-2 / (d + 1)) * kappa ** (1 / (d + 1)) * _boundary_density(psi, x)

    return limit_constant_c(d, d) * boundary_integral(K, integrand)


def dual_expectation_limit_rhs(K: SmoothBody, j: int) -> float:
    """``lim (n / Vol K)^{2/(d+1)} (V~_j(K) - E V~_j(K(n)))`` for uniform points, planar ``K``.

    ``c~(d, j) int_{bd K} H^{1/(d+1)} |x|^{j-d}``.
    """
    d = K.dimension
    return limit_constant_c_tilde(d, j) * boundary_integral(
        K, lambda x, kappa: kappa ** (1 / (d + 1)) * np.linalg.norm(x, axis=1) ** (j - d))


# -- dual volumes --------------------------------------------------------------------------------------------------


def dual_prefactor(d: int, j: int) -> float:
    return math.comb(d - 1, j - 1) / ball_volume(d - j)


def dual_volume(P: hull.Polytope, j: int) -> float:
    """``V~_j(P) = binom(d-1, j-1) / Vol(B^{d-j}) int_P |x|^{j-d} dx`` (``o`` in ``P``)."""
    d = P.dimension
    _check_dj(d, j)
    if P.degenerate or P.is_empty or not bool(P.contains(np.zeros((1, d)), 0.0)[0]):
        raise ValueError("dual volume needs the origin in the polytope")
    if j == d:
        return P.volume
    primitive = _profile("dual_power", d, j)[1]
    if d == 2:
        raw = radial_polygon_integral(P.vertices, "dual_power", j, primitive)
    else:
        raw = radial_tetra_integral(P.vertices, P.facets, primitive)
    return dual_prefactor(d, j) * raw


def dual_volume_of_body(K: SmoothBody, j: int) -> float:
    """``V~_j(K)`` from the normalisation of the dual-power weight."""
    d = K.dimension
    if j == d:
        return K.volume
    return dual_prefactor(d, j) * make_weight(f"dual:{j}", K).normalization


def polygon_radial_function(vertices, theta) -> np.ndarray:
    """Radial function of a convex polygon containing ``o`` in the interior."""
    v = np.asarray(vertices, dtype=float)
    e = np.roll(v, -1, axis=0) - v
    nrm = np.stack([e[:, 1], -e[:, 0]], axis=1)
    off = np.einsum("ij,ij->i", nrm, v)
    u = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    proj = u @ nrm.T
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(proj > 0, off[None, :] / proj, np.inf)
    return r.min(axis=1)


@dataclass(frozen=True)
class SectionEstimate:
    value: float
    se: float


def dual_volume_section_oracle(P: hull.Polytope, j: int, rng: np.random.Generator, R: int = 4000) -> SectionEstimate:
    """``V~_1(P) = ball_binomial(2, 1) E Vol(P ∩ E)`` with uniformly random lines ``E`` through ``o``."""
    from .geometry import ball_binomial

    if P.dimension != 2 or j != 1:
        raise ValueError("section oracle is implemented for d = 2, j = 1")
    if not bool(P.contains(np.zeros((1, 2)), 0.0)[0]):
        raise ValueError("section oracle needs the origin in the polygon")
    theta = rng.uniform(0.0, math.pi, R)
    chords = polygon_radial_function(P.vertices, theta) + polygon_radial_function(P.vertices, theta + math.pi)
    k = ball_binomial(2, 1)
    return SectionEstimate(float(k * chords.mean()), float(k * chords.std(ddof=1) / math.sqrt(R)))


# -- grids and tables -------------------------------------------------------------------------------------------------


def constants_table(d: int) -> list:
    """Rows ``(j, c(d, j), c~(d, j), ball_binomial(d, j), Vol B^j)`` for ``j = 1..d``."""
    from .geometry import ball_binomial

    return [{"d": d, "j": j, "c": limit_constant_c(d, j), "c_tilde": limit_constant_c_tilde(d, j),
             "ball_binomial": ball_binomial(d, j), "ball_volume": ball_volume(j)} for j in range(1, d + 1)]


def clt_matrix(n: int = 4096, R: int = 2000, seed: int = 0, workers: int = 1, geometries=None) -> dict:
    """Normality diagnostics of the standardised ``Psi`` samples per geometry."""
    out = {}
    for g in geometries or GEOMETRIES:
        cfg = ExperimentConfig.reference(g, (n,), R, seed)
        records, _ = run_replications(cfg, workers)
        s = normality_summary(standardize([r.psi_value for r in records]))
        out[g] = s
    return out


def with_overrides(config: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
