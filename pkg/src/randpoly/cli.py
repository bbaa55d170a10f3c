"""Command line entry point: ``randpoly <subcommand> [options]``.

Subcommands
-----------
simulate        replicated experiment from an INI config (records CSV + summary JSON)
floating        floating-body sweep over delta (CSV)
diagnose-stein  moment estimates and the assembled normal-approximation bound (CSV)
constants       limit constants and ball binomials (text + JSON)
verify          acceptance suite with a pass/fail matrix

Exit codes: 0 success, 1 failed checks, 2 usage or configuration error,
3 nondeterminism detected by ``--repeat-check``, 4 sampling budget exhausted.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import secrets
import sys

import numpy as np

from . import experiments as X
from .weights import SamplingBudgetError

log = logging.getLogger("randpoly")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NONDETERMINISM, EXIT_BUDGET = 0, 1, 2, 3, 4


def _ints(text: str) -> list:
    return [int(t) for t in text.replace(",", " ").split()]


def _floats(text: str) -> list:
    return [float(t) for t in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randpoly", description="Weighted random polytope laboratory.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_required=False):
        sp.add_argument("--seed", type=int, required=seed_required, help="master seed")
        sp.add_argument("--workers", type=int, default=X.default_workers(), help="worker processes")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--repeat-check", action="store_true", help="run stochastic stages twice and compare hashes")

    s = sub.add_parser("simulate", help="run a replicated experiment")
    common(s)
    s.add_argument("--config", help="INI file with an [experiment] section")
    s.add_argument("--geometry", choices=sorted(X.GEOMETRIES))
    s.add_argument("--n", type=_ints, help="comma separated sample sizes")
    s.add_argument("--replications", type=int)

    f = sub.add_parser("floating", help="floating-body sweep over delta")
    common(f)
    f.add_argument("--body", default="disc:1")
    f.add_argument("--weight", default="uniform")
    f.add_argument("--deltas", type=_floats, default=[1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1])
    f.add_argument("--directions", type=int, default=720)

    d = sub.add_parser("diagnose-stein", help="moment estimates and the normal-approximation bound")
    common(d)
    d.add_argument("--body", default="disc:1")
    d.add_argument("--phi", default="uniform")
    d.add_argument("--psi", default="uniform")
    d.add_argument("--n", type=_ints, default=[128, 256, 512, 1024, 2048])
    d.add_argument("--replications", type=int, default=400)
    d.add_argument("--recombination-replications", type=int, default=16)
    d.add_argument("--patterns", type=int, default=16)

    c = sub.add_parser("constants", help="limit constants table")
    c.add_argument("--d", type=int, default=2)
    c.add_argument("--out", default=None, help="directory for constants.json")

    v = sub.add_parser("verify", help="run the acceptance suite")
    common(v, seed_required=True)
    v.add_argument("--quick", action="store_true", help="skip the long CLT and Stein criteria")
    v.add_argument("--only", type=_ints, help="criterion numbers to run")
    return p


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = secrets.randbits(32)
    log.warning("no --seed given; using %d", seed)
    print(f"seed: {seed}", file=sys.stderr)
    return seed


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _write(path: str, text: str):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_simulate(args) -> int:
    overrides = {"geometry": args.geometry, "n": ",".join(map(str, args.n)) if args.n else None,
                 "replications": args.replications}
    if args.config:
        cfg = X.ExperimentConfig.from_ini(args.config, overrides)
    else:
        if not args.geometry or not args.n:
            raise X.ConfigError("geometry, n: required without --config")
        cfg = X.ExperimentConfig.from_mapping({k: v for k, v in overrides.items() if v is not None})
    # an explicit --seed wins; a config file supplies its own seed; otherwise draw one
    if args.seed is not None or not args.config:
        cfg = X.with_overrides(cfg, seed=_seed(args))
    records, summary = X.run_experiment(cfg, args.workers)
    text = X.records_csv(records)
    if args.repeat_check:
        again, _ = X.run_replications(cfg, args.workers)
        if _digest(X.records_csv(again)) != _digest(text):
            print("nondeterminism: records hash mismatch between repeated runs", file=sys.stderr)
            return EXIT_NONDETERMINISM
    rec_path = cfg.records or os.path.join(args.out, "records.csv")
    sum_path = cfg.summary or os.path.join(args.out, "summary.json")
    _write(rec_path, text)
    _write(sum_path, X.summary_json(summary))
    print(f"records: {rec_path} ({len(records)} rows, sha256 {_digest(text)[:16]})")
    print(f"summary: {sum_path}")
    g = summary.to_json()["global"]
    print(f"deficit slope {g['deficit_slope']:.4f}  variance slope {g['variance_slope']:.4f}")
    return EXIT_OK


def cmd_floating(args) -> int:
    from . import floating as FL
    from .geometry import parse_body
    from .weights import make_weight

    K = parse_body(args.body)
    w = make_weight(args.weight, K)
    rows = []
    for delta in args.deltas:
        fb = FL.floating_body(K, w, delta, args.directions)
        fine = FL.floating_body(K, w, delta, 2 * args.directions)
        rows.append({"delta": delta, "area": fb.area, "wet_part": K.volume - fb.area,
                     "refinement_change": fb.area - fine.area,
                     "sandwich_c": FL.sandwich_constant(K, w, delta, args.directions) if not fb.empty else "",
                     "empty": int(fb.empty)})
    path = os.path.join(args.out, "floating.csv")
    _write(path, _rows_csv(rows))
    print(f"floating: {path} ({len(rows)} rows)")
    return EXIT_OK


def cmd_diagnose_stein(args) -> int:
    from . import stein
    from .geometry import parse_body
    from .weights import make_weight

    K = parse_body(args.body)
    phi, psi = make_weight(args.phi, K), make_weight(args.psi, K)
    seed = _seed(args)

    def run():
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        return stein.bound_curve(K, phi, psi, args.n, args.replications, args.recombination_replications, rng,
                                 S=args.patterns)

    bc = run()
    text = _rows_csv(bc.rows())
    if args.repeat_check and _digest(_rows_csv(run().rows())) != _digest(text):
        print("nondeterminism: Stein diagnostics differ between repeated runs", file=sys.stderr)
        return EXIT_NONDETERMINISM
    path = os.path.join(args.out, "stein.csv")
    _write(path, text)
    print(f"stein: {path}; bound decreasing: {bc.decreasing}; bound slope {bc.slope():.3f}")
    return EXIT_OK


def _cell(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _rows_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=["schema_version", *rows[0]], lineterminator="\n")
    wr.writeheader()
    for r in rows:
        wr.writerow({"schema_version": X.SCHEMA_VERSION, **{k: _cell(v) for k, v in r.items()}})
    return buf.getvalue()


def cmd_constants(args) -> int:
    from .geometry import ball_volume

    rows = X.constants_table(args.d)
    print(f"d = {args.d}   ball_volume({args.d}) = {ball_volume(args.d)!r}")
    print(f"{'j':>3} {'c(d,j)':>22} {'c~(d,j)':>22} {'ball_binomial':>22}")
    for r in rows:
        print(f"{r['j']:>3} {r['c']:>22.16g} {r['c_tilde']:>22.16g} {r['ball_binomial']:>22.16g}")
    same = rows[-1]["c"] == rows[-1]["c_tilde"]
    print(f"c(d,d) == c~(d,d): {same}")
    if args.out:
        payload = {"schema_version": X.SCHEMA_VERSION, "d": args.d, "ball_volume": ball_volume(args.d), "rows": rows}
        _write(os.path.join(args.out, "constants.json"), json.dumps(payload, indent=2))
    return EXIT_OK if same else EXIT_FAIL


def _results_digest(results) -> str:
    # wall-clock checks are excluded; every other value is a function of the seed
    items = [(r.number, c.name, repr(c.value)) for r in results for c in r.checks if not c.name.startswith("runtime")]
    return _digest(repr(items))


def cmd_verify(args) -> int:
    from . import acceptance

    results = acceptance.run_suite(quick=args.quick, seed=args.seed, workers=args.workers, only=args.only)
    if args.repeat_check:
        acceptance.clear_caches()
        again = acceptance.run_suite(quick=args.quick, seed=args.seed, workers=args.workers, only=args.only,
                                     echo=None)
        if _results_digest(again) != _results_digest(results):
            print("nondeterminism: acceptance values differ between repeated runs", file=sys.stderr)
            return EXIT_NONDETERMINISM
    print()
    print("pass/fail matrix")
    for r in results:
        print(r.line())
    os.makedirs(args.out, exist_ok=True)
    payload = {"schema_version": X.SCHEMA_VERSION, "seed": args.seed,
               "criteria": [{"number": r.number, "title": r.title, "passed": r.passed, "seconds": r.seconds,
                             "checks": [{"name": c.name, "value": c.value if isinstance(c.value, (int, float, bool, str))
                                         else str(c.value), "target": c.target, "ok": c.ok} for c in r.checks]}
                            for r in results]}
    _write(os.path.join(args.out, "verify.json"), json.dumps(payload, indent=2, default=str))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "floating": cmd_floating, "diagnose-stein": cmd_diagnose_stein,
            "constants": cmd_constants, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except X.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (X.ExperimentError, SamplingBudgetError) as exc:
        print(f"budget exhausted in stage {args.command}: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
