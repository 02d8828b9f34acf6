"""Command line interface: ``starrobust <subcommand> ...``.

Configurations are single JSON documents (the fields of
:class:`~starrobust.harness.RobustConfig`). Data files are CSV with a header
``x1,...,xn`` and one observation per row.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from dataclasses import replace

import numpy as np

from .bounds import rate_envelope
from .entropy import entropy_profile
from .geometry import make_set
from .harness import RobustConfig, envelope_and_lower, resolved_constants, run_trials, sweep, sweep_csv
from .tournament import default_pitch, run_estimator
from .tree import build_tree, verify_tree
from .unbounded import run_unbounded_estimator


def _load_json(arg: str) -> dict:
    """A JSON document given inline or as a file path."""
    text = arg.strip()
    if not text.startswith("{"):
        with open(arg) as fh:
            text = fh.read()
    return json.loads(text)


def read_data_csv(path: str) -> np.ndarray:
    """Rows of a CSV whose header is ``x1,...,xn``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError("empty data file")
    header = [h.strip() for h in rows[0]]
    expected = [f"x{i + 1}" for i in range(len(header))]
    if header != expected:
        raise ValueError(f"data header must be {','.join(expected)}")
    return np.array([[float(v) for v in r] for r in rows[1:] if r], float).reshape(-1, len(header))


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_estimate(args) -> int:
    doc = _load_json(args.config)
    mode = doc.pop("mode", "auto")
    cfg = RobustConfig.from_dict(doc)
    K = cfg.make_set()
    X = read_data_csv(args.data)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    unbounded = mode == "unbounded" or (mode == "auto" and not K.bounded)
    if unbounded:
        out, state, loc = run_unbounded_estimator(X, K, cfg.estimator_config(), rng=rng, gamma=cfg.gamma)
        extra = {"S_nonempty": loc.S_nonempty, "R": loc.R, "hat_R": loc.hat_R}
    else:
        out, state = run_estimator(X, K, cfg.estimator_config(), rng=rng)
        extra = {}
    result = {"estimate": out.tolist(), "trace": state.to_dict(), "localization": extra,
              "constants": resolved_constants(cfg)}
    _emit(json.dumps(result, indent=2, sort_keys=True, default=float) + "\n", args.out)
    return 0


def cmd_simulate(args) -> int:
    cfg = RobustConfig.from_dict(_load_json(args.config))
    if args.csv:
        cfg = replace(cfg, out_csv=args.csv)
    if args.json:
        cfg = replace(cfg, out_json=args.json)
    report = run_trials(cfg)
    summary = {"risk": report.risk, "stderr": report.stderr, "median": report.median,
               "envelope": report.envelope, "lower_bounds": report.lower_bounds}
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


def _parse_values(text: str) -> list:
    out = []
    for tok in text.split(","):
        v = float(tok)
        out.append(int(v) if v.is_integer() and "." not in tok else v)
    return out


def cmd_sweep(args) -> int:
    cfg = RobustConfig.from_dict(_load_json(args.config))
    values = _parse_values(args.values)
    reports = sweep(cfg, args.axis, values)
    _emit(sweep_csv(values, reports), args.csv)
    return 0


def cmd_entropy(args) -> int:
    K = make_set(_load_json(args.set))
    if args.etas:
        etas = [float(v) for v in args.etas.split(",")]
    else:
        etas = np.geomspace(args.eta_max, args.eta_min, args.num)
    region = None
    if not K.bounded:
        if args.region_radius is None:
            raise SystemExit("unbounded sets need --region-radius")
        region = (K.center, args.region_radius)
    prof = entropy_profile(K, etas, args.c, region=region)
    lines = ["eta,log_Mloc,rate_lhs"]
    for eta, ent in zip(prof.etas, prof.log_Mloc):
        lines.append(f"{float(eta)!r},{float(ent)!r},{float(args.N * eta * eta / args.sigma ** 2)!r}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_tree_verify(args) -> int:
    K = make_set(_load_json(args.set))
    if not K.bounded:
        raise SystemExit("tree-verify needs a bounded set")
    pitch = args.pitch if args.pitch is not None else default_pitch(K.diameter, args.depth, args.c)
    tree = build_tree(K, K.center, args.depth, args.c, pitch)
    report = verify_tree(tree, K)
    out = {"ok": report.ok, "counts": report.counts(), "level_sizes": tree.level_sizes(), "pitch": pitch,
           "violations": [v.__dict__ for v in report.violations[:20]]}
    sys.stdout.write(json.dumps(out, indent=2, sort_keys=True, default=float) + "\n")
    if args.dump:
        with open(args.dump, "w") as fh:
            fh.write(tree.to_json())
    return 0 if report.ok else 1


def cmd_bounds(args) -> int:
    cfg = RobustConfig.from_dict(_load_json(args.config))
    K = cfg.make_set()
    mu = K.center if cfg.mu is None or isinstance(cfg.mu, str) else np.asarray(cfg.mu, float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        es, env, lower = envelope_and_lower(cfg, K, mu)
    out = {"eta_star": es, "envelope": env, "lower_bounds": lower, "note": "lower bounds up to absolute constants"}
    if args.constants:
        out["constants"] = resolved_constants(cfg)
    if args.format == "csv":
        d = K.diameter if K.bounded else None
        e = rate_envelope(cfg.variant, es, cfg.sigma, cfg.epsilon, d)
        text = "eta_star_sq,corruption_term,envelope,fano_lower,corruption_lower\n"
        text += f"{e.eta_star_sq!r},{e.corruption_term!r},{e.rate!r},{lower['fano']!r},{lower['corruption']!r}\n"
        sys.stdout.write(text)
    else:
        sys.stdout.write(json.dumps(out, indent=2, sort_keys=True, default=float) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="starrobust", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("estimate", help="run the estimator on a data file")
    s.add_argument("--config", required=True, help="JSON config (inline or path); optional key mode=bounded|unbounded")
    s.add_argument("--data", required=True, help="CSV with header x1,...,xn")
    s.add_argument("--out", help="write the JSON result here instead of stdout")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="Monte Carlo risk for one configuration")
    s.add_argument("--config", required=True)
    s.add_argument("--csv", help="per-trial CSV output")
    s.add_argument("--json", help="metadata JSON output")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="Monte Carlo risk along one parameter")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", required=True, choices=["epsilon", "N", "sigma", "s"])
    s.add_argument("--values", required=True, help="comma separated values")
    s.add_argument("--csv", help="combined CSV output")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("entropy", help="local entropy profile as CSV")
    s.add_argument("--set", required=True, help="set spec JSON (inline or path)")
    s.add_argument("--c", type=float, default=8.0)
    s.add_argument("--N", type=int, default=1)
    s.add_argument("--sigma", type=float, default=1.0)
    s.add_argument("--etas", help="comma separated radii")
    s.add_argument("--eta-max", type=float, default=1.0)
    s.add_argument("--eta-min", type=float, default=0.01)
    s.add_argument("--num", type=int, default=10)
    s.add_argument("--region-radius", type=float, help="localization radius for unbounded sets")
    s.add_argument("--out")
    s.set_defaults(func=cmd_entropy)

    s = sub.add_parser("tree-verify", help="build a packing tree and check its invariants")
    s.add_argument("--set", required=True)
    s.add_argument("--depth", type=int, default=5)
    s.add_argument("--c", type=float, default=8.0)
    s.add_argument("--pitch", type=float)
    s.add_argument("--dump", help="write nodes and edges as JSON here")
    s.set_defaults(func=cmd_tree_verify)

    s = sub.add_parser("bounds", help="rate envelope and lower bounds for a configuration")
    s.add_argument("--config", required=True)
    s.add_argument("--constants", action="store_true", help="include the resolved constant set")
    s.add_argument("--format", choices=["json", "csv"], default="json")
    s.set_defaults(func=cmd_bounds)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
