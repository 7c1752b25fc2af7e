"""Command-line entry point: ``kparity <subcommand> [options]``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

from ..commsim import KSetInstance, disjointness_protocol
from ..fourier import nearest_k_parity
from ..serialize import read_truth_table
from .experiments import ConfigError, ExperimentConfig, run_trials, sweep_scaling, trial_rng

EXIT_CONFIG = 2


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers: {text!r}") from exc


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run control")
    g.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    g.add_argument("--trials", type=int, default=100)
    g.add_argument("--workers", type=int, default=1, help="worker processes for independent trials")
    fmt = g.add_mutually_exclusive_group()
    fmt.add_argument("--json", dest="fmt", action="store_const", const="json", default="json")
    fmt.add_argument("--csv", dest="fmt", action="store_const", const="csv")
    g.add_argument("--out", help="write the report here instead of stdout")
    g.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identical output)")

    c = p.add_argument_group("constant overrides")
    c.add_argument("--c-q", dest="c_q", type=int, default=1000)
    c.add_argument("--rho", type=_fraction, default=Fraction(1, 10))
    c.add_argument("--threshold", type=_fraction, default=Fraction(3, 4))
    c.add_argument("--reduced-n-factor", type=int, default=100)
    c.add_argument("--reps", type=int, default=40, help="self-correction repetitions")
    c.add_argument("--t-blr", type=int, default=ExperimentConfig.t_blr)
    c.add_argument("--small-k-threshold", type=int, default=4)
    c.add_argument("--buckets", type=int, default=None, help="bucket count b (default 100 k^2)")
    c.add_argument("--bucketing", choices=("slice", "hash"), default="slice")

    s = p.add_argument_group("instance")
    s.add_argument("-n", type=int, default=None)
    s.add_argument("-k", type=int, default=8)
    s.add_argument("--family", default=None)
    s.add_argument("--ell", type=int, default=None, help="weight for the l-parity family")
    s.add_argument("--set-size", type=int, default=None, help="|J| for partition-check")
    s.add_argument("--noise-rate", type=float, default=0.0)
    s.add_argument("--no-intersect", dest="intersect", action="store_false",
                   help="infl: draw x disjoint from J")
    return p


DEFAULT_N = {"test": 1 << 14, "infl": 12, "partition-check": 100 * 128 * 128 + 1,
             "comm": 1024, "reduce": 64, "rac": 1024}


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="kparity", description="k-parity testing and one-way disjointness experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("test", parents=[common], help="run the k-parity tester")
    sub.add_parser("partition-check", parents=[common], help="partition lemma rates")
    sub.add_parser("infl", parents=[common], help="influence-test detection rates")
    comm = sub.add_parser("comm", parents=[common], help="one-way disjointness protocol")
    comm.add_argument("--dump-transcript", help="also write trial 0's transcript to this path")
    sub.add_parser("reduce", parents=[common], help="tester-to-protocol reduction")
    sub.add_parser("rac", parents=[common], help="random-access-code round trip")
    oracle = sub.add_parser("oracle", parents=[common], help="nearest k-parity of a truth-table file")
    oracle.add_argument("table", help="truth-table file (JSON header line + packed bits)")
    sweep = sub.add_parser("sweep", parents=[common], help="cost scaling over several k")
    sweep.add_argument("--scenario", default="test", choices=("test", "comm", "reduce", "rac", "infl"))
    sweep.add_argument("--ks", type=_int_list, required=True, help="e.g. 8,16,32,64")
    sweep.add_argument("--n-per-k2", type=int, default=None, help="use n = this * k^2 at every k")
    return parser


def config_from_args(args, scenario: str) -> ExperimentConfig:
    n = args.n if args.n is not None else DEFAULT_N[scenario]
    return ExperimentConfig(
        scenario=scenario, family=args.family, n=n, k=args.k, ks=getattr(args, "ks", ()),
        ell=args.ell, set_size=args.set_size, trials=args.trials, seed=args.seed,
        noise_rate=args.noise_rate, intersect=args.intersect, c_q=args.c_q, rho=args.rho,
        threshold=args.threshold, reduced_n_factor=args.reduced_n_factor, reps=args.reps,
        t_blr=args.t_blr, small_k_threshold=args.small_k_threshold, buckets=args.buckets,
        bucketing=args.bucketing, n_per_k2=getattr(args, "n_per_k2", None), workers=args.workers,
    )


def _flatten(prefix: str, value, out: dict) -> None:
    if isinstance(value, dict):
        for key, v in value.items():
            _flatten(f"{prefix}{key}.", v, out)
    elif isinstance(value, list):
        out[prefix.rstrip(".")] = " ".join(str(v) for v in value)
    else:
        out[prefix.rstrip(".")] = value


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    rows = report.get("rows")
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    else:
        flat: dict = {}
        _flatten("", {k: v for k, v in report.items() if k != "rows"}, flat)
        writer = csv.DictWriter(buf, fieldnames=list(flat), lineterminator="\n")
        writer.writeheader()
        writer.writerow(flat)
    return buf.getvalue()


def run(argv=None) -> dict:
    args = build_parser().parse_args(argv)
    if args.command == "oracle":
        n, table = read_truth_table(args.table)
        spec, dist = nearest_k_parity(table, args.k, n)
        report = {"n": n, "k": args.k, "support": sorted(spec.support),
                  "distance": str(dist), "distance_float": float(dist)}
    elif args.command == "sweep":
        cfg = config_from_args(args, args.scenario)
        result = sweep_scaling(cfg)
        report = {"config": cfg.to_json(), **result.to_json()}
    else:
        cfg = config_from_args(args, args.command)
        stats = run_trials(cfg)
        report = {"config": cfg.to_json(), "stats": stats.to_json(timing=args.timing)}
        if args.command == "comm" and args.dump_transcript:
            rng = trial_rng(cfg.seed, 0)
            pool = rng.choice(cfg.n, size=2 * cfg.k, replace=False)
            inst = KSetInstance(cfg.n, pool[: cfg.k], pool[cfg.k :])
            _, transcript = disjointness_protocol(inst, int(rng.integers(2**63)), cfg.buckets, cfg.bucketing)
            transcript.dump(args.dump_transcript)
    text = render(report, args.fmt)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return report


def main(argv=None) -> int:
    try:
        run(argv)
    except (ConfigError, ValueError) as exc:
        print(f"kparity: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
