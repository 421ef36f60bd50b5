"""Command-line interface.

Exit codes: 0 success, 2 input or validation error, 3 oracle mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import jsonio
from .calibration import FixedTreeSpec, accuracy_from_counts, build_fixed_tree, estimate_accuracy
from .candgen import DEFAULT_CAP, CandidateSet, generate_candidates, top_n_oracle
from .drafttree import build_tree, prepare_buffers, render_ascii, render_pgm
from .errors import DynTreeError
from .marginals import AccuracyMatrix, MarginalTable
from .simulator import (
    SimConfig,
    collect_calibration,
    compare_dynamic_fixed,
    mean,
    run_simulation,
    sign_test_pvalue,
)

EXIT_OK, EXIT_INPUT, EXIT_MISMATCH = 0, 2, 3


class InputError(Exception):
    pass


def _load(path: str) -> dict:
    try:
        return jsonio.load(path)
    except FileNotFoundError:
        raise InputError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def _write(doc: dict, path: str, args) -> None:
    if not args.deterministic:
        doc = {**doc, "generated_at": datetime.now(timezone.utc).isoformat()}
    jsonio.dump(doc, path)


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def cmd_gen(args) -> int:
    table = MarginalTable.from_json(_load(args.table))
    cands = generate_candidates(table, args.n)
    _write(cands.to_json(), args.out, args)
    print(f"{len(cands)} candidates -> {args.out}")
    if args.check:
        ref = top_n_oracle(table, args.n, cap=args.cap)
        got = [(c.path, c.log_score) for c in cands]
        want = [(c.path, c.log_score) for c in ref]
        if got != want:
            print("oracle mismatch: generated set differs from brute-force top-n", file=sys.stderr)
            return EXIT_MISMATCH
        print("oracle check passed")
    return EXIT_OK


def cmd_buffers(args) -> int:
    cands = CandidateSet.from_json(_load(args.candidates))
    table = MarginalTable.from_json(_load(args.table))
    tree = build_tree(cands, table, root_token=args.root_token)
    bufs = prepare_buffers(tree)
    _write(bufs.to_json(), args.out, args)
    if args.render == "ascii":
        sys.stdout.write(render_ascii(bufs.mask, args.include_root))
    elif args.render == "pgm":
        pgm = Path(args.out).with_suffix(".pgm")
        pgm.write_bytes(render_pgm(bufs.mask, args.include_root, args.scale))
        print(f"mask image -> {pgm}")
    return EXIT_OK


def _sim_one(config: SimConfig) -> dict:
    return run_simulation(config).to_json()


def cmd_simulate(args) -> int:
    path = Path(args.config)
    config = SimConfig.from_json(_load(args.config), base_dir=path.parent)
    if args.parallel_seeds > 1:
        configs = [replace(config, seed=config.seed + j) for j in range(args.parallel_seeds)]
        with ProcessPoolExecutor(max_workers=args.parallel_seeds) as pool:
            results = list(pool.map(_sim_one, configs))
        doc = {"runs": [{"seed": c.seed, "stats": r} for c, r in zip(configs, results)]}
        for c, r in zip(configs, results):
            print(f"seed {c.seed}: tokens/step = {r['tokens_per_step']:.3f}")
    else:
        doc = _sim_one(config)
        print(f"tokens/step = {doc['tokens_per_step']:.3f}")
    _write(doc, args.out, args)
    if args.records:
        accepts, trials = collect_calibration(replace(config, strategy="dynamic", fixed_tree=None))
        jsonio.dump(
            {"K": config.K, "m": config.m, "accepts": accepts.tolist(), "trials": trials.tolist()},
            args.records,
        )
    return EXIT_OK


def _accuracy_from_doc(doc: dict) -> AccuracyMatrix:
    if "records" in doc:
        return estimate_accuracy(
            [tuple(r) for r in doc["records"]], K=doc.get("K"), m=doc.get("m")
        )
    if "accepts" in doc and "trials" in doc:
        return accuracy_from_counts(np.asarray(doc["accepts"]), np.asarray(doc["trials"]))
    if "probs" in doc:
        return AccuracyMatrix.from_json(doc)
    raise InputError("stats file needs 'records', 'accepts'/'trials', or an accuracy matrix 'probs'")


def cmd_calibrate(args) -> int:
    acc = _accuracy_from_doc(_load(args.stats))
    spec = build_fixed_tree(acc, args.n)
    _write(spec.to_json(), args.out, args)
    print(f"fixed tree: {len(spec.candidate_set)} nodes, expected_accept = {spec.expected_accept:.6f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.iters < 1:
        raise InputError("--iters must be >= 1")
    table = MarginalTable.from_json(_load(args.table))
    counter: Counter = Counter()
    cands = generate_candidates(table, args.n, counter)
    prepare_buffers(build_tree(cands, table))
    for _ in range(args.warmup):
        prepare_buffers(build_tree(generate_candidates(table, args.n), table))
    times = []
    for _ in range(args.iters):
        t0 = time.perf_counter()
        prepare_buffers(build_tree(generate_candidates(table, args.n), table))
        times.append(time.perf_counter() - t0)
    us = np.asarray(times) * 1e6
    report = {
        "K": table.K,
        "m": table.m,
        "n": args.n,
        "iters": args.iters,
        "median_us": float(np.median(us)),
        "p99_us": float(np.percentile(us, 99)),
        "offers": counter["offers"],
        "pushes": counter["pushes"],
        "offer_bound": table.K * args.n * (table.m + 1),
    }
    print(json.dumps(report))
    return EXIT_OK


def cmd_compare(args) -> int:
    path = Path(args.config)
    config = SimConfig.from_json(_load(args.config), base_dir=path.parent)
    seeds = list(range(config.seed, config.seed + args.seeds))
    runs = compare_dynamic_fixed(config, seeds, args.calibration_steps)
    doc = {
        "config": {k: v for k, v in config.to_json().items() if k != "fixed_tree"},
        "calibration_steps": args.calibration_steps or config.steps,
        "runs": [
            {"seed": r.seed, "dynamic": r.dynamic, "fixed": r.fixed, "fixed_expected_accept": r.fixed_expected_accept}
            for r in runs
        ],
        "dynamic_mean": mean([r.dynamic for r in runs]),
        "fixed_mean": mean([r.fixed for r in runs]),
        "sign_test_p": sign_test_pvalue(runs),
    }
    _write(doc, args.out, args)
    print(
        f"dynamic tokens/step = {doc['dynamic_mean']:.3f}, fixed tokens/step = {doc['fixed_mean']:.3f}, "
        f"sign test p = {doc['sign_test_p']:.4f}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyntree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--deterministic", action="store_true", help="omit timestamps from output files")
        p.set_defaults(func=func)
        return p

    p = add("gen", cmd_gen, "generate top-n candidates from a marginal table")
    p.add_argument("--table", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--check", action="store_true", help="compare against the brute-force oracle")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)

    p = add("buffers", cmd_buffers, "build tree-attention buffers for a candidate set")
    p.add_argument("--candidates", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--render", choices=["ascii", "pgm"])
    p.add_argument("--include-root", type=_parse_bool, default=True)
    p.add_argument("--scale", type=int, default=1, help="pixels per mask cell for --render pgm")
    p.add_argument("--root-token", type=int, default=-1)

    p = add("simulate", cmd_simulate, "run the decode simulator")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--records", help="also write per-(head, rank) calibration counts here")
    p.add_argument("--parallel-seeds", type=int, default=1)

    p = add("calibrate", cmd_calibrate, "build the fixed-tree baseline from calibration data")
    p.add_argument("--stats", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)

    p = add("bench", cmd_bench, "time candidate generation plus buffer preparation")
    p.add_argument("--table", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--warmup", type=int, default=50)

    p = add("compare", cmd_compare, "paired dynamic vs calibrated fixed tree over several seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--calibration-steps", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DynTreeError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (KeyError, TypeError) as exc:
        print(f"error: malformed input ({exc!r})", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
