"""``osearch feasible|maxn|verify|plot|rate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ._io import atomic_write_json
from .certify import RefineConfig
from .driver import (
    EXIT,
    EXIT_ERROR,
    SchemaError,
    SearchAborted,
    cmd_feasible,
    cmd_maxn,
    cmd_plot,
    cmd_rate,
    cmd_verify,
)

LONG_K = 5
# k >= LONG_K runs: bounded seeding so each LP stays tractable
LONG_INITIAL_POINTS = 512
LONG_MAX_NEW = 256


def _config(args) -> RefineConfig:
    cfg = RefineConfig(solver=args.solver)
    if args.max_iters is not None:
        cfg.max_iters = args.max_iters
    if args.time_limit is not None:
        cfg.time_limit = args.time_limit
    if getattr(args, "long", False):
        cfg.initial_points = LONG_INITIAL_POINTS
        cfg.max_new_points = LONG_MAX_NEW
        cfg.checkpoint = args.checkpoint or f"osearch-n{args.n}-k{args.k}.ckpt.json"
    elif getattr(args, "checkpoint", None):
        cfg.checkpoint = args.checkpoint
    return cfg


def _common(p, need_n=True):
    p.add_argument("--k", type=int, required=True)
    if need_n:
        p.add_argument("--n", type=int, required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--time-limit", type=float, default=None, help="seconds")
    p.add_argument("--solver", default="highs", help="highs | highs-ipm | simplex")
    p.add_argument("--out", default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="osearch", description="Exact translation-invariant ordered search via LP relaxation.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("feasible", help="decide one (n, k) instance")
    _common(p)
    p.add_argument("--long", action="store_true", help="allow k >= 5; checkpoints every iteration")
    p.add_argument("--checkpoint", default=None, help="checkpoint path (default derived from n, k)")
    p.add_argument("--resume", default=None, help="resume from a checkpoint")

    p = sub.add_parser("maxn", help="binary search for the largest feasible n")
    _common(p, need_n=False)
    p.add_argument("--lo", type=int, default=2)
    p.add_argument("--hi", type=int, default=None, help="default 4^k, doubled while feasible")
    p.add_argument("--long", action="store_true")

    p = sub.add_parser("verify", help="re-check a certificate")
    p.add_argument("cert")

    p = sub.add_parser("plot", help="coefficient plot (SVG) and CSV of a FEASIBLE certificate")
    p.add_argument("cert")
    p.add_argument("--out", required=True, help="output stem; writes .svg and .csv")

    p = sub.add_parser("rate", help="k / log2(n)")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) or getattr(args, "long", False) else logging.WARNING,
        format="%(asctime)s %(message)s",
    )
    try:
        return _dispatch(args)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # noqa: BLE001 - CLI boundary: report and map to exit 1
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _dispatch(args) -> int:
    if args.cmd == "rate":
        print(f"{cmd_rate(args.k, args.n):.6f}")
        return 0
    if args.cmd == "verify":
        code, msg = cmd_verify(args.cert)
        print(msg)
        return code
    if args.cmd == "plot":
        try:
            svg, csv = cmd_plot(args.cert, args.out)
        except (SchemaError, ValueError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        print(f"wrote {svg} and {csv}")
        return 0
    if args.k >= LONG_K and not args.long:
        print(f"error: k >= {LONG_K} runs take days; pass --long to proceed", file=sys.stderr)
        return EXIT_ERROR
    if args.cmd == "feasible":
        cert, code, msg = cmd_feasible(args.k, args.n, args.epsilon, _config(args), args.out, args.resume)
        print(msg)
        return code
    # maxn
    if args.epsilon != 0.0:
        print("error: only exact instances (epsilon = 0) are supported", file=sys.stderr)
        return EXIT_ERROR
    args.n, args.checkpoint = 0, None
    cfg = _config(args)
    cfg.checkpoint = None  # probes differ in n; a shared checkpoint would be meaningless
    try:
        res = cmd_maxn(args.k, args.lo, args.hi, cfg)
    except SearchAborted as exc:
        print(f"aborted: {exc}")
        print(json.dumps(exc.probe_log))
        return EXIT[exc.cert.verdict] if exc.cert is not None else EXIT_ERROR
    print(f"k={res.k} n_max={res.n_max}")
    for n, v, s in res.probe_log:
        print(f"  n={n} {v} {s:.1f}s")
    if args.out:
        atomic_write_json(Path(args.out), res.to_dict())
    return 0


if __name__ == "__main__":
    sys.exit(main())
