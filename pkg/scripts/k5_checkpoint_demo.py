"""Truncated k = 5 run at n = 7265: a few iterations, a checkpoint, then a resume.

The full run needs hundreds of iterations; this only exercises the long-run
machinery.  Prints a JSON summary on the last line of stdout.

    python3 scripts/k5_checkpoint_demo.py --first 2 --then 1 --ckpt /tmp/k5.ckpt.json
"""

import argparse
import json
import logging
import resource
import time

import numpy as np

from osearch.certify import RefineConfig, Verdict, refine_loop
from osearch.cli import LONG_INITIAL_POINTS, LONG_MAX_NEW


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=7265)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--first", type=int, default=2, help="iterations before the checkpoint")
    ap.add_argument("--then", type=int, default=1, help="iterations after resuming")
    ap.add_argument("--ckpt", default="k5.ckpt.json")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    def cfg(iters):
        return RefineConfig(
            initial_points=LONG_INITIAL_POINTS,
            max_new_points=LONG_MAX_NEW,
            max_iters=iters,
            checkpoint=args.ckpt,
        )

    t0 = time.time()
    first = refine_loop(args.n, args.k, config=cfg(args.first))
    t1 = time.time()
    second = refine_loop(args.n, args.k, config=cfg(args.then), resume=args.ckpt)
    t2 = time.time()

    hist = second.history
    beta = [h["beta"] for h in hist]
    summary = {
        "n": args.n,
        "k": args.k,
        "first_verdict": first.verdict.value,
        "first_iterations": first.iterations,
        "verdict": second.verdict.value,
        "reason": second.reason,
        "iterations": second.iterations,
        "beta_star": beta,
        "beta_lp": [h["beta_lp"] for h in hist],
        "grid_sizes": [h["grid"] for h in hist],
        "non_increasing": bool(np.all(np.diff(beta) <= 1e-12)),
        "numerical_failure": second.verdict is not Verdict.INCONCLUSIVE or "cap" not in (second.reason or ""),
        "seconds": [round(t1 - t0, 1), round(t2 - t1, 1)],
        "peak_rss_gb": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1e6,
    }
    print(json.dumps(summary))


if __name__ == "__main__":
    main()
