"""Largest feasible n for each k, with both boundary certificates written to disk.

    python3 scripts/find_maxn.py --k 1 2 3 --outdir results/
"""

import argparse
import json
import logging
from pathlib import Path

from osearch.driver import cmd_maxn, write_certificate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--k", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--lo", type=int, default=2)
    ap.add_argument("--hi", type=int, default=None)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)

    for k in args.k:
        res = cmd_maxn(k, args.lo, args.hi)
        write_certificate(res.feasible_cert, out / f"cert_n{res.n_max}_k{k}.json")
        write_certificate(res.infeasible_cert, out / f"cert_n{res.n_max + 1}_k{k}.json")
        (out / f"maxn_k{k}.json").write_text(json.dumps(res.to_dict(), indent=1))
        secs = sum(s for _, _, s in res.probe_log)
        print(f"k={k} n_max={res.n_max} probes={len(res.probe_log)} {secs:.0f}s")


if __name__ == "__main__":
    main()
