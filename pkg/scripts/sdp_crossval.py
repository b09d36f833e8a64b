"""Export the SDP at small instances, solve it with a conic solver, compare with the LP.

    python3 scripts/sdp_crossval.py --outdir sdpa/
"""

import argparse
from pathlib import Path

from osearch.certify import Verdict, refine_loop
from osearch.sdpa import export_sdp, read_sdpa, solve_sdpa

INSTANCES = [(2, 1), (10, 2), (56, 3)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--outdir", default="sdpa")
    ap.add_argument("--solver", default="CLARABEL")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)

    bad = 0
    for n, k in INSTANCES:
        path = out / f"clp_n{n}_k{k}.dat-s"
        export_sdp(n, k, 0.0, path)
        res = solve_sdpa(read_sdpa(path), solver=args.solver)
        lp = refine_loop(n, k).verdict
        agree = res.feasible is (lp is Verdict.FEASIBLE)
        bad += not agree
        obj = "nan" if res.objective is None else f"{res.objective:.9f}"
        print(f"n={n} k={k} lp={lp.value} conic={res.status} obj={obj} agree={agree}")
    raise SystemExit(1 if bad else 0)


if __name__ == "__main__":
    main()
