"""Coefficient plots (SVG + CSV) for the boundary instances.

Pass certificate files to plot existing results, or let the script solve
(56, 3) and (605, 4) itself.  The latter takes several minutes.

    python3 scripts/coefficient_figure.py --outdir figures/
    python3 scripts/coefficient_figure.py results/cert_n56_k3.json
"""

import argparse
from pathlib import Path

from osearch.driver import cmd_feasible, cmd_plot, write_certificate

INSTANCES = [(3, 56), (4, 605)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("certs", nargs="*")
    ap.add_argument("--outdir", default="figures")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)

    paths = [Path(c) for c in args.certs]
    if not paths:
        for k, n in INSTANCES:
            cert, code, msg = cmd_feasible(k, n)
            print(msg)
            if code != 0:
                raise SystemExit(f"({n}, {k}) did not produce a feasible certificate")
            p = out / f"cert_n{n}_k{k}.json"
            write_certificate(cert, p)
            paths.append(p)
    for p in paths:
        svg, csv = cmd_plot(p, out / p.stem.replace("cert", "coeffs"))
        print(f"wrote {svg} {csv}")


if __name__ == "__main__":
    main()
