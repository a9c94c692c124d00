"""Cost scaling on a curved synthetic shell: wall time against the number of directions.

    python3 scripts/shell_scaling.py --n 16 --L 50 100 200 --threads 1
"""

import argparse
from pathlib import Path

import numpy as np

from deltaflow.config import load_config
from deltaflow.pipeline import run_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=16, help="bump mesh has 2 n^2 triangles")
    ap.add_argument("--L", type=int, nargs="+", default=[50, 100, 200])
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    cfg = load_config(CONFIGS / "bump_shell.cfg")
    cfg.geometry.n = args.n
    print(f"{'L':>6} {'DOFs':>9} {'nnz':>10} {'assemble':>9} {'solve':>7} {'evaluate':>9} {'solver':>16} {'NaN':>4} {'grazing':>8}")
    prev = None
    for L in args.L:
        res = run_config(cfg, threads=args.threads, L=L)
        t = res.timings
        d = res.field.diagnostics
        skip = d.grazing_skips / max(d.grazing_skips + d.terms, 1)
        print(
            f"{L:>6d} {res.disc.n_dofs:>9d} {res.B.nnz:>10d} {t['assemble']:>8.2f}s {t['solve']:>6.2f}s "
            f"{t['evaluate']:>8.2f}s {res.report.method:>16} {int(np.isnan(res.total).sum()):>4d} {100 * skip:>7.2f}%"
        )
        if prev is not None:
            print(f"{'':>6} assembly time ratio x{t['assemble'] / prev[1]:.2f} for L ratio x{L / prev[0]:.2f}")
        prev = (L, t["assemble"])


if __name__ == "__main__":
    main()
