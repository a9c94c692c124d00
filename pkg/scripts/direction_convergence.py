"""Direction-set convergence on the unit square with a line source.

Prints MRE and EOC against the closed-form parallel-wall solution for the
aligned set 2 pi l / L and the offset set (2l-1) pi / L.

    python3 scripts/direction_convergence.py --max-half 256
"""

import argparse
from pathlib import Path

from deltaflow.config import load_config
from deltaflow.oracle import eoc, mre
from deltaflow.pipeline import oracle_values, run_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def sweep(cfg, Ls):
    errs = []
    for L in Ls:
        res = run_config(cfg, L=L)
        errs.append(mre(res.total, oracle_values(cfg, res)))
    return errs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-half", type=int, default=256, help="largest L/2")
    args = ap.parse_args()
    halves = [4]
    while halves[-1] < args.max_half:
        halves.append(2 * halves[-1])
    Ls = [2 * h for h in halves]
    aligned = sweep(load_config(CONFIGS / "square_L4.cfg"), Ls)
    offset = sweep(load_config(CONFIGS / "square_offset.cfg"), Ls)
    eo = [float("nan")] + eoc(offset)
    print(f"{'L/2':>6} {'aligned MRE':>12} {'offset MRE':>12} {'offset EOC':>10}")
    for h, a, o, r in zip(halves, aligned, offset, eo):
        print(f"{h:>6d} {a:>12.4e} {o:>12.4e} {r:>10.2f}")


if __name__ == "__main__":
    main()
