"""Spatial-mesh study: quad grids (exact transport) and unstructured triangles.

    python3 scripts/mesh_convergence.py
    python3 scripts/mesh_convergence.py --finest 0.025 --seeds 0 1 2
"""

import argparse
from pathlib import Path

from deltaflow.config import load_config
from deltaflow.oracle import eoc, mre
from deltaflow.pipeline import oracle_values, run_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def error(cfg):
    res = run_config(cfg)
    return len(res.disc.md.cells), mre(res.total, oracle_values(cfg, res))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--finest", type=float, default=0.05, help="finest triangle spacing")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0], help="mesher seeds (0: unperturbed start)")
    args = ap.parse_args()

    cfg = load_config(CONFIGS / "quad_grid.cfg")
    print("quad grids, L = 4")
    for n in (5, 10, 20, 40):
        cfg.geometry.n = n
        cells, e = error(cfg)
        print(f"  {1 / n:>8.4f} {cells:>6d} cells  MRE {e:.3e}")

    hs = [0.4]
    while hs[-1] > args.finest * 1.0001:
        hs.append(hs[-1] / 2)
    cfg = load_config(CONFIGS / "triangles.cfg")
    for seed in args.seeds:
        cfg.geometry.seed = seed
        rows = []
        for h in hs:
            cfg.geometry.h = h
            rows.append(error(cfg))
        rates = [float("nan")] + eoc([e for _, e in rows])
        print(f"triangles, seed {seed}")
        for h, (cells, e), r in zip(hs, rows, rates):
            print(f"  {h:>8.4f} {cells:>6d} cells  MRE {e:.3e}  EOC {r:.2f}")


if __name__ == "__main__":
    main()
