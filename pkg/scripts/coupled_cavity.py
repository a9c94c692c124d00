"""Two coupled cavities with a point source, compared with the image-source sum.

Reports receiver-cell MRE and mean error for a sweep over L. With low damping
the image sum needs many orders; ``--orders`` evaluates several truncations so
the oracle's own error can be seen next to the engine's.

    python3 scripts/coupled_cavity.py --L 256 512 1024 2048
    python3 scripts/coupled_cavity.py --mu pi/200 --L 1024 2048 --orders 400 1000
"""

import argparse
from pathlib import Path

from deltaflow.config import eval_number, load_config
from deltaflow.oracle import image_tail_bound, mean_error, mre, point_source_amplitude
from deltaflow.pipeline import oracle_values, receiver_mask, run_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--mu", default="pi/2")
    ap.add_argument("--h", type=float, default=0.0125, help="boundary element size")
    ap.add_argument("--L", type=int, nargs="+", default=[256, 512, 1024, 2048])
    ap.add_argument("--orders", type=int, nargs="+", default=None, help="image-source truncation orders")
    args = ap.parse_args()

    cfg = load_config(CONFIGS / "split_square.cfg")
    cfg.physics.mu = eval_number(args.mu)
    orders = args.orders or [cfg.oracle.max_order]
    amp = point_source_amplitude(cfg.physics.omega, cfg.physics.rho_fluid, 1.0)
    for N in orders:
        print(f"order {N}: tail bound {image_tail_bound(cfg.physics.mu, N, (1.0, 1.0), amp):.2e}")
    results = {}
    for L in args.L:
        res = run_config(cfg, L=L, target_h=args.h)
        results[L] = (res, receiver_mask(cfg, res))
        print(f"L={L}: {res.disc.n_dofs} DOFs, {res.report.method} ({res.report.iterations} its), "
              + ", ".join(f"{k} {v:.1f}s" for k, v in res.timings.items()))
    print(f"{'order':>6} {'L':>6} {'MRE':>10} {'mean err':>10}")
    for N in orders:
        cfg.oracle.max_order = N
        exact = None
        for L, (res, m) in results.items():
            if exact is None:
                exact = oracle_values(cfg, res)[m]
            print(f"{N:>6d} {L:>6d} {mre(res.total[m], exact):>10.4e} {mean_error(res.total[m], exact):>10.3e}")


if __name__ == "__main__":
    main()
