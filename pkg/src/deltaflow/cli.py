"""Command-line entry point: ``deltaflow run|converge|oracle|mesh-info``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import load_config
from .errors import InputError, NumericalError
from .geometry import multidomain_from_mesh, read_mesh
from .interior import write_field_csv
from .oracle import eoc, mean_error, mre
from .pipeline import RunResult, oracle_values, receiver_mask, run_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


@dataclass
class RunSummary:
    dofs: int
    nnz: int
    times: dict
    solve: dict
    diagnostics: dict
    outputs: list[str] = field(default_factory=list)

    @classmethod
    def from_result(cls, res: RunResult, outputs: list[str]) -> "RunSummary":
        diag = res.field.diagnostics.as_dict()
        diag["assembly_grazing_drops"] = res.B.stats.grazing_drops
        diag["assembly_gap_pieces"] = res.B.stats.gap_pieces
        return cls(res.disc.n_dofs, res.B.nnz, res.timings, res.report.as_dict(), diag, outputs)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    res = run_config(cfg, threads=args.threads)
    out = _out_dir(args)
    field_path = out / cfg.output.field
    write_field_csv(field_path, res.field.cells, res.field.xyz, res.total, cfg.output.log10)
    outputs = [str(field_path)]
    if args.dump_matrix:
        res.B.dump(args.dump_matrix)
        outputs.append(str(args.dump_matrix))
    summary = RunSummary.from_result(res, outputs)
    (out / "summary.json").write_text(json.dumps(asdict(summary), indent=2))
    print(json.dumps(asdict(summary), indent=2))
    return EXIT_OK


def _parse_sweep(text: str) -> tuple[str, list[float]]:
    key, _, vals = text.partition("=")
    key = key.strip()
    if key not in ("L", "h", "n") or not vals:
        raise InputError("sweep must look like L=8,16,32 or h=0.4,0.2 or n=5,10")
    return key, [float(v) for v in vals.split(",")]


def convergence_table(cfg, key: str, values: list[float], threads: int = 1) -> list[dict]:
    if cfg.oracle.kind is None:
        from .errors import NoOracle

        raise NoOracle("convergence study needs an [oracle] section")
    rows = []
    for v in values:
        if key == "L":
            res = run_config(cfg, threads, L=int(v))
        elif key == "h":
            cfg.geometry.h = v
            res = run_config(cfg, threads)
        else:
            cfg.geometry.n = int(v)
            res = run_config(cfg, threads)
        exact = oracle_values(cfg, res)
        m = receiver_mask(cfg, res)
        rows.append({"level": v, "dofs": res.disc.n_dofs, "error": mre(res.total[m], exact[m])})
    errs = [r["error"] for r in rows]
    orders = [float("nan")] * len(rows)
    if len(rows) > 1 and min(errs) > 0:
        orders[1:] = eoc(errs)
    for r, o in zip(rows, orders):
        r["eoc"] = o
    return rows


def cmd_converge(args) -> int:
    cfg = load_config(args.config)
    key, values = _parse_sweep(args.sweep)
    rows = convergence_table(cfg, key, values, args.threads)
    out = _out_dir(args)
    path = out / "convergence.csv"
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["level", "dofs", "error", "eoc"])
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print(f"{r['level']:>10g} {r['dofs']:>10d} {r['error']:.4e} {r['eoc']:.2f}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = load_config(args.config)
    if cfg.oracle.kind is None:
        cfg.oracle.kind = "image_source"
    res = run_config(cfg, threads=args.threads)
    exact = oracle_values(cfg, res)
    m = receiver_mask(cfg, res)
    metrics = {"mre": mre(res.total[m], exact[m]), "mean_error": mean_error(res.total[m], exact[m]), "points": int(m.sum())}
    out = _out_dir(args)
    write_field_csv(out / "engine.csv", res.field.cells, res.field.xyz, res.total)
    write_field_csv(out / "oracle.csv", res.field.cells, res.field.xyz, exact)
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2))
    print(json.dumps(metrics, indent=2))
    return EXIT_OK


def cmd_mesh_info(args) -> int:
    nodes, tris, free = read_mesh(args.mesh)
    md = multidomain_from_mesh(nodes, tris, free)
    lens = [e.length for c in md.cells for e in c.edges]
    info = {
        "nodes": len(nodes),
        "cells": len(tris),
        "shared_edges": len(md.shared_edges()),
        "free_edges": sum(e.is_free for c in md.cells for e in c.edges),
        "edge_length": {"min": float(np.min(lens)), "max": float(np.max(lens)), "mean": float(np.mean(lens))},
        "diameter": md.diameter,
    }
    print(json.dumps(info, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deltaflow", description="Direction-preserving energy transport on polygonal meshes.")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for assembly")
    ap.add_argument("--out", default="out", help="output directory")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="assemble, solve and write the interior field")
    p.add_argument("config")
    p.add_argument("--dump-matrix", dest="dump_matrix", default=None)
    p = sub.add_parser("converge", parents=[common], help="refinement study against the configured oracle")
    p.add_argument("config")
    p.add_argument("--sweep", required=True, help="L=8,16,32 | h=0.4,0.2 | n=5,10,20")
    p = sub.add_parser("oracle", parents=[common], help="compare against the image-source or analytic oracle")
    p.add_argument("config")
    p = sub.add_parser("mesh-info", parents=[common], help="summarise a mesh file")
    p.add_argument("mesh")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": cmd_run, "converge": cmd_converge, "oracle": cmd_oracle, "mesh-info": cmd_mesh_info}
    try:
        return handlers[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
