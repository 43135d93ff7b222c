"""Command-line front end: ``lpakit detect | sweep | quality | generate``.

Exit codes: 0 success, 1 usage error, 2 input error, 3 internal invariant
violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import generators
from .errors import GraphFormatError, InvariantViolation, LpaError, ValidationError
from .graph import CsrGraph, EdgeList, build_csr, load_graph, write_edge_list
from .hashtable import ProbeStrategy
from .lpa import LpaConfig, lpa, warmup
from .quality import community_stats, modularity

log = logging.getLogger("lpakit")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3

SWEEP_COLUMNS = [
    "graph", "dimension", "point", "rep",
    "pl_period", "cc_period", "strategy", "switch_degree", "precision",
    "exec_mode", "workers", "order", "seed",
    "n", "m2", "runtime_s", "modularity", "communities", "iterations", "converged",
    "error",
]

DEFAULT_GRIDS = {
    "mitigation": (["none"] + [f"PL{k}" for k in range(1, 5)] + [f"CC{k}" for k in range(1, 5)]
                   + [f"H{p}-{c}" for p in range(1, 5) for c in range(1, 5)]),
    "probing": [s.value for s in ProbeStrategy],
    "switch-degree": [str(2 ** k) for k in range(1, 9)],
    "precision": ["32", "64"],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_config_flags(p):
    g = p.add_argument_group("detection")
    g.add_argument("--tolerance", type=float, default=0.05)
    g.add_argument("--max-iterations", type=int, default=20)
    g.add_argument("--pl-period", type=int, default=4, help="pick-less every N passes (0 = off)")
    g.add_argument("--cc-period", type=int, default=0, help="cross-check every N passes (0 = off)")
    g.add_argument("--probing", default="quadratic-double",
                   choices=[s.value for s in ProbeStrategy])
    g.add_argument("--switch-degree", type=int, default=32)
    g.add_argument("--precision", type=int, default=32, choices=[32, 64])
    g.add_argument("--exec", dest="exec_mode", default="parallel",
                   choices=["parallel", "sequential", "synchronous"])
    g.add_argument("--workers", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--order", default="random", choices=["random", "ascending"],
                   help="vertex visiting order")


def _config_from_args(args) -> LpaConfig:
    return LpaConfig(
        tolerance=args.tolerance,
        max_iterations=args.max_iterations,
        pl_period=args.pl_period,
        cc_period=args.cc_period,
        strategy=args.probing,
        switch_degree=args.switch_degree,
        precision=args.precision,
        exec_mode=args.exec_mode,
        workers=args.workers,
        seed=args.seed,
        order=args.order,
    )


def config_flags(config: dict) -> list:
    """Command-line flags reproducing a report's config echo."""
    flags = [
        "--tolerance", repr(config["tolerance"]),
        "--max-iterations", str(config["max_iterations"]),
        "--pl-period", str(config["pl_period"]),
        "--cc-period", str(config["cc_period"]),
        "--probing", config["strategy"],
        "--switch-degree", str(config["switch_degree"]),
        "--precision", str(config["precision"]),
        "--exec", config["exec_mode"],
        "--seed", str(config["seed"]),
        "--order", config["order"],
    ]
    if config.get("workers"):
        flags += ["--workers", str(config["workers"])]
    return flags


def _load(path, fmt) -> CsrGraph:
    return build_csr(load_graph(path, fmt), symmetrize=True)


def _graph_meta(g: CsrGraph) -> dict:
    loops = int(np.count_nonzero(g.sources() == g.targets))
    return {
        "n": g.n,
        "m": (g.m2 - loops) // 2 + loops,
        "m2": g.m2,
        "total_weight_2m": g.total_weight_2m,
    }


def run_report(g: CsrGraph, config: LpaConfig, labels, stats, source=None) -> dict:
    q = modularity(g, labels) if g.total_weight_2m > 0 else None
    throughput = g.m2 * stats.iterations / stats.elapsed if stats.elapsed > 0 else 0.0
    report = {
        "graph": {**_graph_meta(g), **(source or {})},
        "config": config.to_dict(),
        "stats": stats.to_dict(),
        "modularity": q,
        "communities": int(len(np.unique(labels))),
        "throughput_edges_per_s": throughput,
    }
    report["argv"] = config_flags(report["config"])
    return report


def write_membership(labels, path) -> None:
    with open(path, "w") as fh:
        for v, c in enumerate(labels):
            fh.write(f"{v}\t{c}\n")


def read_membership(path, n: int) -> np.ndarray:
    labels = np.full(n, -1, dtype=np.int64)
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise GraphFormatError("expected 'vertex<TAB>label'", path, lineno)
            try:
                v, c = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError("non-integer field", path, lineno) from None
            if not 0 <= v < n:
                raise ValidationError(f"{path}:{lineno}: vertex {v} out of range for n={n}")
            if c < 0:
                raise ValidationError(f"{path}:{lineno}: negative label {c}")
            labels[v] = c
    missing = np.flatnonzero(labels < 0)
    if len(missing):
        raise ValidationError(
            f"membership misses {len(missing)} vertices; first missing id is {missing[0]}")
    return labels


# --- commands ----------------------------------------------------------------

def cmd_detect(args) -> int:
    config = _config_from_args(args)
    g = _load(args.input, args.format)
    warmup(config)
    labels, stats = lpa(g, config)
    report = run_report(g, config, labels, stats,
                        {"path": str(args.input), "format": args.format})
    if args.out_membership:
        write_membership(labels, args.out_membership)
    text = json.dumps(report, indent=2)
    if args.out_report:
        Path(args.out_report).write_text(text + "\n")
    else:
        print(text)
    log.info("n=%d iterations=%d converged=%s Q=%s communities=%d",
             g.n, stats.iterations, stats.converged, report["modularity"], report["communities"])
    return EXIT_OK


def _generated(spec: str):
    """Build a graph from ``kind[:a,b,...]``."""
    kind, _, rest = spec.partition(":")
    vals = [v for v in rest.split(",") if v]
    if kind == "planted":
        c, s, pin, pout = int(vals[0]), int(vals[1]), float(vals[2]), float(vals[3])
        seed = int(vals[4]) if len(vals) > 4 else 0
        el, _ = generators.planted_partition(c, s, pin, pout, seed=seed)
    elif kind == "ring":
        el = generators.ring_of_cliques(int(vals[0]), int(vals[1]))
    elif kind == "star":
        el = generators.star(int(vals[0]))
    elif kind == "bipartite":
        el = generators.complete_bipartite(int(vals[0]), int(vals[1]))
    elif kind == "edge":
        el = EdgeList.from_tuples([(0, 1)])
    else:
        raise ValidationError(f"unknown generator {kind!r}")
    return build_csr(el)


def _apply_point(base: dict, dimension: str, point: str) -> dict:
    cfg = dict(base)
    if dimension == "mitigation":
        p = point.upper()
        if p == "NONE":
            cfg.update(pl_period=0, cc_period=0)
        elif p.startswith("PL"):
            cfg.update(pl_period=int(p[2:]), cc_period=0)
        elif p.startswith("CC"):
            cfg.update(pl_period=0, cc_period=int(p[2:]))
        elif p.startswith("H"):
            pl, cc = p[1:].split("-")
            cfg.update(pl_period=int(pl), cc_period=int(cc))
        else:
            raise ValidationError(f"bad mitigation point {point!r}")
    elif dimension == "probing":
        cfg["strategy"] = point
    elif dimension == "switch-degree":
        cfg["switch_degree"] = int(point)
    elif dimension == "precision":
        cfg["precision"] = int(point)
    else:
        raise ValidationError(f"unknown sweep dimension {dimension!r}")
    return cfg


def run_sweep(graphs, dimension, grid, base: LpaConfig, reps: int = 5):
    """Yield one CSV row dict per (graph, grid point, repetition)."""
    for name, g in graphs:
        for point in grid:
            row0 = {"graph": name, "dimension": dimension, "point": point,
                    "n": g.n, "m2": g.m2}
            try:
                config = LpaConfig(**_apply_point(base.to_dict(), dimension, point))
                warmup(config)
            except LpaError as exc:
                yield {**row0, "rep": 0, "error": str(exc)}
                continue
            coords = {"pl_period": config.pl_period, "cc_period": config.cc_period,
                      "strategy": config.strategy.value, "switch_degree": config.switch_degree,
                      "precision": config.precision, "exec_mode": config.exec_mode.value,
                      "workers": config.n_workers, "order": config.order, "seed": config.seed}
            for rep in range(reps):
                row = {**row0, **coords, "rep": rep, "error": ""}
                try:
                    labels, stats = lpa(g, config)
                    row.update(runtime_s=stats.elapsed, iterations=stats.iterations,
                               converged=stats.converged,
                               communities=int(len(np.unique(labels))),
                               modularity=modularity(g, labels) if g.total_weight_2m > 0 else "")
                except (LpaError, MemoryError) as exc:
                    row["error"] = f"{type(exc).__name__}: {exc}"
                yield row


def summarize(rows) -> list:
    """Mean runtime per (graph, point) over successful repetitions."""
    groups = {}
    for r in rows:
        groups.setdefault((r["graph"], r["point"]), []).append(r)
    out = []
    for (graph, point), rs in groups.items():
        ok = [r for r in rs if not r.get("error")]
        out.append({
            "graph": graph, "point": point, "reps": len(ok),
            "runtime_mean_s": statistics.fmean(r["runtime_s"] for r in ok) if ok else "",
            "modularity_mean": statistics.fmean(r["modularity"] for r in ok if r["modularity"] != "") if ok else "",
            "iterations_mean": statistics.fmean(r["iterations"] for r in ok) if ok else "",
            "converged_all": all(r["converged"] for r in ok) if ok else False,
        })
    return out


def cmd_sweep(args) -> int:
    graphs = []
    for path in args.input or []:
        graphs.append((str(path), _load(path, args.format)))
    for spec in args.generate or []:
        graphs.append((spec, _generated(spec)))
    if not graphs:
        raise ValidationError("sweep needs at least one --input or --generate graph")
    grid = args.grid.split(",") if args.grid else DEFAULT_GRIDS[args.dimension]
    base = _config_from_args(args)

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=SWEEP_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        rows = []
        for row in run_sweep(graphs, args.dimension, grid, base, args.reps):
            writer.writerow(row)
            out.flush()
            rows.append(row)
    finally:
        if out is not sys.stdout:
            out.close()
    summary = summarize(rows)
    if args.summary:
        with open(args.summary, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(summary[0]))
            w.writeheader()
            w.writerows(summary)
    for s in summary:
        log.info("%s %s runtime=%s Q=%s converged=%s", s["graph"], s["point"],
                 s["runtime_mean_s"], s["modularity_mean"], s["converged_all"])
    return EXIT_OK


def cmd_quality(args) -> int:
    g = _load(args.input, args.format)
    labels = read_membership(args.membership, g.n)
    stats = community_stats(g, labels)
    print(json.dumps({"modularity": modularity(g, labels), **stats.to_dict()}, indent=2))
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.kind == "planted":
        el, truth = generators.planted_partition(args.communities, args.size, args.p_in,
                                                 args.p_out, seed=args.seed)
        if args.truth:
            write_membership(truth, args.truth)
    elif args.kind == "ring":
        el = generators.ring_of_cliques(args.communities, args.size)
    else:
        el = generators.star(args.size)
    write_edge_list(el, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lpakit", description="Label propagation community detection")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("detect", help="detect communities in one graph")
    d.add_argument("--input", required=True)
    d.add_argument("--format", default="edge-list", choices=["mtx", "edge-list"])
    _add_config_flags(d)
    d.add_argument("--out-membership")
    d.add_argument("--out-report")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("sweep", help="design-space sweep to CSV")
    s.add_argument("--input", action="append", help="graph file (repeatable)")
    s.add_argument("--format", default="edge-list", choices=["mtx", "edge-list"])
    s.add_argument("--generate", action="append",
                   help="synthetic graph: planted:C,S,PIN,POUT[,SEED] | ring:K,S | star:L | "
                        "bipartite:A,B | edge (repeatable)")
    s.add_argument("--dimension", required=True, choices=sorted(DEFAULT_GRIDS))
    s.add_argument("--grid", help="comma-separated grid points (default: full grid)")
    s.add_argument("--reps", type=int, default=5)
    s.add_argument("--out", help="CSV path (default stdout)")
    s.add_argument("--summary", help="CSV of per-point means")
    _add_config_flags(s)
    s.set_defaults(func=cmd_sweep)

    q = sub.add_parser("quality", help="modularity of a membership file")
    q.add_argument("--input", required=True)
    q.add_argument("--format", default="edge-list", choices=["mtx", "edge-list"])
    q.add_argument("--membership", required=True)
    q.set_defaults(func=cmd_quality)

    gen = sub.add_parser("generate", help="write a synthetic edge list")
    gen.add_argument("kind", choices=["planted", "ring", "star"])
    gen.add_argument("--communities", type=int, default=100)
    gen.add_argument("--size", type=int, default=100)
    gen.add_argument("--p-in", type=float, default=0.3)
    gen.add_argument("--p-out", type=float, default=0.001)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.add_argument("--truth", help="write ground-truth membership here (planted only)")
    gen.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"lpakit: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except FileNotFoundError as exc:
        print(f"lpakit: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MemoryError:
        print("lpakit: out of memory allocating the graph or hashtable arena", file=sys.stderr)
        return EXIT_INPUT
    except (GraphFormatError, ValidationError, ValueError) as exc:
        print(f"lpakit: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
