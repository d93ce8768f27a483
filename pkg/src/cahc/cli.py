"""Command-line experiment harness.

Subcommands: ``train``, ``eval``, ``ablate``, ``sweep``, ``synth``.
Exit codes: 0 success, 2 configuration or input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .cluster import TrainingError, kmeans, kmeans_seed, run_cahc
from .config import ConfigError, resolve_config, schemas, synth_spec, train_config
from .core import (
    Hypergraph,
    HypergraphError,
    atomic_write_text,
    load_hypergraph,
    read_embeddings,
    remove_isolated_nodes,
    write_embeddings,
    write_hypergraph,
)
from .metrics import evaluate
from .synth import generate

log = logging.getLogger("cahc")

METRIC_NAMES = ("acc", "f1_macro", "nmi", "ari", "silhouette")
TRACE_COLUMNS = ("stage", "epoch", "loss", "hyper", "node", "clus")
VARIANTS = ("full", "re", "hy", "no", "cl", "mu")
GRIDS = {
    "masks": {"p_f": [round(0.1 * i, 1) for i in range(10)], "p_m": [round(0.1 * i, 1) for i in range(10)]},
    "dim": {"embedding_dim": [128, 256, 512, 768, 1024, 2048]},
    "heads": {"heads": [1, 2, 4, 8], "head_dim": [64, 128, 256, 512]},
}


class InputError(ValueError):
    """Bad command-line input (mismatched files, impossible k, ...)."""


# ------------------------------------------------------------------ helpers


def load_dataset(cfg: dict[str, Any], with_ids: bool = False):
    """The configured hypergraph; with ``with_ids`` also the original id of each kept node."""
    if cfg["synth"] is not None:
        h = generate(synth_spec(cfg["synth"]))
    elif cfg["edges"] is not None:
        h = load_hypergraph(cfg["edges"], cfg["features"], cfg["labels"])
    else:
        raise ConfigError("no dataset: set 'edges'/'features' (and 'labels') or 'synth'")
    ids = np.arange(h.n_nodes)
    if cfg["remove_isolated"]:
        ids = np.flatnonzero(h.incidence.sum(axis=1) > 0)
        h = remove_isolated_nodes(h)
    return (h, ids) if with_ids else h


def _summary(reports: list[dict | None]) -> tuple[dict | None, dict | None]:
    rows = [r for r in reports if r is not None]
    if not rows:
        return None, None
    mean, std = {}, {}
    for name in METRIC_NAMES:
        vals = [r[name] for r in rows if r[name] is not None]
        mean[name] = float(np.mean(vals)) if vals else None
        std[name] = float(np.std(vals)) if vals else None
    return mean, std


def _trace_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TRACE_COLUMNS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def _rows_csv(rows: list[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else row[k]) for k in columns})
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _run_seeds(h: Hypergraph, cfg: dict, seeds: Sequence[int], **changes) -> list[tuple[int, Any, dict | None, float]]:
    out = []
    for seed in seeds:
        tc = train_config(cfg, seed=seed, **changes)
        if tc.k is None:
            tc.k = h.k_classes
        if not tc.k:
            raise ConfigError("number of clusters unknown: set 'k' or supply labels")
        if tc.k > h.n_nodes:
            raise ConfigError(f"k={tc.k} exceeds the number of nodes {h.n_nodes}")
        start = time.perf_counter()
        result = run_cahc(h, tc)
        elapsed = time.perf_counter() - start
        report = None
        if h.labels is not None:
            report = evaluate(result.assignments, h.labels, result.z_final, seed=seed).to_dict()
        log.info("seed %d done in %.1fs%s", seed, elapsed, f" ari={report['ari']:.4f}" if report else "")
        out.append((seed, result, report, elapsed))
    return out


def _seeds(cfg: dict) -> list[int]:
    return [cfg["seed"] + r for r in range(cfg["repeats"])]


# ------------------------------------------------------------------ commands


def cmd_train(cfg: dict, out: Path) -> dict:
    h, ids = load_dataset(cfg, with_ids=True)
    # row i of every per-seed file is original node ids[i]
    atomic_write_text(out / "nodes.txt", "".join(f"{int(i)}\n" for i in ids))
    if h.labels is not None:
        atomic_write_text(out / "labels.txt", "".join(f"{int(v)}\n" for v in h.labels))
    per_seed = []
    for seed, result, report, elapsed in _run_seeds(h, cfg, _seeds(cfg)):
        files = {
            "assignments": f"assignments_seed{seed}.txt",
            "embeddings": f"embeddings_seed{seed}.txt",
            "trace": f"trace_seed{seed}.csv",
        }
        atomic_write_text(out / files["assignments"], "".join(f"{int(v)}\n" for v in result.assignments))
        write_embeddings(result.z_final, out / files["embeddings"])
        atomic_write_text(out / files["trace"], _trace_csv(result.stage1_trace + result.stage2_trace))
        per_seed.append({"seed": seed, "metrics": report, "runtime_s": elapsed, "files": files})
    mean, std = _summary([p["metrics"] for p in per_seed])
    doc = {
        "config": cfg,
        "n_nodes": h.n_nodes,
        "n_edges": h.n_edges,
        "per_seed": per_seed,
        "mean": mean,
        "std": std,
        "version": __version__,
    }
    atomic_write_text(out / "metrics.json", _dump(doc))
    return doc


def cmd_eval(embeddings: Path, labels: Path, k: int, seed: int, out: Path | None, restarts: int = 10) -> dict:
    z = read_embeddings(embeddings)
    y = np.loadtxt(labels, dtype=np.int64, ndmin=1)
    if y.shape[0] != z.shape[0]:
        raise InputError(f"embeddings have {z.shape[0]} rows but labels have {y.shape[0]}")
    if k < 1 or k > z.shape[0]:
        raise InputError(f"k={k} must lie in [1, {z.shape[0]}]")
    state = kmeans(z, k, seed=kmeans_seed(seed), restarts=restarts)
    doc = evaluate(state.assignments, y, z, seed=seed).to_dict()
    if out is not None:
        atomic_write_text(out / "eval.json", _dump(doc))
    return doc


def cmd_ablate(cfg: dict, out: Path) -> list[dict]:
    h = load_dataset(cfg)
    if h.labels is None:
        raise ConfigError("ablation needs ground-truth labels")
    base = [a for a in cfg["ablate"]]
    rows, detail = [], {}
    for variant in VARIANTS:
        ablate = base if variant == "full" else sorted(set(base) | {variant})
        runs = _run_seeds(h, cfg, _seeds(cfg), ablate=tuple(ablate))
        reports = [r for _, _, r, _ in runs]
        mean, std = _summary(reports)
        row = {"variant": variant}
        for name in METRIC_NAMES:
            row[f"{name}_mean"] = mean[name]
            row[f"{name}_std"] = std[name]
        rows.append(row)
        detail[variant] = reports
    columns = ["variant"] + [f"{m}_{s}" for m in METRIC_NAMES for s in ("mean", "std")]
    atomic_write_text(out / "ablation.csv", _rows_csv(rows, columns))
    atomic_write_text(out / "ablation.json", _dump({"config": cfg, "variants": detail}))
    return rows


def parse_grid(specs: Sequence[str]) -> dict[str, list]:
    """``["masks"]`` or ``["p_f=0.1,0.2", "p_m=0.3"]`` -> ordered key -> values."""
    grid: dict[str, list] = {}
    for spec in specs:
        if spec in GRIDS:
            grid.update(GRIDS[spec])
            continue
        key, sep, values = spec.partition("=")
        if not sep or not values:
            raise ConfigError(f"bad grid spec {spec!r}; use a name ({', '.join(GRIDS)}) or KEY=v1,v2")
        grid[key.strip()] = [json.loads(v) for v in values.split(",")]
    if not grid:
        raise ConfigError("empty sweep grid")
    return grid


def cmd_sweep(cfg: dict, grid: dict[str, list], out: Path) -> list[dict]:
    h = load_dataset(cfg)
    if h.labels is None:
        raise ConfigError("sweep needs ground-truth labels")
    keys = list(grid)
    rows = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        point = dict(zip(keys, combo))
        cell_cfg = resolve_config(overrides={**cfg, **point})
        runs = _run_seeds(h, cell_cfg, _seeds(cell_cfg))
        mean, std = _summary([r for _, _, r, _ in runs])
        row = dict(point)
        for name in METRIC_NAMES:
            row[f"{name}_mean"] = mean[name]
            row[f"{name}_std"] = std[name]
        rows.append(row)
    columns = keys + [f"{m}_{s}" for m in METRIC_NAMES for s in ("mean", "std")]
    atomic_write_text(out / "sweep.csv", _rows_csv(rows, columns))
    return rows


def cmd_synth(spec_values: dict, out: Path) -> dict:
    h = generate(synth_spec(spec_values))
    paths = write_hypergraph(h, out)
    return {k: str(v) for k, v in paths.items()}


# ------------------------------------------------------------------ argparse


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file (flat key/value)")
    parser.add_argument("--preset", help="named hyperparameter preset")
    parser.add_argument("--seed", type=int, help="base seed (overrides config)")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--threads", type=int, default=1, help="BLAS threads (1 = deterministic)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key; VALUE is parsed as JSON when possible")
    parser.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cahc", description=__doc__.splitlines()[0])
    parser.add_argument("--schema", action="store_true", help="print the JSON schemas and exit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("train", help="train and cluster, writing metrics/assignments/embeddings/traces")
    _common(p)

    p = sub.add_parser("eval", help="k-means + metrics on stored embeddings")
    _common(p)
    p.add_argument("--embeddings", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--k", type=int, required=True)

    p = sub.add_parser("ablate", help="compare the full model against the five ablations")
    _common(p)

    p = sub.add_parser("sweep", help="grid sweep over config keys")
    _common(p)
    p.add_argument("--grid", action="append", required=True,
                   help=f"grid name ({', '.join(GRIDS)}) or KEY=v1,v2,...; repeatable")

    p = sub.add_parser("synth", help="write a planted-partition dataset")
    _common(p)
    for name, typ in (("n_nodes", int), ("k_blocks", int), ("edges_per_block", int), ("edge_size", int),
                      ("noise_rate", float), ("feature_dim", int), ("feature_signal", float)):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ)
    return parser


def _overrides(args) -> dict[str, Any]:
    values = {}
    for item in args.set:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            values[key] = json.loads(raw)
        except json.JSONDecodeError:
            values[key] = raw
    if args.seed is not None:
        values["seed"] = args.seed
    return values


def _dispatch(args) -> Any:
    out = args.out
    if args.command == "synth":
        cfg = resolve_config(args.config, args.preset, _overrides(args))
        spec = dict(cfg["synth"] or {})
        for name in ("n_nodes", "k_blocks", "edges_per_block", "edge_size", "noise_rate",
                     "feature_dim", "feature_signal"):
            if getattr(args, name) is not None:
                spec[name] = getattr(args, name)
        if args.seed is not None:
            spec["seed"] = args.seed
        return cmd_synth(spec, out)
    if args.command == "eval":
        cfg = resolve_config(args.config, args.preset, _overrides(args))
        return cmd_eval(args.embeddings, args.labels, args.k, cfg["seed"], out, cfg["kmeans_restarts"])
    cfg = resolve_config(args.config, args.preset, _overrides(args))
    if args.command == "train":
        doc = cmd_train(cfg, out)
        return {"mean": doc["mean"], "std": doc["std"], "out": str(out)}
    if args.command == "ablate":
        return cmd_ablate(cfg, out)
    if args.command == "sweep":
        return cmd_sweep(cfg, parse_grid(args.grid), out)
    raise AssertionError(args.command)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.schema:
        sys.stdout.write(_dump(schemas()))
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    from threadpoolctl import threadpool_limits

    try:
        with threadpool_limits(limits=max(args.threads, 1)):
            result = _dispatch(args)
    except (ConfigError, InputError, HypergraphError, OSError, IndexError) as exc:
        print(f"cahc: error: {exc}", file=sys.stderr)
        return 2
    except (TrainingError, FloatingPointError) as exc:
        print(f"cahc: numeric failure: {exc}", file=sys.stderr)
        return 3
    sys.stdout.write(_dump(result))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
