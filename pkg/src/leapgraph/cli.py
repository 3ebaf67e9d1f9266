"""Command-line entry point: ect | encode | synth | train | ablate.

Diagnostics go to stderr; data goes to files or stdout. Every subcommand
is deterministic under (--seed, flags, input bytes).
"""
from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import tempfile

import numpy as np

from .datasets import (Dataset, SyntheticSpec, generate_synthetic, parse_tu,
                       read_jsonl, write_jsonl)
from .ect import DirectionSet, ThresholdGrid, exact_ect, local_ect, sample_directions, smooth_ect
from .encoders import (LeapConfig, LeapParams, init_leap_params, lape,
                       leap_encode, rwpe)
from .models import ModelConfig
from .training import BaselinePeConfig, TrainConfig, train_eval

_PROJ_FLAGS = {"linear": "linear", "conv1d": "conv1d", "deepsets": "deepsets",
               "attn": "attention", "attn-pe": "attention_pe"}
_PARAMS_VERSION = 1


def _int_list(text):
    return [int(p) for p in text.split(",") if p.strip()]


def _float_list(text):
    return [float(p) for p in text.split(",") if p.strip()]


def _write_json(obj, out):
    if out is None or out == "-":
        json.dump(obj, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        tmp = out + ".tmp"
        with open(tmp, "w") as fh:
            json.dump(obj, fh, indent=2)
        os.replace(tmp, out)


def save_leap_params(params: LeapParams, path: str) -> None:
    cfg = params.cfg
    doc = {
        "version": _PARAMS_VERSION,
        "seed": cfg.seed,
        "config": {
            "hops": list(cfg.hops), "n_dirs": cfg.n_dirs,
            "n_thresholds": cfg.n_thresholds, "sharpness": cfg.sharpness,
            "projection": cfg.projection, "out_dim": cfg.out_dim,
            "learn_directions": cfg.learn_directions,
        },
        "directions": params.directions.vectors.tolist(),
        "thresholds": params.grid.values.tolist(),
        "projections": [
            {name: {"shape": list(p.shape), "data": p.data.reshape(-1).tolist()}
             for name, p in level.items()}
            for level in params.proj
        ],
    }
    _write_json(doc, path)


def load_leap_params(path: str) -> LeapParams:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != _PARAMS_VERSION:
        raise ValueError(f"unsupported parameter file version {doc.get('version')}")
    c = doc["config"]
    cfg = LeapConfig(hops=tuple(c["hops"]), n_dirs=c["n_dirs"],
                     n_thresholds=c["n_thresholds"], sharpness=c["sharpness"],
                     projection=c["projection"], out_dim=c["out_dim"],
                     learn_directions=c["learn_directions"], seed=doc["seed"])
    dirs_data = np.asarray(doc["directions"], dtype=np.float64)
    params = init_leap_params(cfg, dirs_data.shape[1])
    params.directions.param.value.data[...] = dirs_data
    params.grid = ThresholdGrid(np.asarray(doc["thresholds"]))
    for level, stored in zip(params.proj, doc["projections"]):
        for name, p in level.items():
            blob = stored[name]
            p.value.data[...] = np.asarray(blob["data"]).reshape(blob["shape"])
    return params


def _leap_cfg_from_args(args) -> LeapConfig:
    return LeapConfig(hops=tuple(args.hops), n_dirs=args.dirs,
                      n_thresholds=args.thresholds, sharpness=args.sharpness,
                      projection=_PROJ_FLAGS[args.proj], out_dim=args.pe_dim,
                      learn_directions=args.learn_directions, seed=args.seed)


def _add_leap_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dirs", type=int, default=16, help="number of directions")
    p.add_argument("--thresholds", type=int, default=16)
    p.add_argument("--sharpness", type=float, default=16.0)
    p.add_argument("--hops", type=_int_list, default=[1])
    p.add_argument("--pe-dim", type=int, default=10)
    p.add_argument("--proj", choices=sorted(_PROJ_FLAGS), default="linear")


def cmd_ect(args) -> int:
    dataset = read_jsonl(args.input)
    if not dataset.graphs:
        print("error: input contains no graphs", file=sys.stderr)
        return 1
    reports = []
    for gi, g in enumerate(dataset.graphs):
        dirs = sample_directions(g.feature_dim, args.dirs, seed=args.seed)
        grid = ThresholdGrid.uniform(args.thresholds)
        entry = {"graph": gi, "directions": dirs.vectors.tolist(),
                 "thresholds": grid.values.tolist()}
        if args.node is not None:
            if args.exact:
                entry["exact"] = local_ect(
                    g, args.node, args.hops[0], dirs, grid,
                    mode="exact").entries.tolist()
            if args.smoothed:
                entry["smoothed"] = local_ect(
                    g, args.node, args.hops[0], dirs, grid,
                    sharpness=args.sharpness,
                    mode="smoothed").entries.data.tolist()
        else:
            if args.exact:
                entry["exact"] = exact_ect(g, dirs, grid).entries.tolist()
            if args.smoothed:
                entry["smoothed"] = smooth_ect(
                    g, dirs, grid, args.sharpness).entries.data.tolist()
        reports.append(entry)
    _write_json(reports, args.out)
    return 0


def cmd_encode(args) -> int:
    dataset = read_jsonl(args.input)
    if args.pe == "leap":
        if args.params:
            params = load_leap_params(args.params)
            cfg = params.cfg
        elif args.untrained:
            cfg = _leap_cfg_from_args(args)
            params = init_leap_params(cfg, dataset.feature_dim)
        else:
            print("error: leap encoding needs --params FILE or --untrained",
                  file=sys.stderr)
            return 1
        pes = [leap_encode(g, cfg, params) for g in dataset.graphs]
    elif args.pe == "rwpe":
        pes = [rwpe(g, args.pe_dim) for g in dataset.graphs]
    else:
        pes = [lape(g, args.pe_dim) for g in dataset.graphs]
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w")
    try:
        for g, t, pe in zip(dataset.graphs, dataset.targets, pes):
            target = t if isinstance(t, int) else list(np.asarray(t, float))
            out.write(json.dumps({
                "nodes": g.num_nodes,
                "edges": [[int(u), int(v)] for u, v in g.edges],
                "features": [list(r) for r in g.features],
                "target": target,
                "pe": [list(r) for r in pe],
            }) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_synth(args) -> int:
    dataset = generate_synthetic(SyntheticSpec(count=args.count, seed=args.seed))
    write_jsonl(dataset, args.out)
    return 0


def _load_dataset(path: str) -> Dataset:
    if os.path.isdir(path):
        return parse_tu(path)
    return read_jsonl(path)


def _run_cell(args, dataset, hops, pe_dim, dirs, sharpness):
    task = dataset.task
    pe_cfg = None
    if args.pe == "leap":
        pe_cfg = LeapConfig(hops=tuple(hops), n_dirs=dirs,
                            n_thresholds=args.thresholds, sharpness=sharpness,
                            projection=_PROJ_FLAGS[args.proj], out_dim=pe_dim,
                            learn_directions=args.learn_directions,
                            seed=args.seed)
    elif args.pe in ("rwpe", "lape"):
        pe_cfg = BaselinePeConfig(args.pe, pe_dim)
    in_dim = dataset.feature_dim + (pe_dim if pe_cfg is not None else 0)
    if task == "classification":
        out_dim = dataset.num_classes
        loss = "cross_entropy"
    else:
        out_dim = int(np.asarray(dataset.targets[0]).size)
        loss = "mse"
    model_cfg = ModelConfig(backbone=args.model, layers=args.layers,
                            hidden=args.hidden, in_dim=in_dim,
                            out_dim=out_dim, task=task)
    train_cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                            lr=args.lr, folds=args.folds, seed=args.seed,
                            loss=loss)
    return train_eval(model_cfg, pe_cfg, dataset, train_cfg)


def cmd_train(args) -> int:
    dataset = _load_dataset(args.input)
    report = _run_cell(args, dataset, args.hops, args.pe_dim, args.dirs,
                       args.sharpness)
    best = report.pop("_best_fold_params", None)
    if args.params_out and best is not None and best.get("leap") is not None:
        save_leap_params(best["leap"], args.params_out)
    _write_json(report, args.out)
    return 0


def cmd_ablate(args) -> int:
    dataset = _load_dataset(args.input)
    grid = list(itertools.product(args.hops_grid, args.pe_dim_grid,
                                  args.dirs_grid, args.sharpness_grid))
    done = set()
    if args.out and args.out != "-" and os.path.exists(args.out):
        with open(args.out) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    row = json.loads(line)
                    done.add(json.dumps(row["cell"], sort_keys=True))
    out = sys.stdout if args.out in (None, "-") else open(args.out, "a")
    try:
        for hops, pe_dim, dirs, sharp in grid:
            cell = [list(hops) if isinstance(hops, (list, tuple)) else [hops],
                    pe_dim, dirs, sharp]
            key = json.dumps(cell, sort_keys=True)
            if key in done:
                continue
            hop_list = hops if isinstance(hops, (list, tuple)) else [hops]
            report = _run_cell(args, dataset, hop_list, pe_dim, dirs, sharp)
            report.pop("_best_fold_params", None)
            row = {"cell": cell, "hops": hop_list, "pe_dim": pe_dim,
                   "dirs": dirs, "sharpness": sharp,
                   "mean": report["mean"], "std": report["std"]}
            out.write(json.dumps(row) + "\n")
            out.flush()
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _hops_grid(text):
    # "1,2,1+2" -> [[1],[2],[1,2]]
    cells = []
    for part in text.split(","):
        part = part.strip()
        if part:
            cells.append([int(x) for x in part.split("+")])
    return cells


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leapgraph",
        description="Local Euler-characteristic positional encodings for graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ect", help="compute (local) ECT matrices for graphs")
    p.add_argument("input", help="JSONL graph file")
    _add_leap_flags(p)
    p.add_argument("--exact", action="store_true")
    p.add_argument("--smoothed", action="store_true")
    p.add_argument("--node", type=int, default=None,
                   help="restrict to the local ECT of this node")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_ect)

    p = sub.add_parser("encode", help="append per-node PE columns to a dataset")
    p.add_argument("input")
    p.add_argument("pe", choices=["leap", "rwpe", "lape"])
    _add_leap_flags(p)
    p.add_argument("--params", default=None, help="trained parameter file")
    p.add_argument("--untrained", action="store_true")
    p.add_argument("--learn-directions", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_encode)

    p = sub.add_parser("synth", help="generate the synthetic edge-count dataset")
    p.add_argument("--count", type=int, default=40000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    for name in ("train", "ablate"):
        p = sub.add_parser(name)
        p.add_argument("input", help="JSONL file or TU-format directory")
        p.add_argument("--model", choices=["gcn", "gat", "nomp"], default="gcn")
        p.add_argument("--pe", choices=["none", "leap", "rwpe", "lape"],
                       default="none")
        _add_leap_flags(p)
        p.add_argument("--learn-directions", action="store_true")
        p.add_argument("--layers", type=int, default=5)
        p.add_argument("--hidden", type=int, default=32)
        p.add_argument("--folds", type=int, default=5)
        p.add_argument("--epochs", type=int, default=100)
        p.add_argument("--batch-size", type=int, default=32)
        p.add_argument("--lr", type=float, default=1e-3)
        p.add_argument("--out", default=None)
        if name == "train":
            p.add_argument("--params-out", default=None,
                           help="persist learned encoding parameters here")
            p.set_defaults(fn=cmd_train)
        else:
            p.add_argument("--hops-grid", type=_hops_grid, default=[[1]],
                           help="e.g. 1,2,1+2")
            p.add_argument("--pe-dim-grid", type=_int_list, default=[10])
            p.add_argument("--dirs-grid", type=_int_list, default=[16])
            p.add_argument("--sharpness-grid", type=_float_list, default=[16.0])
            p.set_defaults(fn=cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, FloatingPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
