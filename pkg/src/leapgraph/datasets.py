"""Dataset container, synthetic edge-count task, TU-format ingestion, and
a JSONL graph interchange format."""
from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .graphs import FeaturedGraph, build_graph


@dataclass
class Dataset:
    graphs: list
    targets: list  # class index per graph, or real vector for regression
    name: str = ""
    task: str = "classification"

    def __post_init__(self):
        if len(self.graphs) != len(self.targets):
            raise ValueError("graphs and targets lengths differ")
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")

    def __len__(self):
        return len(self.graphs)

    @property
    def feature_dim(self) -> int:
        return self.graphs[0].feature_dim

    @property
    def num_classes(self) -> int:
        if self.task != "classification":
            raise ValueError("num_classes only defined for classification")
        return int(max(self.targets)) + 1


@dataclass
class SyntheticSpec:
    count: int = 40000
    seed: int = 0

    def __post_init__(self):
        if self.count < 4:
            raise ValueError("need at least 4 graphs so all classes can appear")


_TRIPLE_EDGES = [(0, 1), (0, 2), (1, 2)]


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    """Three-node graphs labeled by their edge count (0..3).

    Features are i.i.d. uniform on the closed unit disk (rejection
    sampling from the square), so they carry no label information. The
    edge count is uniform over {0,1,2,3} and the edge subset of that size
    is chosen uniformly.
    """
    rng = np.random.default_rng(spec.seed)
    graphs, targets = [], []
    for _ in range(spec.count):
        feats = np.empty((3, 2))
        for i in range(3):
            while True:
                p = rng.uniform(-1.0, 1.0, 2)
                if p @ p <= 1.0:
                    feats[i] = p
                    break
        c = int(rng.integers(0, 4))
        chosen = sorted(rng.choice(3, size=c, replace=False).tolist())
        edges = [_TRIPLE_EDGES[i] for i in chosen]
        graphs.append(build_graph(3, edges, feats))
        targets.append(c)
    return Dataset(graphs, targets, name="synthetic-edge-count")


# -- TU benchmark format ---------------------------------------------------

def _tu_error(path, line_no, msg):
    return ValueError(f"{path}:{line_no}: {msg}")


def _read_int_rows(path, width):
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != width:
                raise _tu_error(path, line_no,
                                f"expected {width} comma-separated values")
            try:
                rows.append([int(float(p)) for p in parts])
            except ValueError:
                raise _tu_error(path, line_no, f"non-numeric content {line!r}")
    return rows


def _read_float_rows(path):
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(p) for p in line.split(",")])
            except ValueError:
                raise _tu_error(path, line_no, f"non-numeric content {line!r}")
    return rows


def parse_tu(directory: str) -> Dataset:
    """Parse the public TU benchmark text layout into a Dataset.

    Expects DS_A.txt, DS_graph_indicator.txt, DS_graph_labels.txt and
    optionally DS_node_attributes.txt / DS_node_labels.txt, all 1-indexed.
    Node attributes become features; absent those, node labels are
    one-hot encoded; absent both, every node gets the constant feature 1.
    Graph labels are remapped to contiguous 0-based classes in sorted
    order of the original labels.
    """
    names = os.listdir(directory)
    suffix = "_A.txt"
    prefixes = sorted(n[:-len(suffix)] for n in names if n.endswith(suffix))
    if not prefixes:
        raise FileNotFoundError(f"no *_A.txt edge file in {directory}")
    ds = prefixes[0]

    def path(kind):
        return os.path.join(directory, f"{ds}_{kind}.txt")

    for kind in ("A", "graph_indicator", "graph_labels"):
        if not os.path.exists(path(kind)):
            raise FileNotFoundError(f"missing mandatory file {path(kind)}")

    edges = _read_int_rows(path("A"), 2)
    indicator = [r[0] for r in _read_int_rows(path("graph_indicator"), 1)]
    raw_labels = [r[0] for r in _read_int_rows(path("graph_labels"), 1)]
    n_nodes = len(indicator)
    n_graphs = len(raw_labels)
    if indicator and (min(indicator) < 1 or max(indicator) > n_graphs):
        raise ValueError(
            f"{path('graph_indicator')}: graph ids must lie in 1..{n_graphs}")

    if os.path.exists(path("node_attributes")):
        feats = np.asarray(_read_float_rows(path("node_attributes")))
        if feats.shape[0] != n_nodes:
            raise ValueError(
                f"{path('node_attributes')}: {feats.shape[0]} rows for "
                f"{n_nodes} nodes")
    elif os.path.exists(path("node_labels")):
        codes = [r[0] for r in _read_int_rows(path("node_labels"), 1)]
        if len(codes) != n_nodes:
            raise ValueError(
                f"{path('node_labels')}: {len(codes)} rows for {n_nodes} nodes")
        values = sorted(set(codes))
        lut = {c: i for i, c in enumerate(values)}
        feats = np.zeros((n_nodes, len(values)))
        feats[np.arange(n_nodes), [lut[c] for c in codes]] = 1.0
    else:
        feats = np.ones((n_nodes, 1))

    # global 1-based node index -> (graph, local 0-based index)
    local = np.zeros(n_nodes, dtype=np.intp)
    sizes = np.zeros(n_graphs, dtype=np.intp)
    for i, gid in enumerate(indicator):
        local[i] = sizes[gid - 1]
        sizes[gid - 1] += 1

    per_graph_edges = [set() for _ in range(n_graphs)]
    for line_no, (u, v) in enumerate(edges, 1):
        if not (1 <= u <= n_nodes and 1 <= v <= n_nodes):
            raise _tu_error(path("A"), line_no, f"node id out of range ({u},{v})")
        gu, gv = indicator[u - 1], indicator[v - 1]
        if gu != gv:
            raise _tu_error(path("A"), line_no,
                            f"edge spans graphs {gu} and {gv}")
        if u == v:
            continue  # TU files occasionally carry self-loops; drop them
        a, b = local[u - 1], local[v - 1]
        per_graph_edges[gu - 1].add((min(a, b), max(a, b)))

    rows_per_graph = [[] for _ in range(n_graphs)]
    for i, gid in enumerate(indicator):
        rows_per_graph[gid - 1].append(i)

    label_values = sorted(set(raw_labels))
    remap = {c: i for i, c in enumerate(label_values)}
    graphs, targets = [], []
    for gid in range(n_graphs):
        graphs.append(build_graph(sizes[gid], sorted(per_graph_edges[gid]),
                                  feats[rows_per_graph[gid]]))
        targets.append(remap[raw_labels[gid]])
    return Dataset(graphs, targets, name=ds)


# -- JSONL interchange -----------------------------------------------------

def write_jsonl(dataset: Dataset, path: str) -> None:
    with open(path, "w") as fh:
        for g, t in zip(dataset.graphs, dataset.targets):
            target = t if np.isscalar(t) or isinstance(t, int) else list(
                np.asarray(t, dtype=float))
            fh.write(json.dumps({
                "nodes": g.num_nodes,
                "edges": [[int(u), int(v)] for u, v in g.edges],
                "features": [list(row) for row in g.features],
                "target": target,
            }) + "\n")


def read_jsonl(path: str) -> Dataset:
    graphs, targets = [], []
    task = "classification"
    with open(path) as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: malformed JSON: {exc}")
            for key in ("nodes", "edges", "features", "target"):
                if key not in obj:
                    raise ValueError(f"{path}:{line_no}: missing {key!r}")
            try:
                graphs.append(build_graph(obj["nodes"], obj["edges"],
                                          obj["features"]))
            except ValueError as exc:
                raise ValueError(f"{path}:{line_no}: {exc}")
            t = obj["target"]
            if isinstance(t, list):
                task = "regression"
                targets.append(np.asarray(t, dtype=np.float64))
            else:
                targets.append(int(t))
    return Dataset(graphs, targets, name=os.path.basename(path), task=task)
