"""Dataset directories (JSON manifest + CSV files) and synthetic generators.

A dataset directory holds ``manifest.json``::

    {
      "format_version": 1,
      "name": "acm",
      "node_types": [{"name": "paper", "features": "paper.csv", "feature_dim": 128}, ...],
      "relations": [
        {"name": "paper-author", "src": "paper", "dst": "author",
         "inverse": "author-paper", "edges": "paper-author.csv"},
        ...
      ],
      "target": {"type": "paper", "labels": "labels.csv", "num_classes": 3}
    }

Feature files have an ``id`` column then one column per dimension; edge
files have ``src,dst``; the label file has ``id,label``. Node ids are
0-based within their type. A relation whose inverse is not listed gets
the inverse created from its edges.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from vnhgcn.errors import ConfigError, DataError, StructuralError
from vnhgcn.graph import HeteroGraph, NetworkSchema, build_graph

MANIFEST = "manifest.json"
FORMAT_VERSION = 1


class MissingFileError(DataError):
    pass


class ManifestError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class DanglingEdgeError(DataError):
    pass


class UnknownClassError(DataError):
    pass


def _read_rows(path: Path):
    if not path.is_file():
        raise MissingFileError(f"{path}: file not found")
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}:1: empty file, expected a header row") from None
        rows = [(reader.line_num, row) for row in reader if row]
    return [h.strip() for h in header], rows


def _read_features(path: Path, declared_dim=None):
    header, rows = _read_rows(path)
    if not header or header[0] != "id":
        raise DataError(f"{path}:1: first column must be 'id'")
    dim = len(header) - 1
    if dim == 0:
        raise DimensionMismatchError(f"{path}:1: node type has no feature columns (dim 0)")
    if declared_dim is not None and declared_dim != dim:
        raise DimensionMismatchError(
            f"{path}:1: manifest declares feature_dim {declared_dim}, file has {dim} columns")
    n = len(rows)
    x = np.empty((n, dim))
    seen = np.zeros(n, dtype=bool)
    for line, row in rows:
        if len(row) != dim + 1:
            raise DimensionMismatchError(f"{path}:{line}: expected {dim + 1} fields, got {len(row)}")
        try:
            i = int(row[0])
            vals = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise DataError(f"{path}:{line}: {exc}") from None
        if not 0 <= i < n or seen[i]:
            raise DataError(f"{path}:{line}: node id {i} is duplicated or outside 0..{n - 1}")
        seen[i] = True
        x[i] = vals
    return x


def _read_edges(path: Path, n_src: int, n_dst: int):
    header, rows = _read_rows(path)
    if header[:2] != ["src", "dst"]:
        raise DataError(f"{path}:1: header must be 'src,dst'")
    e = np.empty((len(rows), 2), dtype=np.int64)
    for k, (line, row) in enumerate(rows):
        try:
            s, d = int(row[0]), int(row[1])
        except (ValueError, IndexError):
            raise DataError(f"{path}:{line}: expected two integer ids") from None
        if not 0 <= s < n_src:
            raise DanglingEdgeError(f"{path}:{line}: src {s} outside 0..{n_src - 1}")
        if not 0 <= d < n_dst:
            raise DanglingEdgeError(f"{path}:{line}: dst {d} outside 0..{n_dst - 1}")
        e[k] = s, d
    return e


def _read_labels(path: Path, n: int, num_classes: int):
    header, rows = _read_rows(path)
    if header[:2] != ["id", "label"]:
        raise DataError(f"{path}:1: header must be 'id,label'")
    y = np.full(n, -1, dtype=np.int64)
    for line, row in rows:
        try:
            i, c = int(row[0]), int(row[1])
        except (ValueError, IndexError):
            raise DataError(f"{path}:{line}: expected integer id and label") from None
        if not 0 <= i < n:
            raise DanglingEdgeError(f"{path}:{line}: node id {i} outside 0..{n - 1}")
        if not 0 <= c < num_classes:
            raise UnknownClassError(f"{path}:{line}: class {c} outside 0..{num_classes - 1}")
        y[i] = c
    return y


@dataclass
class DatasetManifest:
    root: Path
    name: str
    node_types: list[dict]
    relations: list[dict]
    target: dict

    @classmethod
    def read(cls, path) -> DatasetManifest:
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST
        if not path.is_file():
            raise MissingFileError(f"{path}: manifest not found")
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        if d.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
            raise ManifestError(f"{path}: unsupported format_version {d.get('format_version')}")
        for key in ("node_types", "relations", "target"):
            if key not in d:
                raise ManifestError(f"{path}: missing key {key!r}")
        return cls(path.parent, d.get("name", path.parent.name), d["node_types"],
                   d["relations"], d["target"])

    def schema(self) -> NetworkSchema:
        names = [t["name"] for t in self.node_types]
        declared = {r["name"] for r in self.relations}
        rels = []
        for r in self.relations:
            if "inverse" not in r:
                raise ManifestError(f"relation {r['name']!r} does not declare its inverse")
            rels.append((r["name"], r["src"], r["dst"], r["inverse"]))
        for r in self.relations:
            if r["inverse"] not in declared:
                rels.append((r["inverse"], r["dst"], r["src"], r["name"]))
                declared.add(r["inverse"])
        try:
            return NetworkSchema.build(names, rels)
        except StructuralError as exc:
            raise ManifestError(str(exc)) from None


def load_dataset(path) -> HeteroGraph:
    m = DatasetManifest.read(path)
    schema = m.schema()
    features = {}
    for t in m.node_types:
        if "features" not in t:
            raise ManifestError(f"node type {t['name']!r} has no features file")
        x = _read_features(m.root / t["features"], t.get("feature_dim"))
        if "count" in t and t["count"] != x.shape[0]:
            raise DimensionMismatchError(f"{m.root / t['features']}: manifest count {t['count']} "
                                         f"!= {x.shape[0]} rows")
        features[t["name"]] = x
    edges = {}
    for r in m.relations:
        if "edges" in r:
            n_src = features[r["src"]].shape[0]
            n_dst = features[r["dst"]].shape[0]
            edges[r["name"]] = _read_edges(m.root / r["edges"], n_src, n_dst)
        elif r["inverse"] not in {x["name"] for x in m.relations if "edges" in x}:
            raise ManifestError(f"relation {r['name']!r}: neither it nor its inverse has an edges file")
    tgt = m.target
    ttype = tgt["type"]
    if ttype not in features:
        raise ManifestError(f"target type {ttype!r} is not a node type")
    num_classes = int(tgt["num_classes"])
    labels = None
    if "labels" in tgt:
        labels = _read_labels(m.root / tgt["labels"], features[ttype].shape[0], num_classes)
    try:
        return build_graph(schema, features, edges, labels, ttype, num_classes)
    except StructuralError as exc:
        raise DataError(f"{m.root}: {exc}") from exc


def save_dataset(graph: HeteroGraph, directory, name: str = "dataset"):
    """Write ``graph`` in the directory format; ``load_dataset`` reads it back exactly."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    schema = graph.schema
    node_types = []
    for t, x in zip(schema.node_types, graph.features):
        fname = f"{t.name}.features.csv"
        with open(root / fname, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["id"] + [f"f{j}" for j in range(x.shape[1])])
            for i, row in enumerate(x):
                w.writerow([i] + [repr(float(v)) for v in row])
        node_types.append({"name": t.name, "features": fname, "feature_dim": int(x.shape[1]),
                           "count": int(x.shape[0])})
    relations = []
    for r, a in zip(schema.relations, graph.adjacency):
        entry = {"name": r.name, "src": schema.node_types[r.src_type].name,
                 "dst": schema.node_types[r.dst_type].name,
                 "inverse": schema.relations[r.inverse].name}
        # one edges file per inverse pair; the other direction is derived on load
        if r.inverse >= r.index:
            entry["edges"] = f"{r.name}.edges.csv"
            with open(root / entry["edges"], "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["src", "dst"])
                w.writerows(a.edges().tolist())
        relations.append(entry)
    target = {}
    if graph.target_type is not None:
        target = {"type": schema.node_types[graph.target_type].name,
                  "num_classes": int(graph.num_classes)}
        if graph.labels is not None:
            target["labels"] = "labels.csv"
            with open(root / "labels.csv", "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["id", "label"])
                w.writerows([i, int(c)] for i, c in enumerate(graph.labels) if c >= 0)
    manifest = {"format_version": FORMAT_VERSION, "name": name, "node_types": node_types,
                "relations": relations, "target": target}
    (root / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
    return root / MANIFEST


SYNTHETIC_KINDS = ("planted-partition", "typed-chain")


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings.

    planted-partition: ``n_target`` labeled nodes whose features sit at
    ``separation`` along the class axis plus unit-variance noise; ``n_bridge``
    nodes each link ``bridge_degree`` targets, picking from their own class
    with probability ``intra_class``; ``n_context`` nodes link bridges.
    typed-chain: a path of ``chain_length`` nodes alternating types A and B.
    """

    kind: str = "planted-partition"
    n_target: int = 300
    n_bridge: int = 150
    n_context: int = 30
    num_classes: int = 3
    feature_dim: int = 16
    separation: float = 10.0
    noise: float = 1.0
    intra_class: float = 0.9
    bridge_degree: int = 4
    context_degree: int = 5
    chain_length: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SYNTHETIC_KINDS:
            raise ConfigError(f"kind must be one of {SYNTHETIC_KINDS}, got {self.kind!r}")
        sizes = (self.n_target, self.n_bridge, self.n_context, self.num_classes,
                 self.feature_dim, self.bridge_degree, self.context_degree, self.chain_length)
        if min(sizes) < 1:
            raise ConfigError("generator sizes must be positive")
        if self.kind == "planted-partition":
            if self.separation <= 0:
                raise ConfigError("separation must be positive")
            if self.feature_dim < self.num_classes:
                raise ConfigError("feature_dim must be >= num_classes for orthogonal class means")
            if not 0.0 <= self.intra_class <= 1.0:
                raise ConfigError("intra_class must be a probability")


def generate_synthetic(spec: SyntheticSpec) -> HeteroGraph:
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "typed-chain":
        return _typed_chain(spec, rng)
    return _planted_partition(spec, rng)


def _planted_partition(spec: SyntheticSpec, rng) -> HeteroGraph:
    C, n = spec.num_classes, spec.n_target
    labels = rng.permutation(np.arange(n) % C)
    means = np.zeros((C, spec.feature_dim))
    means[np.arange(C), np.arange(C)] = spec.separation
    x_target = means[labels] + spec.noise * rng.standard_normal((n, spec.feature_dim))
    by_class = [np.flatnonzero(labels == c) for c in range(C)]

    bridge_class = np.arange(spec.n_bridge) % C
    tb = []
    for b, c in enumerate(bridge_class):
        for _ in range(spec.bridge_degree):
            if C == 1 or rng.random() < spec.intra_class:
                pool = by_class[c]
            else:
                others = [k for k in range(C) if k != c]
                pool = by_class[others[rng.integers(len(others))]]
            tb.append((pool[rng.integers(len(pool))], b))
    bc = [(rng.integers(spec.n_bridge), c)
          for c in range(spec.n_context) for _ in range(spec.context_degree)]

    schema = NetworkSchema.build(
        ["target", "bridge", "context"],
        [("target-bridge", "target", "bridge", "bridge-target"),
         ("bridge-target", "bridge", "target", "target-bridge"),
         ("bridge-context", "bridge", "context", "context-bridge"),
         ("context-bridge", "context", "bridge", "bridge-context")])
    features = {
        "target": x_target,
        "bridge": rng.standard_normal((spec.n_bridge, spec.feature_dim)),
        "context": rng.standard_normal((spec.n_context, spec.feature_dim)),
    }
    edges = {"target-bridge": np.array(tb, dtype=np.int64).reshape(-1, 2),
             "bridge-context": np.array(bc, dtype=np.int64).reshape(-1, 2)}
    return build_graph(schema, features, edges, labels, "target", C)


def _typed_chain(spec: SyntheticSpec, rng) -> HeteroGraph:
    L = spec.chain_length
    n_a, n_b = (L + 1) // 2, L // 2
    # chain position p holds node p // 2 of type A (even p) or B (odd p)
    ab = [(p // 2, (p + 1) // 2) for p in range(0, L - 1, 2)]   # A at p, B at p+1
    ab += [((p + 1) // 2, p // 2) for p in range(1, L - 1, 2)]  # B at p, A at p+1 (as A, B)
    ab = sorted(ab)
    schema = NetworkSchema.build(["A", "B"], [("A-B", "A", "B", "B-A"), ("B-A", "B", "A", "A-B")])
    features = {"A": rng.standard_normal((n_a, spec.feature_dim)),
                "B": rng.standard_normal((n_b, spec.feature_dim))}
    labels = np.arange(n_a) % spec.num_classes
    edges = {"A-B": np.array(ab, dtype=np.int64).reshape(-1, 2)}
    return build_graph(schema, features, edges, labels, "A", spec.num_classes)

