"""Typed heterogeneous graphs: schema, CSR adjacency, normalization, hop distances."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from vnhgcn.errors import ShapeError, StructuralError
from vnhgcn.numerics import kernels


@dataclass(frozen=True)
class NodeType:
    index: int
    name: str


@dataclass(frozen=True)
class Relation:
    """Directed relation ``src_type -> dst_type``; messages flow src to dst."""

    index: int
    name: str
    src_type: int
    dst_type: int
    inverse: int


class NetworkSchema:
    """Meta-graph over node types whose edges are the relations."""

    def __init__(self, node_types: Sequence[NodeType], relations: Sequence[Relation]):
        self.node_types = tuple(node_types)
        self.relations = tuple(relations)
        names = [t.name for t in self.node_types]
        if [t.index for t in self.node_types] != list(range(len(self.node_types))):
            raise StructuralError("node type indices must be dense 0..n-1")
        if len(set(names)) != len(names):
            raise StructuralError(f"duplicate node type names in {names}")
        rnames = [r.name for r in self.relations]
        if [r.index for r in self.relations] != list(range(len(self.relations))):
            raise StructuralError("relation indices must be dense 0..n-1")
        if len(set(rnames)) != len(rnames):
            raise StructuralError(f"duplicate relation names in {rnames}")
        n_types = len(self.node_types)
        for r in self.relations:
            if not (0 <= r.src_type < n_types and 0 <= r.dst_type < n_types):
                raise StructuralError(f"relation {r.name!r} references an unknown node type")
            if not 0 <= r.inverse < len(self.relations):
                raise StructuralError(f"relation {r.name!r} has no inverse")
            inv = self.relations[r.inverse]
            if inv.inverse != r.index or inv.src_type != r.dst_type or inv.dst_type != r.src_type:
                raise StructuralError(
                    f"relation {r.name!r} and its inverse {inv.name!r} are not a swapped pair")
        self._type_by_name = {t.name: t.index for t in self.node_types}
        self._rel_by_name = {r.name: r.index for r in self.relations}

    @classmethod
    def build(cls, type_names: Sequence[str],
              relations: Sequence[tuple[str, str, str, str]]) -> NetworkSchema:
        """Build from names. ``relations`` holds ``(name, src, dst, inverse_name)``."""
        types = [NodeType(i, n) for i, n in enumerate(type_names)]
        tix = {n: i for i, n in enumerate(type_names)}
        rix = {r[0]: i for i, r in enumerate(relations)}
        rels = []
        for i, (name, src, dst, inv) in enumerate(relations):
            for t in (src, dst):
                if t not in tix:
                    raise StructuralError(f"relation {name!r} references unknown type {t!r}")
            if inv not in rix:
                raise StructuralError(f"relation {name!r} declares missing inverse {inv!r}")
            rels.append(Relation(i, name, tix[src], tix[dst], rix[inv]))
        return cls(types, rels)

    @property
    def num_types(self) -> int:
        return len(self.node_types)

    def type_index(self, name_or_index) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            if not 0 <= name_or_index < self.num_types:
                raise StructuralError(f"unknown node type index {name_or_index}")
            return int(name_or_index)
        try:
            return self._type_by_name[name_or_index]
        except KeyError:
            raise StructuralError(f"unknown node type {name_or_index!r}") from None

    def relation_index(self, name_or_index) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            if not 0 <= name_or_index < len(self.relations):
                raise StructuralError(f"unknown relation index {name_or_index}")
            return int(name_or_index)
        try:
            return self._rel_by_name[name_or_index]
        except KeyError:
            raise StructuralError(f"unknown relation {name_or_index!r}") from None

    def incoming(self, type_index: int) -> list[Relation]:
        """Relations whose messages arrive at ``type_index``, in index order."""
        return [r for r in self.relations if r.dst_type == type_index]

    def describe(self) -> str:
        lines = [f"node types ({self.num_types}):"]
        lines += [f"  [{t.index}] {t.name}" for t in self.node_types]
        lines.append(f"relations ({len(self.relations)}):")
        for r in self.relations:
            lines.append(f"  [{r.index}] {r.name}: {self.node_types[r.src_type].name} -> "
                         f"{self.node_types[r.dst_type].name} (inverse {self.relations[r.inverse].name})")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "node_types": [t.name for t in self.node_types],
            "relations": [[r.name, self.node_types[r.src_type].name,
                           self.node_types[r.dst_type].name, self.relations[r.inverse].name]
                          for r in self.relations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> NetworkSchema:
        return cls.build(d["node_types"], [tuple(r) for r in d["relations"]])

    def __eq__(self, other):
        return isinstance(other, NetworkSchema) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))


class TypedAdjacency:
    """Binary CSR adjacency; rows are dst-type nodes, columns src-type nodes."""

    def __init__(self, relation: int, shape: tuple[int, int], indptr, indices):
        self.relation = relation
        self.shape = (int(shape[0]), int(shape[1]))
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.indptr.flags.writeable = False
        self.indices.flags.writeable = False

    @classmethod
    def from_pairs(cls, relation: int, n_dst: int, n_src: int, src, dst) -> TypedAdjacency:
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise ShapeError("src and dst endpoint arrays differ in length")
        if src.size:
            if src.min() < 0 or src.max() >= n_src:
                bad = int(src[(src < 0) | (src >= n_src)][0])
                raise StructuralError(f"source endpoint {bad} out of range [0, {n_src})")
            if dst.min() < 0 or dst.max() >= n_dst:
                bad = int(dst[(dst < 0) | (dst >= n_dst)][0])
                raise StructuralError(f"destination endpoint {bad} out of range [0, {n_dst})")
        # parallel edges collapse to one binary entry
        keys = np.unique(dst * max(n_src, 1) + src)
        rows, cols = np.divmod(keys, max(n_src, 1))
        indptr = np.zeros(n_dst + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n_dst), out=indptr[1:])
        return cls(relation, (n_dst, n_src), indptr, cols)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def rows(self) -> np.ndarray:
        return np.repeat(np.arange(self.shape[0], dtype=np.int64), self.degrees())

    def edges(self) -> np.ndarray:
        """Edge list as an ``(nnz, 2)`` array of ``(src, dst)`` pairs."""
        return np.stack([self.indices, self.rows()], axis=1)

    def edge_set(self) -> set[tuple[int, int]]:
        return set(map(tuple, self.edges().tolist()))

    def transpose(self, relation: int) -> TypedAdjacency:
        return TypedAdjacency.from_pairs(relation, self.shape[1], self.shape[0],
                                         self.rows(), self.indices)

    def masked(self, keep: np.ndarray) -> TypedAdjacency:
        """Copy keeping only entries where ``keep`` (aligned with ``indices``) is true."""
        keep = np.asarray(keep, dtype=bool)
        counts = np.bincount(self.rows()[keep], minlength=self.shape[0])
        indptr = np.zeros(self.shape[0] + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return TypedAdjacency(self.relation, self.shape, indptr, self.indices[keep])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.rows(), self.indices] = 1.0
        return out


class RowNormalizedAdjacency(TypedAdjacency):
    """CSR adjacency with real entries; nonempty rows sum to one."""

    def __init__(self, relation, shape, indptr, indices, data):
        super().__init__(relation, shape, indptr, indices)
        self.data = np.asarray(data, dtype=np.float64)
        self.data.flags.writeable = False

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.rows(), self.indices] = self.data
        return out

    def matmul(self, x: np.ndarray) -> np.ndarray:
        if x.shape[0] != self.shape[1]:
            raise ShapeError(f"adjacency {self.shape} cannot multiply matrix {x.shape}")
        return kernels.csr_spmm(self.indptr, self.indices, self.data, x)

    def rmatmul_t(self, g: np.ndarray) -> np.ndarray:
        """``A.T @ g``, used for the backward pass."""
        return kernels.csr_spmm_t(self.indptr, self.indices, self.data, g, self.shape[1])


def row_normalize(adj: TypedAdjacency) -> RowNormalizedAdjacency:
    """D^-1 A. Zero-degree rows stay zero."""
    deg = adj.degrees()
    data = np.repeat(1.0 / np.maximum(deg, 1), deg)
    return RowNormalizedAdjacency(adj.relation, adj.shape, adj.indptr, adj.indices, data)


class HeteroGraph:
    """Typed node sets with per-type features and per-relation adjacency.

    Treated as immutable once constructed. ``labels`` (if any) covers the
    nodes of ``target_type``; -1 marks an unlabeled node.
    """

    def __init__(self, schema: NetworkSchema, features: Sequence[np.ndarray],
                 adjacency: Sequence[TypedAdjacency], target_type: int | None = None,
                 labels: np.ndarray | None = None, num_classes: int | None = None):
        self.schema = schema
        if len(features) != schema.num_types:
            raise ShapeError(f"expected {schema.num_types} feature matrices, got {len(features)}")
        feats = []
        for t, x in zip(schema.node_types, features):
            x = np.array(x, dtype=np.float64, copy=True)
            if x.ndim != 2:
                raise ShapeError(f"features of type {t.name!r} must be 2-D, got shape {x.shape}")
            if not np.all(np.isfinite(x)):
                raise ShapeError(f"features of type {t.name!r} contain non-finite values")
            x.flags.writeable = False
            feats.append(x)
        self.features = tuple(feats)
        self.node_counts = tuple(x.shape[0] for x in feats)
        if len(adjacency) != len(schema.relations):
            raise ShapeError(f"expected {len(schema.relations)} adjacencies, got {len(adjacency)}")
        for r, a in zip(schema.relations, adjacency):
            want = (self.node_counts[r.dst_type], self.node_counts[r.src_type])
            if a.shape != want:
                raise ShapeError(f"adjacency of {r.name!r} has shape {a.shape}, expected {want}")
        self.adjacency = tuple(adjacency)
        self.normalized = tuple(
            a if isinstance(a, RowNormalizedAdjacency) else row_normalize(a) for a in adjacency)
        self.target_type = target_type
        self.num_classes = num_classes
        if labels is not None:
            if target_type is None:
                raise StructuralError("labels given without a target type")
            labels = np.array(labels, dtype=np.int64, copy=True)
            if labels.shape != (self.node_counts[target_type],):
                raise ShapeError(f"labels shape {labels.shape} does not match "
                                 f"{self.node_counts[target_type]} target nodes")
            if num_classes is None:
                num_classes = int(labels.max()) + 1 if labels.size else 0
                self.num_classes = num_classes
            if labels.size and (labels.min() < -1 or labels.max() >= num_classes):
                raise StructuralError(f"labels must lie in 0..{num_classes - 1} (or -1 for unlabeled)")
            labels.flags.writeable = False
        self.labels = labels
        self._global = None

    @property
    def feature_dims(self) -> tuple[int, ...]:
        return tuple(x.shape[1] for x in self.features)

    def labeled_nodes(self) -> np.ndarray:
        if self.labels is None:
            return np.empty(0, dtype=np.int64)
        return np.flatnonzero(self.labels >= 0)

    def replace(self, features=None, adjacency=None) -> HeteroGraph:
        """Copy with some feature matrices and/or adjacencies swapped (by index)."""
        feats = list(self.features)
        adjs = list(self.adjacency)
        for t, x in (features or {}).items():
            feats[t] = x
        for r, a in (adjacency or {}).items():
            adjs[r] = a
        return HeteroGraph(self.schema, feats, adjs, self.target_type, self.labels, self.num_classes)

    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.node_counts)]).astype(np.int64)

    def global_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Undirected CSR over all nodes, ids offset by type."""
        if self._global is None:
            off = self.offsets()
            rows, cols = [], []
            for r, a in zip(self.schema.relations, self.adjacency):
                d = a.rows() + off[r.dst_type]
                s = a.indices + off[r.src_type]
                rows += [d, s]
                cols += [s, d]
            n = int(off[-1])
            rows = np.concatenate(rows) if rows else np.empty(0, np.int64)
            cols = np.concatenate(cols) if cols else np.empty(0, np.int64)
            keys = np.unique(rows * max(n, 1) + cols)
            r_, c_ = np.divmod(keys, max(n, 1))
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(np.bincount(r_, minlength=n), out=indptr[1:])
            self._global = (indptr, c_)
        return self._global

    def describe(self) -> str:
        lines = [self.schema.describe(), "node counts:"]
        for t, n, d in zip(self.schema.node_types, self.node_counts, self.feature_dims):
            lines.append(f"  {t.name}: {n} nodes, {d}-d features")
        lines.append("edges:")
        for r, a in zip(self.schema.relations, self.adjacency):
            lines.append(f"  {r.name}: {a.nnz}")
        if self.target_type is not None:
            lines.append(f"target: {self.schema.node_types[self.target_type].name}, "
                         f"{self.num_classes} classes, {self.labeled_nodes().size} labeled")
        return "\n".join(lines)


def build_graph(schema: NetworkSchema, features: Mapping, edge_lists: Mapping,
                labels=None, target_type=None, num_classes: int | None = None) -> HeteroGraph:
    """Assemble a graph from per-type features and per-relation ``(src, dst)`` pairs.

    Keys may be names or indices. A relation without an edge list is derived
    from its inverse; when both directions are given they must agree.
    """
    feats = [None] * schema.num_types
    for k, x in features.items():
        feats[schema.type_index(k)] = np.asarray(x, dtype=np.float64)
    missing = [schema.node_types[i].name for i, x in enumerate(feats) if x is None]
    if missing:
        raise ShapeError(f"no features for node types {missing}")
    counts = [x.shape[0] for x in feats]

    pairs = {}
    for k, e in edge_lists.items():
        e = np.asarray(e, dtype=np.int64)
        if e.size == 0:
            e = e.reshape(0, 2)
        if e.ndim != 2 or e.shape[1] != 2:
            raise ShapeError(f"edge list for {k!r} must have shape (m, 2)")
        pairs[schema.relation_index(k)] = e

    adjs = [None] * len(schema.relations)
    for r in schema.relations:
        if r.index in pairs:
            e = pairs[r.index]
            adjs[r.index] = TypedAdjacency.from_pairs(
                r.index, counts[r.dst_type], counts[r.src_type], e[:, 0], e[:, 1])
    for r in schema.relations:
        inv = schema.relations[r.inverse]
        if adjs[r.index] is None and adjs[inv.index] is not None:
            adjs[r.index] = adjs[inv.index].transpose(r.index)
        elif adjs[r.index] is None:
            adjs[r.index] = TypedAdjacency.from_pairs(
                r.index, counts[r.dst_type], counts[r.src_type], [], [])
    for r in schema.relations:
        inv = adjs[r.inverse]
        if r.inverse != r.index and r.index < r.inverse:
            if adjs[r.index].edge_set() != {(d, s) for s, d in inv.edge_set()}:
                raise StructuralError(
                    f"edges of {r.name!r} are not the transpose of its inverse "
                    f"{schema.relations[r.inverse].name!r}")
        elif r.inverse == r.index:
            es = adjs[r.index].edge_set()
            if es != {(d, s) for s, d in es}:
                raise StructuralError(f"self-inverse relation {r.name!r} must be symmetric")

    tt = schema.type_index(target_type) if target_type is not None else None
    return HeteroGraph(schema, feats, adjs, tt, labels, num_classes)


def hop_distances(graph: HeteroGraph, start: tuple) -> list[np.ndarray]:
    """Per-type arrays of hop distance from ``start`` (-1 if unreachable)."""
    t, node = start
    t = graph.schema.type_index(t)
    if not 0 <= node < graph.node_counts[t]:
        raise StructuralError(f"start node {node} out of range for type "
                              f"{graph.schema.node_types[t].name!r}")
    indptr, indices = graph.global_csr()
    off = graph.offsets()
    dist = kernels.bfs_distances(indptr, indices, off[t] + node)
    return [dist[off[i]:off[i + 1]] for i in range(graph.schema.num_types)]


def khop_nodes(graph: HeteroGraph, start: tuple, k: int) -> set[tuple[int, int]]:
    """Nodes at exactly ``k`` hops from ``start``, as ``(type_index, node)`` pairs."""
    if k < 0:
        raise StructuralError(f"hop count must be non-negative, got {k}")
    dist = hop_distances(graph, start)
    return {(t, int(v)) for t, d in enumerate(dist) for v in np.flatnonzero(d == k)}
