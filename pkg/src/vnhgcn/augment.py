"""Hierarchical virtual-node augmentation and virtual-edge dropping."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from vnhgcn.errors import ConfigError, StructuralError
from vnhgcn.graph import HeteroGraph, NetworkSchema, TypedAdjacency

ASSIGNMENTS = ("uniform-random", "round-robin")


@dataclass(frozen=True)
class AugmentationConfig:
    n_virtual: int = 16
    seed: int = 0
    central_dim: int = 64
    assignment: str = "uniform-random"

    def __post_init__(self):
        if self.n_virtual < 1:
            raise ConfigError(f"n_virtual must be >= 1, got {self.n_virtual}")
        if self.central_dim < 1:
            raise ConfigError(f"central_dim must be >= 1, got {self.central_dim}")
        if self.assignment not in ASSIGNMENTS:
            raise ConfigError(f"assignment must be one of {ASSIGNMENTS}, got {self.assignment!r}")


@dataclass(frozen=True)
class AugmentedGraph:
    """A graph over ``2|A| + 1`` types.

    Real types keep their indices; the virtual type of real type ``i`` is
    ``virtual_type_map[i]``. ``assignment[i][v]`` is the virtual node that
    real node ``v`` of type ``i`` hangs from.
    """

    graph: HeteroGraph
    original: HeteroGraph
    config: AugmentationConfig
    real_type_map: dict
    virtual_type_map: dict
    central_type: int
    virtual_edge_relations: frozenset
    central_relations: frozenset
    assignment: dict = field(repr=False)

    @property
    def schema(self) -> NetworkSchema:
        return self.graph.schema

    def describe(self) -> str:
        lines = [self.graph.describe(), "virtual relations (drop-edge eligible):"]
        rels = self.schema.relations
        lines += [f"  {rels[r].name}" for r in sorted(self.virtual_edge_relations)]
        lines.append("central relations:")
        lines += [f"  {rels[r].name}" for r in sorted(self.central_relations)]
        return "\n".join(lines)

    def assignment_table(self) -> list[tuple[str, int, int]]:
        """Rows of ``(type name, real node, virtual node)``."""
        rows = []
        for t, a in self.assignment.items():
            name = self.original.schema.node_types[t].name
            rows += [(name, v, int(p)) for v, p in enumerate(a)]
        return rows


def _assign(rng: np.random.Generator, n: int, n_virtual: int, mode: str) -> np.ndarray:
    if mode == "uniform-random":
        return rng.integers(0, n_virtual, size=n)
    out = np.empty(n, dtype=np.int64)
    out[rng.permutation(n)] = np.arange(n) % n_virtual
    return out


def augment(graph: HeteroGraph, cfg: AugmentationConfig) -> AugmentedGraph:
    schema = graph.schema
    n_real = schema.num_types
    type_names = [t.name for t in schema.node_types]
    vnames = [f"virtual_{n}" for n in type_names]
    new_names = type_names + vnames + ["central"]
    if len(set(new_names)) != len(new_names):
        raise StructuralError(f"augmented type names collide: {new_names}")

    rels = [(r.name, type_names[r.src_type], type_names[r.dst_type],
             schema.relations[r.inverse].name) for r in schema.relations]
    virtual_rel_names, central_rel_names = [], []
    for name, vname in zip(type_names, vnames):
        up, down = f"{name}->{vname}", f"{vname}->{name}"
        rels += [(up, name, vname, down), (down, vname, name, up)]
        virtual_rel_names += [up, down]
    for vname in vnames:
        up, down = f"{vname}->central", f"central->{vname}"
        rels += [(up, vname, "central", down), (down, "central", vname, up)]
        central_rel_names += [up, down]
    new_schema = NetworkSchema.build(new_names, rels)

    rng = np.random.default_rng(cfg.seed)
    nv = cfg.n_virtual
    assignment = {}
    features = list(graph.features)
    vfeatures = []
    adjacency = list(graph.adjacency)
    extra = {}
    for t in range(n_real):
        n = graph.node_counts[t]
        a = _assign(rng, n, nv, cfg.assignment)
        a.flags.writeable = False
        assignment[t] = a
        x = graph.features[t]
        counts = np.bincount(a, minlength=nv).astype(np.float64)
        sums = np.zeros((nv, x.shape[1]))
        np.add.at(sums, a, x)
        # virtual nodes with no assigned real node keep a zero feature
        vfeatures.append(sums / np.maximum(counts, 1.0)[:, None])
        up = new_schema.relation_index(f"{type_names[t]}->{vnames[t]}")
        down = new_schema.relation_index(f"{vnames[t]}->{type_names[t]}")
        nodes = np.arange(n)
        extra[up] = TypedAdjacency.from_pairs(up, nv, n, nodes, a)
        extra[down] = TypedAdjacency.from_pairs(down, n, nv, a, nodes)
    for t in range(n_real):
        up = new_schema.relation_index(f"{vnames[t]}->central")
        down = new_schema.relation_index(f"central->{vnames[t]}")
        vn = np.arange(nv)
        extra[up] = TypedAdjacency.from_pairs(up, 1, nv, vn, np.zeros(nv))
        extra[down] = TypedAdjacency.from_pairs(down, nv, 1, np.zeros(nv), vn)
    features += vfeatures + [np.ones((1, cfg.central_dim))]
    adjacency += [extra[i] for i in range(len(adjacency), len(new_schema.relations))]

    new_graph = HeteroGraph(new_schema, features, adjacency, graph.target_type,
                            graph.labels, graph.num_classes)
    return AugmentedGraph(
        graph=new_graph,
        original=graph,
        config=cfg,
        real_type_map={t: t for t in range(n_real)},
        virtual_type_map={t: n_real + t for t in range(n_real)},
        central_type=2 * n_real,
        virtual_edge_relations=frozenset(new_schema.relation_index(n) for n in virtual_rel_names),
        central_relations=frozenset(new_schema.relation_index(n) for n in central_rel_names),
        assignment=assignment,
    )


def sample_drop_edge(aug: AugmentedGraph, rate: float, seed) -> AugmentedGraph:
    """Drop each real<->virtual connection with probability ``rate``.

    A connection is removed in both directions at once. Central edges and
    real-real edges are never touched. The input is not modified.
    """
    if not 0.0 <= rate <= 1.0:
        raise ConfigError(f"drop-edge rate must be in [0, 1], got {rate}")
    if rate == 0.0:
        return aug
    rng = np.random.default_rng(seed)
    schema = aug.schema
    replaced = {}
    for t in sorted(aug.assignment):
        keep = rng.random(aug.original.node_counts[t]) >= rate
        tname = schema.node_types[t].name
        vname = schema.node_types[aug.virtual_type_map[t]].name
        up = schema.relation_index(f"{tname}->{vname}")
        down = schema.relation_index(f"{vname}->{tname}")
        a_up, a_down = aug.graph.adjacency[up], aug.graph.adjacency[down]
        replaced[up] = a_up.masked(keep[a_up.indices])
        replaced[down] = a_down.masked(keep[a_down.rows()])
    return dataclasses.replace(aug, graph=aug.graph.replace(adjacency=replaced))
