"""The VN-HGCN network: per-type transforms, mean aggregation and type-level attention."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from vnhgcn.augment import AugmentedGraph, sample_drop_edge
from vnhgcn.errors import ConfigError, ShapeError
from vnhgcn.graph import HeteroGraph, NetworkSchema
from vnhgcn.numerics import Tape, Var, softmax_rows


@dataclass
class LayerDims:
    """Input dim of every type and output dim of each type the layer computes."""

    in_dims: tuple[int, ...]
    out_dims: dict[int, int]


@dataclass
class LayerParams:
    self_weight: dict[int, np.ndarray] = field(default_factory=dict)
    cross_weight: dict[int, np.ndarray] = field(default_factory=dict)
    att_matrix: dict[int, np.ndarray] = field(default_factory=dict)
    att_vector: dict[int, np.ndarray] = field(default_factory=dict)


@dataclass
class ModelParams:
    schema: NetworkSchema
    layers: list[LayerParams]
    dim_plan: list[LayerDims]
    d_a: int
    target_type: int | None = None

    def tensors(self) -> dict[str, np.ndarray]:
        """All trainable arrays by name, in a fixed order. Values are not copies."""
        out = {}
        types = self.schema.node_types
        rels = self.schema.relations
        for i, lp in enumerate(self.layers):
            for t in sorted(lp.self_weight):
                out[f"layer{i}.W.{types[t].name}"] = lp.self_weight[t]
            for r in sorted(lp.cross_weight):
                out[f"layer{i}.W.{rels[r].name}"] = lp.cross_weight[r]
            for t in sorted(lp.att_matrix):
                out[f"layer{i}.E.{types[t].name}"] = lp.att_matrix[t]
            for t in sorted(lp.att_vector):
                out[f"layer{i}.q.{types[t].name}"] = lp.att_vector[t]
        return out

    def copy(self) -> ModelParams:
        return copy.deepcopy(self)


@dataclass
class ForwardArtifacts:
    embeddings: list[dict[int, np.ndarray]]
    attention: list[dict[int, dict[str, np.ndarray]]]
    output: Var | None
    param_vars: dict[str, Var]

    @property
    def logits(self) -> np.ndarray:
        return self.output.value


def make_dim_plan(schema: NetworkSchema, feature_dims, hidden_dim: int, n_layers: int,
                  target_type: int | None = None, n_classes: int | None = None) -> list[LayerDims]:
    """Uniform hidden width; with a target type, the last layer only produces its logits."""
    if hidden_dim < 1 or n_layers < 0:
        raise ConfigError(f"invalid dims: hidden_dim={hidden_dim}, layers={n_layers}")
    if target_type is not None and (n_classes is None or n_classes < 1):
        raise ConfigError("a target type needs a positive class count")
    plan = []
    in_dims = tuple(int(d) for d in feature_dims)
    for i in range(n_layers):
        last = i == n_layers - 1
        if last and target_type is not None:
            out = {target_type: n_classes}
        else:
            out = {t: hidden_dim for t in range(schema.num_types)}
        plan.append(LayerDims(in_dims, out))
        in_dims = tuple(hidden_dim for _ in range(schema.num_types))
    return plan


def _glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_params(schema: NetworkSchema, dim_plan: list[LayerDims], d_a: int, seed,
                target_type: int | None = None) -> ModelParams:
    if d_a < 1:
        raise ConfigError(f"attention dim must be >= 1, got {d_a}")
    for i, ld in enumerate(dim_plan):
        if len(ld.in_dims) != schema.num_types:
            raise ConfigError(f"layer {i}: {len(ld.in_dims)} input dims for {schema.num_types} types")
        if i > 0:
            prev = dim_plan[i - 1].out_dims
            for t, d in prev.items():
                if ld.in_dims[t] != d:
                    raise ConfigError(f"layer {i}: input dim {ld.in_dims[t]} of type "
                                      f"{schema.node_types[t].name!r} != previous output {d}")
        for t, d in ld.out_dims.items():
            if not 0 <= t < schema.num_types or d < 1 or ld.in_dims[t] < 1:
                raise ConfigError(f"layer {i}: bad output entry for type {t}")

    layers = []
    for ld in dim_plan:
        lp = LayerParams()
        for t in sorted(ld.out_dims):
            lp.self_weight[t] = (ld.in_dims[t], ld.out_dims[t])
            for r in schema.incoming(t):
                lp.cross_weight[r.index] = (ld.in_dims[r.src_type], ld.out_dims[t])
            lp.att_matrix[t] = (ld.out_dims[t], d_a)
            lp.att_vector[t] = None
        layers.append(lp)
    params = ModelParams(schema, layers, list(dim_plan), d_a, target_type)

    rng = np.random.default_rng(seed)
    for lp in layers:
        for store in (lp.self_weight, lp.cross_weight, lp.att_matrix):
            for k in sorted(store):
                store[k] = _glorot(rng, *store[k])
        for t in lp.att_vector:
            lp.att_vector[t] = np.ones((d_a, 1))
    return params


def param_count(params: ModelParams) -> int:
    return int(sum(a.size for a in params.tensors().values()))


def _check_compatible(graph: HeteroGraph, params: ModelParams):
    if graph.schema != params.schema:
        raise ShapeError("parameters were built for a different schema")
    if params.dim_plan:
        want = params.dim_plan[0].in_dims
        if tuple(graph.feature_dims) != tuple(want):
            raise ShapeError(f"feature dims {graph.feature_dims} do not match parameters {want}")


def forward(graph: HeteroGraph | AugmentedGraph, params: ModelParams, training: bool = False,
            dropout: float = 0.0, drop_edge: float = 0.0, seed=0,
            tape: Tape | None = None) -> ForwardArtifacts:
    """Run every layer. With ``training`` false no randomness is consumed.

    Pass a recording ``Tape`` to get gradients; the trainable leaves are
    returned in ``param_vars``.
    """
    ss = np.random.SeedSequence(seed)
    edge_seed, drop_seed = ss.spawn(2)
    if isinstance(graph, AugmentedGraph):
        if training and drop_edge > 0.0:
            graph = sample_drop_edge(graph, drop_edge, np.random.default_rng(edge_seed))
        graph = graph.graph
    _check_compatible(graph, params)
    tape = tape if tape is not None else Tape(record=False)
    rng = np.random.default_rng(drop_seed)
    schema = params.schema
    types = schema.node_types
    n_layers = len(params.layers)

    param_vars = {name: tape.leaf(value, requires_grad=True, name=name)
                  for name, value in params.tensors().items()}

    def pv(i, kind, key):
        return param_vars[f"layer{i}.{kind}.{key}"]

    H = [tape.leaf(x) for x in graph.features]
    embeddings, attention = [], []
    for i, lp in enumerate(params.layers):
        H_in = [tape.dropout(h, dropout, rng, training) for h in H]
        H_out = [None] * schema.num_types
        att = {}
        for t in sorted(lp.self_weight):
            tname = types[t].name
            try:
                zs = [tape.matmul(H_in[t], pv(i, "W", tname))]
                group = ["self"]
                for r in schema.incoming(t):
                    y = tape.matmul(H_in[r.src_type], pv(i, "W", r.name))
                    zs.append(tape.spmm(graph.normalized[r.index], y))
                    group.append(r.name)
                E, q = pv(i, "E", tname), pv(i, "q", tname)
                scores = [tape.tanh(tape.matmul(tape.matmul(z, E), q)) for z in zs]
                alphas = tape.grouped_row_softmax(scores)
                h = tape.add(*[tape.row_scale(z, a) for z, a in zip(zs, alphas)])
            except ShapeError as exc:
                raise ShapeError(f"layer {i}, type {tname!r}: {exc}") from exc
            if not (i == n_layers - 1 and t == params.target_type):
                h = tape.relu(h)
            H_out[t] = h
            att[t] = {g: a.value[:, 0] for g, a in zip(group, alphas)}
        embeddings.append({t: h.value for t, h in enumerate(H_out) if h is not None})
        attention.append(att)
        H = H_out

    output = None
    if n_layers and params.target_type is not None:
        output = H[params.target_type]
    return ForwardArtifacts(embeddings, attention, output, param_vars)


def predict(graph: HeteroGraph | AugmentedGraph, params: ModelParams) -> np.ndarray:
    """Class probabilities for every node of the target type."""
    if params.target_type is None:
        raise ConfigError("model has no target type")
    return softmax_rows(forward(graph, params).logits)
