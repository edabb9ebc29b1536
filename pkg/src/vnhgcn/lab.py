"""Long-range influence experiments and hyperparameter sweeps."""

from __future__ import annotations

import dataclasses
import io
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from vnhgcn.augment import AugmentationConfig, AugmentedGraph, augment
from vnhgcn.errors import ConfigError, StructuralError, VNHGCNError
from vnhgcn.graph import HeteroGraph, hop_distances
from vnhgcn.model import ModelParams, forward
from vnhgcn.train import SEED_SPLIT, TrainConfig, derive_seed, evaluate, fit, make_split

DEFAULT_HOPS = tuple(range(3, 11))
DEFAULT_VARIANCES = (0.1, 0.5, 1.0, 2.0)
SWEEP_AXES = ("hidden_dim", "layers", "n_virtual")


@dataclass
class PerturbationGrid:
    """``values[i, j]`` is ||dH_target|| for ``variances[i]`` at ``hops[j]``; NaN marks no data."""

    hops: tuple[int, ...]
    variances: tuple[float, ...]
    values: np.ndarray
    target: int
    model: str
    same_type: bool = True

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# perturbation grid: model={self.model} target={self.target} "
                  f"same_type={str(self.same_type).lower()}\n")
        buf.write("# cell = L2 norm of the change in the target's final embedding; "
                  "empty = no perturbable node at that hop\n")
        buf.write("variance," + ",".join(f"hop_{k}" for k in self.hops) + "\n")
        for v, row in zip(self.variances, self.values):
            cells = ["" if np.isnan(x) else repr(float(x)) for x in row]
            buf.write(f"{v!r}," + ",".join(cells) + "\n")
        return buf.getvalue()


def _with_features(g, feats: dict):
    if isinstance(g, AugmentedGraph):
        return dataclasses.replace(g, graph=g.graph.replace(features=feats))
    return g.replace(features=feats)


def _target_row(g, params, target):
    return forward(g, params).output.value[target]


def perturbation_study(graph: HeteroGraph, params_vn: ModelParams | None,
                       params_plain: ModelParams | None, target: int,
                       hops=DEFAULT_HOPS, variances=DEFAULT_VARIANCES, seed: int = 0, *,
                       augmentation: AugmentationConfig | AugmentedGraph | None = None,
                       same_type: bool = True):
    """Add N(0, v) noise to nodes exactly k hops from ``target`` and measure the output shift.

    Hops are counted in ``graph`` (never through virtual nodes). Both models
    see the same noise draws. With ``same_type`` only nodes of the target
    type are perturbed. Returns ``(vn_grid, plain_grid)``; a model passed as
    None yields None.
    """
    tt = graph.target_type
    if tt is None:
        raise ConfigError("graph has no target type")
    if not 0 <= target < graph.node_counts[tt]:
        raise StructuralError(f"target {target} out of range for the target type")
    hops = tuple(int(k) for k in hops)
    variances = tuple(float(v) for v in variances)
    if any(v < 0 for v in variances):
        raise ConfigError("variances must be non-negative")

    models = []
    if params_vn is not None:
        if augmentation is None:
            raise ConfigError("the augmented model needs its augmentation config or graph")
        aug = augmentation if isinstance(augmentation, AugmentedGraph) else augment(graph, augmentation)
        models.append(("vn", aug, params_vn))
    if params_plain is not None:
        models.append(("plain", graph, params_plain))
    clean = {name: _target_row(g, p, target) for name, g, p in models}

    dist = hop_distances(graph, (tt, target))
    types = [tt] if same_type else range(graph.schema.num_types)
    values = {name: np.full((len(variances), len(hops)), np.nan) for name, _, _ in models}
    for j, k in enumerate(hops):
        shell = {t: np.flatnonzero(dist[t] == k) for t in types}
        shell = {t: v for t, v in shell.items() if v.size}
        if not shell:
            continue
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        noise = {t: rng.standard_normal((v.size, graph.feature_dims[t])) for t, v in shell.items()}
        for i, var in enumerate(variances):
            feats = {}
            for t, v in shell.items():
                x = graph.features[t].copy()
                x[v] += np.sqrt(var) * noise[t]
                feats[t] = x
            for name, g, p in models:
                delta = _target_row(_with_features(g, feats), p, target) - clean[name]
                values[name][i, j] = np.linalg.norm(delta)

    def grid(name):
        if name not in values:
            return None
        return PerturbationGrid(hops, variances, values[name], target, name, same_type)

    return grid("vn"), grid("plain")


@dataclass
class SweepRow:
    value: int
    runs: int
    micro_mean: float
    micro_std: float
    macro_mean: float
    macro_std: float


def sweep_csv(axis: str, rows: list[SweepRow], seeds) -> str:
    buf = io.StringIO()
    buf.write(f"# sweep over {axis}; seeds={','.join(map(str, seeds))}; test-set F1, "
              "std is the sample std (0 for a single run)\n")
    buf.write(f"{axis},runs,micro_f1_mean,micro_f1_std,macro_f1_mean,macro_f1_std\n")
    for r in rows:
        buf.write(f"{r.value},{r.runs},{r.micro_mean!r},{r.micro_std!r},"
                  f"{r.macro_mean!r},{r.macro_std!r}\n")
    return buf.getvalue()


def _run_cell(args):
    graph, cfg, axis, value, seed, ratio = args
    try:
        cell_cfg = dataclasses.replace(cfg, **{axis: value, "seed": seed})
        split = make_split(graph.labels, ratio, derive_seed(seed, SEED_SPLIT))
        result = fit(graph, cell_cfg, split)
        rep = evaluate(result.graph, result.params, split.test)
    except VNHGCNError as exc:
        raise type(exc)(f"sweep cell ({axis}={value}, seed={seed}): {exc}") from exc
    return rep.micro_f1, rep.macro_f1


def _std(xs):
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


def sweep(graph: HeteroGraph, base_cfg: TrainConfig, axis: str, values, seeds,
          ratio: float = 0.2, jobs: int = 1) -> list[SweepRow]:
    """One fit per (value, seed); each seed also fixes that cell's split, as ``train`` does."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; valid axes: {', '.join(SWEEP_AXES)}")
    values, seeds = list(values), list(seeds)
    if not values or not seeds:
        raise ConfigError("sweep needs at least one value and one seed")
    cells = [(graph, base_cfg, axis, v, s, ratio) for v in values for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    rows = []
    for i, v in enumerate(values):
        chunk = results[i * len(seeds):(i + 1) * len(seeds)]
        micro = [r[0] for r in chunk]
        macro = [r[1] for r in chunk]
        rows.append(SweepRow(v, len(chunk), statistics.fmean(micro), _std(micro),
                             statistics.fmean(macro), _std(macro)))
    return rows
