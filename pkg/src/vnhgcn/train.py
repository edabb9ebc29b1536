"""Full-graph training: splits, Adam, L2-regularized cross-entropy, best-epoch selection."""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from vnhgcn.augment import ASSIGNMENTS, AugmentationConfig, AugmentedGraph, augment
from vnhgcn.errors import ConfigError, DataError, TrainingError
from vnhgcn.graph import HeteroGraph
from vnhgcn.metrics import f1_scores
from vnhgcn.model import ModelParams, forward, init_params, make_dim_plan
from vnhgcn.numerics import Tape

log = logging.getLogger(__name__)

# stream ids for derive_seed
SEED_SPLIT, SEED_AUGMENT, SEED_INIT, SEED_EPOCH = 1, 2, 3, 4


def derive_seed(root: int, *path: int) -> int:
    """Child seed for one randomness stream under ``root``."""
    return int(np.random.SeedSequence([int(root), *path]).generate_state(1)[0])


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    l2: float = 1e-4
    epochs: int = 1000
    dropout: float = 0.0
    drop_edge: float = 0.3
    layers: int = 4
    hidden_dim: int = 64
    d_a: int = 64
    n_virtual: int = 16  # 0 disables augmentation (plain model)
    central_dim: int = 64
    assignment: str = "uniform-random"
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or self.l2 < 0:
            raise ConfigError("learning_rate and l2 must be non-negative")
        if self.epochs < 0 or self.layers < 1 or self.hidden_dim < 1 or self.d_a < 1:
            raise ConfigError("epochs >= 0 and layers, hidden_dim, d_a >= 1 required")
        if self.n_virtual < 0 or self.central_dim < 1:
            raise ConfigError("n_virtual must be >= 0 and central_dim >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0.0 <= self.drop_edge <= 1.0:
            raise ConfigError(f"drop_edge must be in [0, 1], got {self.drop_edge}")
        if self.assignment not in ASSIGNMENTS:
            raise ConfigError(f"assignment must be one of {ASSIGNMENTS}")

    def augmentation(self) -> AugmentationConfig | None:
        if self.n_virtual == 0:
            return None
        return AugmentationConfig(self.n_virtual, derive_seed(self.seed, SEED_AUGMENT),
                                  self.central_dim, self.assignment)


@dataclass
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    ratio: float

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)


def make_split(labels, ratio: float, seed: int) -> Split:
    """Shuffle the labeled nodes; the first ceil(ratio * n) train, the rest halve into val/test."""
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must be in (0, 1), got {ratio}")
    labeled = np.flatnonzero(np.asarray(labels) >= 0)
    n = labeled.size
    if n == 0:
        raise DataError("no labeled nodes to split")
    perm = np.random.default_rng(seed).permutation(labeled)
    # round first so that e.g. 0.6 * 10 does not ceil to 7
    n_train = math.ceil(round(ratio * n, 9))
    n_val = (n - n_train) // 2
    return Split(np.sort(perm[:n_train]), np.sort(perm[n_train:n_train + n_val]),
                 np.sort(perm[n_train + n_val:]), ratio)


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState, lr: float):
    """Bias-corrected Adam update, in place on ``params``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient in tensor {name}")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise TrainingError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def l2_penalty(params: ModelParams, l2: float) -> float:
    return l2 * sum(float(np.sum(a * a)) for a in params.tensors().values())


def loss_and_grads(graph, params: ModelParams, labels, mask, l2: float, training: bool = False,
                   dropout: float = 0.0, drop_edge: float = 0.0, seed=0):
    """Cross-entropy on ``mask`` plus ``l2 * sum ||theta||^2``, and its gradient by name."""
    tape = Tape()
    art = forward(graph, params, training=training, dropout=dropout, drop_edge=drop_edge,
                  seed=seed, tape=tape)
    ce = tape.softmax_cross_entropy(art.output, labels, mask)
    tape.backward(ce)
    grads = {}
    for name, p in params.tensors().items():
        g = art.param_vars[name].grad
        g = np.zeros_like(p) if g is None else g
        grads[name] = g + 2.0 * l2 * p
    return float(ce.value) + l2_penalty(params, l2), grads


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    val_micro_f1: float
    val_macro_f1: float


@dataclass
class FitResult:
    params: ModelParams
    history: list[EpochMetrics]
    best_epoch: int
    graph: HeteroGraph | AugmentedGraph

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        buf.write("epoch,train_loss,val_micro_f1,val_macro_f1\n")
        for m in self.history:
            buf.write(f"{m.epoch},{m.train_loss!r},{m.val_micro_f1!r},{m.val_macro_f1!r}\n")
        return buf.getvalue()


def model_graph(graph: HeteroGraph, cfg: TrainConfig) -> HeteroGraph | AugmentedGraph:
    """The graph the model runs on: augmented unless ``n_virtual`` is 0."""
    aug_cfg = cfg.augmentation()
    return graph if aug_cfg is None else augment(graph, aug_cfg)


def new_params(g: HeteroGraph | AugmentedGraph, cfg: TrainConfig) -> ModelParams:
    hg = g.graph if isinstance(g, AugmentedGraph) else g
    plan = make_dim_plan(hg.schema, hg.feature_dims, cfg.hidden_dim, cfg.layers,
                         hg.target_type, hg.num_classes)
    return init_params(hg.schema, plan, cfg.d_a, derive_seed(cfg.seed, SEED_INIT), hg.target_type)


def evaluate(g, params: ModelParams, nodes):
    """F1 report of inference-mode predictions on ``nodes``."""
    hg = g.graph if isinstance(g, AugmentedGraph) else g
    pred = np.argmax(forward(g, params).logits, axis=1)
    return f1_scores(pred, hg.labels, nodes, hg.num_classes)


def fit(graph: HeteroGraph, cfg: TrainConfig, split: Split, callback=None) -> FitResult:
    """Train from scratch and return the parameters of the best-validation epoch.

    Augmentation happens once; drop-edge and dropout masks are redrawn every
    epoch. Ties in validation Micro-F1 keep the earliest epoch.
    """
    if graph.labels is None or graph.target_type is None:
        raise DataError("graph has no labels on a target type")
    g = model_graph(graph, cfg)
    params = new_params(g, cfg)
    tensors = params.tensors()
    state = AdamState()
    history = []
    best, best_epoch, best_score = params.copy(), 0, -1.0
    for epoch in range(1, cfg.epochs + 1):
        loss, grads = loss_and_grads(g, params, graph.labels, split.train, cfg.l2, training=True,
                                     dropout=cfg.dropout, drop_edge=cfg.drop_edge,
                                     seed=derive_seed(cfg.seed, SEED_EPOCH, epoch))
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        try:
            adam_step(tensors, grads, state, cfg.learning_rate)
        except TrainingError as exc:
            raise TrainingError(f"epoch {epoch}: {exc}") from exc
        if len(split.val):
            rep = evaluate(g, params, split.val)
            micro, macro = rep.micro_f1, rep.macro_f1
        else:
            micro = macro = float("nan")
        history.append(EpochMetrics(epoch, loss, micro, macro))
        if callback is not None:
            callback(history[-1])
        if not len(split.val) or micro > best_score:
            best, best_epoch, best_score = params.copy(), epoch, micro
        log.debug("epoch %d loss %.6f val micro %.4f", epoch, loss, micro)
    return FitResult(best, history, best_epoch, g)
