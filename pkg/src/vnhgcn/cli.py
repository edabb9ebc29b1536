"""Command-line entry point: train, eval, perturb, sweep, augment-inspect, validate-data.

Exit codes: 0 ok, 1 config error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from vnhgcn.augment import ASSIGNMENTS, AugmentationConfig, augment
from vnhgcn.checkpoint import atomic_write, load_checkpoint, save_checkpoint
from vnhgcn.data import load_dataset
from vnhgcn.errors import ConfigError, DataError, ShapeError, VNHGCNError
from vnhgcn.lab import DEFAULT_HOPS, DEFAULT_VARIANCES, SWEEP_AXES, perturbation_study, sweep, sweep_csv
from vnhgcn.model import param_count
from vnhgcn.train import (SEED_SPLIT, TrainConfig, derive_seed, evaluate, fit, make_split,
                          model_graph, new_params)

log = logging.getLogger("vnhgcn")

TRAIN_FIELDS = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
FLAG_TYPES = {"learning_rate": float, "l2": float, "epochs": int, "dropout": float,
              "drop_edge": float, "layers": int, "hidden_dim": int, "d_a": int,
              "n_virtual": int, "central_dim": int, "assignment": str, "seed": int}
RUN_DEFAULTS = {"ratio": 0.2, "out": "run"}


class _Parser(argparse.ArgumentParser):
    # usage errors are config errors (exit 1), not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_train_flags(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--data", help="dataset directory or manifest.json")
    p.add_argument("--ratio", type=float, help="training fraction of labeled nodes (default 0.2)")
    p.add_argument("--out", help="output directory (default ./run)")
    p.add_argument("--lr", dest="learning_rate", type=float, help="learning rate (default 1e-3)")
    p.add_argument("--l2", type=float, help="L2 coefficient (default 1e-4)")
    p.add_argument("--epochs", type=int, help="training epochs (default 1000)")
    p.add_argument("--dropout", type=float, help="dropout rate (default 0.0)")
    p.add_argument("--drop-edge", dest="drop_edge", type=float, help="virtual drop-edge rate (default 0.3)")
    p.add_argument("--layers", type=int, help="number of layers (default 4)")
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int, help="hidden width (default 64)")
    p.add_argument("--d-a", dest="d_a", type=int, help="attention dimension (default 64)")
    p.add_argument("--n-virtual", dest="n_virtual", type=int,
                   help="virtual nodes per type; 0 trains the plain model (default 16)")
    p.add_argument("--central-dim", dest="central_dim", type=int, help="central node feature dim (default 64)")
    p.add_argument("--assignment", choices=ASSIGNMENTS, help="real-to-virtual assignment mode")
    p.add_argument("--seed", type=int, help="root seed (default 0)")


def resolve_config(args) -> dict:
    """Defaults, then the config file, then explicit flags."""
    cfg = dict(RUN_DEFAULTS)
    cfg.update(dataclasses.asdict(TrainConfig()))
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"--config: cannot read {args.config}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--config: {args.config}:{exc.lineno}: {exc.msg}") from None
        unknown = set(loaded) - set(cfg) - {"data", "command"}
        if unknown:
            raise ConfigError(f"--config: unknown keys {sorted(unknown)}")
        cfg.update(loaded)
    for key in list(FLAG_TYPES) + ["data", "ratio", "out"]:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if not cfg.get("data"):
        raise ConfigError("--data is required (dataset directory or manifest)")
    return cfg


def train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(**{k: cfg[k] for k in TRAIN_FIELDS})


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _split_for(graph, ratio, seed):
    return make_split(graph.labels, ratio, derive_seed(seed, SEED_SPLIT))


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    tcfg = train_config(cfg)
    graph = load_dataset(cfg["data"])
    split = _split_for(graph, cfg["ratio"], tcfg.seed)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    result = fit(graph, tcfg, split)
    # the output location is not model provenance; keep it out so reruns elsewhere match bytes
    stored = {k: v for k, v in cfg.items() if k != "out"}
    meta = {"config": stored, "best_epoch": result.best_epoch, "num_classes": graph.num_classes}
    save_checkpoint(out / "checkpoint.bin", result.params, meta)
    atomic_write(out / "metrics.csv", result.metrics_csv().encode())
    atomic_write(out / "config.json", _dumps(cfg).encode())
    best = result.history[result.best_epoch - 1] if result.best_epoch else None
    print(f"trained {len(result.history)} epochs, {param_count(result.params)} parameters")
    if best is not None:
        print(f"best epoch {best.epoch}: val micro_f1 {best.val_micro_f1:.6f} "
              f"macro_f1 {best.val_macro_f1:.6f}")
    print(f"wrote {out / 'checkpoint.bin'}, {out / 'metrics.csv'}, {out / 'config.json'}")
    return 0


def _load_model(checkpoint, graph):
    """Checkpoint params plus the graph they run on, after a shape check against ``graph``."""
    params, meta = load_checkpoint(checkpoint)
    stored = meta.get("config")
    if stored is None:
        raise DataError(f"{checkpoint}: no training config stored in checkpoint")
    tcfg = train_config(stored)
    mg = model_graph(graph, tcfg)
    try:
        expected = new_params(mg, tcfg).tensors()
    except VNHGCNError as exc:
        raise ShapeError(f"{checkpoint}: dataset incompatible with checkpoint: {exc}") from exc
    got = params.tensors()
    mismatched = sorted(
        n for n in set(expected) | set(got)
        if n not in expected or n not in got or expected[n].shape != got[n].shape)
    if mismatched:
        detail = ", ".join(
            f"{n} (checkpoint {got[n].shape if n in got else 'absent'}, "
            f"dataset {expected[n].shape if n in expected else 'absent'})" for n in mismatched)
        raise ShapeError(f"checkpoint does not match dataset; mismatched tensors: {detail}")
    return params, mg, stored


def cmd_eval(args) -> int:
    if not args.checkpoint:
        raise ConfigError("--checkpoint is required")
    if not args.data:
        raise ConfigError("--data is required")
    graph = load_dataset(args.data)
    params, mg, stored = _load_model(args.checkpoint, graph)
    ratio = args.ratio if args.ratio is not None else stored.get("ratio", 0.2)
    seed = args.seed if args.seed is not None else stored.get("seed", 0)
    split = _split_for(graph, ratio, seed)
    text, csv = io.StringIO(), io.StringIO()
    csv.write("split,micro_f1,macro_f1,nodes\n")
    for name, nodes in (("val", split.val), ("test", split.test)):
        if not len(nodes):
            continue
        rep = evaluate(mg, params, nodes)
        text.write(rep.to_text(f"[{name}] {len(nodes)} nodes") + "\n")
        csv.write(f"{name},{rep.micro_f1!r},{rep.macro_f1!r},{len(nodes)}\n")
    sys.stdout.write(text.getvalue())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        atomic_write(out / "report.txt", text.getvalue().encode())
        atomic_write(out / "report.csv", csv.getvalue().encode())
    return 0


def _int_list(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated integer list, got {s!r}") from None


def _float_list(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated number list, got {s!r}") from None


def cmd_perturb(args) -> int:
    hops = _int_list(args.hops) if args.hops else list(DEFAULT_HOPS)
    variances = _float_list(args.variances) if args.variances else list(DEFAULT_VARIANCES)
    if args.train_both:
        cfg = resolve_config(args)
        graph = load_dataset(cfg["data"])
        tcfg = train_config(cfg)
        if tcfg.n_virtual == 0:
            raise ConfigError("--train-both needs --n-virtual >= 1 for the augmented model")
        split = _split_for(graph, cfg["ratio"], tcfg.seed)
        vn = fit(graph, tcfg, split)
        plain = fit(graph, dataclasses.replace(tcfg, n_virtual=0), split)
        params_vn, params_plain, aug = vn.params, plain.params, vn.graph
        out, seed = Path(cfg["out"]), tcfg.seed
    else:
        if not (args.vn_checkpoint and args.plain_checkpoint):
            raise ConfigError("give --vn-checkpoint and --plain-checkpoint, or --train-both")
        if not args.data:
            raise ConfigError("--data is required")
        graph = load_dataset(args.data)
        params_vn, aug, _ = _load_model(args.vn_checkpoint, graph)
        params_plain, plain_graph, _ = _load_model(args.plain_checkpoint, graph)
        if plain_graph is not graph:
            raise ConfigError("--plain-checkpoint was trained with virtual nodes")
        if aug is graph:
            raise ConfigError("--vn-checkpoint was trained without virtual nodes")
        out = Path(args.out or "run")
        seed = args.seed if args.seed is not None else 0
    grid_vn, grid_plain = perturbation_study(
        graph, params_vn, params_plain, args.target, hops, variances, seed,
        augmentation=aug, same_type=not args.any_type)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write(out / "perturb_vn.csv", grid_vn.to_csv().encode())
    atomic_write(out / "perturb_plain.csv", grid_plain.to_csv().encode())
    sys.stdout.write(grid_vn.to_csv() + grid_plain.to_csv())
    return 0


def cmd_sweep(args) -> int:
    if args.axis not in SWEEP_AXES:
        raise ConfigError(f"unknown axis {args.axis!r}; valid axes: {', '.join(SWEEP_AXES)}")
    cfg = resolve_config(args)
    values = _int_list(args.values)
    seeds = _int_list(args.seeds)
    graph = load_dataset(cfg["data"])
    rows = sweep(graph, train_config(cfg), args.axis, values, seeds, cfg["ratio"], args.jobs)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    text = sweep_csv(args.axis, rows, seeds)
    atomic_write(out / "sweep.csv", text.encode())
    snapshot = dict(cfg, axis=args.axis, values=values, seeds=seeds)
    atomic_write(out / "sweep_config.json", _dumps(snapshot).encode())
    sys.stdout.write(text)
    return 0


def cmd_augment_inspect(args) -> int:
    if not args.data:
        raise ConfigError("--data is required")
    graph = load_dataset(args.data)
    aug = augment(graph, AugmentationConfig(args.n_virtual, args.seed, args.central_dim,
                                            args.assignment))
    print(aug.describe())
    print("virtual node load (real nodes per virtual node):")
    for t, a in aug.assignment.items():
        counts = np.bincount(a, minlength=args.n_virtual)
        print(f"  {graph.schema.node_types[t].name}: " + " ".join(map(str, counts)))
    rows = aug.assignment_table()
    if args.table:
        print("type,node,virtual_node")
        for r in rows:
            print(",".join(map(str, r)))
    if args.out:
        buf = "type,node,virtual_node\n" + "".join(f"{a},{b},{c}\n" for a, b, c in rows)
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        atomic_write(args.out, buf.encode())
    return 0


def cmd_validate_data(args) -> int:
    if not args.data:
        raise ConfigError("--data is required")
    graph = load_dataset(args.data)
    print(graph.describe())
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vnhgcn", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model; writes checkpoint, metrics CSV, config")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="F1 report of a checkpoint on the val/test split")
    p.add_argument("--checkpoint", help="checkpoint file from train")
    p.add_argument("--data", help="dataset directory or manifest.json")
    p.add_argument("--ratio", type=float, help="split ratio (default: the one used in training)")
    p.add_argument("--seed", type=int, help="root seed of the split (default: training seed)")
    p.add_argument("--out", help="directory for report.txt and report.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("perturb", help="long-range perturbation grids for a vn and a plain model")
    _add_train_flags(p)
    p.add_argument("--vn-checkpoint", help="checkpoint of the augmented model")
    p.add_argument("--plain-checkpoint", help="checkpoint of the plain model")
    p.add_argument("--train-both", action="store_true", help="train both models from the config")
    p.add_argument("--hops", help="comma-separated hop distances (default 3..10)")
    p.add_argument("--variances", help="comma-separated noise variances (default 0.1,0.5,1,2)")
    p.add_argument("--target", type=int, default=0, help="target node index within the target type")
    p.add_argument("--any-type", action="store_true",
                   help="perturb nodes of every type at each hop, not only the target type")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("sweep", help="test F1 across one hyperparameter axis")
    _add_train_flags(p)
    p.add_argument("--axis", required=True, help=f"one of {', '.join(SWEEP_AXES)}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", default="0", help="comma-separated seeds (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("augment-inspect", help="print the augmented schema and assignment")
    p.add_argument("--data", help="dataset directory or manifest.json")
    p.add_argument("--n-virtual", dest="n_virtual", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--central-dim", dest="central_dim", type=int, default=64)
    p.add_argument("--assignment", choices=ASSIGNMENTS, default="uniform-random")
    p.add_argument("--table", action="store_true", help="print the full assignment table")
    p.add_argument("--out", help="write the assignment table as CSV")
    p.set_defaults(func=cmd_augment_inspect)

    p = sub.add_parser("validate-data", help="load and validate a dataset")
    p.add_argument("--data", help="dataset directory or manifest.json")
    p.set_defaults(func=cmd_validate_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except VNHGCNError as exc:
        kind = {1: "config", 2: "data", 3: "numeric"}.get(exc.exit_code, "error")
        print(f"error [{kind}]: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
