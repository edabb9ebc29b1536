"""Checkpoint files: a versioned header, a JSON text manifest, raw float64 payload.

Layout::

    VNHGCN-CHECKPOINT 1\\n
    <manifest byte length>\\n
    <manifest: JSON with tensors [{name, shape, offset}], model layout, meta>
    <payload: little-endian float64 tensors, C order, at the listed offsets>
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from vnhgcn.errors import DataError, ShapeError
from vnhgcn.graph import NetworkSchema
from vnhgcn.model import LayerDims, ModelParams, init_params

MAGIC = "VNHGCN-CHECKPOINT"
VERSION = 1


def atomic_write(path, data: bytes):
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def layout_dict(params: ModelParams) -> dict:
    names = [t.name for t in params.schema.node_types]
    return {
        "schema": params.schema.to_dict(),
        "d_a": params.d_a,
        "target_type": None if params.target_type is None else names[params.target_type],
        "dim_plan": [{"in": list(ld.in_dims),
                      "out": {names[t]: d for t, d in sorted(ld.out_dims.items())}}
                     for ld in params.dim_plan],
    }


def params_from_layout(layout: dict) -> ModelParams:
    schema = NetworkSchema.from_dict(layout["schema"])
    plan = [LayerDims(tuple(ld["in"]), {schema.type_index(n): d for n, d in ld["out"].items()})
            for ld in layout["dim_plan"]]
    target = layout["target_type"]
    target = None if target is None else schema.type_index(target)
    return init_params(schema, plan, layout["d_a"], 0, target)


def dumps(params: ModelParams, meta: dict | None = None) -> bytes:
    entries, chunks, offset = [], [], 0
    for name, arr in params.tensors().items():
        buf = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(buf)
        offset += len(buf)
    manifest = json.dumps({"tensors": entries, "layout": layout_dict(params), "meta": meta or {}},
                          sort_keys=True, indent=1).encode()
    header = f"{MAGIC} {VERSION}\n{len(manifest)}\n".encode()
    return header + manifest + b"".join(chunks)


def loads(blob: bytes) -> tuple[ModelParams, dict]:
    try:
        first, rest = blob.split(b"\n", 1)
        magic, version = first.decode().split()
        size, rest = rest.split(b"\n", 1)
        size = int(size)
    except ValueError:
        raise DataError("not a checkpoint file (bad header)") from None
    if magic != MAGIC:
        raise DataError("not a checkpoint file (bad magic)")
    if int(version) != VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    manifest = json.loads(rest[:size])
    payload = rest[size:]
    params = params_from_layout(manifest["layout"])
    tensors = params.tensors()
    stored = {e["name"]: e for e in manifest["tensors"]}
    if set(stored) != set(tensors):
        raise ShapeError(f"checkpoint tensors do not match layout: "
                         f"{sorted(set(stored) ^ set(tensors))}")
    for name, arr in tensors.items():
        e = stored[name]
        if tuple(e["shape"]) != arr.shape:
            raise ShapeError(f"tensor {name}: stored shape {e['shape']} vs layout {arr.shape}")
        n = arr.size * 8
        if e["offset"] + n > len(payload):
            raise DataError(f"checkpoint truncated inside tensor {name}")
        arr[...] = np.frombuffer(payload, dtype="<f8", count=arr.size,
                                 offset=e["offset"]).reshape(arr.shape)
    return params, manifest["meta"]


def save_checkpoint(path, params: ModelParams, meta: dict | None = None):
    atomic_write(path, dumps(params, meta))


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    return loads(blob)
