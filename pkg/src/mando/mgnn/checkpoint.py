"""Binary checkpoint: ``MNDM`` magic, u32 version, u32 header length, JSON header, float32 tensors.

The header records, per stored model, its configuration, node-type
vocabulary, metapath list, metapath digest and tensor shapes; tensors follow
in header order as little-endian float32.  Header JSON is canonical so equal
models produce equal bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Optional

import numpy as np
import torch

from mando.errors import CheckpointError
from mando.metapath import Metapath, paths_digest
from mando.mgnn.model import MgnnConfig, MgnnModel

MAGIC = b"MNDM"
VERSION = 1


def save_checkpoint(path: str | Path, models: dict[str, MgnnModel], meta: Optional[dict] = None):
    header: dict[str, Any] = {"meta": meta or {}, "models": {}}
    blobs = []
    for key in sorted(models):
        m = models[key]
        tensors = []
        for name, t in m.named_tensors():
            tensors.append({"name": name, "shape": list(t.shape)})
            blobs.append(np.ascontiguousarray(t.detach().cpu().numpy(), dtype="<f4").tobytes())
        header["models"][key] = {
            "config": m.cfg.to_dict(),
            "vocab": m.vocab,
            "paths": [list(p) for p in m.paths],
            "digest": paths_digest(m.paths),
            "tensors": tensors,
        }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", VERSION, len(head)))
        fh.write(head)
        for b in blobs:
            fh.write(b)


def read_header(path: str | Path) -> dict:
    return _parse(Path(path).read_bytes(), path)[0]


def _parse(blob: bytes, path) -> tuple[dict, int]:
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint")
    version, head_len = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    try:
        header = json.loads(blob[12 : 12 + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    return header, 12 + head_len


def load_checkpoint(path: str | Path, catalog_digest: Optional[str] = None) -> tuple[dict[str, MgnnModel], dict]:
    """Return (models by key, meta).

    With ``catalog_digest`` given, every stored model must have been built
    on exactly that metapath list.
    """
    blob = Path(path).read_bytes()
    header, offset = _parse(blob, path)
    models = {}
    for key in sorted(header["models"]):
        spec = header["models"][key]
        if catalog_digest is not None and spec["digest"] != catalog_digest:
            raise CheckpointError(
                f"{path}: model '{key}' was built on metapath digest {spec['digest'][:12]}, not {catalog_digest[:12]}"
            )
        paths = [Metapath(*p) for p in spec["paths"]]
        if paths_digest(paths) != spec["digest"]:
            raise CheckpointError(f"{path}: metapath list does not match its digest")
        model = MgnnModel(MgnnConfig(**spec["config"]), spec["vocab"], paths)
        with torch.no_grad():
            for item in spec["tensors"]:
                shape = tuple(item["shape"])
                count = int(np.prod(shape)) if shape else 1
                end = offset + 4 * count
                if end > len(blob):
                    raise CheckpointError(f"{path}: truncated tensor data")
                arr = np.frombuffer(blob[offset:end], dtype="<f4").reshape(shape)
                target = getattr(model, item["name"])
                if tuple(target.shape) != shape:
                    raise CheckpointError(f"{path}: tensor {item['name']} has shape {shape}, expected {tuple(target.shape)}")
                target.copy_(torch.from_numpy(arr.astype(np.float32)))
                offset = end
        model.eval()
        models[key] = model
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return models, header.get("meta", {})
