import contextlib
import hashlib
import json
import os
import struct
import tempfile
import zlib
from dataclasses import replace
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from nbeats_forecasting.modules.nbeats import ModelConfig, NBeatsModel, build_model

CHECKPOINT_SCHEMA_VERSION = 1
_HEADER = struct.Struct("<Q")


def load_text_file(path: str) -> List[str]:
    text = []
    with open(path, "r", encoding="utf8") as inf:
        for line in inf:
            text.append(line.strip())
    return text


@contextlib.contextmanager
def atomic_write(path: str, mode: str = "w") -> Iterator[Any]:
    """

    Writes to a temporary file next to path and renames it to path
    only if the block finishes without an exception.

    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=f".{os.path.basename(path)}.", suffix=".tmp")
    try:
        kwargs = {} if "b" in mode else {"encoding": "utf8", "newline": ""}
        with os.fdopen(fd, mode, **kwargs) as of:
            yield of
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_json(path: str, obj: Any) -> None:
    with atomic_write(path) as of:
        json.dump(obj, of, indent=2, sort_keys=True)
        of.write("\n")


def load_json(path: str) -> Any:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"{path} does not exist")
    with open(path, "r", encoding="utf8") as inf:
        return json.load(inf)


def _blob_section(model: NBeatsModel) -> Tuple[List[Dict[str, Any]], bytes]:
    blobs = []
    chunks = []
    offset = 0
    for name, value in model.parameters().items():
        data = np.ascontiguousarray(value, dtype="<f8").tobytes()
        blobs.append({
            "name": name,
            "shape": list(value.shape),
            "offset": offset,
            "nbytes": len(data),
            "crc32": zlib.crc32(data)
        })
        chunks.append(data)
        offset += len(data)
    return blobs, b"".join(chunks)


def model_digest(model: NBeatsModel) -> str:
    """

    SHA-256 over the checkpoint blob section of a model, i.e. over all
    parameters as little-endian f64 in manifest order.

    """
    _, data = _blob_section(model)
    return hashlib.sha256(data).hexdigest()


def checkpoint_bytes(model: NBeatsModel, meta: Optional[Dict[str, Any]] = None) -> bytes:
    cfg = model.config
    blobs, data = _blob_section(model)
    manifest = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "L": cfg.block_count,
        "K": cfg.layers,
        "width": cfg.width,
        "t": cfg.input_size,
        "H": cfg.horizon,
        "lookback": cfg.lookback,
        "share_weights": cfg.share_weights,
        "activation": cfg.activation.value,
        "seed": model.seed,
        "blobs": blobs,
        "meta": meta or {}
    }
    encoded = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf8")
    return _HEADER.pack(len(encoded)) + encoded + data


def save_checkpoint(path: str, model: NBeatsModel, meta: Optional[Dict[str, Any]] = None) -> str:
    """

    Saves a model as an 8 byte little-endian manifest length, the JSON manifest
    and one little-endian f64 blob per parameter. Returns the model digest.

    """
    with atomic_write(path, "wb") as of:
        of.write(checkpoint_bytes(model, meta))
    return model_digest(model)


def load_checkpoint(path: str) -> Tuple[NBeatsModel, Dict[str, Any]]:
    """

    Loads a model saved with save_checkpoint, verifying the CRC32 of every blob.

    :param path: checkpoint path
    :return: model and the manifest meta mapping
    """
    if not os.path.isfile(path):
        raise FileNotFoundError(f"checkpoint {path} does not exist")
    with open(path, "rb") as inf:
        raw = inf.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"checkpoint {path} is truncated")
    (length,) = _HEADER.unpack_from(raw)
    manifest = json.loads(raw[_HEADER.size:_HEADER.size + length].decode("utf8"))
    if manifest.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise ValueError(
            f"unsupported checkpoint schema version {manifest.get('schema_version')} in {path}, "
            f"expected {CHECKPOINT_SCHEMA_VERSION}"
        )
    horizon = manifest["H"]
    cfg = ModelConfig(
        horizon=horizon,
        lookback=manifest.get("lookback", manifest["t"] // horizon),
        block_count=manifest["L"],
        layers=manifest["K"],
        width=manifest["width"],
        share_weights=manifest["share_weights"],
        activation=manifest.get("activation", "relu")
    )
    if cfg.input_size != manifest["t"]:
        raise ValueError(f"checkpoint {path} declares t={manifest['t']}, which is not a multiple of H={horizon}")

    data = raw[_HEADER.size + length:]
    params = {}
    for blob in manifest["blobs"]:
        chunk = data[blob["offset"]:blob["offset"] + blob["nbytes"]]
        if len(chunk) != blob["nbytes"] or zlib.crc32(chunk) != blob["crc32"]:
            raise ValueError(f"checksum mismatch for blob {blob['name']} in checkpoint {path}")
        params[blob["name"]] = np.frombuffer(chunk, dtype="<f8").astype(np.float64).reshape(blob["shape"])

    # the template is only used for its topology, its weights are replaced
    template = build_model(cfg, seed=0)
    model = replace(template.with_parameters(params), seed=manifest.get("seed"))
    return model, manifest.get("meta", {})
