"""Checkpoint files.

Byte layout::

    offset 0   16 bytes  magic b"POLYSCORE-CKPT\\n\\x00"
    offset 16   8 bytes  header length N, unsigned little-endian
    offset 24   N bytes  UTF-8 JSON header
    offset 24+N          payload: little-endian float64 values, in order
                         params (header["n_params"]), input_mean, input_scale
                         (header["topology"]["input_dim"] each)

The header records ``format_version`` ("MAJOR.MINOR"), the toolkit
version, topology, metrics, languages, feature layout, seed, the ordered
parameter names/shapes, the payload byte count and its SHA-256. A reader
refuses a different major version; any size or checksum mismatch is
reported as corruption.
"""

import hashlib
import json
import struct

import numpy as np

from .. import __version__
from ..errors import CheckpointVersionError, CorruptCheckpointError
from .network import ScoringModel

MAGIC = b"POLYSCORE-CKPT\n\x00"
FORMAT_VERSION = "1.0"


def _payload(model):
    return np.concatenate([model.params, model.input_mean, model.input_scale]).astype("<f8").tobytes()


def save(model, path):
    payload = _payload(model)
    header = {
        "format_version": FORMAT_VERSION,
        "toolkit_version": __version__,
        "topology": {"input_dim": model.input_dim, "hidden": model.hidden, "layers": model.layers},
        "metrics": list(model.metrics),
        "languages": list(model.languages),
        "layout": {k: list(v) for k, v in model.layout.items()} if model.layout is not None else None,
        "feature_meta": model.feature_meta,
        "seed": model.seed,
        "normalizer_fitted": model.normalizer_fitted,
        "params": [[name, list(shape)] for name, shape in model.specs],
        "n_params": int(model.params.size),
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(hbytes)))
        fh.write(hbytes)
        fh.write(payload)


def read_header(path):
    with open(path, "rb") as fh:
        data = fh.read()
    return _parse(data, path)[0]


def _parse(data, path):
    if len(data) < len(MAGIC) + 8 or data[: len(MAGIC)] != MAGIC:
        raise CorruptCheckpointError(f"{path}: not a polyscore checkpoint (bad magic)")
    (n,) = struct.unpack("<Q", data[len(MAGIC) : len(MAGIC) + 8])
    start = len(MAGIC) + 8
    if start + n > len(data):
        raise CorruptCheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(data[start : start + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CorruptCheckpointError(f"{path}: unreadable header") from None
    version = str(header.get("format_version", ""))
    major = version.split(".")[0]
    if major != FORMAT_VERSION.split(".")[0]:
        raise CheckpointVersionError(
            f"{path}: checkpoint format {version!r} is incompatible with reader {FORMAT_VERSION!r}"
        )
    return header, data[start + n :]


def load(path):
    with open(path, "rb") as fh:
        data = fh.read()
    header, payload = _parse(data, path)
    if len(payload) != header["payload_bytes"]:
        raise CorruptCheckpointError(
            f"{path}: payload has {len(payload)} bytes, header promises {header['payload_bytes']}"
        )
    if hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise CorruptCheckpointError(f"{path}: payload checksum mismatch")
    topo = header["topology"]
    layout = header["layout"]
    model = ScoringModel(
        topo["input_dim"],
        header["languages"],
        topo["hidden"],
        topo["layers"],
        header["metrics"],
        {k: tuple(v) for k, v in layout.items()} if layout is not None else None,
        header["seed"],
        head_init="zeros",
        feature_meta=header.get("feature_meta"),
    )
    specs = [[name, list(shape)] for name, shape in model.specs]
    if specs != header["params"] or model.params.size != header["n_params"]:
        raise CorruptCheckpointError(f"{path}: parameter manifest does not match the topology")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    n, d = model.params.size, model.input_dim
    model.params[...] = values[:n]
    model.input_mean = values[n : n + d].copy()
    model.input_scale = values[n + d : n + 2 * d].copy()
    model.normalizer_fitted = bool(header.get("normalizer_fitted", False))
    return model
