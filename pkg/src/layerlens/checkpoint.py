"""Model checkpoints: a JSON header followed by raw float64 payloads.

Layout:

==============  ========================================================
bytes 0..7      magic ``LLCHKPT\\x00``
u32 LE          header length in bytes
header          UTF-8 JSON, keys sorted (see below)
payload         concatenated little-endian float64 arrays, row-major
==============  ========================================================

The header is self-describing: ``arrays`` lists name, shape, and byte offset
of every parameter block, so the payload can be read without knowing the
model code. ``format_version`` gates compatibility; ``config``, ``seeds``,
and ``history_digest`` echo how the model was produced. Round-trips are
value-exact (float64 bytes are stored verbatim).
"""

import hashlib
import json
import struct

import numpy as np

from .dbn import DbnModel
from .errors import FormatError
from .rbm import RbmParams

MAGIC = b"LLCHKPT\x00"
FORMAT_VERSION = 1


def _model_arrays(model):
    for i, stack in enumerate(model.stacks):
        yield f"stack{i}/weights", stack.weights
        yield f"stack{i}/visible_bias", stack.visible_bias
        yield f"stack{i}/hidden_bias", stack.hidden_bias


def history_digest(history_rows):
    """Stable digest of per-epoch training metrics (any iterable of tuples)."""
    h = hashlib.sha256()
    for row in history_rows:
        h.update(repr(tuple(row)).encode("utf-8"))
    return h.hexdigest()


def save_checkpoint(path, model, config_echo=None, seeds=None, digest=None):
    """Write a checkpoint; ``config_echo``/``seeds`` are arbitrary JSON-safe
    mappings recorded verbatim for reproducibility."""
    arrays = []
    offset = 0
    blobs = []
    for name, arr in _model_arrays(model):
        blob = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        arrays.append(
            {"name": name, "shape": list(arr.shape), "dtype": "<f8", "offset": offset}
        )
        blobs.append(blob)
        offset += len(blob)
    header = {
        "format_version": FORMAT_VERSION,
        "layer_sizes": model.layer_sizes,
        "arrays": arrays,
        "config": config_echo or {},
        "seeds": seeds or {},
        "history_digest": digest,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path):
    """Read a checkpoint; returns (DbnModel, header dict)."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:8] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint file")
    (header_len,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatError(
            f"{path}: unsupported checkpoint version {header.get('format_version')}"
        )
    payload = raw[12 + header_len :]
    by_name = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=start).reshape(shape)
        by_name[entry["name"]] = arr.astype(np.float64)

    layer_sizes = header["layer_sizes"]
    stacks = []
    for i in range(len(layer_sizes) - 1):
        try:
            stacks.append(
                RbmParams(
                    weights=by_name[f"stack{i}/weights"],
                    visible_bias=by_name[f"stack{i}/visible_bias"],
                    hidden_bias=by_name[f"stack{i}/hidden_bias"],
                )
            )
        except KeyError as exc:
            raise FormatError(f"{path}: missing payload for stack {i}") from exc
    model = DbnModel(tuple(stacks))
    if model.layer_sizes != list(layer_sizes):
        raise FormatError(
            f"{path}: payload sizes {model.layer_sizes} disagree with header {layer_sizes}"
        )
    return model, header
