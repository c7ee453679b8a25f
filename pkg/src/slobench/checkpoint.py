"""Deterministic binary container: a JSON header followed by raw array bytes.

Layout: the magic line, an 8-byte little-endian header length, the UTF-8 JSON
header, then every array's bytes in header order. Writing the same state
twice yields the same bytes, which makes the file hash a usable identity.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from slobench.errors import CheckpointError

MAGIC = b"SLOBENCH-CKPT 1\n"


def dumps(header: dict, arrays: dict[str, np.ndarray]) -> bytes:
    meta, blobs, offset = [], [], 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        if a.dtype == object:
            raise CheckpointError(f"array {name} has object dtype")
        raw = a.astype(a.dtype.newbyteorder("<"), copy=False).tobytes()
        meta.append({"name": name, "dtype": a.dtype.newbyteorder("<").str, "shape": list(a.shape),
                     "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    head = json.dumps({"header": header, "arrays": meta}, sort_keys=True).encode()
    return MAGIC + struct.pack("<Q", len(head)) + head + b"".join(blobs)


def loads(data: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    if not data.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file")
    pos = len(MAGIC)
    try:
        (n,) = struct.unpack("<Q", data[pos:pos + 8])
        doc = json.loads(data[pos + 8:pos + 8 + n])
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    base = pos + 8 + n
    arrays = {}
    for m in doc["arrays"]:
        start = base + m["offset"]
        chunk = data[start:start + m["nbytes"]]
        if len(chunk) != m["nbytes"]:
            raise CheckpointError(f"truncated array {m['name']}")
        arrays[m["name"]] = np.frombuffer(chunk, dtype=m["dtype"]).reshape(m["shape"]).copy()
    return doc["header"], arrays


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save(path, header: dict, arrays: dict) -> str:
    data = dumps(header, arrays)
    Path(path).write_bytes(data)
    return sha256(data)


def load(path, expected_sha: str | None = None) -> tuple[dict, dict]:
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise CheckpointError(f"checkpoint {path} does not exist") from None
    if expected_sha is not None and sha256(data) != expected_sha:
        raise CheckpointError(f"checkpoint {path} does not match hash {expected_sha}")
    return loads(data)
