"""Binary embedding file format (.embd).

Layout, all little-endian, no padding:

    magic   4 bytes  b"EMBD"
    version u32      1
    dim     u32      embedding width
    count   u64      number of records
    mlen    u32      metadata byte length
    meta    mlen bytes, UTF-8 JSON {"dataset", "model", "checkpoint"}
    records count times: sample_id u64, class_id u32, dim x f32

Writes are bit-deterministic: the same dataset always yields the same bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .datasets import DatasetMeta, EmbeddingDataset
from .errors import CorruptionError, FormatError, ValidationError

MAGIC = b"EMBD"
VERSION = 1
_HEADER = struct.Struct("<4sIIQI")


def _record_dtype(dim: int) -> np.dtype:
    dt = np.dtype(
        [("sample_id", "<u8"), ("class_id", "<u4"), ("vector", "<f4", (dim,))]
    )
    assert dt.itemsize == 12 + 4 * dim  # packed, no alignment gaps
    return dt


def write_embeddings(dataset: EmbeddingDataset, path: str | Path) -> None:
    """Write a dataset to `path` in the .embd format."""
    meta_bytes = json.dumps(
        {
            "dataset": dataset.meta.dataset,
            "model": dataset.meta.model,
            "checkpoint": dataset.meta.checkpoint,
        },
        ensure_ascii=False,
        separators=(",", ":"),
    ).encode("utf-8")
    n = len(dataset)
    header = _HEADER.pack(MAGIC, VERSION, dataset.dim, n, len(meta_bytes))
    records = np.empty(n, dtype=_record_dtype(dataset.dim))
    records["sample_id"] = dataset.sample_ids
    records["class_id"] = dataset.class_ids
    records["vector"] = dataset.vectors
    with open(path, "wb") as f:
        f.write(header)
        f.write(meta_bytes)
        f.write(records.tobytes())


def read_embeddings(path: str | Path) -> EmbeddingDataset:
    """Read a .embd file, validating structure and every stored vector."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise CorruptionError(
            f"{path}: file is {len(raw)} bytes, shorter than the {_HEADER.size}-byte header"
        )
    magic, version, dim, count, mlen = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if dim < 1:
        raise FormatError(f"{path}: dim must be positive, got {dim}")
    meta_start = _HEADER.size
    payload_start = meta_start + mlen
    if len(raw) < payload_start:
        raise CorruptionError(
            f"{path}: metadata declares {mlen} bytes but only "
            f"{len(raw) - meta_start} remain"
        )
    try:
        meta_obj = json.loads(raw[meta_start:payload_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: metadata is not valid UTF-8 JSON: {e}") from e
    if not isinstance(meta_obj, dict):
        raise FormatError(f"{path}: metadata must be a JSON object")
    meta = DatasetMeta(
        dataset=str(meta_obj.get("dataset", "")),
        model=str(meta_obj.get("model", "")),
        checkpoint=str(meta_obj.get("checkpoint", "")),
    )

    dt = _record_dtype(dim)
    expected = count * dt.itemsize
    actual = len(raw) - payload_start
    if actual != expected:
        raise CorruptionError(
            f"{path}: payload holds {actual} bytes, expected {expected} "
            f"({count} records of {dt.itemsize} bytes)"
        )
    records = np.frombuffer(raw, dtype=dt, count=count, offset=payload_start)
    try:
        return EmbeddingDataset(
            dim=int(dim),
            sample_ids=np.ascontiguousarray(records["sample_id"]),
            class_ids=np.ascontiguousarray(records["class_id"]),
            vectors=np.ascontiguousarray(records["vector"]),
            meta=meta,
        )
    except ValidationError as e:
        raise ValidationError(f"{path}: {e}") from e
