"""Bit-exact persistence for datasets, checkpoints, and reports.

Dataset files are binary: a fixed 19-byte header (magic ``GDP1``, version,
node count, sample count, flags, CRC32), the sample payload as little-endian
float64 (observation then label, row-major, per sample), and a trailing JSON
metadata block. The CRC is computed over the whole file with the checksum
field zeroed, so any single corrupted byte is detected.

Checkpoints are structured text: a first line ``gdn-ckpt-v1 <crc32-hex>``
followed by a canonical JSON body whose raw bytes the CRC covers. Float64
values survive the text round trip exactly (shortest-repr serialization).
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import GraphPairDataset
from .gdn import GdnArch, GdnParams, LayerParams

MAGIC = b"GDP1"
DATASET_VERSION = 1
_HEADER = struct.Struct("<4sHIIBI")  # magic, version, n, count, flags, crc32

CHECKPOINT_TAG = "gdn-ckpt-v1"


class DatasetFormatError(ValueError):
    """File does not look like a dataset file."""


class UnsupportedVersionError(ValueError):
    def __init__(self, found: int, supported: int):
        super().__init__(f"unsupported dataset version {found} (supported: {supported})")
        self.found = found
        self.supported = supported


class ChecksumError(ValueError):
    """Stored and recomputed CRC32 disagree."""


class TruncatedPayloadError(ValueError):
    """Payload shorter than the header-declared sample count."""


class CheckpointFormatError(ValueError):
    """Checkpoint tag line or body failed to parse."""


class ArchitectureMismatchError(ValueError):
    """Checkpoint architecture differs from the expected one."""


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dataset_bytes(ds: GraphPairDataset) -> bytes:
    ds.validate()
    n = ds.n
    count = ds.sample_count
    flags = 1 if ds.meta.get("weighted") else 0
    payload = bytearray()
    for i in range(count):
        payload += np.ascontiguousarray(ds.observations[i], dtype="<f8").tobytes()
        payload += np.ascontiguousarray(ds.labels[i], dtype="<f8").tobytes()
    metadata = json.dumps(
        {"meta": ds.meta, "splits": {k: [int(i) for i in v] for k, v in ds.splits.items()}},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    header = _HEADER.pack(MAGIC, DATASET_VERSION, n, count, flags, 0)
    body = header + bytes(payload) + metadata
    crc = zlib.crc32(body)
    return _HEADER.pack(MAGIC, DATASET_VERSION, n, count, flags, crc) + bytes(payload) + metadata


def write_dataset(ds: GraphPairDataset, path) -> None:
    """Write atomically; ``read_dataset(path)`` returns an identical dataset."""
    _atomic_write(path, _dataset_bytes(ds))


def read_dataset(path) -> GraphPairDataset:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DatasetFormatError("file shorter than the dataset header")
    magic, version, n, count, flags, crc = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}; not a dataset file")
    if version != DATASET_VERSION:
        raise UnsupportedVersionError(version, DATASET_VERSION)
    zeroed = raw[:15] + b"\x00\x00\x00\x00" + raw[_HEADER.size:]
    if zlib.crc32(zeroed) != crc:
        raise ChecksumError("dataset checksum mismatch; file is corrupted")
    payload_len = count * 2 * n * n * 8
    body = raw[_HEADER.size:]
    if len(body) < payload_len:
        raise TruncatedPayloadError(
            f"payload holds {len(body)} bytes, header declares {payload_len}"
        )
    flat = np.frombuffer(body[:payload_len], dtype="<f8").astype(np.float64)
    stacked = flat.reshape(count, 2, n, n)
    try:
        tail = json.loads(body[payload_len:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DatasetFormatError(f"metadata block failed to parse: {exc}") from exc
    splits = {k: np.asarray(v, dtype=np.int64) for k, v in tail["splits"].items()}
    ds = GraphPairDataset(observations=stacked[:, 0].copy(),
                          labels=stacked[:, 1].copy(),
                          splits=splits, meta=tail["meta"])
    if bool(ds.meta.get("weighted")) != bool(flags & 1):
        raise DatasetFormatError("weighted flag disagrees with metadata")
    ds.validate()
    return ds


# ---------------------------------------------------------------------------
# Checkpoints


@dataclass
class Checkpoint:
    arch: GdnArch
    params: GdnParams
    threshold: float | None
    normalization: dict


def _params_to_body(arch: GdnArch, params: GdnParams) -> dict:
    records = [
        {"alpha": rec.alpha.tolist(), "beta": rec.beta.tolist(),
         "gamma": rec.gamma.tolist(), "tau": rec.tau.tolist()}
        for rec in params.records()
    ]
    return {
        "arch": arch.to_dict(),
        "records": records,
        "prior": None if params.prior is None else params.prior.tolist(),
    }


def write_checkpoint(path, arch: GdnArch, params: GdnParams,
                     threshold: float | None = None,
                     normalization: dict | None = None) -> None:
    params.validate()
    body = _params_to_body(arch, params)
    body["threshold"] = threshold
    body["normalization"] = normalization or {}
    body_bytes = json.dumps(body, sort_keys=True, separators=(",", ":")).encode("utf-8")
    head = f"{CHECKPOINT_TAG} {zlib.crc32(body_bytes):08x}\n".encode("utf-8")
    _atomic_write(path, head + body_bytes)


def read_checkpoint(path, arch: GdnArch | None = None) -> Checkpoint:
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise CheckpointFormatError("missing checkpoint header line")
    head = raw[:newline].decode("utf-8", errors="replace").split()
    if len(head) != 2 or head[0] != CHECKPOINT_TAG:
        raise CheckpointFormatError(
            f"expected tag {CHECKPOINT_TAG!r}, got {raw[:newline]!r}"
        )
    body_bytes = raw[newline + 1:]
    try:
        stored_crc = int(head[1], 16)
    except ValueError as exc:
        raise CheckpointFormatError(f"bad checksum field {head[1]!r}") from exc
    if zlib.crc32(body_bytes) != stored_crc:
        raise ChecksumError("checkpoint checksum mismatch; file is corrupted")
    try:
        body = json.loads(body_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"checkpoint body failed to parse: {exc}") from exc

    stored_arch = GdnArch.from_dict(body["arch"])
    if arch is not None and arch != stored_arch:
        raise ArchitectureMismatchError(
            f"checkpoint holds {stored_arch}, expected {arch}"
        )
    records = [
        LayerParams(alpha=np.asarray(r["alpha"], dtype=np.float64),
                    beta=np.asarray(r["beta"], dtype=np.float64),
                    gamma=np.asarray(r["gamma"], dtype=np.float64),
                    tau=np.asarray(r["tau"], dtype=np.float64))
        for r in body["records"]
    ]
    layers = records * stored_arch.depth if stored_arch.shared else records
    if len(layers) != stored_arch.depth:
        raise CheckpointFormatError(
            f"{len(body['records'])} parameter records do not fit depth {stored_arch.depth}"
        )
    prior = body.get("prior")
    params = GdnParams(layers=layers, shared=stored_arch.shared,
                       prior_mode=stored_arch.prior_mode,
                       prior=None if prior is None else np.asarray(prior, dtype=np.float64),
                       k0=stored_arch.k0)
    params.validate()
    return Checkpoint(arch=stored_arch, params=params,
                      threshold=body.get("threshold"),
                      normalization=body.get("normalization", {}))


# ---------------------------------------------------------------------------
# Reports


def write_json(path, payload) -> None:
    _atomic_write(path, json.dumps(payload, sort_keys=True, indent=2).encode("utf-8"))


def read_json(path):
    return json.loads(Path(path).read_text())
