"""Checkpoint container: little-endian, bit-exact round trip.

Layout:
    magic      b"AGCK1"
    digest     32 bytes, sha256 of the header json
    header_len u32
    header     canonical json: network specs + metadata
    count      u32 tensor count, then per tensor:
        name_len u16, name utf-8,
        ndim     u8, dims u32 each,
        payload  float64 little-endian, row-major
"""
from __future__ import annotations

import hashlib
import io
import json
import struct

import numpy as np

from .networks import Network, NetworkSpec

MAGIC = b"AGCK1"


class CheckpointError(ValueError):
    pass


def _header_bytes(gen: Network, disc: Network | None, meta: dict) -> bytes:
    header = {
        "gen_spec": gen.spec.to_dict(),
        "disc_spec": disc.spec.to_dict() if disc is not None else None,
        "meta": meta,
    }
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode()


def _collect(gen: Network, disc: Network | None) -> dict[str, np.ndarray]:
    tensors = {f"gen/{k}": v for k, v in gen.parameters().items()}
    if disc is not None:
        tensors.update({f"disc/{k}": v for k, v in disc.parameters().items()})
    return tensors


def dump(gen: Network, disc: Network | None = None, meta: dict | None = None) -> bytes:
    buf = io.BytesIO()
    header = _header_bytes(gen, disc, meta or {})
    buf.write(MAGIC)
    buf.write(hashlib.sha256(header).digest())
    buf.write(struct.pack("<I", len(header)))
    buf.write(header)
    tensors = _collect(gen, disc)
    buf.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        raw = name.encode()
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<B", arr.ndim))
        for d in arr.shape:
            buf.write(struct.pack("<I", d))
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def save(path, gen: Network, disc: Network | None = None, meta: dict | None = None):
    with open(path, "wb") as fh:
        fh.write(dump(gen, disc, meta))


def _read(fh, n: int) -> bytes:
    raw = fh.read(n)
    if len(raw) != n:
        raise CheckpointError("truncated checkpoint")
    return raw


def loads(raw: bytes):
    """Returns (gen: Network, disc: Network | None, meta: dict)."""
    from .networks import build_network

    fh = io.BytesIO(raw)
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    digest = _read(fh, 32)
    (hlen,) = struct.unpack("<I", _read(fh, 4))
    header_raw = _read(fh, hlen)
    if hashlib.sha256(header_raw).digest() != digest:
        raise CheckpointError("header digest mismatch")
    header = json.loads(header_raw)
    (count,) = struct.unpack("<I", _read(fh, 4))
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", _read(fh, 2))
        name = _read(fh, nlen).decode()
        (ndim,) = struct.unpack("<B", _read(fh, 1))
        shape = tuple(struct.unpack("<I", _read(fh, 4))[0] for _ in range(ndim))
        size = int(np.prod(shape)) if shape else 1
        payload = _read(fh, 8 * size)
        tensors[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    if fh.read(1):
        raise CheckpointError("trailing bytes after tensor payload")

    gen_spec = NetworkSpec.from_dict(header["gen_spec"])
    gen = build_network(gen_spec, seed=0)
    gen.set_parameters({k[len("gen/"):]: v for k, v in tensors.items()
                        if k.startswith("gen/")})
    disc = None
    if header["disc_spec"] is not None:
        disc = build_network(NetworkSpec.from_dict(header["disc_spec"]), seed=0)
        disc.set_parameters({k[len("disc/"):]: v for k, v in tensors.items()
                             if k.startswith("disc/")})
    return gen, disc, header["meta"]


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
