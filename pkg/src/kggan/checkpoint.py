"""Binary checkpoints: shape header, little-endian f64 payload, FNV trailer.

Layout:
    "KGCK" | u32 version | u32 kind | [u32 condition_mode, GAN kind only]
    | u32 n_tensors | per tensor: u32 ndim, u32 dims...
    | f64 payload (little-endian, row-major, tensors in caller order)
    | u64 FNV-1a of everything before the trailer

Tensor order is fixed by each model's save routine; the loader validates
shapes against a freshly built model of the same configuration.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ContractError
from .hashing import fnv1a_64

MAGIC = b"KGCK"
VERSION = 1
KIND_REGRESSOR = 0
KIND_GAN = 1

COND_MODE_CODES = {"semantic_embedding": 0, "one_hot": 1}
COND_MODE_NAMES = {v: k for k, v in COND_MODE_CODES.items()}


def params_hash(arrays) -> int:
    """Order-sensitive content hash of a list of float64 arrays."""
    h = 0xCBF29CE484222325
    for arr in arrays:
        h ^= fnv1a_64(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def save_checkpoint(path, kind: int, tensors, condition_mode: str | None = None) -> None:
    header = MAGIC + struct.pack("<II", VERSION, kind)
    if kind == KIND_GAN:
        if condition_mode not in COND_MODE_CODES:
            raise ContractError(f"unknown condition mode {condition_mode!r}")
        header += struct.pack("<I", COND_MODE_CODES[condition_mode])
    header += struct.pack("<I", len(tensors))
    for arr in tensors:
        header += struct.pack("<I", arr.ndim)
        header += struct.pack(f"<{arr.ndim}I", *arr.shape)

    payload = b"".join(np.ascontiguousarray(arr, dtype="<f8").tobytes() for arr in tensors)
    body = header + payload
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<Q", fnv1a_64(body)))


def load_checkpoint(path):
    """Returns (kind, condition_mode_or_None, list of float64 arrays)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 20 or blob[:4] != MAGIC:
        raise ContractError(f"{path} is not a checkpoint file")
    body, trailer = blob[:-8], blob[-8:]
    (stored_hash,) = struct.unpack("<Q", trailer)
    if fnv1a_64(body) != stored_hash:
        raise ContractError(f"{path} failed its content hash check")

    pos = 4
    version, kind = struct.unpack_from("<II", body, pos)
    pos += 8
    if version != VERSION:
        raise ContractError(f"unsupported checkpoint version {version}")
    condition_mode = None
    if kind == KIND_GAN:
        (code,) = struct.unpack_from("<I", body, pos)
        pos += 4
        if code not in COND_MODE_NAMES:
            raise ContractError(f"unknown condition mode code {code}")
        condition_mode = COND_MODE_NAMES[code]
    (n_tensors,) = struct.unpack_from("<I", body, pos)
    pos += 4
    shapes = []
    for _ in range(n_tensors):
        (ndim,) = struct.unpack_from("<I", body, pos)
        pos += 4
        dims = struct.unpack_from(f"<{ndim}I", body, pos)
        pos += 4 * ndim
        shapes.append(tuple(dims))

    tensors = []
    for shape in shapes:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(body, dtype="<f8", count=count, offset=pos).astype(np.float64)
        pos += 8 * count
        tensors.append(arr.reshape(shape))
    if pos != len(body):
        raise ContractError(f"{path} has {len(body) - pos} trailing bytes")
    return kind, condition_mode, tensors
