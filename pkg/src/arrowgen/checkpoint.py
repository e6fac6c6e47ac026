"""Versioned binary container for named parameter tensors.

Layout (little-endian): magic b"ARWG", u32 version, u32 N, u32 D, u32 E,
u32 tensor count, then per tensor: u16 name length, name bytes (utf-8),
u8 ndim, u32 per dimension, f32 row-major data.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"ARWG"
VERSION = 1


def save_tensors(path: str | Path, n: int, d: int, e: int, tensors: dict[str, np.ndarray]):
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIII", VERSION, n, d, e))
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            arr = np.ascontiguousarray(arr, dtype="<f4")
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_tensors(path: str | Path) -> tuple[tuple[int, int, int], dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError(f"{path}: bad magic, not a checkpoint file")
        version, n, d, e = struct.unpack("<IIII", fh.read(16))
        if version != VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        (count,) = struct.unpack("<I", fh.read(4))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            size = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(fh.read(4 * size), dtype="<f4").reshape(shape)
            tensors[name] = data.astype(np.float64)
    return (n, d, e), tensors


def save_denoiser(path: str | Path, params) -> None:
    from .denoiser import DenoiserParams

    assert isinstance(params, DenoiserParams)
    tensors = dict(params.tensors)
    for k, v in params.adam_m.items():
        tensors[f"adam.m.{k}"] = v
    for k, v in params.adam_v.items():
        tensors[f"adam.v.{k}"] = v
    tensors["adam.step"] = np.array([params.step], dtype=np.float64)
    save_tensors(path, params.num_nodes, params.walk_len, params.embed_dim, tensors)


def load_denoiser(path: str | Path):
    from .denoiser import DenoiserParams

    (n, d, e), tensors = load_tensors(path)
    params = {k: v for k, v in tensors.items() if not k.startswith("adam.")}
    m = {k[7:]: v for k, v in tensors.items() if k.startswith("adam.m.")}
    v = {k[7:]: v for k, v in tensors.items() if k.startswith("adam.v.")}
    step = int(tensors["adam.step"][0])
    return DenoiserParams(n, d, e, params, m, v, step)


def save_gcn(path: str | Path, params) -> None:
    from .gnn import GcnParams

    assert isinstance(params, GcnParams)
    tensors = dict(params.tensors)
    for k, val in params.adam_m.items():
        tensors[f"adam.m.{k}"] = val
    for k, val in params.adam_v.items():
        tensors[f"adam.v.{k}"] = val
    tensors["adam.step"] = np.array([params.step], dtype=np.float64)
    save_tensors(path, params.in_dim, params.hidden_dim, params.out_dim, tensors)


def load_gcn(path: str | Path):
    from .gnn import GcnParams

    (f, h, o), tensors = load_tensors(path)
    params = {k: v for k, v in tensors.items() if not k.startswith("adam.")}
    m = {k[7:]: v for k, v in tensors.items() if k.startswith("adam.m.")}
    v = {k[7:]: v for k, v in tensors.items() if k.startswith("adam.v.")}
    step = int(tensors["adam.step"][0])
    return GcnParams(f, h, o, params, m, v, step)
