"""Checkpoint file format: the bytes workers hand to the reducer.

Layout, all integers little-endian:

    magic           4 bytes, b"CELM"
    version         u32 (currently 1)
    arch text       u32 length + that many utf-8 bytes
    kernel_size     u32
    input_side      u32
    input_channels  u32
    lambda          f32
    hidden_dim      u32
    num_classes     u32
    seed            u64
    iterations      u32
    partition ids   u32 count + count * u32 (a singleton for worker
                    output; the reducer writes every contributing id)
    stage count     u32
    per stage       tensor W, tensor b
    beta            tensor
    checksum        u32 CRC32 of every preceding byte

where a tensor is u32 ndim, ndim * u32 dims, then the payload as raw
little-endian float32 in C order. Readers reject bad magic, version,
or checksum before touching the payload. Writes go to a temp file in
the target directory and rename into place, so a crashed process never
leaves a half-written checkpoint behind.
"""
import os
import struct
import zlib

import numpy as np

from .trainer import Checkpoint

MAGIC = b"CELM"
VERSION = 1


def _pack_tensor(parts, array):
    array = np.ascontiguousarray(array, dtype="<f4")
    parts.append(struct.pack("<I", array.ndim))
    parts.append(struct.pack(f"<{array.ndim}I", *array.shape))
    parts.append(array.tobytes())


class _Reader:
    def __init__(self, blob, path):
        self.blob = blob
        self.path = path
        self.pos = 0

    def take(self, count):
        if self.pos + count > len(self.blob):
            raise ValueError(f"{self.path}: truncated checkpoint")
        out = self.blob[self.pos:self.pos + count]
        self.pos += count
        return out

    def u32(self):
        return struct.unpack("<I", self.take(4))[0]

    def tensor(self):
        ndim = self.u32()
        if ndim > 8:
            raise ValueError(f"{self.path}: implausible tensor rank {ndim}")
        shape = struct.unpack(f"<{ndim}I", self.take(4 * ndim))
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        flat = np.frombuffer(self.take(4 * count), dtype="<f4")
        return flat.reshape(shape).copy()


def checkpoint_bytes(ckpt):
    """Serialize a Checkpoint to its byte representation."""
    parts = [MAGIC, struct.pack("<I", VERSION)]
    arch = ckpt.arch_text.encode()
    parts.append(struct.pack("<I", len(arch)))
    parts.append(arch)
    parts.append(struct.pack(
        "<IIIfIIQI",
        ckpt.kernel_size, ckpt.input_side, ckpt.input_channels,
        ckpt.lam, ckpt.hidden_dim, ckpt.num_classes,
        ckpt.seed, ckpt.iterations,
    ))
    ids = tuple(int(i) for i in ckpt.partition_ids)
    parts.append(struct.pack(f"<I{len(ids)}I", len(ids), *ids))
    parts.append(struct.pack("<I", len(ckpt.params)))
    for W, b in ckpt.params:
        _pack_tensor(parts, W)
        _pack_tensor(parts, b)
    _pack_tensor(parts, ckpt.beta)
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def write_checkpoint(ckpt, path):
    """Atomically write a checkpoint file (temp file + rename)."""
    blob = checkpoint_bytes(ckpt)
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as f:
        f.write(blob)
    os.replace(tmp, path)
    return path


def read_checkpoint(path):
    """Read and validate a checkpoint file."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    if len(blob) < 12:
        raise ValueError(f"{path}: truncated checkpoint")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise ValueError(f"{path}: checksum mismatch, file is corrupt")
    r = _Reader(blob[:-4], path)
    r.take(4)  # magic
    version = r.u32()
    if version != VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    arch_text = r.take(r.u32()).decode()
    kernel_size, input_side, input_channels = r.u32(), r.u32(), r.u32()
    lam = struct.unpack("<f", r.take(4))[0]
    hidden_dim, num_classes = r.u32(), r.u32()
    seed = struct.unpack("<Q", r.take(8))[0]
    iterations = r.u32()
    partition_ids = tuple(r.u32() for _ in range(r.u32()))
    params = []
    for _ in range(r.u32()):
        W = r.tensor()
        b = r.tensor()
        params.append((W, b))
    beta = r.tensor()
    if r.pos != len(r.blob):
        raise ValueError(f"{path}: {len(r.blob) - r.pos} unexpected trailing bytes")
    return Checkpoint(
        arch_text=arch_text,
        kernel_size=kernel_size,
        input_side=input_side,
        input_channels=input_channels,
        lam=lam,
        hidden_dim=hidden_dim,
        num_classes=num_classes,
        seed=seed,
        iterations=iterations,
        partition_ids=partition_ids,
        params=params,
        beta=beta,
    )
