"""Standalone DRPR writer and structural validator.

This module carries no model dependencies, so a file can be checked
without loading any backbone. Little-endian layout:

  magic "DRPR" | version u32=1 | count u64 | K u32 | H u32 | V u32 | flags u32
  per item: id-length u16, UTF-8 id, K*H float32 hidden rows, then logits.

flags bit0: logit rows present. flags bit1: logits stored sparse, one
``nnz u32`` then nnz u32 indexes and nnz f32 values per row.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from typing import Iterable

import numpy as np

MAGIC = b"DRPR"
VERSION = 1
FLAG_LOGITS = 1
FLAG_SPARSE_LOGITS = 2


class BadFile(ValueError):
    pass


@dataclass
class DrprHeader:
    count: int
    k: int
    h: int
    v: int
    flags: int

    @property
    def has_logits(self) -> bool:
        return bool(self.flags & FLAG_LOGITS)

    @property
    def sparse_logits(self) -> bool:
        return bool(self.flags & FLAG_SPARSE_LOGITS)


def _pack_header(h: DrprHeader) -> bytes:
    return MAGIC + struct.pack("<IQIIII", VERSION, h.count, h.k, h.h, h.v, h.flags)


def write_drpr(path, items: Iterable[tuple[str, np.ndarray, np.ndarray | None]],
               k: int, h: int, v: int,
               with_logits: bool = True, sparse_topt: int = 0) -> DrprHeader:
    """Atomically write (item_id, hidden (K,H), logits (K,V) or None) items."""
    flags = (FLAG_LOGITS if with_logits else 0) | (FLAG_SPARSE_LOGITS if sparse_topt else 0)
    count = 0
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".drpr.tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(_pack_header(DrprHeader(0, k, h, v, flags)))
            for item_id, hidden, logits in items:
                hidden = np.asarray(hidden, dtype=np.float32)
                if hidden.shape != (k, h):
                    raise BadFile(f"item {item_id!r}: hidden shape {hidden.shape} != ({k},{h})")
                raw = item_id.encode("utf-8")
                f.write(struct.pack("<H", len(raw)))
                f.write(raw)
                f.write(np.ascontiguousarray(hidden, dtype="<f4").tobytes())
                if with_logits:
                    if logits is None:
                        raise BadFile(f"item {item_id!r}: logits required but missing")
                    logits = np.asarray(logits, dtype=np.float32)
                    if logits.shape != (k, v):
                        raise BadFile(f"item {item_id!r}: logit shape {logits.shape} != ({k},{v})")
                    if sparse_topt:
                        t = min(sparse_topt, v)
                        for row in logits:
                            idx = np.argpartition(-row, t - 1)[:t] if t < v else np.arange(v)
                            idx = np.sort(idx).astype("<u4")
                            f.write(struct.pack("<I", len(idx)))
                            f.write(idx.tobytes())
                            f.write(row[idx].astype("<f4").tobytes())
                    else:
                        f.write(np.ascontiguousarray(logits, dtype="<f4").tobytes())
                count += 1
            f.seek(0)
            f.write(_pack_header(DrprHeader(count, k, h, v, flags)))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return DrprHeader(count, k, h, v, flags)


def _read_exact(f, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise BadFile("truncated DRPR file")
    return data


def read_header(f) -> DrprHeader:
    if f.read(4) != MAGIC:
        raise BadFile("not a DRPR file")
    version, count, k, h, v, flags = struct.unpack("<IQIIII", _read_exact(f, 28))
    if version != VERSION:
        raise BadFile(f"unsupported DRPR version {version}")
    return DrprHeader(count, k, h, v, flags)


def iter_items(path):
    """Yield (item_id, hidden (K,H) f32, logits (K,V) f32 or None)."""
    with open(path, "rb") as f:
        header = read_header(f)
        for _ in range(header.count):
            (id_len,) = struct.unpack("<H", _read_exact(f, 2))
            item_id = _read_exact(f, id_len).decode("utf-8")
            hidden = np.frombuffer(
                _read_exact(f, header.k * header.h * 4), dtype="<f4"
            ).reshape(header.k, header.h).copy()
            logits = None
            if header.has_logits:
                if header.sparse_logits:
                    logits = np.zeros((header.k, header.v), dtype=np.float32)
                    for row in range(header.k):
                        (nnz,) = struct.unpack("<I", _read_exact(f, 4))
                        idx = np.frombuffer(_read_exact(f, nnz * 4), dtype="<u4")
                        val = np.frombuffer(_read_exact(f, nnz * 4), dtype="<f4")
                        logits[row, idx] = val
                else:
                    logits = np.frombuffer(
                        _read_exact(f, header.k * header.v * 4), dtype="<f4"
                    ).reshape(header.k, header.v).copy()
            yield item_id, hidden, logits


def validate(path) -> dict:
    """Structural check; raises BadFile on any inconsistency."""
    with open(path, "rb") as f:
        header = read_header(f)
    ids = set()
    n = 0
    for item_id, hidden, logits in iter_items(path):
        if not np.isfinite(hidden).all():
            raise BadFile(f"item {item_id!r} has non-finite hidden values")
        if logits is not None and not np.isfinite(logits).all():
            raise BadFile(f"item {item_id!r} has non-finite logit values")
        if item_id in ids:
            raise BadFile(f"duplicate item id {item_id!r}")
        ids.add(item_id)
        n += 1
    if n != header.count:
        raise BadFile(f"header count {header.count} != items read {n}")
    return {
        "count": header.count, "k": header.k, "h": header.h, "v": header.v,
        "logits": header.has_logits, "sparse_logits": header.sparse_logits,
        "ok": True,
    }
