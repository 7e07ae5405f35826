"""DRPR binary interchange format for per-item mask-position representations.

Little-endian layout:

  magic "DRPR" | version u32=1 | count u64 | K u32 | H u32 | V u32 | flags u32
  per item: id-length u16, UTF-8 id, K*H float32 hidden rows, then logits.

flags bit0: logit rows present. flags bit1: logits stored sparse, one
``nnz u32`` then nnz (index u32, value f32) pairs per row; absent
entries read back as zero.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .encoder import RepresentationSet
from .errors import BadFormat

MAGIC = b"DRPR"
VERSION = 1
FLAG_LOGITS = 1
FLAG_SPARSE_LOGITS = 2


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


def _pack_header(header: DrprHeader) -> bytes:
    return MAGIC + struct.pack("<IQIIII", VERSION, header.count, header.k,
                               header.h, header.v, header.flags)


def write_drpr(path, items: Iterable[tuple[str, RepresentationSet]],
               k: int, h: int, v: int,
               with_logits: bool = True, sparse_topt: int = 0) -> DrprHeader:
    """Write items atomically; returns the final header.

    ``sparse_topt > 0`` keeps only the top-t logits per row and sets the
    sparse layout flag.
    """
    flags = (FLAG_LOGITS if with_logits else 0) | (FLAG_SPARSE_LOGITS if sparse_topt else 0)
    count = 0
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".drpr.tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(_pack_header(DrprHeader(0, k, h, v, flags)))
            for item_id, reps in items:
                if reps.k != k or reps.dim != h:
                    raise BadFormat(
                        f"item {item_id!r} has shape ({reps.k},{reps.dim}), "
                        f"file is (K={k},H={h})")
                raw = item_id.encode("utf-8")
                f.write(struct.pack("<H", len(raw)))
                f.write(raw)
                f.write(np.ascontiguousarray(reps.hidden, dtype="<f4").tobytes())
                if with_logits:
                    if reps.logits is None:
                        raise BadFormat(f"item {item_id!r} lacks logits")
                    if reps.logits.shape[1] != v:
                        raise BadFormat(f"item {item_id!r} logit width != V={v}")
                    if sparse_topt:
                        for row in reps.logits:
                            t = min(sparse_topt, v)
                            idx = np.argpartition(-row, t - 1)[:t] if t < v else np.arange(v)
                            idx = np.sort(idx).astype("<u4")
                            f.write(struct.pack("<I", len(idx)))
                            f.write(idx.tobytes())
                            f.write(row[idx].astype("<f4").tobytes())
                    else:
                        f.write(np.ascontiguousarray(reps.logits, dtype="<f4").tobytes())
                count += 1
            header = DrprHeader(count, k, h, v, flags)
            f.seek(0)
            f.write(_pack_header(header))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return header


def read_header(f) -> DrprHeader:
    magic = f.read(4)
    if magic != MAGIC:
        raise BadFormat("not a DRPR file")
    version, count, k, h, v, flags = struct.unpack("<IQIIII", f.read(28))
    if version != VERSION:
        raise BadFormat(f"unsupported DRPR version {version}")
    return DrprHeader(count, k, h, v, flags)


def _read_exact(f, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise BadFormat("truncated DRPR file")
    return data


def iter_drpr(path) -> Iterator[tuple[str, RepresentationSet]]:
    """Stream (item_id, RepresentationSet); sparse logits come back dense."""
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
            yield item_id, RepresentationSet(hidden=hidden, logits=logits)


def read_drpr(path) -> tuple[DrprHeader, list[tuple[str, RepresentationSet]]]:
    with open(path, "rb") as f:
        header = read_header(f)
    return header, list(iter_drpr(path))


def read_drpr_header(path) -> DrprHeader:
    with open(path, "rb") as f:
        return read_header(f)


def validate(path) -> dict:
    """Structural check; raises BadFormat on any inconsistency."""
    with open(path, "rb") as f:
        header = read_header(f)
    n = 0
    ids = set()
    for item_id, reps in iter_drpr(path):
        if not np.isfinite(reps.hidden).all():
            raise BadFormat(f"item {item_id!r} has non-finite hidden values")
        if header.has_logits and not np.isfinite(reps.logits).all():
            raise BadFormat(f"item {item_id!r} has non-finite logit values")
        if item_id in ids:
            raise BadFormat(f"duplicate item id {item_id!r}")
        ids.add(item_id)
        n += 1
    if n != header.count:
        raise BadFormat(f"header count {header.count} != items read {n}")
    return {
        "count": header.count, "k": header.k, "h": header.h, "v": header.v,
        "logits": header.has_logits, "sparse_logits": header.sparse_logits,
        "ok": True,
    }
