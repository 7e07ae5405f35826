"""Passage-side stores: flat multi-vector dense index, inverted sparse
index, and a compressed dense index (k-means centroid id + 2-bit
residual codes per dimension).

All on-disk formats are little-endian with a 4-byte magic and a u32
version; rebuilding from identical input is byte-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .encoder import RepresentationSet
from .errors import (BadFormat, DimensionMismatch, DuplicateDoc, EmptyIndex,
                     FilterMismatch, TooFewRows)
from .scoring import ContentWordFilter, ScoredList, SparseVector, ranked, sparse_project

_VERSION = 1
KMEANS_MAX_ITERS = 25
KMEANS_REL_TOL = 1e-4


def _write_doc_table(f, doc_ids: list[str]) -> None:
    f.write(struct.pack("<Q", len(doc_ids)))
    for d in doc_ids:
        raw = d.encode("utf-8")
        f.write(struct.pack("<H", len(raw)))
        f.write(raw)


def _read_doc_table(f) -> list[str]:
    (n,) = struct.unpack("<Q", f.read(8))
    out = []
    for _ in range(n):
        (ln,) = struct.unpack("<H", f.read(2))
        out.append(f.read(ln).decode("utf-8"))
    return out


def _doc_table_bytes(doc_ids: list[str]) -> int:
    return 8 + sum(2 + len(d.encode("utf-8")) for d in doc_ids)


# ---------------------------------------------------------------- dense

@dataclass
class DenseIndex:
    doc_ids: list[str]
    vectors: np.ndarray  # (rows, H) float32
    row_offsets: list[tuple[int, int]]  # per doc (start, k_p)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def n_rows(self) -> int:
        return self.vectors.shape[0]

    def doc_rows(self, ordinal: int) -> np.ndarray:
        start, k = self.row_offsets[ordinal]
        return self.vectors[start:start + k]

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(b"DIDX")
            f.write(struct.pack("<IIQ", _VERSION, self.dim, self.n_rows))
            _write_doc_table(f, self.doc_ids)
            for start, k in self.row_offsets:
                f.write(struct.pack("<QI", start, k))
            f.write(np.ascontiguousarray(self.vectors, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path) -> "DenseIndex":
        with open(path, "rb") as f:
            if f.read(4) != b"DIDX":
                raise BadFormat(f"not a dense index: {path}")
            version, dim, rows = struct.unpack("<IIQ", f.read(16))
            if version != _VERSION:
                raise BadFormat(f"unsupported dense index version {version}")
            doc_ids = _read_doc_table(f)
            offsets = [struct.unpack("<QI", f.read(12)) for _ in doc_ids]
            vectors = np.frombuffer(f.read(rows * dim * 4), dtype="<f4").reshape(rows, dim).copy()
        return cls(doc_ids, vectors, [(int(s), int(k)) for s, k in offsets])

    def storage_report(self) -> dict[str, int]:
        report = {
            "header": 4 + 16,
            "doc_table": _doc_table_bytes(self.doc_ids),
            "offsets": 12 * len(self.doc_ids),
            "vectors": self.n_rows * self.dim * 4,
        }
        report["total"] = sum(report.values())
        return report


def build_dense(reps: Iterable[tuple[str, RepresentationSet]]) -> DenseIndex:
    doc_ids, blocks, offsets = [], [], []
    seen = set()
    start = 0
    dim = None
    for doc_id, r in reps:
        if doc_id in seen:
            raise DuplicateDoc(doc_id)
        seen.add(doc_id)
        if dim is None:
            dim = r.dim
        elif r.dim != dim:
            raise DimensionMismatch(f"doc {doc_id!r}: H={r.dim}, index has H={dim}")
        doc_ids.append(doc_id)
        blocks.append(np.asarray(r.hidden, dtype=np.float32))
        offsets.append((start, r.k))
        start += r.k
    if not doc_ids:
        raise EmptyIndex("no documents to index")
    return DenseIndex(doc_ids, np.concatenate(blocks, axis=0), offsets)


def _maxsim_per_doc(q_hidden: np.ndarray, vectors: np.ndarray,
                    row_offsets: list[tuple[int, int]]) -> np.ndarray:
    """Per-doc MaxSim of a query against a contiguous row store."""
    sims = q_hidden.astype(np.float64) @ vectors.astype(np.float64).T  # (Kq, rows)
    starts = np.array([s for s, _ in row_offsets])
    per_doc_max = np.maximum.reduceat(sims, starts, axis=1)  # (Kq, docs)
    return per_doc_max.mean(axis=0)


def search_dense(index: DenseIndex, q: RepresentationSet, cutoff: int = 1000) -> ScoredList:
    if q.dim != index.dim:
        raise DimensionMismatch(f"query H={q.dim}, index H={index.dim}")
    scores = _maxsim_per_doc(q.hidden, index.vectors, index.row_offsets)
    return ranked("", {d: float(s) for d, s in zip(index.doc_ids, scores)}, cutoff)


# ---------------------------------------------------------------- sparse

@dataclass
class SparseIndex:
    doc_ids: list[str]
    postings: dict[int, list[tuple[int, float]]]  # vid -> ordered (ordinal, weight)
    filter_name: str = "default"

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(b"SIDX")
            name = self.filter_name.encode("utf-8")
            f.write(struct.pack("<IH", _VERSION, len(name)))
            f.write(name)
            _write_doc_table(f, self.doc_ids)
            f.write(struct.pack("<Q", len(self.postings)))
            for vid in sorted(self.postings):
                plist = self.postings[vid]
                f.write(struct.pack("<IQ", vid, len(plist)))
                for ordinal, w in plist:
                    f.write(struct.pack("<If", ordinal, w))

    @classmethod
    def load(cls, path) -> "SparseIndex":
        with open(path, "rb") as f:
            if f.read(4) != b"SIDX":
                raise BadFormat(f"not a sparse index: {path}")
            version, name_len = struct.unpack("<IH", f.read(6))
            if version != _VERSION:
                raise BadFormat(f"unsupported sparse index version {version}")
            filter_name = f.read(name_len).decode("utf-8")
            doc_ids = _read_doc_table(f)
            (n_terms,) = struct.unpack("<Q", f.read(8))
            postings = {}
            for _ in range(n_terms):
                vid, n = struct.unpack("<IQ", f.read(12))
                plist = [struct.unpack("<If", f.read(8)) for _ in range(n)]
                postings[vid] = [(int(o), float(w)) for o, w in plist]
        return cls(doc_ids, postings, filter_name)

    def storage_report(self) -> dict[str, int]:
        n_post = sum(len(p) for p in self.postings.values())
        report = {
            "header": 4 + 6 + len(self.filter_name.encode("utf-8")),
            "doc_table": _doc_table_bytes(self.doc_ids),
            "postings": 8 + 12 * len(self.postings) + 8 * n_post,
        }
        report["total"] = sum(report.values())
        return report


def build_sparse(reps: Iterable[tuple[str, RepresentationSet]],
                 flt: ContentWordFilter) -> SparseIndex:
    doc_ids = []
    postings: dict[int, list[tuple[int, float]]] = {}
    seen = set()
    for doc_id, r in reps:
        if doc_id in seen:
            raise DuplicateDoc(doc_id)
        seen.add(doc_id)
        ordinal = len(doc_ids)
        doc_ids.append(doc_id)
        vec = sparse_project(r, flt)
        for vid, w in vec.entries.items():
            # stored float32 so an index survives save/load bit-for-bit
            postings.setdefault(vid, []).append((ordinal, float(np.float32(w))))
    if not doc_ids:
        raise EmptyIndex("no documents to index")
    return SparseIndex(doc_ids, postings, flt.name)


def search_sparse(index: SparseIndex, q_sparse: SparseVector,
                  cutoff: int = 1000) -> ScoredList:
    if q_sparse.filter_name != index.filter_name:
        raise FilterMismatch(f"{q_sparse.filter_name} vs {index.filter_name}")
    acc: dict[int, float] = {}
    for vid, qw in q_sparse.entries.items():
        for ordinal, w in index.postings.get(vid, ()):
            acc[ordinal] = acc.get(ordinal, 0.0) + qw * w
    return ranked("", {index.doc_ids[o]: s for o, s in acc.items()}, cutoff)


# ------------------------------------------------------------ compressed

def _kmeans(rows: np.ndarray, k: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """k-means++ init, Lloyd iterations capped at KMEANS_MAX_ITERS or a
    relative inertia change below KMEANS_REL_TOL."""
    rng = np.random.default_rng(seed)
    n = rows.shape[0]
    x = rows.astype(np.float64)
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            centroids[c:] = centroids[0]
            break
        probs = d2 / total
        centroids[c] = x[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((x - centroids[c]) ** 2).sum(axis=1))
    prev_inertia = None
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(KMEANS_MAX_ITERS):
        dist = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2) \
            if n * k * x.shape[1] < 5e7 else None
        if dist is None:
            # chunked distance computation for large inputs
            dist = np.empty((n, k))
            x_sq = (x ** 2).sum(axis=1)
            c_sq = (centroids ** 2).sum(axis=1)
            step = max(1, int(5e7 / k))
            for i in range(0, n, step):
                j = min(n, i + step)
                dist[i:j] = x_sq[i:j, None] - 2.0 * (x[i:j] @ centroids.T) + c_sq[None, :]
        assign = dist.argmin(axis=1)
        inertia = float(dist[np.arange(n), assign].sum())
        for c in range(k):
            members = assign == c
            if members.any():
                centroids[c] = x[members].mean(axis=0)
        if prev_inertia is not None and prev_inertia > 0:
            if abs(prev_inertia - inertia) / prev_inertia < KMEANS_REL_TOL:
                break
        prev_inertia = inertia
    return centroids.astype(np.float32), assign.astype(np.uint32)


def _pack_codes(codes: np.ndarray) -> np.ndarray:
    """Pack values in {0..3} four-per-byte, row-major."""
    n, h = codes.shape
    pad = (-h) % 4
    if pad:
        codes = np.concatenate([codes, np.zeros((n, pad), dtype=codes.dtype)], axis=1)
    c = codes.reshape(n, -1, 4).astype(np.uint8)
    return (c[:, :, 0] | (c[:, :, 1] << 2) | (c[:, :, 2] << 4) | (c[:, :, 3] << 6))


def _unpack_codes(packed: np.ndarray, h: int) -> np.ndarray:
    parts = [(packed >> shift) & 0x3 for shift in (0, 2, 4, 6)]
    codes = np.stack(parts, axis=2).reshape(packed.shape[0], -1)
    return codes[:, :h]


@dataclass
class CompressedIndex:
    doc_ids: list[str]
    row_offsets: list[tuple[int, int]]
    centroids: np.ndarray  # (C, H) float32
    assignments: np.ndarray  # (rows,) uint32
    codes: np.ndarray  # (rows, ceil(H/4)) uint8 packed 2-bit residuals
    ranges: np.ndarray  # (H,) float32 symmetric quantization half-range
    dim: int
    report: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return self.assignments.shape[0]

    @property
    def n_centroids(self) -> int:
        return self.centroids.shape[0]

    def decode_rows(self, row_idx: np.ndarray | None = None) -> np.ndarray:
        """Reconstruct float32 rows: centroid + midpoint-dequantized residual."""
        if row_idx is None:
            row_idx = np.arange(self.n_rows)
        codes = _unpack_codes(self.codes[row_idx], self.dim).astype(np.float32)
        width = (self.ranges / 2.0).astype(np.float32)  # 4 levels over [-r, r]
        residual = -self.ranges + (codes + 0.5) * width
        return self.centroids[self.assignments[row_idx]] + residual

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(b"CIDX")
            f.write(struct.pack("<IIQI", _VERSION, self.dim, self.n_rows, self.n_centroids))
            _write_doc_table(f, self.doc_ids)
            for start, k in self.row_offsets:
                f.write(struct.pack("<QI", start, k))
            f.write(np.ascontiguousarray(self.centroids, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(self.assignments, dtype="<u4").tobytes())
            f.write(np.ascontiguousarray(self.codes, dtype="u1").tobytes())
            f.write(np.ascontiguousarray(self.ranges, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path) -> "CompressedIndex":
        with open(path, "rb") as f:
            if f.read(4) != b"CIDX":
                raise BadFormat(f"not a compressed index: {path}")
            version, dim, rows, n_c = struct.unpack("<IIQI", f.read(20))
            if version != _VERSION:
                raise BadFormat(f"unsupported compressed index version {version}")
            doc_ids = _read_doc_table(f)
            offsets = [struct.unpack("<QI", f.read(12)) for _ in doc_ids]
            centroids = np.frombuffer(f.read(n_c * dim * 4), dtype="<f4").reshape(n_c, dim).copy()
            assignments = np.frombuffer(f.read(rows * 4), dtype="<u4").copy()
            code_w = (dim + 3) // 4
            codes = np.frombuffer(f.read(rows * code_w), dtype="u1").reshape(rows, code_w).copy()
            ranges = np.frombuffer(f.read(dim * 4), dtype="<f4").copy()
        idx = cls(doc_ids, [(int(s), int(k)) for s, k in offsets],
                  centroids, assignments, codes, ranges, dim)
        idx.report = idx.storage_report()
        return idx

    def storage_report(self) -> dict[str, int]:
        code_w = (self.dim + 3) // 4
        report = {
            "header": 4 + 20,
            "doc_table": _doc_table_bytes(self.doc_ids),
            "offsets": 12 * len(self.doc_ids),
            "codebook": self.n_centroids * self.dim * 4,
            "assignments": self.n_rows * 4,
            "residual_codes": self.n_rows * code_w,
            "quant_ranges": self.dim * 4,
        }
        report["total"] = sum(report.values())
        return report


def compress(index: DenseIndex, n_centroids: int, seed: int = 0) -> CompressedIndex:
    """Centroid + 2-bit residual compression of a flat dense index.

    Residuals are quantized per dimension into 4 uniform buckets over a
    symmetric range covering both 3 sigma and the observed extremes, so
    reconstruction error never exceeds half a bucket width.
    """
    if n_centroids > index.n_rows:
        raise TooFewRows(f"{index.n_rows} rows < {n_centroids} centroids")
    if n_centroids < 1:
        raise TooFewRows("need at least one centroid")
    centroids, assignments = _kmeans(index.vectors, n_centroids, seed)
    residuals = index.vectors.astype(np.float64) - centroids[assignments].astype(np.float64)
    sigma = residuals.std(axis=0)
    ranges = np.maximum(3.0 * sigma, np.abs(residuals).max(axis=0))
    ranges = np.maximum(ranges, 1e-12).astype(np.float32)
    width = ranges.astype(np.float64) / 2.0
    codes = np.clip(np.floor((residuals + ranges) / width), 0, 3).astype(np.uint8)
    packed = _pack_codes(codes)

    out = CompressedIndex(index.doc_ids, index.row_offsets, centroids,
                          assignments, packed, ranges, index.dim)
    original = index.storage_report()
    compressed = out.storage_report()
    out.report = {
        "original_bytes": original["total"],
        "compressed_bytes": compressed["total"],
        "ratio": original["total"] / compressed["total"],
        "original_vector_bytes": original["vectors"],
        "compressed_vector_bytes": compressed["assignments"] + compressed["residual_codes"],
    }
    return out


def search_compressed(index: CompressedIndex, q: RepresentationSet,
                      n_probe: int, cutoff: int = 1000) -> ScoredList:
    """Probe the nearest centroids per query row, gather docs owning any
    row in a probed centroid, reconstruct, and score with MaxSim."""
    if q.dim != index.dim:
        raise DimensionMismatch(f"query H={q.dim}, index H={index.dim}")
    if n_probe < 1 or n_probe > index.n_centroids:
        raise ValueError(f"n_probe must be in [1, {index.n_centroids}]")
    sims = q.hidden.astype(np.float64) @ index.centroids.astype(np.float64).T
    probed = set()
    for row_sims in sims:
        order = np.argsort(-row_sims, kind="stable")
        probed.update(int(c) for c in order[:n_probe])
    probe_mask = np.zeros(index.n_centroids, dtype=bool)
    probe_mask[list(probed)] = True
    row_hit = probe_mask[index.assignments]

    cand_docs, cand_offsets, cand_rows = [], [], []
    start_out = 0
    for ordinal, (start, k) in enumerate(index.row_offsets):
        if not row_hit[start:start + k].any():
            continue
        cand_docs.append(index.doc_ids[ordinal])
        cand_offsets.append((start_out, k))
        cand_rows.append(np.arange(start, start + k))
        start_out += k
    if not cand_docs:
        return ScoredList(query_id="", items=[], cutoff=cutoff)
    rows = index.decode_rows(np.concatenate(cand_rows))
    scores = _maxsim_per_doc(q.hidden, rows, cand_offsets)
    return ranked("", {d: float(s) for d, s in zip(cand_docs, scores)}, cutoff)


def decode_to_dense(index: CompressedIndex) -> DenseIndex:
    """Materialize the reconstructed flat index (full-probe reference)."""
    return DenseIndex(index.doc_ids, index.decode_rows(), index.row_offsets)


def storage_report(index) -> dict[str, int]:
    if not hasattr(index, "storage_report"):
        raise BadFormat(f"no storage report for {type(index).__name__}")
    return index.storage_report()
