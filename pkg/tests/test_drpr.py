import numpy as np
import pytest

from multirep.drpr import (
    FLAG_LOGITS,
    FLAG_SPARSE_LOGITS,
    iter_drpr,
    read_drpr,
    read_drpr_header,
    validate,
    write_drpr,
)
from multirep.encoder import RepresentationSet
from multirep.errors import BadFormat


def _items(rng, n=10, k=4, h=8, v=20):
    return [
        (f"doc{i}", RepresentationSet(
            hidden=rng.standard_normal((k, h)).astype(np.float32),
            logits=rng.standard_normal((k, v)).astype(np.float32)))
        for i in range(n)
    ]


def test_round_trip_dense_logits(tmp_path, rng):
    items = _items(rng)
    path = tmp_path / "x.drpr"
    header = write_drpr(path, items, k=4, h=8, v=20)
    assert header.count == 10 and header.has_logits
    back_header, back = read_drpr(path)
    assert back_header == header
    for (ida, a), (idb, b) in zip(items, back):
        assert ida == idb
        assert np.array_equal(a.hidden, b.hidden)
        assert np.array_equal(a.logits, b.logits)


def test_round_trip_without_logits(tmp_path, rng):
    items = [(d, RepresentationSet(hidden=r.hidden, logits=None))
             for d, r in _items(rng)]
    path = tmp_path / "x.drpr"
    header = write_drpr(path, items, k=4, h=8, v=20, with_logits=False)
    assert not header.has_logits
    _, back = read_drpr(path)
    assert all(r.logits is None for _, r in back)


def test_sparse_topt_keeps_largest_entries(tmp_path, rng):
    items = _items(rng, n=3)
    path = tmp_path / "x.drpr"
    header = write_drpr(path, items, k=4, h=8, v=20, sparse_topt=5)
    assert header.sparse_logits
    _, back = read_drpr(path)
    for (_, full), (_, sparse) in zip(items, back):
        for row_full, row_sparse in zip(full.logits, sparse.logits):
            kept = np.nonzero(row_sparse)[0]
            assert len(kept) <= 5
            # every kept value matches the original
            assert np.array_equal(row_sparse[kept], row_full[kept])
            # kept entries are the top-5 of the original row
            top = set(np.argsort(-row_full)[:5])
            assert set(kept) <= top | set(np.nonzero(row_full == 0)[0])


def test_header_count_rewritten_after_streaming(tmp_path, rng):
    items = _items(rng, n=7)
    path = tmp_path / "x.drpr"
    write_drpr(path, iter(items), k=4, h=8, v=20)
    assert read_drpr_header(path).count == 7


def test_validate_reports_ok(tmp_path, rng):
    path = tmp_path / "x.drpr"
    write_drpr(path, _items(rng), k=4, h=8, v=20)
    report = validate(path)
    assert report["ok"] and report["count"] == 10
    assert report["k"] == 4 and report["h"] == 8 and report["v"] == 20


def test_validate_rejects_nonfinite(tmp_path, rng):
    items = _items(rng, n=2)
    items[1][1].hidden[0, 0] = np.nan
    path = tmp_path / "x.drpr"
    write_drpr(path, items, k=4, h=8, v=20)
    with pytest.raises(BadFormat):
        validate(path)


def test_shape_mismatch_rejected(tmp_path, rng):
    items = _items(rng, n=2, k=3)
    path = tmp_path / "x.drpr"
    with pytest.raises(BadFormat):
        write_drpr(path, items, k=4, h=8, v=20)
    assert not path.exists()  # atomic: nothing left behind


def test_not_a_drpr_file(tmp_path):
    path = tmp_path / "x.drpr"
    path.write_bytes(b"JUNKJUNKJUNK" * 4)
    with pytest.raises(BadFormat):
        list(iter_drpr(path))
