import struct

import numpy as np
import pytest

from tvesim.io import atomic_write_text, read_csv, read_field_dump, write_csv, write_field_dump


def test_field_dump_round_trip(tmp_path, rng):
    nq = 16
    fields = {"theta": rng.normal(size=nq), "eps_p": rng.normal(size=(nq, 6)), "sigma": rng.normal(size=(nq, 6))}
    path = tmp_path / "f.bin"
    write_field_dump(path, b"h" * 32, 3, 4, 5, "symmetric", 0.25, fields)
    meta, back = read_field_dump(path)
    assert meta == dict(mesh_hash=b"h" * 32, k=3, l_theta=4, l_zeta=5, variant="symmetric", t=0.25, n_qp=nq)
    for name, arr in fields.items():
        assert np.array_equal(back[name], arr)


def test_field_dump_layout(tmp_path):
    path = tmp_path / "f.bin"
    write_field_dump(path, bytes(32), 1, 1, 1, "broken", 1.0, {"theta": np.arange(3.0)})
    raw = path.read_bytes()
    head = struct.Struct("<4sI32s3I16sdII")
    assert raw[:4] == b"TVEF"
    assert len(raw) == head.size + 16 + 3 * 8
    assert np.array_equal(np.frombuffer(raw[head.size + 16:], "<f8"), np.arange(3.0))


def test_field_dump_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.bin"
    path.write_bytes(b"NOPE" + bytes(100))
    with pytest.raises(ValueError):
        read_field_dump(path)


def test_csv_round_trip_is_exact(tmp_path, rng):
    rows = rng.normal(size=(5, 3))
    write_csv(tmp_path / "a.csv", ("x", "y", "z"), rows)
    header, body = read_csv(tmp_path / "a.csv")
    assert header == ["x", "y", "z"]
    assert np.array_equal(body, rows)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "r.txt"
    atomic_write_text(target, "one\n")
    atomic_write_text(target, "two\n")
    assert target.read_text() == "two\n"
    assert [p.name for p in target.parent.iterdir()] == ["r.txt"]
