"""File outputs: atomic writes, CSV tables and the binary field dump."""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return header, np.array([[float(v) for v in r] for r in body]) if body else np.zeros((0, len(header)))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


# field dump: b"TVEF", u32 version, 32-byte mesh hash, u32 k, u32 l_theta,
# u32 l_zeta, 16-byte variant tag (ascii, NUL padded), f8 time, u32 n_qp,
# u32 n_fields; then n_fields 16-byte ascii names; body <f8 of shape
# (n_qp, sum of field widths) row-major, one row per quadrature point.
FIELD_MAGIC = b"TVEF"
_FIELD_HEADER = struct.Struct("<4sI32s3I16sdII")
FIELD_WIDTHS = {"theta": 1, "eps_p": 6, "T": 6, "sigma": 6, "strain": 6}


def write_field_dump(path, mesh_hash: bytes, k: int, l_theta: int, l_zeta: int,
                     variant: str, t: float, fields: dict) -> None:
    names = list(fields)
    cols = []
    for name in names:
        arr = np.asarray(fields[name], dtype=float)
        cols.append(arr.reshape(arr.shape[0], -1))
    nq = cols[0].shape[0]
    head = _FIELD_HEADER.pack(FIELD_MAGIC, 1, mesh_hash, k, l_theta, l_zeta,
                              variant.encode()[:16].ljust(16, b"\0"), float(t), nq, len(names))
    labels = b"".join(n.encode()[:16].ljust(16, b"\0") for n in names)
    body = np.ascontiguousarray(np.hstack(cols), dtype="<f8").tobytes()
    atomic_write_bytes(path, head + labels + body)


def read_field_dump(path):
    raw = Path(path).read_bytes()
    magic, version, mhash, k, lt, lz, tag, t, nq, nf = _FIELD_HEADER.unpack_from(raw)
    if magic != FIELD_MAGIC:
        raise ValueError(f"{path}: not a field dump")
    off = _FIELD_HEADER.size
    names = [raw[off + 16 * i: off + 16 * (i + 1)].rstrip(b"\0").decode() for i in range(nf)]
    off += 16 * nf
    data = np.frombuffer(raw, dtype="<f8", offset=off).reshape(nq, -1)
    out, col = {}, 0
    for name in names:
        w = FIELD_WIDTHS.get(name, 1)
        out[name] = data[:, col:col + w].copy() if w > 1 else data[:, col].copy()
        col += w
    meta = dict(mesh_hash=mhash, k=k, l_theta=lt, l_zeta=lz,
                variant=tag.rstrip(b"\0").decode(), t=t, n_qp=nq)
    return meta, out
