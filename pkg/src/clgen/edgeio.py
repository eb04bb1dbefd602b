"""Edge list files.

Text: one ``u v`` pair per line in decimal.

Binary: a 16-byte magic field (``CLGEDGE1`` padded with NUL bytes), the
format version and the record count as little-endian uint64, followed by
``count`` records of two little-endian uint64 node ids.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CLGEDGE1".ljust(16, b"\0")
VERSION = 1
_HEADER = struct.Struct("<16sQQ")
FORMATS = ("text", "bin")
_CHUNK = 1 << 20


class EdgeFileError(ValueError):
    pass


def suffix(fmt: str) -> str:
    return {"text": ".txt", "bin": ".bin"}[fmt]


def write_edges(u, v, fmt: str, path) -> int:
    """Write parallel arrays of endpoints; returns the number of records."""
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    if u.shape != v.shape:
        raise ValueError("endpoint arrays differ in length")
    path = Path(path)
    if fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, VERSION, u.shape[0]))
            for lo in range(0, u.shape[0], _CHUNK):
                rec = np.empty((min(_CHUNK, u.shape[0] - lo), 2), dtype="<u8")
                rec[:, 0] = u[lo:lo + _CHUNK]
                rec[:, 1] = v[lo:lo + _CHUNK]
                fh.write(rec.tobytes())
    elif fmt == "text":
        with open(path, "w", encoding="ascii") as fh:
            for lo in range(0, u.shape[0], _CHUNK):
                block = np.column_stack((u[lo:lo + _CHUNK], v[lo:lo + _CHUNK]))
                np.savetxt(fh, block, fmt="%d %d")
    else:
        raise ValueError(f"unknown edge format {fmt!r}")
    return int(u.shape[0])


def sniff_format(path) -> str:
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
    return "bin" if head == MAGIC else "text"


def read_edges(path) -> tuple[np.ndarray, np.ndarray]:
    """Read either format (detected from the magic bytes)."""
    path = Path(path)
    if sniff_format(path) == "bin":
        raw = path.read_bytes()
        if len(raw) < _HEADER.size:
            raise EdgeFileError(f"{path}: truncated header")
        magic, version, count = _HEADER.unpack_from(raw)
        if version != VERSION:
            raise EdgeFileError(f"{path}: unsupported version {version}")
        body = len(raw) - _HEADER.size
        if body != 16 * count:
            raise EdgeFileError(f"{path}: header says {count} records, body holds {body / 16:g}")
        rec = np.frombuffer(raw, dtype="<u8", offset=_HEADER.size).reshape(-1, 2).astype(np.int64)
        return rec[:, 0].copy(), rec[:, 1].copy()
    text = path.read_text(encoding="ascii")
    flat = np.array(text.split(), dtype=np.int64)
    if flat.shape[0] % 2:
        raise EdgeFileError(f"{path}: odd number of node ids")
    pairs = flat.reshape(-1, 2)
    return pairs[:, 0].copy(), pairs[:, 1].copy()


def relabel(u, v, labels):
    """Map sorted-position ids to input labels, keeping each pair as (min, max)."""
    lu, lv = labels[u], labels[v]
    return np.minimum(lu, lv), np.maximum(lu, lv)
