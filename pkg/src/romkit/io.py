"""On-disk formats: snapshot containers (binary and CSV) and model archives.

Binary snapshot layout (little-endian)::

    b"ROMS" | u32 version=1 | u64 dof | u64 K | u32 param_dim
    f64 params[K * param_dim]   (row-major)
    f64 times[K]
    f64 snapshots[dof * K]      (column-major: one snapshot after another)
    u64 n | n bytes of UTF-8 JSON metadata

Concurrent writers to the same path are not supported.
"""
import csv
import json
import struct
from pathlib import Path

import numpy as np

from .dataset import SnapshotSet
from .exceptions import SnapshotFormatError

MAGIC = b"ROMS"
VERSION = 1
_HEADER = struct.Struct("<4sIQQI")
_LEN = struct.Struct("<Q")


def _infer_format(path, fmt):
    if fmt is not None:
        return fmt
    return "csv" if Path(path).suffix.lower() == ".csv" else "binary"


def save_snapshots(path, snapshots, fmt=None):
    fmt = _infer_format(path, fmt)
    if snapshots.n_snapshots == 0:
        raise ValueError("refusing to save a snapshot set with no columns")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "binary":
        _save_binary(path, snapshots)
    elif fmt == "csv":
        _save_csv(path, snapshots)
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}")


def load_snapshots(path, fmt=None):
    fmt = _infer_format(path, fmt)
    try:
        if fmt == "binary":
            return _load_binary(Path(path))
        if fmt == "csv":
            return _load_csv(Path(path))
    except FileNotFoundError as exc:
        raise SnapshotFormatError(f"{path}: file not found") from exc
    raise ValueError(f"unknown snapshot format {fmt!r}")


def _save_binary(path, s):
    meta = json.dumps(s.metadata, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, s.dof, s.n_snapshots, s.param_dim))
        fh.write(np.ascontiguousarray(s.params, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(s.times, dtype="<f8").tobytes())
        fh.write(np.asarray(s.snapshots, dtype="<f8").tobytes(order="F"))
        fh.write(_LEN.pack(len(meta)))
        fh.write(meta)


def _load_binary(path):
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise SnapshotFormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, dof, K, p = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"{path}: unsupported version {version}, expected {VERSION}")
    off = _HEADER.size
    n_float = K * p + K + dof * K
    end = off + 8 * n_float
    if len(data) < end + _LEN.size:
        raise SnapshotFormatError(f"{path}: truncated payload ({len(data)} bytes, need >= {end + _LEN.size})")
    floats = np.frombuffer(data, dtype="<f8", count=n_float, offset=off)
    params = floats[: K * p].reshape(K, p).copy()
    times = floats[K * p : K * p + K].copy()
    snaps = floats[K * p + K :].reshape(dof, K, order="F").copy()
    (n_meta,) = _LEN.unpack_from(data, end)
    raw = data[end + _LEN.size :]
    if len(raw) != n_meta:
        raise SnapshotFormatError(f"{path}: metadata length {len(raw)} != declared {n_meta}")
    try:
        metadata = json.loads(raw.decode("utf-8")) if n_meta else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotFormatError(f"{path}: corrupt metadata: {exc}") from exc
    return SnapshotSet(snaps, params, times, metadata)


def _save_csv(path, s):
    header = ["t"] + [f"mu_{i + 1}" for i in range(s.param_dim)] + [f"dof_{i + 1}" for i in range(s.dof)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(s.n_snapshots):
            row = np.concatenate(([s.times[k]], s.params[k], s.snapshots[:, k]))
            writer.writerow([format(v, ".17g") for v in row])


def _load_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SnapshotFormatError(f"{path}: empty csv")
    header = rows[0]
    if not header or header[0] != "t":
        raise SnapshotFormatError(f"{path}: header must start with 't'")
    p = sum(1 for h in header if h.startswith("mu_"))
    n = sum(1 for h in header if h.startswith("dof_"))
    if 1 + p + n != len(header) or n == 0:
        raise SnapshotFormatError(f"{path}: header must read t,mu_1..mu_p,dof_1..dof_n")
    body = rows[1:]
    for lineno, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise SnapshotFormatError(f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}")
    try:
        table = np.array([[float(v) for v in row] for row in body], dtype=np.float64).reshape(len(body), len(header))
    except ValueError as exc:
        raise SnapshotFormatError(f"{path}: non-numeric field: {exc}") from exc
    return SnapshotSet(table[:, 1 + p :].T.copy(), table[:, 1 : 1 + p].copy(), table[:, 0].copy(), {})


def save_arrays(path, meta, **arrays):
    """Write a model archive: named float/int arrays plus a JSON header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=blob, **arrays)


def load_arrays(path):
    try:
        with np.load(path, allow_pickle=False) as npz:
            arrays = {k: npz[k] for k in npz.files}
    except FileNotFoundError as exc:
        raise SnapshotFormatError(f"{path}: file not found") from exc
    except (ValueError, OSError) as exc:
        raise SnapshotFormatError(f"{path}: not a model archive: {exc}") from exc
    if "__meta__" not in arrays:
        raise SnapshotFormatError(f"{path}: model archive has no header")
    meta = json.loads(arrays.pop("__meta__").tobytes().decode("utf-8"))
    return meta, arrays
