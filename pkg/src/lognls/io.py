"""File formats: atomic writes, raw field snapshots with JSON sidecars."""

import contextlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError
from .grid import Grid, WaveField

__all__ = ["atomic_open", "atomic_write_json", "write_field", "read_field", "FIELD_FORMAT_VERSION"]

FIELD_FORMAT_VERSION = 1


@contextlib.contextmanager
def atomic_open(path, mode="w", **kwargs):
    """Write to a temporary file next to ``path`` and rename on success.

    On error the temporary file is removed and ``path`` is left untouched.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        if "b" not in mode:
            kwargs.setdefault("newline", "")
            kwargs.setdefault("encoding", "utf-8")
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def atomic_write_json(path, obj):
    with atomic_open(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def write_field(field, path, params=None):
    """Store ``field`` as little-endian float64 (re, im interleaved) in
    ``<path>.bin`` with metadata in ``<path>.json``.  Returns both paths."""
    path = Path(path)
    bin_path = path.with_suffix(".bin")
    meta_path = path.with_suffix(".json")
    data = np.empty(field.values.shape + (2,), dtype="<f8")
    data[..., 0] = field.values.real
    data[..., 1] = field.values.imag
    with atomic_open(bin_path, "wb") as fh:
        fh.write(data.tobytes(order="C"))
    meta = {
        "format_version": FIELD_FORMAT_VERSION,
        "grid": field.grid.to_dict(),
        "t": field.t,
        "dtype": "<f8",
        "layout": "C-order, re/im interleaved",
        "params": params or {},
    }
    atomic_write_json(meta_path, meta)
    return bin_path, meta_path


def read_field(path):
    """Inverse of :func:`write_field`; ``path`` may name either file."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    if meta.get("format_version") != FIELD_FORMAT_VERSION:
        raise InvalidParameterError(f"unsupported field format {meta.get('format_version')!r}")
    g = meta["grid"]
    grid = Grid(int(g["d"]), int(g["n"]), float(g["L"]))
    raw = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype="<f8")
    if raw.size != 2 * grid.n ** grid.d:
        raise InvalidParameterError(f"{path}: expected {2 * grid.n ** grid.d} values, found {raw.size}")
    raw = raw.reshape(grid.shape + (2,))
    return WaveField(grid, raw[..., 0] + 1j * raw[..., 1], meta["t"]), meta
