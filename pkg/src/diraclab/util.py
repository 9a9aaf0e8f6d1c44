"""Small shared helpers: slope fits, hashing, atomic JSON output."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np


def loglog_slope(x, y, floor: float = 0.0) -> float:
    """Least-squares slope of log(y) against log(x), ignoring entries <= floor."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = (y > floor) & (x > 0)
    if mask.sum() < 2:
        return float("nan")
    coeffs = np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)
    return float(coeffs[0])


def running_slopes(x, y) -> np.ndarray:
    """Pairwise log-log slopes between consecutive samples (nan where undefined)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.full(len(x), np.nan)
    for i in range(1, len(x)):
        if y[i] > 0 and y[i - 1] > 0 and x[i] > 0 and x[i - 1] > 0 and x[i] != x[i - 1]:
            out[i] = (np.log(y[i]) - np.log(y[i - 1])) / (np.log(x[i]) - np.log(x[i - 1]))
    return out


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_json(path, payload) -> None:
    """Write JSON to a temp file in the target directory, then rename."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def complex_to_json(arr) -> list:
    """Nested row-major lists of [re, im] pairs for a complex ndarray."""
    arr = np.asarray(arr, dtype=complex)
    if arr.ndim == 0:
        return [float(arr.real), float(arr.imag)]
    return [complex_to_json(sub) for sub in arr]


def complex_from_json(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]
