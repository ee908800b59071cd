"""Dense matrix helpers and seeded random streams.

Matrices are plain 2-D ``float64`` numpy arrays. Randomness comes from
:func:`make_rng`, which derives an independent Philox stream from a master
seed and a string label, so adding a new consumer never shifts the draws
seen by an existing one.
"""

from __future__ import annotations

import hashlib
import os

import numpy as np

__all__ = [
    "as_matrix",
    "matmul",
    "make_rng",
    "sample_unit_sphere",
    "gaussian_init",
    "save_csv",
    "load_csv",
]


def as_matrix(a, name="matrix"):
    """Return ``a`` as a 2-D float64 array, rejecting other ranks."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def matmul(a, b):
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def _label_key(label: str) -> int:
    # crc/hash() are either too short or salted per process; sha256 is stable everywhere
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "little")


def make_rng(seed: int, label: str = "") -> np.random.Generator:
    """Counter-based generator for the sub-stream ``(seed, label)``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, _label_key(label)])
    return np.random.Generator(np.random.Philox(ss))


def sample_unit_sphere(rng: np.random.Generator, dim: int, size: int | None = None) -> np.ndarray:
    """Uniform direction(s) on the unit sphere in ``dim`` dimensions.

    Normalised isotropic Gaussian draws. With ``size`` given, returns a
    ``(size, dim)`` array of rows.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    shape = (dim,) if size is None else (size, dim)
    while True:
        v = rng.standard_normal(shape)
        norm = np.linalg.norm(v, axis=-1, keepdims=True)
        # an all-zero draw has probability zero; redraw rather than divide by it
        if np.all(norm > 0.0):
            return v / norm


def gaussian_init(rng: np.random.Generator, rows: int, cols: int, stddev: float) -> np.ndarray:
    if stddev < 0:
        raise ValueError("stddev must be >= 0")
    return rng.normal(0.0, 1.0, size=(rows, cols)) * stddev


def save_csv(path, m) -> None:
    """Write a matrix as CSV with 17 significant digits (exact round trip)."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        for row in m:
            fh.write(",".join(format(float(x), ".17g") for x in row))
            fh.write("\n")


def load_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(x) for x in line.split(",")])
    if not rows:
        return np.zeros((0, 0))
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"{os.fspath(path)}: ragged rows")
    return np.array(rows, dtype=np.float64)
