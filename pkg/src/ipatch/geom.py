"""Small vector helpers shared across modules.

Everything operates on float64 arrays of shape ``(3,)`` or ``(m, 3)``.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateNormal

_TINY = 1e-300


def as_point(p) -> np.ndarray:
    """Coerce to a float64 array of shape (3,) or (m, 3)."""
    a = np.asarray(p, dtype=np.float64)
    if a.shape[-1] != 3:
        raise ValueError(f"expected 3-vectors, got shape {a.shape}")
    return a


def norm(v) -> np.ndarray | float:
    return np.linalg.norm(np.asarray(v, dtype=np.float64), axis=-1)


def unit(v, error: str = "zero-length vector"):
    """Normalize, raising :class:`DegenerateNormal` on (near) zero input."""
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n < 1e-30):
        raise DegenerateNormal(error)
    return v / n


def bbox(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pts = as_point(points).reshape(-1, 3)
    return pts.min(axis=0), pts.max(axis=0)


def bbox_diagonal(points: np.ndarray) -> float:
    lo, hi = bbox(points)
    return float(np.linalg.norm(hi - lo))


def frozen(a: np.ndarray) -> np.ndarray:
    """Own and lock an array; used for fields of immutable dataclasses."""
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out
