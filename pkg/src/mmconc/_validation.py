"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import hashlib
import math
from typing import Iterable

import numpy as np

from .exceptions import ValidationError

NORMALIZATION_TOL = 1e-12
# slack used whenever a set is tested for having measure >= 1/2
HALF_TOL = 1e-12
COMPARE_TOL = 1e-9


def check_probability_vector(p, name: str = "measure") -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"{name} must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    if np.any(arr < 0):
        raise ValidationError(f"{name} has negative entries")
    total = math.fsum(arr.tolist())
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise ValidationError(f"{name} sums to {total!r}, not 1")
    return arr


def check_weight_profile(weights, *, require_sorted: bool = True) -> np.ndarray:
    """Atom masses: positive, summing to one, and non-increasing.

    The ordering is what the stabilizer chain needs, so it is enforced
    rather than silently repaired.
    """
    w = check_probability_vector(weights, "weights")
    if np.any(w <= 0):
        raise ValidationError("weights must be strictly positive")
    if require_sorted and np.any(np.diff(w) > 0):
        raise ValidationError("weights must be sorted non-increasing")
    return w


def check_positive(value, name: str) -> float:
    v = float(value)
    if not (v > 0 and math.isfinite(v)):
        raise ValidationError(f"{name} must be a positive finite real, got {value!r}")
    return v


def check_eps(eps, name: str = "eps") -> float:
    e = float(eps)
    if not (e >= 0 and math.isfinite(e)):
        raise ValidationError(f"{name} must be a nonnegative finite real, got {eps!r}")
    return e


def check_eps_grid(grid: Iterable[float]) -> np.ndarray:
    g = np.asarray(list(grid), dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValidationError("eps grid must be a non-empty list")
    for e in g:
        check_eps(e)
    if np.any(np.diff(g) <= 0):
        raise ValidationError("eps grid must be strictly increasing")
    return g


def check_mask(space, mask, name: str = "mask") -> np.ndarray:
    m = np.asarray(mask)
    if m.dtype != bool:
        if m.ndim == 1 and m.size == space.n and np.isin(m, (0, 1)).all():
            m = m.astype(bool)
        else:
            raise ValidationError(f"{name} must be a boolean vector")
    if m.shape != (space.n,):
        raise ValidationError(f"{name} has length {m.size}, space has {space.n} points")
    return m


def check_function(space, f, name: str = "f") -> np.ndarray:
    v = np.asarray(f, dtype=float)
    if v.shape != (space.n,):
        raise ValidationError(f"{name} has length {v.size}, space has {space.n} points")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} contains non-finite values")
    return v


def seed_from_label(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed(*parts) -> int:
    """Deterministic 63-bit seed from arbitrary printable parts."""
    text = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1
