"""Generators of 1-Lipschitz functions on finite mm-spaces."""

from __future__ import annotations

import numpy as np

from .core import FiniteMMSpace, diameter


def distance_function(space: FiniteMMSpace, p: int) -> np.ndarray:
    return space.row(int(p)).copy()


def infimal_convolution(space: FiniteMMSpace, anchors, offsets) -> np.ndarray:
    """``h(x) = min_i (c_i + d(x, p_i))``, 1-Lipschitz for any offsets."""
    anchors = np.asarray(anchors, dtype=np.int64)
    offsets = np.asarray(offsets, dtype=float)
    return (space.rows(anchors) + offsets[:, None]).min(axis=0)


def random_infimal_convolution(space: FiniteMMSpace, rng: np.random.Generator, max_anchors: int = 8,
                               diam: float | None = None) -> np.ndarray:
    if diam is None:
        diam = diameter(space)
    r = int(rng.integers(1, min(space.n, max_anchors) + 1))
    anchors = rng.choice(space.n, size=r, replace=False)
    offsets = rng.uniform(0.0, max(diam, 1e-12), size=r)
    return infimal_convolution(space, anchors, offsets)


def deterministic_anchor_points(n: int, count: int) -> np.ndarray:
    """``count`` indices spread evenly over range(n) (all of them if count >= n)."""
    if count >= n:
        return np.arange(n)
    return np.unique(np.round(np.linspace(0, n - 1, count)).astype(np.int64))


def lipschitz_functions(space: FiniteMMSpace, count: int, seed: int, deterministic: bool = True):
    """Yield ``count`` 1-Lipschitz functions on the space.

    First the generators ``+d(., p)`` and ``-d(., p)`` (for evenly spread
    anchors when 2n exceeds ``count``), then seeded random infimal
    convolutions.
    """
    rng = np.random.default_rng(seed)
    emitted = 0
    if deterministic:
        pts = deterministic_anchor_points(space.n, count // 2 if 2 * space.n > count else space.n)
        for start in range(0, pts.size, 256):
            block = space.rows(pts[start:start + 256])
            for row in block:
                for sign in (1.0, -1.0):
                    if emitted >= count:
                        return
                    yield sign * row
                    emitted += 1
    diam = diameter(space) if emitted < count else 0.0
    while emitted < count:
        yield random_infimal_convolution(space, rng, diam=diam)
        emitted += 1
