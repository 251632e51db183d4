"""Finite metric-measure spaces and their geometric primitives.

A :class:`FiniteMMSpace` is a finite point set with a probability vector and
a metric.  The metric is either a dense table (explicit mode) or a pair of
vectorised callables evaluating distances from structured point encodings
(implicit mode).  Everything downstream only ever asks for *rows* of the
metric or for distances of index pairs, so both modes look the same.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from ._validation import (
    COMPARE_TOL,
    HALF_TOL,
    check_function,
    check_mask,
    check_positive,
    check_probability_vector,
    check_eps,
    seed_from_label,
)
from .exceptions import CapExceededError, ValidationError

EXPLICIT_CAP = 2**12
DIAMETER_CAP = 2**14
ROW_BLOCK = 256

RowsFn = Callable[[np.ndarray], np.ndarray]
PairsFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class FiniteMMSpace:
    """A finite metric space with a probability measure.

    Parameters
    ----------
    measure : array-like of shape (n,)
        Probability weights of the points.
    table : ndarray of shape (n, n), optional
        Dense distance table (explicit mode).
    rows : callable, optional
        ``rows(idx) -> (len(idx), n)`` distances (implicit mode).
    pairs : callable, optional
        ``pairs(i, j) -> (len(i),)`` distances for index pairs.  Derived
        from ``rows`` when omitted.
    label : str
        Identifier used in reports and CSV output.
    points : ndarray, optional
        Structured encodings of the points (permutations, tuples, ...).
    diameter : float, optional
        Closed-form diameter for implicit spaces.
    distance_levels : array-like, optional
        A finite superset of the realized pairwise distances, when known in
        closed form.  Used to keep eps grids off the distance lattice.
    group : FiniteGroup, optional
        Group structure when the points form a group.
    info : dict, optional
        Free-form constructor metadata.
    strict : bool
        Reject measures that are not probability vectors.  Pass ``False`` to
        build a deliberately broken space for :func:`validate_space`.
    """

    def __init__(
        self,
        measure,
        table=None,
        *,
        rows: Optional[RowsFn] = None,
        pairs: Optional[PairsFn] = None,
        label: str = "space",
        points=None,
        diameter: Optional[float] = None,
        distance_levels=None,
        group=None,
        info: Optional[dict] = None,
        strict: bool = True,
    ):
        if strict:
            mu = check_probability_vector(measure)
        else:
            mu = np.asarray(measure, dtype=float)
            if mu.ndim != 1 or mu.size == 0:
                raise ValidationError("measure must be a non-empty 1-d vector")
        mu = mu.copy()
        mu.flags.writeable = False
        self._measure = mu
        self.label = str(label)
        if table is None and rows is None:
            raise ValidationError("either a distance table or a rows oracle is required")
        if table is not None:
            t = np.array(table, dtype=float)
            if t.shape != (mu.size, mu.size):
                raise ValidationError(f"table has shape {t.shape}, expected {(mu.size, mu.size)}")
            if mu.size > EXPLICIT_CAP:
                raise CapExceededError(
                    f"explicit tables are limited to {EXPLICIT_CAP} points; use a rows oracle"
                )
            t.flags.writeable = False
            self._table = t
        else:
            self._table = None
        self._rows = rows
        self._pairs = pairs
        self.points = points
        self._diameter = diameter
        self._levels = None if distance_levels is None else np.unique(np.asarray(distance_levels, float))
        self.group = group
        self.info = dict(info or {})
        self._dense_cache = None

    # -- basic accessors -------------------------------------------------
    @property
    def n(self) -> int:
        return self._measure.size

    point_count = n

    @property
    def measure(self) -> np.ndarray:
        return self._measure

    @property
    def mode(self) -> str:
        return "explicit" if self._table is not None else "implicit"

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self._measure == self._measure[0]))

    def __repr__(self) -> str:
        return f"FiniteMMSpace(label={self.label!r}, n={self.n}, mode={self.mode})"

    # -- metric access ---------------------------------------------------
    def rows(self, idx) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        if self._table is not None:
            return self._table[idx]
        if self._dense_cache is not None:
            return self._dense_cache[idx]
        return np.asarray(self._rows(idx), dtype=float)

    def row(self, i: int) -> np.ndarray:
        return self.rows([i])[0]

    def pair_distances(self, i, j) -> np.ndarray:
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        if self._table is not None:
            return self._table[i, j]
        if self._pairs is not None:
            return np.asarray(self._pairs(i, j), dtype=float)
        flat_i, flat_j = i.ravel(), j.ravel()
        out = np.empty(flat_i.size, dtype=float)
        for start in range(0, flat_i.size, ROW_BLOCK):
            blk = self.rows(flat_i[start:start + ROW_BLOCK])
            out[start:start + blk.shape[0]] = blk[np.arange(blk.shape[0]), flat_j[start:start + ROW_BLOCK]]
        return out.reshape(i.shape)

    def distance(self, i: int, j: int) -> float:
        return float(self.pair_distances(np.array([i]), np.array([j]))[0])

    def iter_row_blocks(self, block: int = ROW_BLOCK) -> Iterator[tuple[int, np.ndarray]]:
        for start in range(0, self.n, block):
            yield start, self.rows(np.arange(start, min(self.n, start + block)))

    def dense(self) -> np.ndarray:
        """Full distance table; cached for implicit spaces up to EXPLICIT_CAP points."""
        if self._table is not None:
            return self._table
        if self._dense_cache is None:
            if self.n > EXPLICIT_CAP:
                raise CapExceededError(f"dense table of {self.n} points exceeds cap {EXPLICIT_CAP}")
            d = np.vstack([blk for _, blk in self.iter_row_blocks()])
            d.flags.writeable = False
            self._dense_cache = d
        return self._dense_cache

    @property
    def closed_form_diameter(self) -> Optional[float]:
        return self._diameter

    def distance_levels(self, max_rows: int = 128) -> np.ndarray:
        """Distinct realized distances (or a closed-form superset of them)."""
        if self._levels is not None:
            return self._levels
        if self.n <= EXPLICIT_CAP:
            vals = [np.unique(blk) for _, blk in self.iter_row_blocks()]
        else:
            rng = np.random.default_rng(seed_from_label(self.label))
            idx = np.unique(np.concatenate([np.arange(min(64, self.n)), rng.integers(0, self.n, max_rows)]))
            vals = [np.unique(self.rows(idx))]
        return np.unique(np.concatenate(vals))


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    passed: bool
    violation: Optional[str] = None
    indices: Optional[tuple] = None
    sample_size: Optional[int] = None
    checks: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.passed


def validate_space(space: FiniteMMSpace, n_samples: int = 1000) -> ValidationReport:
    """Check the measure and metric axioms.

    Explicit spaces are checked exhaustively; implicit ones on ``n_samples``
    random triples drawn with a seed derived from the label.
    """
    mu = space.measure
    total = float(np.sum(mu))
    if abs(total - 1.0) > 1e-12 or np.any(mu < 0):
        return ValidationReport(False, "normalization", None, None, ["normalization"])
    if space.mode == "explicit":
        return _validate_table(space.dense())
    return _validate_sampled(space, n_samples)


def _validate_table(d: np.ndarray) -> ValidationReport:
    n = d.shape[0]
    checks = ["normalization"]
    diag = np.flatnonzero(np.abs(np.diag(d)) > 0)
    checks.append("zero diagonal")
    if diag.size:
        return ValidationReport(False, "zero diagonal", (int(diag[0]),), None, checks)
    checks.append("symmetry")
    bad = np.argwhere(np.abs(d - d.T) > COMPARE_TOL)
    if bad.size:
        return ValidationReport(False, "symmetry", tuple(int(v) for v in bad[0]), None, checks)
    checks.append("positivity")
    off = ~np.eye(n, dtype=bool)
    bad = np.argwhere((d <= 0) & off)
    if bad.size:
        return ValidationReport(False, "positivity", tuple(int(v) for v in bad[0]), None, checks)
    checks.append("triangle")
    first = None
    for j in range(n):
        viol = d > d[:, j][:, None] + d[j, :][None, :] + 1e-12
        if viol.any():
            i, k = np.argwhere(viol)[0]
            cand = (int(i), j, int(k))
            if first is None or cand < first:
                first = cand
    if first is not None:
        return ValidationReport(False, "triangle", first, None, checks)
    return ValidationReport(True, None, None, None, checks)


def _validate_sampled(space: FiniteMMSpace, n_samples: int) -> ValidationReport:
    rng = np.random.default_rng(seed_from_label(space.label))
    n = space.n
    i, j, k = (rng.integers(0, n, n_samples) for _ in range(3))
    checks = ["normalization", "zero diagonal", "symmetry", "positivity", "triangle"]
    dii = space.pair_distances(i, i)
    if np.any(dii != 0):
        t = int(np.flatnonzero(dii != 0)[0])
        return ValidationReport(False, "zero diagonal", (int(i[t]),), n_samples, checks)
    dij, dji = space.pair_distances(i, j), space.pair_distances(j, i)
    bad = np.flatnonzero(np.abs(dij - dji) > COMPARE_TOL)
    if bad.size:
        t = bad[0]
        return ValidationReport(False, "symmetry", (int(i[t]), int(j[t])), n_samples, checks)
    bad = np.flatnonzero((i != j) & (dij <= 0))
    if bad.size:
        t = bad[0]
        return ValidationReport(False, "positivity", (int(i[t]), int(j[t])), n_samples, checks)
    djk, dik = space.pair_distances(j, k), space.pair_distances(i, k)
    bad = np.flatnonzero(dik > dij + djk + 1e-12)
    if bad.size:
        t = bad[0]
        return ValidationReport(False, "triangle", (int(i[t]), int(j[t]), int(k[t])), n_samples, checks)
    return ValidationReport(True, None, None, n_samples, checks)


# ---------------------------------------------------------------------------
# geometry


def distance_to_set(space: FiniteMMSpace, A) -> np.ndarray:
    """``d(y, A) = min_{x in A} d(y, x)`` for every point y."""
    A = check_mask(space, A, "A")
    members = np.flatnonzero(A)
    if members.size == 0:
        raise ValidationError("empty set has no neighborhood")
    out = np.full(space.n, np.inf)
    # metric is symmetric, so rows of members give distances to every y
    for start in range(0, members.size, ROW_BLOCK):
        blk = space.rows(members[start:start + ROW_BLOCK])
        np.minimum(out, blk.min(axis=0), out=out)
    return out


def neighborhood(space: FiniteMMSpace, A, eps: float) -> np.ndarray:
    """Closed eps-neighborhood ``{y : d(y, A) <= eps}`` as a boolean mask."""
    eps = check_eps(eps)
    return distance_to_set(space, A) <= eps


def diameter(space: FiniteMMSpace) -> float:
    if space.n == 1:
        return 0.0
    if space.mode == "explicit":
        return float(space.dense().max())
    if space.closed_form_diameter is not None:
        return float(space.closed_form_diameter)
    if space.n > DIAMETER_CAP:
        raise CapExceededError("diameter infeasible: no closed form and too many points")
    return float(max(blk.max() for _, blk in space.iter_row_blocks()))


def median_interval(space: FiniteMMSpace, f) -> tuple[float, float]:
    """Endpoints of the interval of medians of f under the space measure."""
    f = check_function(space, f)
    vals, inv = np.unique(f, return_inverse=True)
    mass = np.bincount(inv, weights=space.measure, minlength=vals.size)
    below = np.cumsum(mass)
    above = np.cumsum(mass[::-1])[::-1]
    lo = vals[np.flatnonzero(below >= 0.5 - HALF_TOL)[0]]
    hi = vals[np.flatnonzero(above >= 0.5 - HALF_TOL)[-1]]
    return float(lo), float(max(lo, hi))


def median_of(space: FiniteMMSpace, f) -> float:
    """Median of f; the midpoint of the median interval when it is not a point."""
    lo, hi = median_interval(space, f)
    return 0.5 * (lo + hi)


@dataclass
class LipschitzReport:
    ok: bool
    worst_pair: Optional[tuple[int, int]]
    worst_ratio: float
    sampled: Optional[int] = None

    def __bool__(self) -> bool:
        return self.ok


def lipschitz_check(space: FiniteMMSpace, f, L: float = 1.0, n_samples: int = 20000) -> LipschitzReport:
    """Test ``|f(x) - f(y)| <= L d(x, y)`` for all pairs.

    Exhaustive up to ``DIAMETER_CAP`` points, otherwise on ``n_samples``
    seeded random pairs (the count is returned in the report).
    """
    f = check_function(space, f)
    L = check_positive(L, "L")
    if space.n == 1:
        return LipschitzReport(True, None, 0.0)
    ok = True
    worst, worst_pair = -1.0, None
    if space.n <= DIAMETER_CAP:
        sampled = None
        for start, blk in space.iter_row_blocks():
            df = np.abs(f[start:start + blk.shape[0], None] - f[None, :])
            viol = df > L * blk + COMPARE_TOL
            ok = ok and not viol.any()
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(blk > 0, df / np.where(blk > 0, blk, 1.0), 0.0)
            r, c = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
            if ratio[r, c] > worst:
                worst, worst_pair = float(ratio[r, c]), (start + int(r), int(c))
    else:
        sampled = n_samples
        rng = np.random.default_rng(seed_from_label(space.label) + 1)
        i = rng.integers(0, space.n, n_samples)
        j = rng.integers(0, space.n, n_samples)
        d = space.pair_distances(i, j)
        df = np.abs(f[i] - f[j])
        ok = not np.any(df > L * d + COMPARE_TOL)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(d > 0, df / np.where(d > 0, d, 1.0), 0.0)
        t = int(np.argmax(ratio))
        worst, worst_pair = float(ratio[t]), (int(i[t]), int(j[t]))
    if worst_pair is not None and worst_pair[0] > worst_pair[1]:
        worst_pair = (worst_pair[1], worst_pair[0])
    return LipschitzReport(bool(ok), worst_pair, worst, sampled)


def single_point_space(label: str = "point") -> FiniteMMSpace:
    return FiniteMMSpace([1.0], [[0.0]], label=label, diameter=0.0)


def explicit_space(table, measure=None, label: str = "explicit", strict: bool = True) -> FiniteMMSpace:
    """Convenience constructor; uniform measure when none is given."""
    t = np.asarray(table, dtype=float)
    if measure is None:
        measure = np.full(t.shape[0], 1.0 / t.shape[0])
    return FiniteMMSpace(measure, t, label=label, strict=strict)
