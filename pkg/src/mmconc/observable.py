"""Observable distance between mm-spaces via 1-Lipschitz function nets.

Spaces are parametrized by M equal-mass atoms.  Functions are compared in
the Ky Fan metric ``me1(u, v) = inf{lam > 0 : mass{|u - v| > lam} < lam}``
and nets of lifted 1-Lipschitz functions by the Hausdorff distance under
me1.  The distance estimate minimizes over atom matchings found by a
seeded search, so it is a heuristic value, not a certified bound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._io import csv_text
from ._validation import derive_seed
from .core import FiniteMMSpace, lipschitz_check
from .exceptions import InvariantError, ValidationError
from .functions import lipschitz_functions

DEFAULT_M = 720
DEFAULT_K = 64
DEFAULT_T = 200
_PAIR_CHUNK = 1 << 22


@dataclass
class AtomizedSpace:
    label: str
    assignment: np.ndarray

    @property
    def M(self) -> int:
        return self.assignment.size

    def counts(self, n: int) -> np.ndarray:
        return np.bincount(self.assignment, minlength=n)


def quantize(space: FiniteMMSpace, M: int) -> AtomizedSpace:
    """Split M equal atoms over the points, in point order.

    Largest-remainder allocation: every point gets ``floor(M mu(x))`` atoms
    and the leftover atoms go to the largest fractional parts (ties to the
    lower index), so each count is within one of ``M mu(x)``.
    """
    M = int(M)
    n = space.n
    if M < n:
        raise ValidationError(f"M={M} atoms cannot cover {n} points of positive mass")
    share = M * space.measure
    counts = np.floor(share).astype(np.int64)
    left = M - int(counts.sum())
    if left > 0:
        order = np.argsort(-(share - counts), kind="stable")
        counts[order[:left]] += 1
    elif left < 0:
        order = np.argsort(share - counts, kind="stable")
        order = order[counts[order] > 0]
        counts[order[:-left]] -= 1
    if np.any(counts <= 0):
        bad = int(np.flatnonzero(counts <= 0)[0])
        raise ValidationError(f"point {bad} receives no atom at M={M}; increase M")
    return AtomizedSpace(space.label, np.repeat(np.arange(n), counts))


# ---------------------------------------------------------------------------
# me1


def _me1_sorted_desc(s: np.ndarray) -> np.ndarray:
    """me1 from |u - v| sorted in decreasing order along the last axis.

    With s_1 >= ... >= s_M the set {s_j > j/M} is a prefix of length k,
    and the infimum of the feasible region is ``max(s_{k+1}, k/M)``.
    """
    M = s.shape[-1]
    j = np.arange(1, M + 1) / M
    k = np.count_nonzero(s > j, axis=-1)
    nxt = np.concatenate([s, np.zeros(s.shape[:-1] + (1,))], axis=-1)
    s_next = np.take_along_axis(nxt, k[..., None], axis=-1)[..., 0]
    return np.maximum(s_next, k / M)


def me1(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != v.shape or u.ndim != 1:
        raise ValidationError(f"me1 needs equal-length vectors, got {u.shape} and {v.shape}")
    if u.size == 0:
        return 0.0
    g = -np.sort(-np.abs(u - v))
    return float(_me1_sorted_desc(g))


def me1_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """``out[a, b] = me1(A[a], B[b])`` for function tables of shape (K, M)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValidationError("function tables have different atom counts")
    M = A.shape[1]
    out = np.empty((A.shape[0], B.shape[0]))
    step = max(1, _PAIR_CHUNK // max(1, B.shape[0] * M))
    for s in range(0, A.shape[0], step):
        g = np.abs(A[s:s + step, None, :] - B[None, :, :])
        g.sort(axis=-1)
        out[s:s + step] = _me1_sorted_desc(g[..., ::-1])
    return out


# ---------------------------------------------------------------------------
# nets and couplings


@dataclass
class LipschitzNet:
    label: str
    values: np.ndarray

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def M(self) -> int:
        return self.values.shape[1]


def sample_lipschitz_net(space: FiniteMMSpace, atomized: AtomizedSpace, count: int = DEFAULT_K,
                         seed: int = 0, check: bool = True) -> LipschitzNet:
    """Lift ``count`` 1-Lipschitz functions through the atoms, anchored at atom 0.

    Duplicate lifted functions are dropped, so the net may be smaller than
    ``count`` (a one-point space gives the net {0}).
    """
    if atomized.label != space.label or atomized.assignment.max() >= space.n:
        raise ValidationError("atomization does not belong to this space")
    rows = []
    for h in lipschitz_functions(space, count, seed):
        if check:
            rep = lipschitz_check(space, h, 1.0)
            if not rep.ok:
                raise InvariantError(f"generated function is not 1-Lipschitz at {rep.worst_pair}")
        lifted = h[atomized.assignment]
        rows.append(lifted - lifted[0])
    vals = np.array(rows) if rows else np.zeros((1, atomized.M))
    _, first = np.unique(vals, axis=0, return_index=True)
    return LipschitzNet(space.label, vals[np.sort(first)])


@dataclass
class CouplingPlan:
    """Atom i of the first space is matched with atom ``perm[i]`` of the second."""

    perm: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.perm, dtype=np.int64)
        if p.ndim != 1 or not np.array_equal(np.sort(p), np.arange(p.size)):
            raise ValidationError("coupling plan must be a permutation of the atoms")
        self.perm = p

    @classmethod
    def identity(cls, M: int) -> "CouplingPlan":
        return cls(np.arange(M))


def _hausdorff_from_matrix(D: np.ndarray) -> float:
    return float(max(D.min(axis=1).max(), D.min(axis=0).max()))


def hausdorff_me1(A: LipschitzNet, B: LipschitzNet, plan: Optional[CouplingPlan] = None) -> float:
    if A.M != B.M:
        raise ValidationError(f"nets live on {A.M} and {B.M} atoms")
    if plan is None:
        plan = CouplingPlan.identity(A.M)
    if plan.perm.size != A.M:
        raise ValidationError("coupling plan size differs from atom count")
    return _hausdorff_from_matrix(me1_matrix(A.values, B.values[:, plan.perm]))


# ---------------------------------------------------------------------------
# estimator


@dataclass
class DistanceEstimate:
    label_x: str
    label_y: str
    value: float
    semantics: str
    M: int
    K: int
    T: int
    seed: int
    net_sizes: tuple = (0, 0)
    plan: Optional[CouplingPlan] = None

    def csv_row(self):
        return (self.label_x, self.label_y, self.M, self.K, self.T, self.seed, self.value, self.semantics)


ESTIMATE_HEADER = ("labelX", "labelY", "M", "K", "T", "seed", "value", "semantics")


def estimates_to_csv(estimates) -> str:
    return csv_text(ESTIMATE_HEADER, [e.csv_row() for e in estimates])


def h1li_estimate(X: FiniteMMSpace, Y: FiniteMMSpace, M: int = DEFAULT_M, K: int = DEFAULT_K,
                  T: int = DEFAULT_T, seed: int = 0, check_nets: bool = False) -> DistanceEstimate:
    """Heuristic observable-distance estimate.

    Both spaces are quantized at M atoms and get nets of K lifted
    functions (net seeds depend on the space label, so X vs X compares
    identical nets).  The smallest Hausdorff value over the canonical
    matching, T random matchings and T steps of swap descent from the
    canonical matching is returned.  Random matchings and swap proposals
    come from separate streams, so raising T only adds candidates.
    When all M! matchings fit in the budget they are enumerated instead
    and the value is tagged ``exact_small`` (exact for the sampled nets).
    """
    ax, ay = quantize(X, M), quantize(Y, M)
    net_x = sample_lipschitz_net(X, ax, K, derive_seed(seed, "net", X.label), check=check_nets)
    net_y = sample_lipschitz_net(Y, ay, K, derive_seed(seed, "net", Y.label), check=check_nets)
    A, B = net_x.values, net_y.values

    def evaluate(perm):
        return _hausdorff_from_matrix(me1_matrix(A, B[:, perm]))

    best_perm = np.arange(M)
    best = evaluate(best_perm)
    if math.factorial(M) <= T + 1:
        semantics = "exact_small"
        for p in itertools.permutations(range(M)):
            p = np.array(p)
            v = evaluate(p)
            if v < best:
                best, best_perm = v, p
    else:
        semantics = "net_estimate"
        rng = np.random.default_rng(derive_seed(seed, "coupling", "random"))
        for _ in range(T):
            p = rng.permutation(M)
            v = evaluate(p)
            if v < best:
                best, best_perm = v, p
        rng = np.random.default_rng(derive_seed(seed, "coupling", "swap"))
        cur = np.arange(M)
        cur_val = evaluate(cur)
        for _ in range(T):
            i, j = rng.choice(M, size=2, replace=False)
            cur[[i, j]] = cur[[j, i]]
            v = evaluate(cur)
            if v < cur_val:
                cur_val = v
                if v < best:
                    best, best_perm = v, cur.copy()
            else:
                cur[[i, j]] = cur[[j, i]]
    return DistanceEstimate(X.label, Y.label, float(best), semantics, M, K, T, seed,
                            (net_x.size, net_y.size), CouplingPlan(best_perm))
