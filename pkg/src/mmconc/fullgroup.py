"""Full-group elements on finite cylinder spaces and their approximation by cylinder permutations.

Points are N-bit strings stored as integers; coordinate k (1-based) is bit
k-1, so the rank-n prefix of x is ``x & (2**n - 1)``.  The group G_n of
strings supported on the first n coordinates acts by XOR.  A full-group
element of rank M is ``x -> x ^ c[prefix_M(x)]`` for an assignment table c.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._validation import NORMALIZATION_TOL
from .exceptions import CapExceededError, InvariantError, ValidationError

CYLINDER_CAP = 22
DELTA_MARGIN = 1e-6
RATIO_TOL = 1e-12


@dataclass
class CylinderSpace:
    N: int
    p: np.ndarray
    masses: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return 1 << self.N

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.size, dtype=np.int64)

    def coordinate_masses(self, x: np.ndarray, coords: range) -> np.ndarray:
        out = np.ones(np.shape(x))
        for k in coords:
            bit = (x >> k) & 1
            out = out * np.where(bit == 0, self.p[k], 1.0 - self.p[k])
        return out


def make_cylinder_space(N: int, p=0.5, lam: Optional[float] = None) -> CylinderSpace:
    """Product of N Bernoulli coordinates with P(bit k = 0) = p_k.

    ``lam`` selects the pair (1/(1+lam), lam/(1+lam)) on every coordinate.
    """
    N = int(N)
    if N < 1 or N > CYLINDER_CAP:
        raise CapExceededError(f"resolution N={N} outside 1..{CYLINDER_CAP}")
    if lam is not None:
        if not lam > 0:
            raise ValidationError("lambda must be positive")
        p = 1.0 / (1.0 + lam)
    pk = np.broadcast_to(np.asarray(p, dtype=float), (N,)).copy()
    if np.any(pk <= 0) or np.any(pk >= 1):
        raise ValidationError("coordinate weights must lie in (0, 1)")
    x = np.arange(1 << N, dtype=np.int64)
    masses = np.ones(1 << N)
    for k in range(N):
        masses *= np.where((x >> k) & 1, 1.0 - pk[k], pk[k])
    if abs(masses.sum() - 1.0) > NORMALIZATION_TOL:
        raise InvariantError("cylinder masses do not sum to 1")
    return CylinderSpace(N, pk, masses)


@dataclass
class FullGroupElement:
    rank: int
    table: np.ndarray

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.int64)
        if self.rank < 0 or self.table.shape != (1 << self.rank,):
            raise ValidationError(f"assignment table needs 2^{self.rank} entries")
        if np.any(self.table < 0):
            raise ValidationError("group elements must be nonnegative bit strings")
        self.check_bijection()

    @property
    def width(self) -> int:
        """Number of leading coordinates the element can change."""
        return int(self.table.max()).bit_length() if self.table.size else 0

    @property
    def support(self) -> int:
        return max(self.rank, self.width)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        return x ^ self.table[x & ((1 << self.rank) - 1)]

    def check_bijection(self) -> None:
        x = np.arange(1 << self.support, dtype=np.int64)
        if np.unique(self.apply(x)).size != x.size:
            raise ValidationError("assignment does not define a bijection")

    def pieces(self) -> dict:
        """g -> boolean mask over prefixes with ``c = g`` (the sets S_g)."""
        return {int(g): self.table == g for g in np.unique(self.table)}

    def to_json(self) -> dict:
        return {"rank": self.rank, "table": [format(int(g), "x") for g in self.table]}

    @classmethod
    def from_json(cls, doc: dict) -> "FullGroupElement":
        return cls(int(doc["rank"]), [int(h, 16) for h in doc["table"]])

    @classmethod
    def identity(cls, rank: int = 0) -> "FullGroupElement":
        return cls(rank, np.zeros(1 << rank, dtype=np.int64))

    @classmethod
    def from_prefix_permutation(cls, perm) -> "FullGroupElement":
        """Cylinder permutation: prefix x of rank n goes to prefix perm[x]."""
        perm = np.asarray(perm, dtype=np.int64)
        rank = int(perm.size).bit_length() - 1
        if perm.size != 1 << rank:
            raise ValidationError("prefix permutation length must be a power of two")
        return cls(rank, np.arange(perm.size) ^ perm)


def random_full_group_element(rng: np.random.Generator, M: int, extra_width: int = 3,
                              tail_prob: float = 0.25) -> FullGroupElement:
    """Random bijective element of rank M.

    The prefix part is a random permutation of {0,1}^M; with probability
    ``tail_prob`` a prefix also flips a random nonzero pattern on the next
    ``extra_width`` coordinates, so the pieces S_g spread over G_n for n > M.
    """
    size = 1 << M
    perm = rng.permutation(size)
    table = np.arange(size) ^ perm
    if extra_width > 0:
        flip = rng.random(size) < tail_prob
        tails = rng.integers(1, 1 << extra_width, size=size)
        table = table | np.where(flip, tails << M, 0)
    return FullGroupElement(M, table)


def _check_fits(space: CylinderSpace, *elements: FullGroupElement) -> None:
    for e in elements:
        if e.support > space.N:
            raise ValidationError(f"element acts on {e.support} coordinates, space resolution is {space.N}")


def d_mu(space: CylinderSpace, a: FullGroupElement, b: FullGroupElement) -> float:
    """Mass of the set where the two transformations differ."""
    _check_fits(space, a, b)
    x = space.points
    return float(space.masses[a.apply(x) != b.apply(x)].sum())


# ---------------------------------------------------------------------------
# approximation by cylinder permutations


@dataclass
class ApproximationTrace:
    eps: float
    element: FullGroupElement
    N1: int
    delta: float
    nu: np.ndarray = field(repr=False)
    N2: int = 0
    group: list = field(default_factory=list)
    ratios: dict = field(default_factory=dict, repr=False)
    ratios_shifted: dict = field(default_factory=dict, repr=False)
    tilde: dict = field(default_factory=dict, repr=False)
    residual_a: np.ndarray = field(default=None, repr=False)
    residual_b: np.ndarray = field(default=None, repr=False)
    sigma: Optional[FullGroupElement] = None
    distance: float = float("nan")
    intermediate_bound: float = float("nan")
    piece_errors: dict = field(default_factory=dict)
    boundary_hits: int = 0
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return {
            "eps": self.eps, "element": self.element.to_json(), "N1": self.N1, "delta": self.delta,
            "nu": self.nu.tolist(), "N2": self.N2, "group": self.group,
            "ratios": {str(g): r.tolist() for g, r in self.ratios.items()},
            "ratios_shifted": {str(g): r.tolist() for g, r in self.ratios_shifted.items()},
            "tilde": {str(g): np.flatnonzero(t).tolist() for g, t in self.tilde.items()},
            "residual_a": self.residual_a.tolist(), "residual_b": self.residual_b.tolist(),
            "sigma": self.sigma.to_json() if self.sigma else None, "distance": self.distance,
            "intermediate_bound": self.intermediate_bound,
            "piece_errors": {str(g): v for g, v in self.piece_errors.items()},
            "boundary_hits": self.boundary_hits, "checks": self.checks,
        }


def averaged_measure(space: CylinderSpace, N1: int) -> np.ndarray:
    """``nu = 2^-N1 sum_{g in G_N1} mu o g``: uniform on the first N1 coordinates."""
    return space.coordinate_masses(space.points, range(N1, space.N)) / float(1 << N1)


def _ratios(prefix: np.ndarray, nu: np.ndarray, member: np.ndarray, cyl_mass: np.ndarray) -> np.ndarray:
    inside = np.bincount(prefix[member], weights=nu[member], minlength=cyl_mass.size)
    return inside / cyl_mass


def approximate_by_bij(space: CylinderSpace, element: FullGroupElement, eps: float,
                       strict: bool = True) -> ApproximationTrace:
    """Approximate a full-group element within 2 eps by a cylinder permutation.

    Picks the smallest rank N1 whose group carries mass >= 1 - eps of the
    pieces S_g, refines to the first rank N2 at which every S_g and S_g g is
    delta^2-close to its conditional expectation under the averaged measure
    nu, keeps the rank-N2 cylinders that are (1 - delta)-full of S_g, sends
    them by g, and matches the leftover prefixes lexicographically.  With
    ``strict`` any violated invariant raises :class:`InvariantError`.
    """
    if not 0 < eps < 1:
        raise ValidationError("eps must lie in (0, 1)")
    _check_fits(space, element)
    x = space.points
    mu = space.masses
    c_of_x = element.table[x & ((1 << element.rank) - 1)]

    N1 = None
    for n in range(1, space.N + 1):
        if mu[c_of_x < (1 << n)].sum() >= 1.0 - eps:
            N1 = n
            break
    assert N1 is not None
    delta = eps / (3.0 * 4.0**N1) * (1.0 - DELTA_MARGIN)
    nu = averaged_measure(space, N1)
    group = list(range(1 << N1))
    pieces = {g: c_of_x == g for g in group}
    shifted = {}
    for g in group:
        m = np.zeros(x.size, dtype=bool)
        m[x[pieces[g]] ^ g] = True
        shifted[g] = m

    N2 = None
    for n in range(N1, space.N + 1):
        prefix = x & ((1 << n) - 1)
        cyl = np.bincount(prefix, weights=nu, minlength=1 << n)
        worst = 0.0
        for masks in (pieces, shifted):
            for g in group:
                r = _ratios(prefix, nu, masks[g], cyl)
                worst = max(worst, float(2.0 * np.sum(r * (1.0 - r) * cyl)))
        if worst < delta * delta:
            N2 = n
            break
    if N2 is None:
        raise ValidationError("resolution exhausted; increase N")

    prefix = x & ((1 << N2) - 1)
    size = 1 << N2
    cyl = np.bincount(prefix, weights=nu, minlength=size)
    trace = ApproximationTrace(eps, element, N1, delta, nu, N2, group)
    prefixes = np.arange(size)
    taken = np.zeros(size, dtype=bool)
    hit = np.zeros(size, dtype=bool)
    sigma_of = np.full(size, -1, dtype=np.int64)
    disjoint_src = disjoint_img = True
    identity_ok = True
    for g in group:
        r = _ratios(prefix, nu, pieces[g], cyl)
        rs = _ratios(prefix, nu, shifted[g], cyl)
        trace.ratios[g], trace.ratios_shifted[g] = r, rs
        identity_ok &= bool(np.all(np.abs(r[prefixes ^ g] - rs) <= RATIO_TOL))
        keep = r >= 1.0 - delta
        trace.boundary_hits += int(np.count_nonzero(np.abs(r - (1.0 - delta)) <= RATIO_TOL))
        trace.tilde[g] = keep
        src = prefixes[keep]
        img = src ^ g
        disjoint_src &= not bool(taken[src].any())
        disjoint_img &= not bool(hit[img].any())
        taken[src] = True
        hit[img] = True
        sigma_of[src] = img
        tilde_full = keep[prefix]
        trace.piece_errors[g] = float(nu[pieces[g] ^ tilde_full].sum())

    A = prefixes[~taken]
    B = prefixes[~hit]
    trace.residual_a, trace.residual_b = A, B
    if A.size != B.size or not (disjoint_src and disjoint_img):
        trace.checks.update({"ii_disjoint": disjoint_src, "iii_disjoint": disjoint_img, "residual_sizes": False})
        if strict:
            raise InvariantError(f"approximation failed: {trace.checks}")
        return trace
    sigma_of[A] = B
    sigma = FullGroupElement(N2, prefixes ^ sigma_of)
    trace.sigma = sigma
    trace.distance = d_mu(space, element, sigma)
    trace.intermediate_bound = eps + 4.0**N1 * 3.0 * delta
    trace.checks = {
        "delta": delta < eps / (3.0 * 4.0**N1),
        "i_piece_error": all(v <= 3.0 * delta for v in trace.piece_errors.values()),
        "ii_disjoint": disjoint_src,
        "iii_disjoint": disjoint_img,
        "ratio_identity": identity_ok,
        "residual_sizes": True,
        "intermediate": trace.distance <= trace.intermediate_bound,
        "two_eps": trace.intermediate_bound <= 2.0 * eps and trace.distance <= 2.0 * eps,
        "sigma_rank": sigma.rank == N2 and sigma.support <= N2,
    }
    if strict and not trace.passed:
        failed = [k for k, v in trace.checks.items() if not v]
        raise InvariantError(f"approximation invariants failed: {failed}")
    return trace


# ---------------------------------------------------------------------------
# weak topology probes


def _check_partition(space: CylinderSpace, blocks: Sequence) -> list:
    masks = [np.asarray(b, dtype=bool) for b in blocks]
    if not masks or any(m.shape != (space.size,) for m in masks):
        raise ValidationError(f"partition blocks must be masks over {space.size} points")
    cover = np.sum(masks, axis=0)
    if np.any(cover != 1):
        raise ValidationError("partition blocks must be disjoint and cover the space")
    return masks


def weak_defect(space: CylinderSpace, sigma: FullGroupElement, blocks: Sequence) -> float:
    """``max_A mu(A symmetric-difference sigma(A))`` over the partition blocks."""
    _check_fits(space, sigma)
    masks = _check_partition(space, blocks)
    img = sigma.apply(space.points)
    worst = 0.0
    for m in masks:
        moved = np.zeros(space.size, dtype=bool)
        moved[img[m]] = True
        worst = max(worst, float(space.masses[m ^ moved].sum()))
    return worst


def rn_max(space: CylinderSpace, sigma: FullGroupElement) -> float:
    """``max_x mu(sigma(x)) / mu(x)``, the largest Radon-Nikodym factor."""
    _check_fits(space, sigma)
    img = sigma.apply(space.points)
    return float(np.max(space.masses[img] / space.masses))


def cylinder_partition(space: CylinderSpace, rank: int) -> list:
    """Blocks = rank-n cylinders."""
    prefix = space.points & ((1 << rank) - 1)
    return [prefix == v for v in range(1 << rank)]


def block_preserving_flip(space: CylinderSpace, partition_rank: int = 1) -> FullGroupElement:
    """Flip the coordinate just past the partition's prefix: blocks map to themselves."""
    if partition_rank >= space.N:
        raise ValidationError("need a coordinate beyond the partition prefix")
    return FullGroupElement(0, np.array([1 << partition_rank]))
