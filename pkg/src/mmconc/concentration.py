"""Concentration functions: exact enumeration, lower-bound search, closed-form bounds.

The concentration function of a finite mm-space is

    alpha(0) = 1/2,
    alpha(eps) = 1 - min{ mu(A_eps) : mu(A) >= 1/2 }   for eps > 0,

with closed neighborhoods ``A_eps = {y : d(y, A) <= eps}``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ._io import csv_text
from ._validation import COMPARE_TOL, HALF_TOL, check_eps, check_eps_grid, check_function, derive_seed
from .core import FiniteMMSpace, distance_to_set, lipschitz_check, median_of
from .exceptions import CapExceededError, ValidationError
from .functions import lipschitz_functions

EXACT_CAP = 24
LOWER_POINT_CAP = 2**20
BITSET_CAP = 8192
STRATEGIES = ("median_halfspace", "greedy_growth", "random_restart")
EPS_LOOKUP_TOL = 2e-6


@dataclass
class ProfileEntry:
    eps: float
    alpha: float
    kind: str
    witness: Optional[np.ndarray] = None
    seed: Optional[int] = None

    @property
    def witness_popcount(self) -> Optional[int]:
        return None if self.witness is None else int(np.count_nonzero(self.witness))


@dataclass
class ConcentrationProfile:
    label: str
    entries: list = field(default_factory=list)

    @property
    def eps(self) -> np.ndarray:
        return np.array([e.eps for e in self.entries])

    @property
    def alpha(self) -> np.ndarray:
        return np.array([e.alpha for e in self.entries])

    def value_at(self, eps: float, tol: float = EPS_LOOKUP_TOL) -> float:
        hits = [e.alpha for e in self.entries if abs(e.eps - eps) <= tol]
        if not hits:
            raise ValidationError(f"eps={eps:g} missing from profile {self.label!r}")
        return max(hits)

    def entry_at(self, eps: float, tol: float = EPS_LOOKUP_TOL) -> ProfileEntry:
        hits = [e for e in self.entries if abs(e.eps - eps) <= tol]
        if not hits:
            raise ValidationError(f"eps={eps:g} missing from profile {self.label!r}")
        return max(hits, key=lambda e: e.alpha)

    def csv_rows(self):
        for e in self.entries:
            yield (self.label, e.eps, e.alpha, e.kind, e.witness_popcount, e.seed)


PROFILE_HEADER = ("space_label", "eps", "alpha", "kind", "witness_popcount", "seed")


def profiles_to_csv(profiles: Iterable[ConcentrationProfile]) -> str:
    rows = [r for p in profiles for r in p.csv_rows()]
    return csv_text(PROFILE_HEADER, rows)


# ---------------------------------------------------------------------------
# eps grids


def default_eps_grid(space: Optional[FiniteMMSpace] = None, base: Optional[Sequence[float]] = None) -> np.ndarray:
    """``{0.05 k : k = 1..20}`` with values colliding with a realized distance shifted by 1e-6."""
    grid = np.array(base if base is not None else [0.05 * k for k in range(1, 21)], dtype=float)
    if space is not None:
        grid = avoid_distance_lattice(grid, space.distance_levels())
    return check_eps_grid(grid)


def avoid_distance_lattice(grid, levels) -> np.ndarray:
    levels = np.asarray(levels, dtype=float)
    out = []
    for e in np.asarray(grid, dtype=float):
        while levels.size and np.min(np.abs(levels - e)) <= 1e-9:
            e = e + 1e-6
        out.append(e)
    return np.array(out)


def _prepare_grid(space, eps_grid):
    if eps_grid is None:
        return default_eps_grid(space)
    return check_eps_grid(eps_grid)


# ---------------------------------------------------------------------------
# exhaustive


def _subset_masses(w: np.ndarray) -> np.ndarray:
    n = w.size
    mass = np.zeros(1 << n)
    for i in range(n):
        mass[1 << i: 1 << (i + 1)] = mass[: 1 << i] + w[i]
    return mass


def _ball_masks(d: np.ndarray, eps: float) -> list[int]:
    n = d.shape[0]
    weights = 1 << np.arange(n, dtype=np.uint64)
    return [int(((d[i] <= eps).astype(np.uint64) * weights).sum()) for i in range(n)]


def _neighborhood_masks(balls: list[int], n: int) -> np.ndarray:
    nb = np.zeros(1 << n, dtype=np.uint32)
    for i in range(n):
        nb[1 << i: 1 << (i + 1)] = nb[: 1 << i] | np.uint32(balls[i])
    return nb


def _mask_to_bool(mask: int, n: int) -> np.ndarray:
    return ((mask >> np.arange(n)) & 1).astype(bool)


def alpha_exact(space: FiniteMMSpace, eps_grid=None, cap: int = EXACT_CAP, threads: int = 1) -> ConcentrationProfile:
    """Exact concentration function by enumerating all 2^n subsets.

    A subset's closed neighborhood is the OR of its members' ball bitmasks,
    built for all subsets at once by doubling.  One maximizing set is kept
    as the witness for every eps.
    """
    n = space.n
    if n > cap:
        raise CapExceededError(
            f"exact alpha needs 2^{n} subsets; cap is {cap} points. Use alpha_lower instead."
        )
    grid = _prepare_grid(space, eps_grid)
    d = space.dense()
    mass = _subset_masses(space.measure)
    admissible = np.flatnonzero(mass >= 0.5 - HALF_TOL)

    def one(eps):
        if eps == 0:
            return ProfileEntry(0.0, 0.5, "exact")
        nb = _neighborhood_masks(_ball_masks(d, eps), n)
        cover = mass[nb[admissible]]
        k = int(np.argmin(cover))
        alpha = min(0.5, max(0.0, 1.0 - float(cover[k])))
        return ProfileEntry(float(eps), alpha, "exact", _mask_to_bool(int(admissible[k]), n))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            entries = list(ex.map(one, grid))
    else:
        entries = [one(e) for e in grid]
    return ConcentrationProfile(space.label, entries)


# ---------------------------------------------------------------------------
# lower bounds


def _pack_rows(boolrows: np.ndarray) -> np.ndarray:
    packed = np.packbits(boolrows, axis=-1, bitorder="little")
    pad = (-packed.shape[-1]) % 8
    if pad:
        packed = np.concatenate([packed, np.zeros(packed.shape[:-1] + (pad,), np.uint8)], axis=-1)
    return np.ascontiguousarray(packed).view("<u8")


class BallIndex:
    """Packed bitsets of closed balls, one table per distinct eps level."""

    def __init__(self, space: FiniteMMSpace, grid: np.ndarray):
        self.space = space
        self.n = space.n
        positive = [e for e in grid if e > 0]
        tables = [[] for _ in positive]
        for _, blk in space.iter_row_blocks():
            for t, e in enumerate(positive):
                tables[t].append(_pack_rows(blk <= e))
        self.levels: list[np.ndarray] = []
        self.eps_level: dict[float, int] = {}
        for e, parts in zip(positive, tables):
            tab = np.vstack(parts)
            if self.levels and np.array_equal(tab, self.levels[-1]):
                self.eps_level[e] = len(self.levels) - 1
                continue
            self.levels.append(tab)
            self.eps_level[e] = len(self.levels) - 1
        self.words = self.levels[0].shape[1] if self.levels else 0
        self._uniform = space.is_uniform
        self._mu = space.measure

    def packed_mass(self, packed: np.ndarray) -> np.ndarray:
        if self._uniform:
            return np.bitwise_count(packed).sum(axis=-1) * self._mu[0]
        bits = np.unpackbits(packed.view(np.uint8), axis=-1, bitorder="little")[..., : self.n]
        return bits @ self._mu

    def cover_masses(self, members: np.ndarray) -> np.ndarray:
        """mu(A_eps) for every stored level."""
        out = np.empty(len(self.levels))
        for t, tab in enumerate(self.levels):
            cov = np.bitwise_or.reduce(tab[members], axis=0)
            out[t] = self.packed_mass(cov)
        return out


def _half_prefix(order: np.ndarray, mu: np.ndarray) -> np.ndarray:
    cum = np.cumsum(mu[order])
    k = int(np.flatnonzero(cum >= 0.5 - HALF_TOL)[0])
    return order[: k + 1]


def _greedy_candidate(index: BallIndex, level: int, rng: np.random.Generator) -> np.ndarray:
    """Grow A from a random point, preferring points whose balls add little new mass."""
    n, mu = index.n, index._mu
    tab = index.levels[level]
    in_a = np.zeros(n, dtype=bool)
    start = int(rng.integers(n))
    in_a[start] = True
    cover = tab[start].copy()
    mass = float(mu[start])
    batch = max(1, -(-n // 64))
    while mass < 0.5 - HALF_TOL:
        cand = np.flatnonzero(~in_a)
        growth = index.packed_mass(tab[cand] & ~cover)
        score = mu[cand] / (growth + 1e-15)
        order = cand[np.argsort(-score, kind="stable")][:batch]
        cum = mass + np.cumsum(mu[order])
        stop = np.flatnonzero(cum >= 0.5 - HALF_TOL)
        if stop.size:
            order = order[: stop[0] + 1]
        in_a[order] = True
        cover |= np.bitwise_or.reduce(tab[order], axis=0)
        mass = float(mu[in_a].sum())
    return np.flatnonzero(in_a)


def _budget_split(strategies, budget: int, n_levels: int, greedy_per_level: int) -> dict:
    active = [s for s in STRATEGIES if s in strategies]
    share = {s: budget // len(active) for s in active} if active else {}
    if active:
        share[active[0]] += budget - sum(share.values())
    if "greedy_growth" in share:
        runs = min(share["greedy_growth"], greedy_per_level * max(n_levels, 1))
        spare = share["greedy_growth"] - runs
        share["greedy_growth"] = runs
        sink = "median_halfspace" if "median_halfspace" in share else (
            "random_restart" if "random_restart" in share else None)
        if sink:
            share[sink] += spare
    return share


def alpha_lower(space: FiniteMMSpace, eps_grid=None, strategies=STRATEGIES, budget: int = 1000,
                seed: int = 0, greedy_per_level: int = 2) -> ConcentrationProfile:
    """Lower bound on alpha from candidate half-mass sets.

    Every candidate A with mu(A) >= 1/2 gives ``1 - mu(A_eps) <= alpha(eps)``.
    Candidates come from three strategies sharing ``budget`` evenly:

    * ``median_halfspace``: the smallest half-mass prefix in the order of a
      sampled 1-Lipschitz function (first +-d(., p), then random infimal
      convolutions);
    * ``greedy_growth``: grow A point by point, preferring points that
      enlarge the neighborhood least, targeting one eps level per run
      (at most ``greedy_per_level`` runs per level, the rest of its share
      goes to the halfspaces);
    * ``random_restart``: random half-mass prefixes.

    Deterministic given ``seed``.
    """
    strategies = tuple(strategies)
    unknown = set(strategies) - set(STRATEGIES)
    if unknown:
        raise ValidationError(f"unknown strategies {sorted(unknown)}")
    if budget <= 0 or not strategies:
        raise ValidationError("no candidates: empty strategy set or zero budget")
    if space.n > LOWER_POINT_CAP:
        raise CapExceededError(f"space has {space.n} points; lower bounds need <= {LOWER_POINT_CAP}")
    grid = _prepare_grid(space, eps_grid)
    positive = np.array([e for e in grid if e > 0])
    mu = space.measure
    use_bits = space.n <= BITSET_CAP
    index = BallIndex(space, grid) if use_bits else None
    n_levels = len(index.levels) if use_bits else positive.size
    share = _budget_split(strategies, budget, n_levels, greedy_per_level)

    best_alpha = np.full(positive.size, -np.inf)
    best_set: list = [None] * positive.size

    def consider(members: np.ndarray):
        if use_bits:
            per_level = 1.0 - index.cover_masses(members)
            alphas = np.array([per_level[index.eps_level[e]] for e in positive])
        else:
            mask = np.zeros(space.n, dtype=bool)
            mask[members] = True
            dist = distance_to_set(space, mask)
            alphas = np.array([1.0 - mu[dist <= e].sum() for e in positive])
        better = alphas > best_alpha
        for t in np.flatnonzero(better):
            best_alpha[t] = alphas[t]
            best_set[t] = members

    seeds = {s: derive_seed(seed, s) for s in STRATEGIES}
    if share.get("median_halfspace"):
        for f in lipschitz_functions(space, share["median_halfspace"], seeds["median_halfspace"]):
            consider(_half_prefix(np.argsort(f, kind="stable"), mu))
    if share.get("greedy_growth") and use_bits:
        rng = np.random.default_rng(seeds["greedy_growth"])
        for r in range(share["greedy_growth"]):
            consider(_greedy_candidate(index, r % n_levels, rng))
    if share.get("random_restart"):
        rng = np.random.default_rng(seeds["random_restart"])
        for _ in range(share["random_restart"]):
            consider(_half_prefix(rng.permutation(space.n), mu))

    entries = []
    it = iter(range(positive.size))
    for e in grid:
        if e == 0:
            entries.append(ProfileEntry(0.0, 0.5, "exact", None, seed))
            continue
        t = next(it)
        mask = np.zeros(space.n, dtype=bool)
        mask[best_set[t]] = True
        alpha = min(0.5, max(0.0, float(best_alpha[t])))
        entries.append(ProfileEntry(float(e), alpha, "lower_bound", mask, seed))
    return ConcentrationProfile(space.label, entries)


def alpha_auto(space: FiniteMMSpace, eps_grid=None, budget: int = 1000, seed: int = 0,
               exact_cap: int = EXACT_CAP) -> ConcentrationProfile:
    """Exact alpha when enumerable, otherwise the lower-bound search."""
    if space.n <= exact_cap:
        return alpha_exact(space, eps_grid, cap=exact_cap)
    return alpha_lower(space, eps_grid, budget=budget, seed=seed)


# ---------------------------------------------------------------------------
# closed-form bounds


BOUND_KINDS = ("maurey", "product", "weighted_aut", "l1_chain", "length", "subgroup_chain", "normal",
               "aut_largest_atom", "l1_largest_atom")


@dataclass
class BoundSpec:
    kind: str
    n: Optional[float] = None
    weights: Optional[Sequence[float]] = None
    length: Optional[float] = None
    length_squared: Optional[float] = None
    diameters: Optional[Sequence[float]] = None
    C1: Optional[float] = None
    C2: Optional[float] = None

    def __post_init__(self):
        if self.kind not in BOUND_KINDS:
            raise ValidationError(f"unknown bound kind {self.kind!r}")
        need = {
            "maurey": ("n",), "product": ("n",), "weighted_aut": ("weights",), "l1_chain": ("weights",),
            "aut_largest_atom": ("weights",), "l1_largest_atom": ("weights",),
            "subgroup_chain": ("diameters",), "normal": ("n", "C1", "C2"),
        }.get(self.kind, ())
        for name in need:
            if getattr(self, name) is None:
                raise ValidationError(f"bound {self.kind!r} needs parameter {name!r}")
        if self.kind == "length" and self.length is None and self.length_squared is None:
            raise ValidationError("bound 'length' needs length or length_squared")
        for name in ("n", "length", "length_squared", "C1", "C2"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValidationError(f"{name} must be positive")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if np.any(w <= 0) or abs(math.fsum(w.tolist()) - 1) > 1e-12:
                raise ValidationError("weights must be positive and normalized")
        if self.diameters is not None:
            if len(self.diameters) == 0 or any(d < 0 for d in self.diameters) or \
                    not any(d > 0 for d in self.diameters):
                raise ValidationError("diameters must be nonnegative with a positive entry")

    def denominator(self) -> float:
        """The ``D`` in bounds of the form exp(-eps^2 / D)."""
        k = self.kind
        if k in ("weighted_aut", "l1_chain"):
            s = math.fsum(w * w for w in self.weights)
            return (32.0 if k == "weighted_aut" else 8.0) * s
        if k in ("aut_largest_atom", "l1_largest_atom"):
            return (32.0 if k == "aut_largest_atom" else 8.0) * max(self.weights)
        if k == "length":
            sq = self.length_squared if self.length_squared is not None else self.length**2
            return 8.0 * sq
        if k == "subgroup_chain":
            return 8.0 * math.fsum(d * d for d in self.diameters)
        raise ValidationError(f"bound {k!r} is not of the form exp(-eps^2/D)")


def theoretical_bound(spec: BoundSpec, eps: float) -> float:
    eps = check_eps(eps)
    k = spec.kind
    e2 = eps * eps
    if k == "maurey":
        return math.exp(-e2 * spec.n / 32.0)
    if k == "product":
        return 2.0 * math.exp(-e2 * spec.n)
    if k == "normal":
        return spec.C1 * math.exp(-spec.C2 * spec.n * e2)
    return math.exp(-e2 / spec.denominator())


@dataclass
class BoundReport:
    passed: bool
    rows: list

    def __bool__(self) -> bool:
        return self.passed

    @property
    def failures(self) -> list:
        return [r for r in self.rows if not r[3]]


def verify_bound(profile: ConcentrationProfile, spec: BoundSpec) -> BoundReport:
    """Rows ``(eps, alpha, bound, ok)``; ok iff alpha <= 1/2 and alpha <= bound (+1e-9)."""
    rows = []
    for e in profile.entries:
        b = theoretical_bound(spec, e.eps)
        ok = e.alpha <= b + COMPARE_TOL and e.alpha <= 0.5 + COMPARE_TOL
        rows.append((e.eps, e.alpha, b, bool(ok)))
    return BoundReport(all(r[3] for r in rows), rows)


# ---------------------------------------------------------------------------
# Levy behaviour


@dataclass
class TrendVerdict:
    consistent: bool
    sequence: list
    reason: str

    def __bool__(self) -> bool:
        return self.consistent


def levy_trend(profiles: Sequence[ConcentrationProfile], eps: float, slack: float) -> TrendVerdict:
    """Pointwise decay test: non-increasing within ``slack`` and strictly lower at the end."""
    if len(profiles) < 3:
        raise ValidationError("levy_trend needs at least 3 profiles")
    seq = [p.value_at(eps) for p in profiles]
    for k in range(1, len(seq)):
        if seq[k] > seq[k - 1] + slack:
            return TrendVerdict(False, seq, f"increase {seq[k - 1]:.6g} -> {seq[k]:.6g} at position {k}")
    if not seq[-1] < seq[0]:
        return TrendVerdict(False, seq, "no decay between first and last member")
    return TrendVerdict(True, seq, "non-increasing within slack and decaying")


def lipschitz_deviation(space: FiniteMMSpace, f, eps: float) -> float:
    """``mu{x : |f(x) - median(f)| > eps}`` for a 1-Lipschitz f."""
    f = check_function(space, f)
    eps = check_eps(eps)
    rep = lipschitz_check(space, f, 1.0)
    if not rep.ok:
        raise ValidationError(f"f is not 1-Lipschitz: violating pair {rep.worst_pair}")
    c = median_of(space, f)
    return float(space.measure[np.abs(f - c) > eps + COMPARE_TOL].sum())


def product_levy_check(family_x: Sequence[FiniteMMSpace], family_y: Sequence[FiniteMMSpace], eps: float,
                       slack: float, combiner: str = "l2", budget: int = 1000, seed: int = 0,
                       exact_cap: int = EXACT_CAP) -> TrendVerdict:
    """Levy trend of the products X_k x Y_k (exact alpha when enumerable)."""
    from .groups import make_direct_product

    if len(family_x) != len(family_y):
        raise ValidationError("paired families must have equal length")
    profiles = []
    for k, (x, y) in enumerate(zip(family_x, family_y)):
        prod = make_direct_product(x, y, combiner)
        grid = avoid_distance_lattice([eps], prod.distance_levels())
        profiles.append(_relabel_eps(alpha_auto(prod, grid, budget=budget, seed=derive_seed(seed, k),
                                                exact_cap=exact_cap), eps))
    return levy_trend(profiles, eps, slack)


def _relabel_eps(profile: ConcentrationProfile, eps: float) -> ConcentrationProfile:
    """Map lattice-shifted grid values back to the nominal eps for lookups."""
    for e in profile.entries:
        if abs(e.eps - eps) <= EPS_LOOKUP_TOL:
            e.eps = eps
    return profile
