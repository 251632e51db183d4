"""Concrete mm-spaces built from finite groups.

Weighted symmetric groups with the uniform metric, Hamming products,
L^1(X; Z_m) groups, rescaled copies, direct products and semidirect
products with an averaged, action-invariant metric.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._validation import COMPARE_TOL, check_positive, check_probability_vector, check_weight_profile
from .core import ROW_BLOCK, FiniteMMSpace
from .exceptions import CapExceededError, InvariantError, ValidationError

EXPLICIT_BUILD_LIMIT = 512
IMPLICIT_CAP = 2**20
SYMMETRIC_CAP = 8
GROUP_TABLE_CAP = 1024


def _fmt(values) -> str:
    return ",".join(f"{v:.6g}" for v in values)


# ---------------------------------------------------------------------------
# abstract finite groups


class FiniteGroup:
    """A finite group given by its multiplication table over indices 0..n-1."""

    def __init__(self, table, identity: int = 0, name: str = "G"):
        t = np.asarray(table, dtype=np.int64)
        n = t.shape[0]
        if t.shape != (n, n):
            raise ValidationError("multiplication table must be square")
        if not (np.all(t[identity] == np.arange(n)) and np.all(t[:, identity] == np.arange(n))):
            raise ValidationError(f"element {identity} is not a two-sided identity")
        self.table = t
        self.identity = int(identity)
        self.name = name
        inv = np.argmax(t == identity, axis=1)
        if not np.all(t[np.arange(n), inv] == identity):
            raise ValidationError("some element has no inverse")
        self.inverse = inv

    @property
    def order(self) -> int:
        return self.table.shape[0]

    def is_subgroup(self, mask) -> bool:
        m = np.asarray(mask, dtype=bool)
        members = np.flatnonzero(m)
        if members.size == 0 or not m[self.identity]:
            return False
        prods = self.table[np.ix_(members, members)]
        return bool(m[prods].all() and m[self.inverse[members]].all())

    def check_bi_invariant(self, d: np.ndarray, tol: float = COMPARE_TOL) -> Optional[str]:
        """Return a description of the first violation, or None."""
        for g in range(self.order):
            left = self.table[g]
            right = self.table[:, g]
            if np.max(np.abs(d[np.ix_(left, left)] - d)) > tol:
                return f"left invariance fails for element {g}"
            if np.max(np.abs(d[np.ix_(right, right)] - d)) > tol:
                return f"right invariance fails for element {g}"
        return None

    def check_right_invariant(self, d: np.ndarray, tol: float = COMPARE_TOL) -> Optional[str]:
        for g in range(self.order):
            right = self.table[:, g]
            if np.max(np.abs(d[np.ix_(right, right)] - d)) > tol:
                return f"right invariance fails for element {g}"
        return None


def cyclic_group(m: int) -> FiniteGroup:
    a = np.arange(m)
    return FiniteGroup((a[:, None] + a[None, :]) % m, 0, f"Z{m}")


def xor_group(bits: int) -> FiniteGroup:
    a = np.arange(2**bits)
    return FiniteGroup(np.bitwise_xor.outer(a, a), 0, f"Z2^{bits}")


def circle_distance(m: int) -> np.ndarray:
    """Normalized cyclic metric on Z_m; diameter exactly 1."""
    a = np.arange(m)
    diff = np.abs(a[:, None] - a[None, :])
    return np.minimum(diff, m - diff) / (m // 2)


# ---------------------------------------------------------------------------
# permutations


def all_permutations(k: int) -> np.ndarray:
    """All permutations of range(k) in lexicographic order, one per row."""
    if k == 0:
        return np.zeros((1, 0), dtype=np.int8)
    return np.array(list(itertools.permutations(range(k))), dtype=np.int8)


def permutation_rank(perms: np.ndarray) -> np.ndarray:
    """Lexicographic rank of each row (inverse of :func:`all_permutations`)."""
    perms = np.atleast_2d(np.asarray(perms, dtype=np.int64))
    k = perms.shape[1]
    rank = np.zeros(perms.shape[0], dtype=np.int64)
    for i in range(k):
        smaller_later = (perms[:, i + 1:] < perms[:, i:i + 1]).sum(axis=1)
        rank += smaller_later * math.factorial(k - 1 - i)
    return rank


def symmetric_group(k: int) -> FiniteGroup:
    """S_k with product ``(s t)(i) = s(t(i))`` on the lexicographic indexing."""
    P = all_permutations(k).astype(np.int64)
    n = P.shape[0]
    table = np.empty((n, n), dtype=np.int64)
    for s in range(n):
        table[s] = permutation_rank(P[s][P])
    return FiniteGroup(table, 0, f"S{k}")


def make_weighted_symmetric(weights, cap: int = SYMMETRIC_CAP, label: Optional[str] = None) -> FiniteMMSpace:
    """All k! permutations with ``d(s, t) = sum{w_i : s(i) != t(i)}`` and uniform measure."""
    w = check_weight_profile(weights)
    k = w.size
    if k > cap:
        raise CapExceededError(f"enumeration infeasible: {k}! permutations exceeds cap k <= {cap}")
    P = all_permutations(k)
    n = P.shape[0]
    measure = np.full(n, 1.0 / n)
    label = label or f"Sym[{_fmt(w)}]"
    levels = sorted({math.fsum(c) for r in range(k + 1) for c in itertools.combinations(w.tolist(), r)})

    def rows(idx):
        return (P[idx][:, None, :] != P[None, :, :]) @ w

    def pairs(i, j):
        return (P[i] != P[j]) @ w

    group = symmetric_group(k) if k <= 5 else None
    common = dict(points=P, label=label, distance_levels=levels, group=group,
                  diameter=math.fsum(w.tolist()) if k >= 2 else 0.0,
                  info={"family": "weighted_symmetric", "weights": w.tolist()})
    if k <= 5:
        return FiniteMMSpace(measure, rows(np.arange(n)), **common)
    return FiniteMMSpace(measure, rows=rows, pairs=pairs, **common)


def make_uniform_symmetric(k: int, **kw) -> FiniteMMSpace:
    return make_weighted_symmetric(np.full(k, 1.0 / k), label=kw.pop("label", f"S{k}"), **kw)


# ---------------------------------------------------------------------------
# Hamming products


def bernoulli_lambda(lam: float) -> tuple[float, float]:
    """Coordinate masses (1/(1+lam), lam/(1+lam))."""
    lam = check_positive(lam, "lambda")
    return 1.0 / (1.0 + lam), lam / (1.0 + lam)


def make_hamming_product(coordinate_measures, n: Optional[int] = None, cap: int = IMPLICIT_CAP,
                         label: Optional[str] = None) -> FiniteMMSpace:
    """Product measure with the normalized Hamming distance.

    ``coordinate_measures`` is either a list of probability vectors (one per
    coordinate) or a single vector repeated ``n`` times.  Points are tuples
    enumerated in ``itertools.product`` order.
    """
    cm = list(coordinate_measures)
    if cm and np.isscalar(cm[0]):
        cm = [cm]
    if n is not None and len(cm) == 1:
        cm = cm * int(n)
    if n is not None and len(cm) != n:
        raise ValidationError("need one coordinate measure per coordinate")
    cm = [check_probability_vector(c, "coordinate measure") for c in cm]
    n = len(cm)
    if n == 0:
        raise ValidationError("at least one coordinate is required")
    sizes = [c.size for c in cm]
    total = math.prod(sizes)
    if total > cap:
        raise CapExceededError(f"Hamming product has {total} points, cap is {cap}")
    pts = np.array(list(itertools.product(*[range(s) for s in sizes])), dtype=np.int16).reshape(total, n)
    measure = np.ones(total)
    for i, c in enumerate(cm):
        measure = measure * c[pts[:, i]]

    def rows(idx):
        return (pts[idx][:, None, :] != pts[None, :, :]).sum(axis=2) / n

    def pairs(i, j):
        return (pts[i] != pts[j]).sum(axis=-1) / n

    if label is None:
        if all(s == 2 for s in sizes) and np.allclose(np.vstack(cm), 0.5):
            label = f"cube{n}"
        else:
            label = f"Hamming{n}[{';'.join(_fmt(c) for c in cm)}]"
    common = dict(points=pts, label=label, distance_levels=np.arange(n + 1) / n,
                  diameter=1.0 if all(s >= 2 for s in sizes) else float(sum(s >= 2 for s in sizes)) / n,
                  info={"family": "hamming", "n": n})
    if total <= EXPLICIT_BUILD_LIMIT:
        return FiniteMMSpace(measure, rows(np.arange(total)), **common)
    return FiniteMMSpace(measure, rows=rows, pairs=pairs, **common)


def make_cube(n: int, **kw) -> FiniteMMSpace:
    """Uniform binary cube {0,1}^n with normalized Hamming distance."""
    return make_hamming_product([[0.5, 0.5]], n, **kw)


# ---------------------------------------------------------------------------
# L^1(X; Z_m)


def make_l1_group(weights, m: int = 2, cap: int = IMPLICIT_CAP, label: Optional[str] = None) -> FiniteMMSpace:
    """Functions X -> Z_m with ``d(f, g) = sum_x w_x d_K(f(x), g(x))``.

    ``d_K`` is the cyclic metric normalized by ``floor(m/2)`` so that K has
    diameter exactly 1.  Measure is normalized counting (Haar).
    """
    w = check_weight_profile(weights)
    m = int(m)
    if m < 2:
        raise ValidationError("cyclic order m must be >= 2")
    k = w.size
    total = m**k
    if total > cap:
        raise CapExceededError(f"L1 group has {total} points, cap is {cap}")
    pts = np.array(list(itertools.product(range(m), repeat=k)), dtype=np.int64).reshape(total, k)
    dk = circle_distance(m)

    def rows(idx):
        return dk[pts[idx][:, None, :], pts[None, :, :]] @ w

    def pairs(i, j):
        return dk[pts[i], pts[j]] @ w

    group = None
    if total <= GROUP_TABLE_CAP:
        radix = m ** np.arange(k - 1, -1, -1)
        summed = (pts[:, None, :] + pts[None, :, :]) % m
        group = FiniteGroup(summed @ radix, 0, f"L1(Z{m})^{k}")
    levels = sorted({math.fsum(w[i] * dk[0, a[i]] for i in range(k)) for a in itertools.product(range(m), repeat=k)}) \
        if total <= 4096 else None
    common = dict(points=pts, label=label or f"L1[{_fmt(w)};Z{m}]", distance_levels=levels, group=group,
                  diameter=float(w.sum()), info={"family": "l1", "weights": w.tolist(), "m": m})
    if total <= EXPLICIT_BUILD_LIMIT:
        return FiniteMMSpace(np.full(total, 1.0 / total), rows(np.arange(total)), **common)
    return FiniteMMSpace(np.full(total, 1.0 / total), rows=rows, pairs=pairs, **common)


# ---------------------------------------------------------------------------
# rescaling and products


def make_scaled(space: FiniteMMSpace, s: float, label: Optional[str] = None) -> FiniteMMSpace:
    """Same points and measure, metric multiplied by ``s``."""
    s = check_positive(s, "scale factor")
    levels = None if space._levels is None else space._levels * s
    diam = None if space.closed_form_diameter is None else space.closed_form_diameter * s
    info = dict(space.info, scale=s, base_label=space.label)
    common = dict(points=space.points, label=label or f"{space.label}*{s:g}", distance_levels=levels,
                  group=space.group, diameter=diam, info=info)
    if space.mode == "explicit":
        return FiniteMMSpace(space.measure, space.dense() * s, **common)
    return FiniteMMSpace(space.measure, rows=lambda idx: space.rows(idx) * s,
                         pairs=lambda i, j: space.pair_distances(i, j) * s, **common)


_COMBINERS = {
    "l2": lambda a, b: np.sqrt(a * a + b * b),
    "l1": lambda a, b: a + b,
    "max": np.maximum,
}


def make_direct_product(X: FiniteMMSpace, Y: FiniteMMSpace, combiner: str = "l2",
                        cap: int = IMPLICIT_CAP, label: Optional[str] = None) -> FiniteMMSpace:
    """Product space; point ``(i, j)`` has index ``i * |Y| + j``."""
    if combiner not in _COMBINERS:
        raise ValidationError(f"unknown combiner {combiner!r}; choose from {sorted(_COMBINERS)}")
    comb = _COMBINERS[combiner]
    nx, ny = X.n, Y.n
    total = nx * ny
    if total > cap:
        raise CapExceededError(f"product has {total} points, cap is {cap}")
    measure = np.outer(X.measure, Y.measure).ravel()

    def rows(idx):
        idx = np.asarray(idx)
        dx = X.rows(idx // ny)
        dy = Y.rows(idx % ny)
        return comb(dx[:, :, None], dy[:, None, :]).reshape(idx.size, total)

    def pairs(i, j):
        return comb(X.pair_distances(i // ny, j // ny), Y.pair_distances(i % ny, j % ny))

    diam = None
    if X.closed_form_diameter is not None and Y.closed_form_diameter is not None:
        diam = float(comb(np.float64(X.closed_form_diameter), np.float64(Y.closed_form_diameter)))
    common = dict(label=label or f"({X.label})x({Y.label})[{combiner}]", diameter=diam,
                  info={"family": "product", "factors": (X.label, Y.label), "combiner": combiner,
                        "shape": (nx, ny)})
    if total <= EXPLICIT_BUILD_LIMIT:
        return FiniteMMSpace(measure, rows(np.arange(total)), **common)
    return FiniteMMSpace(measure, rows=rows, pairs=pairs, **common)


def make_circle(m: int, label: Optional[str] = None) -> FiniteMMSpace:
    """Z_m with the normalized arc metric and uniform measure."""
    return FiniteMMSpace(np.full(m, 1.0 / m), circle_distance(m), label=label or f"Z{m}circle",
                         group=cyclic_group(m), diameter=1.0 if m >= 2 else 0.0,
                         info={"family": "circle", "m": m})


# ---------------------------------------------------------------------------
# semidirect products


@dataclass
class GroupAction:
    """Action of H on N by automorphisms: ``tau[h, x]`` is ``tau_h(x)``."""

    H: FiniteGroup
    N: FiniteGroup
    tau: np.ndarray

    def __post_init__(self):
        self.tau = np.asarray(self.tau, dtype=np.int64)
        if self.tau.shape != (self.H.order, self.N.order):
            raise ValidationError("tau must have shape (|H|, |N|)")

    def validate(self) -> None:
        H, N, tau = self.H, self.N, self.tau
        ident = np.arange(N.order)
        if not np.array_equal(tau[H.identity], ident):
            raise InvariantError("tau_e is not the identity")
        for h in range(H.order):
            th = tau[h]
            if np.unique(th).size != N.order:
                raise InvariantError(f"tau_{h} is not a bijection")
            if not np.array_equal(th[N.table], N.table[np.ix_(th, th)]):
                raise InvariantError(f"tau_{h} is not a homomorphism")
        for h1 in range(H.order):
            for h2 in range(H.order):
                if not np.array_equal(tau[H.table[h1, h2]], tau[h1][tau[h2]]):
                    raise InvariantError(f"tau_({h1}{h2}) != tau_{h1} o tau_{h2}")


def averaged_metric(action: GroupAction, d_N: np.ndarray) -> np.ndarray:
    """``varsigma_N(x, y) = (1/|H|) sum_h d_N(tau_h x, tau_h y)``."""
    acc = np.zeros_like(d_N, dtype=float)
    for h in range(action.H.order):
        th = action.tau[h]
        acc += d_N[np.ix_(th, th)]
    return acc / action.H.order


def make_semidirect(action: GroupAction, d_H, d_N, label: Optional[str] = None,
                    invariance_cap: int = 2**24, n_samples: int = 20000) -> FiniteMMSpace:
    """``H x N`` with ``rho = sqrt(varsigma_H^2 + varsigma_N^2)`` and product counting measure.

    Point ``(h, x)`` has index ``h * |N| + x``.  Raises :class:`InvariantError`
    when the action, the invariance hypotheses, or the tau-invariance of the
    averaged metric fail.
    """
    action.validate()
    d_H = np.asarray(d_H, dtype=float)
    d_N = np.asarray(d_N, dtype=float)
    H, N, tau = action.H, action.N, action.tau
    bad = H.check_bi_invariant(d_H)
    if bad:
        raise InvariantError(f"d_H is not bi-invariant: {bad}")
    bad = N.check_right_invariant(d_N)
    if bad:
        raise InvariantError(f"d_N is not right-invariant: {bad}")
    sN = averaged_metric(action, d_N)
    nh, nn = H.order, N.order
    if nh * nn * nn <= invariance_cap:
        checked = "exhaustive"
        for h in range(nh):
            th = tau[h]
            if np.max(np.abs(sN[np.ix_(th, th)] - sN)) > COMPARE_TOL:
                raise InvariantError(f"averaged metric is not tau_{h}-invariant")
    else:
        checked = n_samples
        rng = np.random.default_rng(nh * 7919 + nn)
        h = rng.integers(0, nh, n_samples)
        x = rng.integers(0, nn, n_samples)
        y = rng.integers(0, nn, n_samples)
        if np.max(np.abs(sN[tau[h, x], tau[h, y]] - sN[x, y])) > COMPARE_TOL:
            raise InvariantError("averaged metric is not tau-invariant")
    total = nh * nn
    if total > IMPLICIT_CAP:
        raise CapExceededError(f"semidirect product has {total} points")

    def rows(idx):
        idx = np.asarray(idx)
        a = d_H[idx // nn]
        b = sN[idx % nn]
        return np.sqrt(a[:, :, None] ** 2 + b[:, None, :] ** 2).reshape(idx.size, total)

    def pairs(i, j):
        return np.sqrt(d_H[i // nn, j // nn] ** 2 + sN[i % nn, j % nn] ** 2)

    info = {"family": "semidirect", "H_order": nh, "N_order": nn, "action": action,
            "d_H": d_H, "sigma_N": sN, "tau_invariance_checked": checked}
    common = dict(label=label or f"{H.name}x|{N.name}", info=info,
                  diameter=float(np.sqrt(d_H.max() ** 2 + sN.max() ** 2)))
    if total <= EXPLICIT_BUILD_LIMIT:
        return FiniteMMSpace(np.full(total, 1.0 / total), rows(np.arange(total)), **common)
    return FiniteMMSpace(np.full(total, 1.0 / total), rows=rows, pairs=pairs, **common)


def left_translate(space: FiniteMMSpace, h: int, idx) -> np.ndarray:
    """Index of ``(h, e) . (g, x) = (hg, tau_h x)`` in a semidirect space."""
    info = space.info
    action: GroupAction = info["action"]
    nn = info["N_order"]
    idx = np.asarray(idx)
    g, x = idx // nn, idx % nn
    return action.H.table[h, g] * nn + action.tau[h, x]


def check_left_invariance(space: FiniteMMSpace, n_samples: Optional[int] = None, seed: int = 0) -> float:
    """Largest change of rho under left multiplication by elements of H.

    Exhaustive over all pairs when ``n_samples`` is None.
    """
    nh = space.info["H_order"]
    worst = 0.0
    if n_samples is None:
        for h in range(nh):
            for start, blk in space.iter_row_blocks(ROW_BLOCK):
                i = np.arange(start, start + blk.shape[0])
                ti = left_translate(space, h, i)
                tj = left_translate(space, h, np.arange(space.n))
                moved = space.rows(ti)[:, tj]
                worst = max(worst, float(np.max(np.abs(moved - blk))))
        return worst
    rng = np.random.default_rng(seed)
    h = rng.integers(0, nh, n_samples)
    i = rng.integers(0, space.n, n_samples)
    j = rng.integers(0, space.n, n_samples)
    ti = np.array([left_translate(space, hh, ii) for hh, ii in zip(h, i)])
    tj = np.array([left_translate(space, hh, jj) for hh, jj in zip(h, j)])
    return float(np.max(np.abs(space.pair_distances(ti, tj) - space.pair_distances(i, j))))


def shift_action(m: int, n: int) -> GroupAction:
    """Z_m acting on Z_2^n by cyclic rotation of the n coordinates.

    ``h`` rotates by ``h * (n // gcd(n, m))`` places, which has order
    dividing m, so this is an action for every n.  When m divides n it is
    the block shift by blocks of ``n // m``.
    """
    H = cyclic_group(m)
    N = xor_group(n)
    step = n // math.gcd(n, m)
    x = np.arange(2**n)
    bits = (x[:, None] >> np.arange(n)[None, :]) & 1
    tau = np.empty((m, 2**n), dtype=np.int64)
    for h in range(m):
        rolled = np.roll(bits, (h * step) % n, axis=1)
        tau[h] = rolled @ (1 << np.arange(n))
    return GroupAction(H, N, tau)


def hamming_xor_distance(n: int) -> np.ndarray:
    x = np.arange(2**n)
    diff = np.bitwise_xor.outer(x, x)
    pop = np.zeros_like(diff)
    for b in range(n):
        pop += (diff >> b) & 1
    return pop / n


def make_shift_semidirect(m: int, n: int) -> FiniteMMSpace:
    """Demo semidirect product: Z_m circle acting on the cube Z_2^n by rotation."""
    action = shift_action(m, n)
    return make_semidirect(action, circle_distance(m), hamming_xor_distance(n),
                           label=f"Z{m}circle|x cube{n}")


def half_circle_mask(space: FiniteMMSpace) -> np.ndarray:
    """``(first half of H) x N`` inside a semidirect space."""
    nh, nn = space.info["H_order"], space.info["N_order"]
    h = np.arange(space.n) // nn
    return h < nh // 2


def l1_vanishing_chain(space: FiniteMMSpace) -> list[np.ndarray]:
    """Subgroups H_i of functions vanishing on coordinates i+1..k (H_0 trivial)."""
    pts = space.points
    k = pts.shape[1]
    return [np.all(pts[:, i:] == 0, axis=1) for i in range(k + 1)]


def stabilizer_subgroups(space: FiniteMMSpace) -> list[np.ndarray]:
    """For S_k: H_i = permutations fixing 0..i-1, i < k (H_0 = S_k, H_{k-1} trivial)."""
    P = space.points
    k = P.shape[1]
    return [np.all(P[:, :i] == np.arange(i)[None, :], axis=1) for i in range(max(k, 1))]


def sequence_of_spaces(builder, params: Sequence) -> list[FiniteMMSpace]:
    return [builder(p) for p in params]
