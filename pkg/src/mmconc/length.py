"""Length certificates for finite mm-spaces and subgroup-chain bounds.

A finite metric space has length at most ``l = sqrt(sum a_k^2)`` when there
is a refining chain of partitions such that sibling blocks at level k are
matched by bijections moving no point further than ``a_k``.  Such a space
satisfies ``alpha(eps) <= exp(-eps^2 / (8 l^2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._validation import COMPARE_TOL, check_eps, check_weight_profile, derive_seed
from .core import FiniteMMSpace
from .exceptions import CapExceededError, ValidationError
from .groups import SYMMETRIC_CAP, FiniteGroup, all_permutations, permutation_rank

WITNESS_TOL = 1e-12
EXPLICIT_WITNESS_LIMIT = 10**4
PAIR_SAMPLE_LIMIT = 10**5


@dataclass
class PartitionChain:
    """Partitions Omega^0..Omega^n stored as per-point block labels.

    ``labels[k][x]`` is the block of point x at level k; block ids at each
    level are 0..m_k-1.
    """

    labels: list

    def __post_init__(self):
        self.labels = [np.asarray(lab, dtype=np.int64) for lab in self.labels]
        if not self.labels:
            raise ValidationError("partition chain needs at least one level")

    @property
    def depth(self) -> int:
        return len(self.labels) - 1

    @property
    def point_count(self) -> int:
        return self.labels[0].size

    def blocks(self, k: int) -> list[np.ndarray]:
        lab = self.labels[k]
        order = np.argsort(lab, kind="stable")
        cuts = np.flatnonzero(np.diff(lab[order])) + 1
        return np.split(order, cuts)

    def block(self, k: int, b: int) -> np.ndarray:
        return np.flatnonzero(self.labels[k] == b)

    def parent_of(self, k: int) -> dict:
        """Block id at level k -> block id at level k-1 (requires refinement)."""
        out = {}
        for c, p in zip(self.labels[k].tolist(), self.labels[k - 1].tolist()):
            out.setdefault(c, p)
        return out

    def sibling_pairs(self, k: int) -> list[tuple[int, int]]:
        groups: dict = {}
        for c, p in sorted(self.parent_of(k).items()):
            groups.setdefault(p, []).append(c)
        return [(a, b) for kids in groups.values() for i, a in enumerate(kids) for b in kids[i + 1:]]

    @classmethod
    def from_blocks(cls, levels: list) -> "PartitionChain":
        n = sum(len(b) for b in levels[0])
        labels = []
        for blocks in levels:
            lab = np.full(n, -1, dtype=np.int64)
            for b, members in enumerate(blocks):
                lab[np.asarray(members, dtype=np.int64)] = b
            labels.append(lab)
        return cls(labels)

    def to_blocks(self) -> list:
        return [[b.tolist() for b in self.blocks(k)] for k in range(self.depth + 1)]


@dataclass
class Witness:
    """Bijection between sibling blocks A -> B at one level.

    Either ``image`` (for each point of A in increasing order, its image in
    B) or ``rule`` (``("transpose", a, b)``: compose with the transposition
    of values a and b on a permutation space).
    """

    image: Optional[np.ndarray] = None
    rule: Optional[tuple] = None


@dataclass
class LengthCertificate:
    chain: PartitionChain
    level_bounds: np.ndarray
    witnesses: dict = field(default_factory=dict)
    permutation_degree: Optional[int] = None

    def __post_init__(self):
        self.level_bounds = np.asarray(self.level_bounds, dtype=float)

    @property
    def length_squared(self) -> float:
        return math.fsum((self.level_bounds**2).tolist())

    @property
    def length(self) -> float:
        return math.sqrt(self.length_squared)

    def bound(self, eps: float) -> float:
        eps = check_eps(eps)
        return math.exp(-eps * eps / (8.0 * self.length_squared))

    def witness_map(self, k: int, a: int, b: int, points_a: np.ndarray) -> np.ndarray:
        w = self.witnesses.get((k, a, b))
        if w is None:
            raise KeyError((k, a, b))
        if w.image is not None:
            return np.asarray(w.image, dtype=np.int64)
        kind, va, vb = w.rule
        if kind != "transpose" or self.permutation_degree is None:
            raise ValidationError(f"unsupported witness rule {w.rule!r}")
        P = all_permutations(self.permutation_degree).astype(np.int64)[points_a]
        swapped = np.where(P == va, vb, np.where(P == vb, va, P))
        return permutation_rank(swapped)

    def to_json(self) -> dict:
        wit = []
        for (k, a, b), w in sorted(self.witnesses.items()):
            entry = {"level": k, "a": a, "b": b}
            if w.image is not None:
                entry["image"] = np.asarray(w.image).tolist()
            else:
                entry["rule"] = list(w.rule)
            wit.append(entry)
        return {"chain": self.chain.to_blocks(), "level_bounds": self.level_bounds.tolist(),
                "length": self.length, "permutation_degree": self.permutation_degree, "witnesses": wit}

    @classmethod
    def from_json(cls, doc: dict) -> "LengthCertificate":
        wit = {}
        for e in doc["witnesses"]:
            key = (int(e["level"]), int(e["a"]), int(e["b"]))
            if "image" in e:
                wit[key] = Witness(image=np.asarray(e["image"], dtype=np.int64))
            else:
                r = e["rule"]
                wit[key] = Witness(rule=(r[0], int(r[1]), int(r[2])))
        return cls(PartitionChain.from_blocks(doc["chain"]), doc["level_bounds"], wit, doc.get("permutation_degree"))


def stabilizer_chain(weights, cap: int = SYMMETRIC_CAP,
                     explicit_limit: int = EXPLICIT_WITNESS_LIMIT) -> LengthCertificate:
    """Certificate for the weighted symmetric group from the stabilizer chain.

    Level k partitions permutations into left cosets of the stabilizer of
    the first k points, i.e. by their first k images; in lexicographic
    indexing these are contiguous runs of length (n-k)!.  Sibling cosets
    differing in the k-th image (a vs b) are matched by ``j -> t_{a,b} o j``,
    which moves j by at most ``2 w_k``.
    """
    w = check_weight_profile(weights)
    n = w.size
    if n > cap:
        raise CapExceededError(f"{n}! permutations exceeds cap k <= {cap}")
    total = math.factorial(n)
    P = all_permutations(n).astype(np.int64)
    idx = np.arange(total)
    labels = [idx // math.factorial(n - k) for k in range(n + 1)]
    chain = PartitionChain(labels)
    witnesses = {}
    for k in range(1, n + 1):
        size = math.factorial(n - k)
        for a, b in chain.sibling_pairs(k):
            va, vb = int(P[a * size, k - 1]), int(P[b * size, k - 1])
            if size <= explicit_limit:
                A = P[a * size:(a + 1) * size]
                swapped = np.where(A == va, vb, np.where(A == vb, va, A))
                witnesses[(k, a, b)] = Witness(image=permutation_rank(swapped))
            else:
                witnesses[(k, a, b)] = Witness(rule=("transpose", va, vb))
    return LengthCertificate(chain, 2.0 * w, witnesses, permutation_degree=n)


@dataclass
class CertificateReport:
    passed: bool
    failures: list
    coverage: dict
    bound: Optional[Callable[[float], float]] = None

    def __bool__(self) -> bool:
        return self.passed


def verify_certificate(space: FiniteMMSpace, cert: LengthCertificate, seed: int = 0,
                       pair_limit: int = PAIR_SAMPLE_LIMIT) -> CertificateReport:
    """Check chain structure and every (or a seeded sample of) sibling witness.

    Failures are tuples ``(level, block_a, block_b, point, reason)``.
    ``coverage[k] = (checked_pairs, total_pairs)``.
    """
    chain = cert.chain
    n = space.n
    failures: list = []
    coverage: dict = {}
    if chain.point_count != n:
        failures.append((0, -1, -1, -1, f"chain covers {chain.point_count} points, space has {n}"))
        return CertificateReport(False, failures, coverage)
    if cert.level_bounds.size != chain.depth:
        failures.append((0, -1, -1, -1, "need one level bound per refinement level"))
    if np.any(cert.level_bounds <= 0):
        failures.append((0, -1, -1, -1, "level bounds must be positive"))
    if np.any(chain.labels[0] != chain.labels[0][0]):
        failures.append((0, -1, -1, -1, "Omega^0 is not the whole set"))
    last = chain.labels[-1]
    if np.unique(last).size != n:
        failures.append((chain.depth, -1, -1, -1, "final partition is not into singletons"))
    for k in range(1, chain.depth + 1):
        pairs = np.unique(np.stack([chain.labels[k], chain.labels[k - 1]]), axis=1)
        if np.unique(pairs[0]).size != pairs.shape[1]:
            failures.append((k, -1, -1, -1, f"Omega^{k} does not refine Omega^{k - 1}"))
    if failures:
        return CertificateReport(False, failures, coverage)

    for k in range(1, chain.depth + 1):
        sib = chain.sibling_pairs(k)
        chosen = range(len(sib))
        if len(sib) > pair_limit:
            rng = np.random.default_rng(derive_seed(seed, "certificate", k))
            chosen = np.sort(rng.choice(len(sib), size=pair_limit, replace=False))
        coverage[k] = (len(chosen), len(sib))
        bound = cert.level_bounds[k - 1] + WITNESS_TOL
        blocks = chain.blocks(k)
        for t in chosen:
            a, b = sib[t]
            A, B = blocks[a], blocks[b]
            try:
                img = cert.witness_map(k, a, b, A)
            except KeyError:
                failures.append((k, a, b, -1, "missing witness"))
                continue
            if img.shape != A.shape or not np.array_equal(np.sort(img), B):
                failures.append((k, a, b, -1, "witness is not a bijection onto the sibling block"))
                continue
            d = space.pair_distances(A, img)
            bad = np.flatnonzero(d > bound)
            if bad.size:
                x = int(A[bad[0]])
                failures.append((k, a, b, x, f"d(x, phi(x)) = {d[bad[0]]:.17g} exceeds a_{k} = {bound - WITNESS_TOL:.17g}"))
    passed = not failures
    return CertificateReport(passed, failures, coverage, cert.bound if passed else None)


# ---------------------------------------------------------------------------
# subgroup chains


@dataclass
class SubgroupChainSpec:
    space: FiniteMMSpace
    group: FiniteGroup
    subgroups: list
    diameters: Optional[np.ndarray] = None

    def __post_init__(self):
        self.subgroups = [np.asarray(h, dtype=bool) for h in self.subgroups]
        g = self.group
        if self.space.n != g.order:
            raise ValidationError("group order and point count differ")
        if len(self.subgroups) < 2:
            raise ValidationError("subgroup chain needs at least {e} < G")
        first, last = self.subgroups[0], self.subgroups[-1]
        if first.sum() != 1 or not first[g.identity]:
            raise ValidationError("H_0 must be the trivial subgroup")
        if not last.all():
            raise ValidationError("H_n must be the whole group")
        for i, h in enumerate(self.subgroups):
            if not g.is_subgroup(h):
                raise ValidationError(f"H_{i} is not a subgroup")
        for i in range(1, len(self.subgroups)):
            lo, hi = self.subgroups[i - 1], self.subgroups[i]
            if np.any(lo & ~hi) or lo.sum() == hi.sum():
                raise ValidationError(f"H_{i - 1} < H_{i} is not a strict containment")
        self.diameters = quotient_diameters(self)


def quotient_diameters(spec: SubgroupChainSpec) -> np.ndarray:
    """d_i = diameter of H_{i+1}/H_i with the min-over-pairs coset distance.

    Valid for bi-invariant metrics, which is asserted first.
    """
    d = spec.space.dense()
    problem = spec.group.check_bi_invariant(d, COMPARE_TOL)
    if problem:
        raise ValidationError(f"metric is not bi-invariant: {problem}")
    table = spec.group.table
    out = []
    for lo, hi in zip(spec.subgroups[:-1], spec.subgroups[1:]):
        H = np.flatnonzero(lo)
        elems = np.flatnonzero(hi)
        coset_id = table[np.ix_(elems, H)].min(axis=1)
        ids, lab = np.unique(coset_id, return_inverse=True)
        order = np.argsort(lab, kind="stable")
        starts = np.flatnonzero(np.r_[True, np.diff(lab[order]) != 0])
        sub = d[np.ix_(elems[order], elems[order])]
        rowmin = np.minimum.reduceat(sub, starts, axis=0)
        cmin = np.minimum.reduceat(rowmin, starts, axis=1)
        out.append(float(cmin.max()))
    return np.array(out)


def subgroup_chain_bound(spec: SubgroupChainSpec, eps: float) -> float:
    eps = check_eps(eps)
    s = math.fsum((spec.diameters**2).tolist())
    if s == 0:
        return 0.0 if eps > 0 else 1.0
    return math.exp(-eps * eps / (8.0 * s))
