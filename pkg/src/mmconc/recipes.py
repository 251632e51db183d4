"""Built-in experiments: each binds constructions to computations and returns tables plus named checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._io import csv_text
from ._validation import COMPARE_TOL, derive_seed
from .concentration import (BoundSpec, alpha_auto, alpha_exact, alpha_lower, avoid_distance_lattice,
                            default_eps_grid, levy_trend, product_levy_check, theoretical_bound)
from .core import neighborhood, single_point_space
from .exceptions import ValidationError
from .fullgroup import (approximate_by_bij, block_preserving_flip, cylinder_partition, d_mu,
                        make_cylinder_space, random_full_group_element, rn_max, weak_defect, FullGroupElement)
from .groups import (check_left_invariance, half_circle_mask, l1_vanishing_chain, make_circle, make_cube,
                     make_direct_product, make_l1_group, make_scaled, make_shift_semidirect,
                     make_uniform_symmetric, make_weighted_symmetric)
from .length import SubgroupChainSpec, stabilizer_chain, subgroup_chain_bound, verify_certificate
from .observable import h1li_estimate

WEIGHT_PROFILES = ((0.25, 0.25, 0.25, 0.25), (0.5, 0.3, 0.2), (0.4, 0.3, 0.2, 0.1))


@dataclass
class Table:
    name: str
    header: tuple
    rows: list
    seed_dependent: tuple = ()

    def csv(self) -> str:
        return csv_text(self.header, self.rows)

    def column(self, name: str) -> list:
        i = self.header.index(name)
        return [r[i] for r in self.rows]

    def stable_view(self) -> list:
        """Rows restricted to the columns that must not change with the seed."""
        keep = [i for i, h in enumerate(self.header) if h not in self.seed_dependent]
        return [tuple(r[i] for i in keep) for r in self.rows]


@dataclass
class RecipeResult:
    name: str
    tables: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)


@dataclass
class Recipe:
    name: str
    description: str
    func: Callable
    defaults: dict

    def run(self, seed: int = 0, **params) -> RecipeResult:
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ValidationError(f"recipe {self.name!r} has no parameter(s) {sorted(unknown)}")
        merged = {**self.defaults, **params}
        return self.func(seed, **merged)


RECIPES: dict = {}


def recipe(name: str, description: str, **defaults):
    def wrap(func):
        RECIPES[name] = Recipe(name, description, func, defaults)
        return func
    return wrap


def list_recipes() -> list[tuple[str, str]]:
    return [(r.name, r.description) for r in RECIPES.values()]


def get_recipe(name: str) -> Recipe:
    if name not in RECIPES:
        raise ValidationError(f"unknown recipe {name!r}; available: {', '.join(RECIPES)}")
    return RECIPES[name]


def run_recipe(name: str, seed: int = 0, **params) -> RecipeResult:
    return get_recipe(name).run(seed, **params)


def _le(a: float, b: float) -> bool:
    return a <= b + COMPARE_TOL


def _bound_rows(space, profile, specs: dict):
    rows, ok = [], True
    for e in profile.entries:
        bounds = [theoretical_bound(s, e.eps) for s in specs.values()]
        passed = e.alpha <= 0.5 + COMPARE_TOL and all(_le(e.alpha, b) for b in bounds)
        ok &= passed
        rows.append((space.label, e.eps, e.alpha, *bounds, passed))
    return rows, ok


# ---------------------------------------------------------------------------


@recipe("maurey-check", "Exact alpha of small symmetric groups vs the Maurey and weighted bounds, plus a "
        "lower-bound probe on S6 and S7", budget=10_000, probe_sizes=(6, 7))
def _maurey(seed, budget, probe_sizes):
    exact_rows, ok = [], True
    for w in ((1 / 3,) * 3, (0.25,) * 4, (0.5, 0.3, 0.2), (0.4, 0.3, 0.2, 0.1)):
        sp = make_weighted_symmetric(w)
        prof = alpha_exact(sp, default_eps_grid(sp))
        uniform = len(set(w)) == 1
        for e in prof.entries:
            b_w = theoretical_bound(BoundSpec("weighted_aut", weights=w), e.eps)
            b_m = theoretical_bound(BoundSpec("maurey", n=len(w)), e.eps) if uniform else float("nan")
            passed = _le(e.alpha, b_w) and (not uniform or _le(e.alpha, b_m))
            ok &= passed
            exact_rows.append((sp.label, e.eps, e.alpha, b_w, b_m, passed))
    probe_rows, probe_ok = [], True
    for k in probe_sizes:
        sp = make_uniform_symmetric(k)
        prof = alpha_lower(sp, default_eps_grid(sp), budget=budget, seed=derive_seed(seed, "probe", k))
        spec = BoundSpec("maurey", n=k)
        for e in prof.entries:
            b = theoretical_bound(spec, e.eps)
            passed = _le(e.alpha, b)
            probe_ok &= passed
            probe_rows.append((sp.label, k, e.eps, e.alpha, e.kind, b, passed))
    return RecipeResult("maurey-check", [
        Table("exact", ("space", "eps", "alpha", "bound_weighted_aut", "bound_maurey", "pass"), exact_rows),
        Table("probe", ("space", "n", "eps", "alpha", "kind", "bound_maurey", "pass"), probe_rows,
              ("alpha", "kind", "pass")),
    ], {"exact_below_bounds": ok, "probe_never_exceeds": probe_ok})


@recipe("concauto-check", "Exact alpha of weighted symmetric groups vs exp(-eps^2/(32 sum w^2))",
        profiles=WEIGHT_PROFILES)
def _concauto(seed, profiles):
    rows, ok = [], True
    for w in profiles:
        sp = make_weighted_symmetric(w)
        r, passed = _bound_rows(sp, alpha_exact(sp, default_eps_grid(sp)),
                                {"w": BoundSpec("weighted_aut", weights=w)})
        rows += r
        ok &= passed
    return RecipeResult("concauto-check", [Table("bounds", ("space", "eps", "alpha", "bound", "pass"), rows)],
                        {"all_below_bound": ok})


@recipe("weneed-check", "Exact alpha of L1(X; Z_2) vs exp(-eps^2/(8 sum w^2)) and the subgroup-chain bound",
        weights=(0.5, 0.3, 0.2), m=2)
def _weneed(seed, weights, m):
    sp = make_l1_group(weights, m)
    prof = alpha_exact(sp, default_eps_grid(sp))
    chain = SubgroupChainSpec(sp, sp.group, l1_vanishing_chain(sp))
    spec = BoundSpec("l1_chain", weights=weights)
    rows, ok, equal = [], True, True
    for e in prof.entries:
        b = theoretical_bound(spec, e.eps)
        bc = subgroup_chain_bound(chain, e.eps)
        equal &= b == bc
        passed = _le(e.alpha, b)
        ok &= passed
        rows.append((sp.label, e.eps, e.alpha, b, bc, passed))
    diam_rows = [(i, float(d), float(sorted(weights, reverse=True)[i])) for i, d in enumerate(chain.diameters)]
    return RecipeResult("weneed-check", [
        Table("bounds", ("space", "eps", "alpha", "bound_l1_chain", "bound_subgroup_chain", "pass"), rows),
        Table("quotient_diameters", ("level", "diameter", "weight"), diam_rows),
    ], {"all_below_bound": ok, "chain_bound_matches": equal,
        "diameters_are_weights": all(a == b for _, a, b in diam_rows)})


@recipe("length-audit", "Stabilizer-chain certificates: verification, length formula and bound dominance",
        max_k=5, profiles=WEIGHT_PROFILES, exact_max_k=4)
def _length_audit(seed, max_k, profiles, exact_max_k):
    weight_sets = [tuple([1.0 / k] * k) for k in range(1, max_k + 1)] + [tuple(p) for p in profiles]
    cert_rows, bound_rows = [], []
    verified = formula = dominance = True
    for w in weight_sets:
        sp = make_weighted_symmetric(w)
        cert = stabilizer_chain(w)
        rep = verify_certificate(sp, cert, seed=derive_seed(seed, "cert", w))
        expected = 2.0 * math.sqrt(math.fsum(x * x for x in w))
        verified &= rep.passed
        formula &= abs(cert.length - expected) <= 1e-12
        cover = ";".join(f"{k}:{c}/{t}" for k, (c, t) in sorted(rep.coverage.items()))
        cert_rows.append((sp.label, len(w), cert.length, expected, rep.passed, cover))
        if len(w) <= exact_max_k:
            spec = BoundSpec("weighted_aut", weights=w)
            for e in alpha_exact(sp, default_eps_grid(sp)).entries:
                cb = cert.bound(e.eps)
                wb = theoretical_bound(spec, e.eps)
                agree = abs(cb - wb) <= 1e-12
                below = _le(e.alpha, cb)
                formula &= agree
                dominance &= below
                bound_rows.append((sp.label, e.eps, e.alpha, cb, wb, agree and below))
    return RecipeResult("length-audit", [
        Table("certificates", ("space", "k", "length", "length_formula", "verified", "coverage"), cert_rows),
        Table("bounds", ("space", "eps", "alpha", "certificate_bound", "weighted_aut_bound", "pass"), bound_rows),
    ], {"certificates_verify": verified, "bound_equals_weighted_aut": formula, "alpha_below_certificate": dominance})


@recipe("cube-levy", "Hamming cubes: exact alpha vs 2exp(-eps^2 n) for n<=4 and the lower-bound trend for n=4..12",
        exact_sizes=(2, 3, 4), trend_sizes=tuple(range(4, 13)), eps=0.2, slack=0.02, budget=1000,
        trend_grid=(0.1, 0.2, 0.3, 0.4, 0.5))
def _cube_levy(seed, exact_sizes, trend_sizes, eps, slack, budget, trend_grid):
    exact_rows, ok = [], True
    for n in exact_sizes:
        sp = make_cube(n)
        r, passed = _bound_rows(sp, alpha_exact(sp, default_eps_grid(sp)), {"p": BoundSpec("product", n=n)})
        exact_rows += r
        ok &= passed
    profiles, trend_rows = [], []
    for n in trend_sizes:
        sp = make_cube(n)
        grid = avoid_distance_lattice(sorted(set(trend_grid) | {eps}), sp.distance_levels())
        prof = alpha_lower(sp, grid, budget=budget, seed=derive_seed(seed, "cube", n))
        profiles.append(prof)
        for e in prof.entries:
            trend_rows.append((sp.label, n, e.eps, e.alpha, e.kind, e.witness_popcount))
    verdict = levy_trend(profiles, eps, slack)
    seq = verdict.sequence
    return RecipeResult("cube-levy", [
        Table("exact", ("space", "eps", "alpha", "bound_product", "pass"), exact_rows),
        Table("trend", ("space", "n", "eps", "alpha", "kind", "witness_popcount"), trend_rows,
              ("alpha", "kind", "witness_popcount")),
    ], {"exact_below_product_bound": ok, "trend_within_slack": verdict.consistent,
        "final_below_third_of_initial": seq[-1] < seq[0] / 3.0},
        [f"alpha({eps}) sequence: " + ", ".join(f"{a:.6g}" for a in seq), verdict.reason])


@recipe("scaled-family", "Scaling exactness alpha_s(eps) = alpha(eps/s) and the scaled symmetric-group family",
        scales=(0.25, 2.0), family_scales=(2.0, 1.0, 0.5, 0.25), family_k=4)
def _scaled(seed, scales, family_scales, family_k):
    rows, exact = [], True
    for base in (make_uniform_symmetric(4), make_cube(3)):
        for s in scales:
            scaled = make_scaled(base, s)
            grid = default_eps_grid(scaled)
            a_s = alpha_exact(scaled, grid)
            a_o = alpha_exact(base, grid / s)
            for es, eo in zip(a_s.entries, a_o.entries):
                diff = abs(es.alpha - eo.alpha)
                exact &= diff <= 1e-12
                rows.append((base.label, s, es.eps, es.alpha, eo.alpha, diff))
    fam_rows, generic_ok = [], True
    base = make_uniform_symmetric(family_k)
    for n, s in enumerate(family_scales):
        sp = make_scaled(base, s)
        for e in alpha_exact(sp, default_eps_grid(sp)).entries:
            generic = theoretical_bound(BoundSpec("maurey", n=family_k), e.eps / s)
            target = math.exp(-e.eps**2 * 2 ** (n + 1) / 32.0)
            passed = _le(e.alpha, generic)
            generic_ok &= passed
            fam_rows.append((n, family_k, s, e.eps, e.alpha, generic, target, passed))
    const_rows = [(n, 8 ** (n + 1), 16.0 ** (-n - 1), 8 ** (n + 1) * 16.0 ** (-n - 1), 2.0 ** (n + 1),
                   8 ** (n + 1) * 16.0 ** (-n - 1) == 2.0 ** (n + 1)) for n in range(4)]
    return RecipeResult("scaled-family", [
        Table("exactness", ("space", "s", "eps", "alpha_scaled", "alpha_base_at_eps_over_s", "abs_diff"), rows),
        Table("family", ("n", "k", "s", "eps", "alpha", "generic_bound", "stated_target", "pass"), fam_rows),
        Table("constants", ("n", "intervals", "interval_length", "covered_length", "stated_length", "consistent"),
              const_rows),
    ], {"scaling_exact": exact, "generic_bound_holds": generic_ok},
        ["interval count times interval length is 2^-(n+1), not the stated 2^(n+1); constants recorded only"])


@recipe("product-levy", "Levy trend of cube x cube products, the X x point reduction and a fixed-factor non-Levy case",
        sizes=(2, 3, 4), eps=0.4, slack=0.02, budget=1000, fixed_eps=0.1)
def _product_levy(seed, sizes, eps, slack, budget, fixed_eps):
    cubes = [make_cube(n) for n in sizes]
    verdict = product_levy_check(cubes, cubes, eps, slack, budget=budget, seed=derive_seed(seed, "pp"))
    point = single_point_space()
    reduced = product_levy_check(cubes, [point] * len(cubes), eps, slack, budget=budget,
                                 seed=derive_seed(seed, "xp"))
    alone = [alpha_exact(c, avoid_distance_lattice([eps], c.distance_levels())).entries[0].alpha for c in cubes]
    circle = make_circle(8)
    fixed = product_levy_check([circle] * len(cubes), cubes, fixed_eps, slack, budget=budget,
                               seed=derive_seed(seed, "fixed"))
    rows = [(f"cube{n}xcube{n}", n, eps, a) for n, a in zip(sizes, verdict.sequence)]
    rows += [(f"cube{n}xpoint", n, eps, a) for n, a in zip(sizes, reduced.sequence)]
    rows += [(f"Z8circlexcube{n}", n, fixed_eps, a) for n, a in zip(sizes, fixed.sequence)]
    return RecipeResult("product-levy", [
        Table("products", ("space", "n", "eps", "alpha"), rows, ("alpha",)),
    ], {"cube_products_levy": verdict.consistent,
        "point_factor_reduces": all(abs(a - b) <= 1e-12 for a, b in zip(reduced.sequence, alone)),
        "fixed_factor_not_levy": not fixed.consistent},
        [verdict.reason, fixed.reason])


@recipe("approx-lemma-suite", "Seeded random full-group elements approximated within 2 eps by cylinder permutations",
        count=50, N=16, max_rank=4, extra_width=3, p_values=(0.5, 0.35), eps_values=(0.1, 0.2))
def _approx_suite(seed, count, N, max_rank, extra_width, p_values, eps_values):
    spaces = {p: make_cylinder_space(N, p) for p in p_values}
    rows, ok = [], True
    for i in range(count):
        rng = np.random.default_rng(derive_seed(seed, "instance", i))
        p = p_values[i % len(p_values)]
        eps = eps_values[(i // len(p_values)) % len(eps_values)]
        M = int(rng.integers(1, max_rank + 1))
        elem = random_full_group_element(rng, M, extra_width)
        tr = approximate_by_bij(spaces[p], elem, eps, strict=False)
        ok &= tr.passed
        c = tr.checks
        rows.append((i, M, p, eps, tr.N1, tr.N2, tr.delta, tr.distance, tr.intermediate_bound,
                     c.get("delta", False), c.get("i_piece_error", False), c.get("ii_disjoint", False),
                     c.get("iii_disjoint", False), c.get("ratio_identity", False), c.get("two_eps", False),
                     tr.boundary_hits, tr.passed))
    header = ("instance", "rank", "p", "eps", "N1", "N2", "delta", "d_mu", "intermediate_bound", "delta_ok",
              "i_ok", "ii_ok", "iii_ok", "ratio_identity_ok", "two_eps_ok", "boundary_hits", "pass")
    varying = tuple(h for h in header if h not in ("instance", "p", "eps"))
    return RecipeResult("approx-lemma-suite", [Table("traces", header, rows, varying)], {"all_traces_pass": ok})


@recipe("weak-vs-uniform", "A block-preserving transformation far from the identity in d_mu but weakly trivial",
        N=10, p=0.35, partition_rank=1, random_count=20)
def _weak_uniform(seed, N, p, partition_rank, random_count):
    sp = make_cylinder_space(N, p)
    sigma = block_preserving_flip(sp, partition_rank)
    blocks = cylinder_partition(sp, partition_rank)
    ident = FullGroupElement.identity()
    dist = d_mu(sp, sigma, ident)
    defect = weak_defect(sp, sigma, blocks)
    gap_rows = [(N, p, partition_rank, sigma.to_json()["table"][0], dist, defect)]
    rn_rows, rn_ok = [], True
    for i in range(random_count):
        rng = np.random.default_rng(derive_seed(seed, "rn", i))
        elem = random_full_group_element(rng, int(rng.integers(1, 4)), 2)
        rank = int(rng.integers(1, 4))
        wd = weak_defect(sp, elem, cylinder_partition(sp, rank))
        dm = d_mu(sp, elem, ident)
        rmax = rn_max(sp, elem)
        holds = wd <= (1.0 + rmax) * dm + COMPARE_TOL
        rn_ok &= holds
        rn_rows.append((i, rank, wd, dm, rmax, holds))
    return RecipeResult("weak-vs-uniform", [
        Table("gap", ("N", "p", "partition_rank", "flip_hex", "d_mu_to_identity", "weak_defect"), gap_rows),
        Table("rn_inequality", ("instance", "partition_rank", "weak_defect", "d_mu", "rn_max", "holds"), rn_rows,
              ("partition_rank", "weak_defect", "d_mu", "rn_max", "holds")),
    ], {"gap_witness": dist >= 0.9 and defect == 0.0, "rn_inequality": rn_ok})


@recipe("gromov-demo", "Observable-distance estimates between Z8 circle x cube_n and the Z8 circle",
        sizes=tuple(range(1, 9)), M=720, K=64, T=200, slack=0.05)
def _gromov(seed, sizes, M, K, T, slack):
    Y = make_circle(8)
    rows, values = [], []
    for n in sizes:
        X = make_direct_product(Y, make_cube(n))
        m_used = M * max(1, -(-X.n // M))
        est = h1li_estimate(X, Y, m_used, K, T, seed)
        values.append(est.value)
        rows.append((X.label, Y.label, n, m_used, K, T, seed, est.value, est.semantics))
    self_rows = []
    for sp in (Y, make_cube(3)):
        est = h1li_estimate(sp, sp, M, K, T, seed)
        self_rows.append((sp.label, sp.label, M, K, T, seed, est.value, est.semantics))
    trend = all(values[i] <= values[i - 1] + slack for i in range(1, len(values)))
    return RecipeResult("gromov-demo", [
        Table("estimates", ("labelX", "labelY", "n", "M", "K", "T", "seed", "value", "semantics"), rows,
              ("seed", "value")),
        Table("self", ("labelX", "labelY", "M", "K", "T", "seed", "value", "semantics"), self_rows, ("seed",)),
    ], {"non_increasing_within_slack": trend, "self_distance_zero": all(r[6] == 0.0 for r in self_rows)},
        ["estimates are heuristic minima over sampled nets and matchings, not certified bounds"])


@recipe("semidirect-nonlevy", "Z8 circle acting on cubes: half-circle sets keep alpha(0.1) >= 1/4 while the cubes "
        "alone form a Levy family", sizes=tuple(range(1, 9)), eps0=0.1, trend_eps=0.45, slack=0.02, budget=1000,
        threshold=0.25)
def _semidirect(seed, sizes, eps0, trend_eps, slack, budget, threshold):
    rows, certified, invariant = [], True, True
    profiles, trend_rows = [], []
    for n in sizes:
        sp = make_shift_semidirect(8, n)
        mask = half_circle_mask(sp)
        mass = float(sp.measure[mask].sum())
        cover = float(sp.measure[neighborhood(sp, mask, eps0)].sum())
        alpha_lb = 1.0 - cover
        disc = check_left_invariance(sp, seed=derive_seed(seed, "inv", n))
        certified &= mass >= 0.5 - 1e-12 and alpha_lb >= threshold
        invariant &= disc <= COMPARE_TOL
        rows.append((sp.label, n, eps0, mass, cover, alpha_lb, disc))
        cube = make_cube(n)
        grid = avoid_distance_lattice([trend_eps], cube.distance_levels())
        prof = alpha_auto(cube, grid, budget=budget, seed=derive_seed(seed, "cube", n))
        prof.entries[0].eps = trend_eps
        profiles.append(prof)
        e = prof.entries[0]
        trend_rows.append((cube.label, n, trend_eps, e.alpha, e.kind))
    verdict = levy_trend(profiles, trend_eps, slack)
    return RecipeResult("semidirect-nonlevy", [
        Table("half_circle", ("space", "n", "eps", "mass_A", "mass_A_eps", "alpha_lower", "left_invariance_gap"), rows,
              ("left_invariance_gap",)),
        Table("cube_trend", ("space", "n", "eps", "alpha", "kind"), trend_rows, ("alpha", "kind")),
    ], {"half_circle_certifies": certified, "left_invariant": invariant, "cube_family_levy": verdict.consistent},
        [verdict.reason])
