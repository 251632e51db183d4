import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmconc.concentration import (BoundSpec, ConcentrationProfile, ProfileEntry, alpha_auto, alpha_exact,
                                  alpha_lower, avoid_distance_lattice, default_eps_grid, levy_trend,
                                  lipschitz_deviation, profiles_to_csv, theoretical_bound, verify_bound)
from mmconc.core import explicit_space, single_point_space
from mmconc.exceptions import CapExceededError, ValidationError
from mmconc.functions import lipschitz_functions
from mmconc.groups import make_cube, make_l1_group, make_uniform_symmetric, make_weighted_symmetric

from conftest import random_space, small_spaces


def brute_alpha(D, mu, eps):
    """Direct enumeration of all half-mass subsets."""
    n = len(mu)
    if eps == 0:
        return 0.5
    best = 1.0
    for r in range(1, n + 1):
        for A in itertools.combinations(range(n), r):
            if sum(mu[i] for i in A) < 0.5 - 1e-12:
                continue
            near = D[list(A)].min(axis=0) <= eps
            best = min(best, float(mu[near].sum()))
    return min(0.5, max(0.0, 1.0 - best))


def profile(values, label="fake"):
    return ConcentrationProfile(label, [ProfileEntry(e, a, "exact") for e, a in values])


class TestExact:
    def test_two_point(self, two_point):
        prof = alpha_exact(two_point, [0.0, 0.5, 1.0])
        assert prof.alpha.tolist() == [0.5, 0.5, 0.0]

    def test_single_point(self):
        prof = alpha_exact(single_point_space(), [0.0, 0.3])
        assert prof.alpha.tolist() == [0.5, 0.0]

    def test_hamming_square(self):
        prof = alpha_exact(make_cube(2), [0.5])
        assert prof.alpha[0] == 0.0

    def test_cap(self):
        with pytest.raises(CapExceededError):
            alpha_exact(make_cube(5), [0.1], cap=24)

    @given(small_spaces, st.floats(0.0, 1.5))
    @settings(max_examples=40, deadline=None)
    def test_matches_brute_force(self, sp, eps):
        got = alpha_exact(sp, [eps]).alpha[0]
        assert got == pytest.approx(brute_alpha(sp.dense(), sp.measure, eps), abs=1e-12)

    def test_witness_has_half_mass(self):
        sp = make_weighted_symmetric([0.5, 0.3, 0.2])
        for e in alpha_exact(sp, default_eps_grid(sp)).entries[1:]:
            assert sp.measure[e.witness].sum() >= 0.5 - 1e-12

    def test_non_increasing_in_eps(self):
        sp = make_uniform_symmetric(4)
        a = alpha_exact(sp, default_eps_grid(sp)).alpha
        assert np.all(np.diff(a) <= 1e-15)


class TestLower:
    @pytest.mark.parametrize("seed", range(6))
    def test_lower_never_exceeds_exact(self, seed):
        sp = random_space(seed, 9)
        grid = default_eps_grid(sp)
        lo = alpha_lower(sp, grid, budget=200, seed=seed).alpha
        ex = alpha_exact(sp, grid).alpha
        assert np.all(lo <= ex + 1e-12)

    def test_reaches_exact_on_symmetric_group(self):
        sp = make_uniform_symmetric(4)
        grid = default_eps_grid(sp)
        np.testing.assert_allclose(alpha_lower(sp, grid, budget=500).alpha, alpha_exact(sp, grid).alpha,
                                   atol=1e-12)

    def test_cube_harper_values(self):
        # the Hamming ball (radius below n/2 plus half a shell) is optimal at these sizes
        expected = {4: 0.5, 5: 0.1875, 6: 0.1875, 7: 0.2265625}
        for n, a in expected.items():
            sp = make_cube(n)
            grid = avoid_distance_lattice([0.2], sp.distance_levels())
            assert alpha_lower(sp, grid, budget=200).alpha[0] == pytest.approx(a, abs=1e-12)

    def test_deterministic(self):
        sp = make_uniform_symmetric(5)
        grid = [0.2, 0.4]
        a = alpha_lower(sp, grid, budget=100, seed=3)
        b = alpha_lower(sp, grid, budget=100, seed=3)
        assert profiles_to_csv([a]) == profiles_to_csv([b])

    def test_auto_switches(self):
        assert alpha_auto(make_cube(3), [0.4]).entries[0].kind == "exact"
        assert alpha_auto(make_cube(6), [0.4], budget=50).entries[0].kind != "exact"


class TestBounds:
    def test_arithmetic(self):
        assert theoretical_bound(BoundSpec("maurey", n=32), 1.0) == pytest.approx(math.exp(-1))
        assert theoretical_bound(BoundSpec("product", n=1), 1.0) == pytest.approx(2 * math.exp(-1))
        assert theoretical_bound(BoundSpec("weighted_aut", weights=[1.0]), 1.0) == pytest.approx(math.exp(-1 / 32))
        assert theoretical_bound(BoundSpec("l1_chain", weights=[1.0]), 1.0) == pytest.approx(math.exp(-1 / 8))
        assert theoretical_bound(BoundSpec("length", length=1.0), 1.0) == pytest.approx(math.exp(-1 / 8))
        assert theoretical_bound(BoundSpec("normal", n=2, C1=1.5, C2=0.5), 1.0) == pytest.approx(1.5 * math.exp(-1))

    def test_largest_atom_forms(self):
        w = (0.5, 0.3, 0.2)
        assert theoretical_bound(BoundSpec("aut_largest_atom", weights=w), 0.4) == pytest.approx(math.exp(-0.16 / 16))
        assert theoretical_bound(BoundSpec("l1_largest_atom", weights=w), 0.4) == pytest.approx(math.exp(-0.16 / 4))

    def test_missing_and_bad_parameters(self):
        with pytest.raises(ValidationError):
            BoundSpec("maurey")
        with pytest.raises(ValidationError):
            BoundSpec("weighted_aut", weights=[0.5, 0.6])
        with pytest.raises(ValidationError):
            BoundSpec("quadratic", n=3)
        with pytest.raises(ValidationError):
            theoretical_bound(BoundSpec("maurey", n=3), -0.1)

    def test_subgroup_chain_form(self):
        spec = BoundSpec("subgroup_chain", diameters=[0.5, 0.5])
        assert theoretical_bound(spec, 1.0) == pytest.approx(math.exp(-0.25))

    def test_verify_flags_fabricated_profile(self):
        rep = verify_bound(profile([(0.1, 0.9)]), BoundSpec("maurey", n=4))
        assert not rep.passed and rep.failures[0][0] == 0.1

    def test_verify_accepts_exact(self):
        sp = make_cube(3)
        assert verify_bound(alpha_exact(sp, default_eps_grid(sp)), BoundSpec("product", n=3)).passed


class TestGrid:
    def test_default_grid(self):
        g = default_eps_grid()
        assert g.size == 20 and g[0] == pytest.approx(0.05) and g[-1] == pytest.approx(1.0)

    def test_lattice_shift(self):
        g = avoid_distance_lattice([0.25, 0.3], [0.0, 0.25, 0.5])
        assert g[0] == pytest.approx(0.25 + 1e-6) and g[1] == 0.3

    def test_value_lookup_tolerates_shift(self):
        p = profile([(0.25 + 1e-6, 0.1)])
        assert p.value_at(0.25) == 0.1
        with pytest.raises(ValidationError):
            p.value_at(0.3)

    def test_csv(self, two_point):
        text = profiles_to_csv([alpha_exact(two_point, [0.0, 1.0])])
        lines = text.splitlines()
        assert lines[0].startswith("# schema=1")
        assert len(lines) == 4


class TestTrend:
    def test_decaying(self):
        ps = [profile([(0.1, a)]) for a in (0.4, 0.3, 0.2)]
        assert levy_trend(ps, 0.1, 0.0).consistent

    def test_increase_beyond_slack(self):
        ps = [profile([(0.1, a)]) for a in (0.4, 0.45, 0.2)]
        assert not levy_trend(ps, 0.1, 0.02).consistent
        assert levy_trend(ps, 0.1, 0.06).consistent

    def test_flat_is_not_levy(self):
        ps = [profile([(0.1, 0.3)]) for _ in range(3)]
        assert not levy_trend(ps, 0.1, 0.02).consistent

    def test_needs_three(self):
        with pytest.raises(ValidationError):
            levy_trend([profile([(0.1, 0.3)])] * 2, 0.1, 0.0)


class TestLipschitzDeviation:
    def test_examples(self, two_point):
        assert lipschitz_deviation(two_point, [0.0, 1.0], 0.6) == 0.0
        assert lipschitz_deviation(two_point, [0.0, 1.0], 0.4) == 1.0
        assert lipschitz_deviation(two_point, [2.0, 2.0], 0.01) == 0.0

    def test_rejects_non_lipschitz(self, two_point):
        with pytest.raises(ValidationError):
            lipschitz_deviation(two_point, [0.0, 3.0], 0.1)

    @pytest.mark.parametrize("sp", [make_cube(3), make_l1_group([0.5, 0.3, 0.2]),
                                    make_weighted_symmetric([0.5, 0.3, 0.2])], ids=lambda s: s.label)
    def test_at_most_twice_alpha(self, sp):
        grid = default_eps_grid(sp)
        prof = alpha_exact(sp, grid)
        for f in lipschitz_functions(sp, 20, seed=1):
            for e in prof.entries:
                assert lipschitz_deviation(sp, f, e.eps) <= 2 * e.alpha + 1e-12
