import math

import numpy as np
import pytest

from mmconc.concentration import alpha_exact, default_eps_grid
from mmconc.core import explicit_space, single_point_space, validate_space
from mmconc.exceptions import CapExceededError, InvariantError, ValidationError
from mmconc.groups import (GroupAction, all_permutations, bernoulli_lambda, check_left_invariance, cyclic_group,
                           make_circle, make_cube, make_direct_product, make_hamming_product, make_l1_group,
                           make_scaled, make_semidirect, make_shift_semidirect, make_uniform_symmetric,
                           make_weighted_symmetric, permutation_rank, shift_action, symmetric_group)


def perm_index(k, perm):
    return int(permutation_rank(np.array([perm]))[0])


class TestWeightedSymmetric:
    def test_two_weights(self):
        sp = make_weighted_symmetric([0.5, 0.5])
        assert sp.n == 2 and sp.distance(0, 1) == 1
        assert sp.measure.tolist() == [0.5, 0.5]

    def test_uniform_three_is_hamming(self):
        sp = make_weighted_symmetric([1 / 3] * 3)
        assert sp.distance(0, perm_index(3, (1, 0, 2))) == pytest.approx(2 / 3)

    def test_weighted_transposition(self):
        sp = make_weighted_symmetric([0.5, 0.3, 0.2])
        assert sp.distance(0, perm_index(3, (1, 0, 2))) == pytest.approx(0.8)

    def test_cap(self):
        with pytest.raises(CapExceededError, match="enumeration infeasible"):
            make_weighted_symmetric(np.full(9, 1 / 9))

    def test_rejects_unsorted_weights(self):
        with pytest.raises(ValidationError):
            make_weighted_symmetric([0.2, 0.3, 0.5])

    @pytest.mark.parametrize("k", [2, 3, 4, 5])
    def test_uniform_matches_normalized_hamming(self, k):
        sp = make_uniform_symmetric(k)
        P = all_permutations(k)
        ham = (P[:, None, :] != P[None, :, :]).mean(axis=2)
        np.testing.assert_allclose(sp.dense(), ham, atol=1e-15)

    @pytest.mark.parametrize("k", [3, 4])
    def test_uniform_bi_invariant(self, k):
        sp = make_uniform_symmetric(k)
        assert symmetric_group(k).check_bi_invariant(sp.dense()) is None

    def test_implicit_mode_for_large_k(self):
        sp = make_uniform_symmetric(6)
        assert sp.mode == "implicit" and validate_space(sp).passed


class TestHamming:
    def test_square(self):
        sq = make_cube(2)
        assert np.allclose(sq.measure, 0.25)
        assert set(np.unique(sq.dense())) == {0.0, 0.5, 1.0}

    def test_one_coordinate(self):
        sp = make_hamming_product([0.3, 0.7], 1)
        assert sp.n == 2 and sp.distance(0, 1) == 1

    def test_bernoulli_lambda(self):
        p = bernoulli_lambda(0.5)
        assert p == pytest.approx((2 / 3, 1 / 3))
        sp = make_hamming_product(p, 2)
        np.testing.assert_allclose(sp.measure, [4 / 9, 2 / 9, 2 / 9, 1 / 9])


class TestL1:
    def test_examples(self):
        assert make_l1_group([1.0]).distance(0, 1) == 1
        assert make_l1_group([0.5, 0.5]).distance(0, 3) == 1
        sp = make_l1_group([0.5, 0.3, 0.2])
        assert sp.n == 8
        assert sp.distance(0, 4) == 0.5  # 000 vs 100

    def test_cyclic_diameter_one(self):
        sp = make_l1_group([0.6, 0.4], m=5)
        assert sp.dense().max() == pytest.approx(1.0)
        assert validate_space(sp).passed

    def test_rejects_small_m(self):
        with pytest.raises(ValidationError):
            make_l1_group([1.0], m=1)


class TestScaledAndProducts:
    def test_scaled(self, two_point):
        assert make_scaled(two_point, 0.25).distance(0, 1) == 0.25
        np.testing.assert_array_equal(make_scaled(two_point, 1.0).dense(), two_point.dense())
        with pytest.raises(ValidationError):
            make_scaled(two_point, 0.0)

    def test_scaled_alpha_exact_equality(self):
        base = make_uniform_symmetric(4)
        for s in (0.25, 2.0):
            sc = make_scaled(base, s)
            grid = default_eps_grid(sc)
            np.testing.assert_array_equal(alpha_exact(sc, grid).alpha, alpha_exact(base, grid / s).alpha)

    def test_product_with_point_is_isometric(self):
        X = make_cube(3)
        P = make_direct_product(X, single_point_space())
        np.testing.assert_array_equal(P.dense(), X.dense())

    def test_unit_square_l2(self, two_point):
        P = make_direct_product(two_point, two_point, "l2")
        assert sorted(np.unique(P.dense())) == pytest.approx([0, 1, math.sqrt(2)])

    def test_product_measure(self):
        X = explicit_space([[0, 1], [1, 0]], [0.5, 0.5])
        Y = explicit_space([[0, 1], [1, 0]], [1 / 3, 2 / 3])
        np.testing.assert_allclose(make_direct_product(X, Y).measure, [1 / 6, 2 / 6, 1 / 6, 2 / 6])

    @pytest.mark.parametrize("comb", ["l2", "l1", "max"])
    def test_combiners_give_metrics(self, comb):
        assert validate_space(make_direct_product(make_circle(4), make_cube(2), comb)).passed

    def test_unknown_combiner(self, two_point):
        with pytest.raises(ValidationError):
            make_direct_product(two_point, two_point, "l3")


class TestSemidirect:
    def test_trivial_action_is_direct_product(self):
        Z2 = cyclic_group(2)
        act = GroupAction(Z2, Z2, np.tile(np.arange(2), (2, 1)))
        d = np.array([[0.0, 1.0], [1.0, 0.0]])
        sp = make_semidirect(act, d, d)
        assert sorted(np.unique(sp.dense())) == pytest.approx([0, 1, math.sqrt(2)])

    def test_bad_action_rejected(self):
        Z2, Z3 = cyclic_group(2), cyclic_group(3)
        tau = np.array([[0, 1, 2], [0, 1, 1]])
        with pytest.raises(InvariantError):
            GroupAction(Z2, Z3, tau).validate()

    @pytest.mark.parametrize("m,n", [(8, 3), (4, 4), (8, 2)])
    def test_shift_demo(self, m, n):
        sp = make_shift_semidirect(m, n)
        assert validate_space(sp).passed
        assert check_left_invariance(sp) <= 1e-12
        sN = sp.info["sigma_N"]
        tau = sp.info["action"].tau
        for h in range(m):
            np.testing.assert_allclose(sN[np.ix_(tau[h], tau[h])], sN, atol=1e-12)
        nn = 2**n
        D = sp.dense()
        np.testing.assert_allclose(D[np.ix_(np.arange(m) * nn, np.arange(m) * nn)], sp.info["d_H"], atol=1e-15)
        np.testing.assert_allclose(D[:nn, :nn], sN, atol=1e-15)

    def test_shift_action_is_action_for_any_n(self):
        for n in range(1, 9):
            shift_action(8, n).validate()


def test_every_constructor_validates():
    spaces = [make_weighted_symmetric([0.4, 0.3, 0.2, 0.1]), make_cube(5), make_l1_group([0.5, 0.3, 0.2], 3),
              make_circle(8), make_scaled(make_cube(3), 2.0), make_shift_semidirect(8, 4),
              make_hamming_product([[0.2, 0.8], [0.5, 0.3, 0.2]])]
    for sp in spaces:
        assert validate_space(sp).passed, sp.label
    for k in (3, 4):
        assert validate_space(make_uniform_symmetric(k)).passed
