import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmconc.core import (FiniteMMSpace, diameter, distance_to_set, explicit_space, lipschitz_check,
                         median_interval, median_of, neighborhood, single_point_space, validate_space)
from mmconc.exceptions import CapExceededError, ValidationError
from mmconc.groups import make_cube, make_uniform_symmetric

from conftest import small_spaces


class TestValidation:
    def test_two_point_passes(self, two_point):
        assert validate_space(two_point).passed

    def test_unnormalized_measure_fails(self):
        sp = explicit_space([[0, 1], [1, 0]], [0.6, 0.6], strict=False)
        rep = validate_space(sp)
        assert not rep.passed and rep.violation == "normalization"

    def test_strict_constructor_rejects_bad_measure(self):
        with pytest.raises(ValidationError):
            explicit_space([[0, 1], [1, 0]], [0.6, 0.6])

    def test_triangle_violation_indices(self):
        d = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
        rep = validate_space(explicit_space(d))
        assert rep.violation == "triangle"
        assert rep.indices == (0, 1, 2)

    def test_asymmetric_and_degenerate(self):
        rep = validate_space(explicit_space([[0, 1], [2, 0]]))
        assert rep.violation == "symmetry"
        rep = validate_space(explicit_space([[0, 0], [0, 0]]))
        assert rep.violation == "positivity"

    def test_implicit_reports_sample_size(self):
        rep = validate_space(make_uniform_symmetric(6))
        assert rep.passed and rep.sample_size == 1000

    @given(small_spaces)
    @settings(max_examples=30, deadline=None)
    def test_random_metrics_validate(self, sp):
        assert validate_space(sp).passed


class TestNeighborhood:
    def test_two_point(self, two_point):
        A = np.array([True, False])
        assert neighborhood(two_point, A, 0.5).tolist() == [True, False]
        assert neighborhood(two_point, A, 1.0).tolist() == [True, True]

    def test_hamming_square(self):
        sq = make_cube(2)
        A = np.zeros(4, dtype=bool)
        A[[0, 3]] = True  # 00 and 11
        assert neighborhood(sq, A, 0.5).all()

    def test_empty_set(self, two_point):
        with pytest.raises(ValidationError, match="empty set has no neighborhood"):
            neighborhood(two_point, np.zeros(2, dtype=bool), 0.3)

    def test_wrong_mask_length(self, two_point):
        with pytest.raises(ValidationError):
            neighborhood(two_point, np.ones(3, dtype=bool), 0.3)

    @given(small_spaces, st.integers(0, 2**16), st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=40, deadline=None)
    def test_monotone_and_contains(self, sp, bits, e1, e2):
        A = ((bits >> np.arange(sp.n)) & 1).astype(bool)
        A[0] = True
        lo, hi = sorted((e1, e2))
        small = neighborhood(sp, A, lo)
        assert np.all(small >= A)
        assert np.all(neighborhood(sp, A, hi) >= small)
        B = A.copy()
        B[-1] = True
        assert np.all(neighborhood(sp, B, lo) >= small)
        assert neighborhood(sp, A, 0.0).tolist() == A.tolist()
        assert neighborhood(sp, A, diameter(sp)).all()


class TestDiameter:
    def test_examples(self, two_point):
        assert diameter(single_point_space()) == 0
        assert diameter(two_point) == 1
        assert diameter(make_cube(3)) == 1

    def test_implicit_without_closed_form_above_cap(self):
        n = 20000
        sp = FiniteMMSpace(np.full(n, 1 / n), rows=lambda idx: np.ones((len(idx), n)), label="big")
        with pytest.raises(CapExceededError, match="diameter infeasible"):
            diameter(sp)


class TestMedian:
    def test_examples(self, two_point):
        three = explicit_space(np.abs(np.subtract.outer([0, 1, 2], [0, 1, 2])) + 0.0, [0.2, 0.3, 0.5])
        assert median_of(two_point, [3.0, 3.0]) == 3
        assert median_of(two_point, [0.0, 1.0]) == 0.5
        # median interval is [2, 3]; the midpoint rule gives 2.5
        assert median_interval(three, [1.0, 2.0, 3.0]) == (2.0, 3.0)
        assert median_of(three, [1.0, 2.0, 3.0]) == 2.5

    @given(small_spaces, st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_half_mass_conditions(self, sp, seed):
        f = np.random.default_rng(seed).integers(0, 4, sp.n).astype(float)
        c = median_of(sp, f)
        mu = sp.measure
        assert mu[f <= c].sum() >= 0.5 - 1e-12
        assert mu[f >= c].sum() >= 0.5 - 1e-12


class TestLipschitz:
    def test_distance_function(self, two_point):
        sp = make_uniform_symmetric(4)
        assert lipschitz_check(sp, sp.row(3), 1.0).ok

    def test_violation_pair(self, two_point):
        rep = lipschitz_check(two_point, [0.0, 2.0], 1.0)
        assert not rep.ok and rep.worst_pair == (0, 1)

    def test_zero_function(self, two_point):
        assert lipschitz_check(two_point, [0.0, 0.0], 0.01).ok

    def test_distance_to_set_is_lipschitz(self):
        sp = make_cube(5)
        A = np.zeros(sp.n, dtype=bool)
        A[[1, 7, 20]] = True
        assert lipschitz_check(sp, distance_to_set(sp, A)).ok
