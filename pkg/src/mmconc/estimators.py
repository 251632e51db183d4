"""Estimator-style wrappers (fit / predict / get_params) over the functional API."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .concentration import EPS_LOOKUP_TOL, alpha_exact, alpha_lower, default_eps_grid
from .core import FiniteMMSpace
from .exceptions import ValidationError
from .fullgroup import CylinderSpace, FullGroupElement, approximate_by_bij
from .length import stabilizer_chain, verify_certificate
from .observable import h1li_estimate


def _require_space(space) -> FiniteMMSpace:
    if not isinstance(space, FiniteMMSpace):
        raise ValidationError(f"expected a FiniteMMSpace, got {type(space).__name__}")
    return space


class ConcentrationEstimator(BaseEstimator):
    """Concentration profile of one space.

    ``method`` is ``"exact"``, ``"lower"`` or ``"auto"`` (exact up to
    ``exact_cap`` points).  ``predict(eps)`` looks values up on the fitted grid.
    """

    def __init__(self, method="auto", eps_grid=None, budget=1000, seed=0, exact_cap=24, threads=1):
        self.method = method
        self.eps_grid = eps_grid
        self.budget = budget
        self.seed = seed
        self.exact_cap = exact_cap
        self.threads = threads

    def fit(self, space, y=None):
        space = _require_space(space)
        if self.method not in ("auto", "exact", "lower"):
            raise ValidationError(f"unknown method {self.method!r}")
        grid = self.eps_grid if self.eps_grid is not None else default_eps_grid(space)
        exact = self.method == "exact" or (self.method == "auto" and space.n <= self.exact_cap)
        if exact:
            self.profile_ = alpha_exact(space, grid, cap=self.exact_cap, threads=self.threads)
        else:
            self.profile_ = alpha_lower(space, grid, budget=self.budget, seed=self.seed)
        self.eps_ = self.profile_.eps
        self.alpha_ = self.profile_.alpha
        return self

    def predict(self, eps):
        check_is_fitted(self, "profile_")
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        return np.array([self.profile_.value_at(e, EPS_LOOKUP_TOL) for e in eps])


class LengthCertifier(BaseEstimator):
    """Stabilizer-chain certificate for a weighted symmetric group."""

    def __init__(self, weights=(0.5, 0.3, 0.2), seed=0):
        self.weights = weights
        self.seed = seed

    def fit(self, space, y=None):
        space = _require_space(space)
        self.certificate_ = stabilizer_chain(self.weights)
        self.report_ = verify_certificate(space, self.certificate_, seed=self.seed)
        self.length_ = self.certificate_.length
        return self

    def predict(self, eps):
        check_is_fitted(self, "certificate_")
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        return np.array([self.certificate_.bound(e) for e in eps])


class ObservableDistanceEstimator(BaseEstimator):
    """Observable-distance estimate between a pair of spaces."""

    def __init__(self, M=720, K=64, T=200, seed=0):
        self.M = M
        self.K = K
        self.T = T
        self.seed = seed

    def fit(self, X, Y):
        self.estimate_ = h1li_estimate(_require_space(X), _require_space(Y), self.M, self.K, self.T, self.seed)
        self.value_ = self.estimate_.value
        return self


class BijApproximator(BaseEstimator):
    """Approximate a full-group element by a cylinder permutation."""

    def __init__(self, eps=0.1):
        self.eps = eps

    def fit(self, space, element):
        if not isinstance(space, CylinderSpace) or not isinstance(element, FullGroupElement):
            raise ValidationError("fit expects (CylinderSpace, FullGroupElement)")
        self.trace_ = approximate_by_bij(space, element, self.eps)
        self.sigma_ = self.trace_.sigma
        return self

    def predict(self, x):
        check_is_fitted(self, "sigma_")
        return self.sigma_.apply(x)
