"""scikit-learn style wrappers.

The maps act on arrays of ``(t, x)`` rows; the solvers are fitted on a
:class:`~skewflow.coefficients.ProblemSpec` and predict ``u(t, x)``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .pde_solver import TransmissionPDE, evaluate_u, solve
from .transform import RemovalTransform, StraightenTransform
from .validation import feynman_kac_mc


def _points(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError("expected an array of shape (n, 2) with columns (t, x)")
    return X[:, 0], X[:, 1]


class RemovalTransformer(TransformerMixin, BaseEstimator):
    """``(t, x) -> (t, R(t, x))``; ``inverse_transform`` applies ``r``."""

    def __init__(self, problem=None):
        self.problem = problem

    def fit(self, X=None, y=None):
        if self.problem is None:
            raise ValueError("problem is required")
        self.transform_ = RemovalTransform(self.problem.family, self.problem.beta)
        return self

    def transform(self, X):
        check_is_fitted(self, "transform_")
        t, x = _points(X)
        return np.column_stack([t, self.transform_.at(t).R(x)])

    def inverse_transform(self, X):
        check_is_fitted(self, "transform_")
        t, y = _points(X)
        return np.column_stack([t, self.transform_.at(t).r(y)])


class StraighteningTransformer(TransformerMixin, BaseEstimator):
    """``(t, x) -> (t, Psi(t, x))``; ``inverse_transform`` applies ``psi``."""

    def __init__(self, problem=None):
        self.problem = problem

    def fit(self, X=None, y=None):
        if self.problem is None:
            raise ValueError("problem is required")
        self.transform_ = StraightenTransform(self.problem.family)
        return self

    def _map(self, X, fn):
        check_is_fitted(self, "transform_")
        t, x = _points(X)
        out = np.array([fn(ti, xi) for ti, xi in zip(t, x)])
        return np.column_stack([t, out])

    def transform(self, X):
        return self._map(X, self.transform_.Psi)

    def inverse_transform(self, X):
        return self._map(X, self.transform_.psi)


class TransmissionPDERegressor(RegressorMixin, BaseEstimator):
    """Grid solution of the transmission problem; ``fit(problem)`` then ``predict((t, x))``."""

    def __init__(self, lam=0.0, f=None, g=None, L=10.0, N=800, M=800, theta=0.5):
        self.lam = lam
        self.f = f
        self.g = g
        self.L = L
        self.N = N
        self.M = M
        self.theta = theta

    def fit(self, problem, y=None):
        pde = TransmissionPDE(problem, self.lam, self.f, self.g)
        self.solution_ = solve(pde, L=self.L, N=self.N, M=self.M, theta=self.theta)
        return self

    def predict(self, X):
        check_is_fitted(self, "solution_")
        t, x = _points(X)
        return np.array([evaluate_u(self.solution_, ti, xi) for ti, xi in zip(t, x)])


class FeynmanKacRegressor(RegressorMixin, BaseEstimator):
    """Monte Carlo Feynman--Kac values; ``std_errors_`` is set by ``predict``."""

    def __init__(self, lam=0.0, f=None, g=None, n_paths=100_000, n_steps=800, seed=0):
        self.lam = lam
        self.f = f
        self.g = g
        self.n_paths = n_paths
        self.n_steps = n_steps
        self.seed = seed

    def fit(self, problem, y=None):
        self.problem_ = problem
        return self

    def predict(self, X):
        check_is_fitted(self, "problem_")
        t, x = _points(X)
        ests = [feynman_kac_mc(self.problem_, self.lam, self.f, self.g, (ti, xi), self.n_paths,
                               self.seed, self.n_steps, stream=k)
                for k, (ti, xi) in enumerate(zip(t, x))]
        self.std_errors_ = np.array([e.std_error for e in ests])
        return np.array([e.estimate for e in ests])
