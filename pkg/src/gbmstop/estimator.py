"""Estimator-style facade over the solver.

Wraps the functional core in the fit/predict idiom so the solver drops
into pipelines and grid searches: model parameters are constructor
arguments, fit consumes a profit function, predictions are value
evaluations.  No numerics live here.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .model import GbmParameters
from .profit import ProfitFunction
from .quadrature import QuadConfig
from .solver import solve, solve_entrance

__all__ = ["StoppingValueEstimator", "EntranceValueEstimator"]


class StoppingValueEstimator(BaseEstimator):
    """Optimal-stopping value function as a fittable estimator.

    fit() solves the free-boundary problem for the given profit
    function; predict() evaluates the value at price points, and
    predict_region() labels each point "stop" or "continue".
    """

    def __init__(self, r: float = 0.05, alpha: float = 0.0, sigma2: float = 0.04,
                 rel_tol: float = 1e-10):
        self.r = r
        self.alpha = alpha
        self.sigma2 = sigma2
        self.rel_tol = rel_tol

    def fit(self, X: ProfitFunction, y=None):
        if not isinstance(X, ProfitFunction):
            raise TypeError(f"fit expects a ProfitFunction, got {type(X).__name__}")
        params = GbmParameters(r=self.r, alpha=self.alpha, sigma2=self.sigma2)
        cfg = QuadConfig(rel_tol=self.rel_tol)
        self.solution_ = solve(X, params, cfg)
        self.problem_class_ = self.solution_.problem_class.value
        self.gamma_ = self.solution_.gamma
        self.zeta_ = self.solution_.zeta
        self.delta_ = self.solution_.delta
        self.beta_ = self.solution_.beta
        return self

    def _check_fitted(self):
        if not hasattr(self, "solution_"):
            raise NotFittedError("call fit with a profit function first")

    def predict(self, X) -> np.ndarray:
        """Value of waiting at each price point."""
        self._check_fitted()
        return np.array([self.solution_.value(float(x)) for x in np.atleast_1d(X)])

    def predict_region(self, X) -> np.ndarray:
        self._check_fitted()
        return np.array([
            "stop" if float(x) in self.solution_.stopping_region else "continue"
            for x in np.atleast_1d(X)
        ])


class EntranceValueEstimator(BaseEstimator):
    """Optimal-entrance value function as a fittable estimator."""

    def __init__(self, r: float = 0.05, alpha: float = 0.0, sigma2: float = 0.04,
                 rel_tol: float = 1e-10):
        self.r = r
        self.alpha = alpha
        self.sigma2 = sigma2
        self.rel_tol = rel_tol

    def fit(self, X: ProfitFunction, y=None):
        if not isinstance(X, ProfitFunction):
            raise TypeError(f"fit expects a ProfitFunction, got {type(X).__name__}")
        params = GbmParameters(r=self.r, alpha=self.alpha, sigma2=self.sigma2)
        cfg = QuadConfig(rel_tol=self.rel_tol)
        self.solution_ = solve_entrance(X, params, cfg)
        self.trivial_ = self.solution_.trivial
        return self

    def _check_fitted(self):
        if not hasattr(self, "solution_"):
            raise NotFittedError("call fit with a profit function first")

    def predict(self, X) -> np.ndarray:
        """Value of the yet-to-be-entered project at each price point."""
        self._check_fitted()
        return np.array([self.solution_.value(float(x)) for x in np.atleast_1d(X)])

    def predict_region(self, X) -> np.ndarray:
        self._check_fitted()
        return np.array([
            "enter" if float(x) in self.solution_.entrance_region else "wait"
            for x in np.atleast_1d(X)
        ])
