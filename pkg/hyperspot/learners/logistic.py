"""Regularized logistic regression fitted with full-batch first order methods.

The L2 model is minimized by gradient descent with a backtracking line search, the L1
model by proximal gradient steps with soft-thresholding. The intercept is never
penalized and the features are standardized with the training statistics.
"""
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy.special import expit

from hyperspot import logger
from hyperspot.helpers import NumericError
from hyperspot.learners.base import LearnerKind, LearnerModel, LearnerSpec

L1 = "l1"
L2 = "l2"

PENALTIES = {LearnerKind.LOGISTIC_L1: L1, LearnerKind.LOGISTIC_L2: L2}

# Backtracking shrinks the step by this factor until the sufficient decrease holds
SHRINK = 0.5
MIN_STEP = 1e-20


class LogisticModel(LearnerModel):
    """A linear score on standardized features passed through the sigmoid."""

    def __init__(
        self,
        spec: LearnerSpec,
        feature_names: Sequence[str],
        mean: np.ndarray,
        scale: np.ndarray,
        coef: np.ndarray,
        intercept: float,
        n_iter: int = 0,
    ) -> None:
        """Create a logistic model from fitted parameters."""
        super().__init__(spec, feature_names)
        self.mean = np.asarray(mean, dtype=float)
        self.scale = np.asarray(scale, dtype=float)
        self.coef = np.asarray(coef, dtype=float)
        self.intercept = float(intercept)
        self.n_iter = n_iter

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        """Get the linear score of every row."""
        return ((X - self.mean) / self.scale) @ self.coef + self.intercept

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return expit(self.decision_function(X))

    def arrays(self) -> Dict[str, np.ndarray]:
        """Get the standardization constants and the weights."""
        return {
            "mean": self.mean,
            "scale": self.scale,
            "coef": self.coef,
            "intercept": np.array([self.intercept]),
        }

    @classmethod
    def from_arrays(
        cls,
        spec: LearnerSpec,
        feature_names: Sequence[str],
        arrays: Dict[str, np.ndarray],
    ) -> "LogisticModel":
        """Restore a logistic model from its arrays."""
        return cls(
            spec,
            feature_names,
            arrays["mean"],
            arrays["scale"],
            arrays["coef"],
            float(arrays["intercept"][0]),
        )


def _smooth_part(
    params: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    strength: float,
    penalty: str,
) -> Tuple[float, np.ndarray]:
    """Get the differentiable part of the objective and its gradient.

    ``params`` holds the intercept first, then one weight per column of X.
    """
    intercept, coef = params[0], params[1:]
    z = X @ coef + intercept
    total = weights.sum()
    loss = float(np.sum(weights * (np.logaddexp(0, z) - y * z)) / total)
    residual = weights * (expit(z) - y) / total

    gradient = np.empty_like(params)
    gradient[0] = residual.sum()
    gradient[1:] = X.T @ residual
    if penalty == L2:
        loss += strength * 0.5 * float(coef @ coef)
        gradient[1:] += strength * coef
    return loss, gradient


def loss_and_gradient(
    params: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    strength: float,
    penalty: str,
) -> Tuple[float, np.ndarray]:
    """Get the weighted, regularized log-loss and its (sub)gradient.

    The loss is ``sum(w_i * logloss_i) / sum(w_i)`` plus ``strength / 2 * |coef|^2``
    for L2 or ``strength * |coef|_1`` for L1. For L1 the gradient uses the sign of the
    weights, which is exact away from zero.
    """
    loss, gradient = _smooth_part(params, X, y, weights, strength, penalty)
    if penalty == L1:
        coef = params[1:]
        loss += strength * float(np.abs(coef).sum())
        gradient[1:] += strength * np.sign(coef)
    return loss, gradient


def soft_threshold(values: np.ndarray, threshold: float) -> np.ndarray:
    """Shrink the values towards zero by the threshold."""
    return np.sign(values) * np.maximum(np.abs(values) - threshold, 0.0)


def _gradient_descent(
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    strength: float,
    tolerance: float,
    max_iter: int,
) -> Tuple[np.ndarray, int]:
    params = np.zeros(X.shape[1] + 1)
    step = 1.0
    loss, gradient = _smooth_part(params, X, y, weights, strength, L2)
    for iteration in range(max_iter):
        norm = float(np.linalg.norm(gradient))
        if norm <= tolerance:
            return params, iteration

        step = min(step * 2, 1e6)
        while True:
            candidate = params - step * gradient
            candidate_loss, candidate_gradient = _smooth_part(
                candidate, X, y, weights, strength, L2
            )
            if candidate_loss <= loss - 0.5 * step * norm ** 2:
                break
            step *= SHRINK
            if step < MIN_STEP:
                return params, iteration

        params, loss, gradient = candidate, candidate_loss, candidate_gradient
        if not np.isfinite(loss):
            raise NumericError("logistic regression diverged")
    return params, max_iter


def _proximal_gradient(
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    strength: float,
    tolerance: float,
    max_iter: int,
) -> Tuple[np.ndarray, int]:
    params = np.zeros(X.shape[1] + 1)
    step = 1.0
    loss, gradient = _smooth_part(params, X, y, weights, strength, L1)
    for iteration in range(max_iter):
        step = min(step * 2, 1e6)
        while True:
            candidate = params - step * gradient
            candidate[1:] = soft_threshold(candidate[1:], step * strength)
            difference = candidate - params
            candidate_loss, candidate_gradient = _smooth_part(
                candidate, X, y, weights, strength, L1
            )
            distance = (difference @ difference) / (2 * step)
            bound = loss + gradient @ difference + distance
            if candidate_loss <= bound:
                break
            step *= SHRINK
            if step < MIN_STEP:
                return params, iteration

        # Norm of the gradient mapping, zero exactly at a minimizer
        if np.linalg.norm(difference) / step <= tolerance:
            return candidate, iteration + 1
        params, loss, gradient = candidate, candidate_loss, candidate_gradient
        if not np.isfinite(loss):
            raise NumericError("logistic regression diverged")
    return params, max_iter


def fit_logistic(
    spec: LearnerSpec,
    X: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    feature_names: Sequence[str],
) -> LogisticModel:
    """Fit an L1 or L2 regularized logistic regression."""
    params = spec.params
    penalty = PENALTIES[spec.kind]
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    standardized = (X - mean) / scale

    optimizer = _proximal_gradient if penalty == L1 else _gradient_descent
    fitted, n_iter = optimizer(
        standardized,
        y.astype(float),
        weights,
        params["strength"],
        params["tolerance"],
        params["max_iter"],
    )
    if n_iter >= params["max_iter"]:
        logger.debug(f"Logistic regression stopped after {n_iter} iterations.")
    return LogisticModel(
        spec, feature_names, mean, scale, fitted[1:], fitted[0], n_iter=n_iter
    )
