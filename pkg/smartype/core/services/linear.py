"""
One-vs-rest linear max-margin models trained by averaged subgradient descent.

Objective per output column k (targets s in {-1, +1}):

    alpha / 2 * ||w_k||^2 + 1/n * sum_i max(0, 1 - s_ik * (w_k . x_i + b_k)),  alpha = 1 / (C * n)

Mini-batch steps use eta_t = 1 / (alpha * (t0 + t)) with t0 chosen so that the
first step is alpha ** -0.25. Iterates are averaged; after every epoch the
objective of the averaged iterate is recorded, and the iterate with the lowest
recorded objective is the one returned.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from smartype.core.exceptions import ModelError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class HingeFit:
    weights: np.ndarray
    bias: np.ndarray
    loss_history: tuple[float, ...]
    objective: float
    best_epoch: int


def decision_values(X: sparse.spmatrix | np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    return np.asarray(X @ weights.T) + bias


def hinge_objective(X, targets: np.ndarray, weights: np.ndarray, bias: np.ndarray, alpha: float) -> float:
    margins = targets * decision_values(X, weights, bias)
    hinge = np.maximum(0.0, 1.0 - margins).sum(axis=1).mean()
    return float(0.5 * alpha * np.sum(weights * weights) + hinge)


def fit_hinge(
    X: sparse.spmatrix | np.ndarray,
    targets: np.ndarray,
    C: float = 1.0,
    epochs: int = 20,
    seed: int = 0,
    batch_size: int = 32,
    fit_intercept: bool = True,
) -> HingeFit:
    """Fit one linear scorer per column of `targets` (n × k, entries ±1)."""
    X = sparse.csr_matrix(X, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.ndim == 1:
        targets = targets[:, None]
    n, dim = X.shape
    if n == 0:
        raise ModelError("Cannot train on an empty sample")
    if targets.shape[0] != n:
        raise ModelError(f"{n} feature rows but {targets.shape[0]} target rows")
    if not np.all(np.abs(targets) == 1.0):
        raise ModelError("Targets must be -1 or +1")
    if C <= 0 or epochs < 1 or batch_size < 1:
        raise ModelError("C must be positive, epochs and batch size at least 1")

    n_outputs = targets.shape[1]
    alpha = 1.0 / (C * n)
    eta0 = alpha ** -0.25
    t0 = 1.0 / (eta0 * alpha)

    weights = np.zeros((n_outputs, dim))
    bias = np.zeros(n_outputs)
    avg_weights = np.zeros_like(weights)
    avg_bias = np.zeros_like(bias)
    best = (np.inf, avg_weights.copy(), avg_bias.copy(), 0)
    history = []

    rng = np.random.default_rng(seed)
    step = 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            rows = order[start:start + batch_size]
            batch, batch_targets = X[rows], targets[rows]
            margins = batch_targets * decision_values(batch, weights, bias)
            violations = np.where(margins < 1.0, batch_targets, 0.0)

            step += 1
            eta = 1.0 / (alpha * (t0 + step))
            weights *= 1.0 - eta * alpha
            weights += (eta / len(rows)) * np.asarray(batch.T @ violations).T
            if fit_intercept:
                bias += (eta / len(rows)) * violations.sum(axis=0)

            avg_weights += (weights - avg_weights) / step
            avg_bias += (bias - avg_bias) / step

        loss = hinge_objective(X, targets, avg_weights, avg_bias, alpha)
        history.append(loss)
        if loss <= best[0]:
            best = (loss, avg_weights.copy(), avg_bias.copy(), epoch + 1)
        logger.debug("epoch %d: objective %.6f (best %.6f)", epoch + 1, loss, best[0])

    objective, best_weights, best_bias, best_epoch = best
    return HingeFit(
        weights=best_weights,
        bias=best_bias,
        loss_history=tuple(history),
        objective=objective,
        best_epoch=best_epoch,
    )


def one_vs_rest_targets(memberships: list[set[int]] | list[int], n_outputs: int) -> np.ndarray:
    """±1 target matrix from per-row class indices (single int or a set of positives)."""
    targets = -np.ones((len(memberships), n_outputs))
    for row, members in enumerate(memberships):
        members = [members] if isinstance(members, (int, np.integer)) else members
        for column in members:
            targets[row, column] = 1.0
    return targets
