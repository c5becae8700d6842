"""Spectral clustering fit for a candidate class count, plus the error metric.

The fit (``sc_lcm``) clusters subjects with k-means on the rows of the
response matrix's top left singular vectors, then estimates per-class item
scores as within-cluster column means.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .linalg import kmeans, top_k_svd
from .model import ResponseMatrix

# exact permutation search up to this many classes, assignment heuristic beyond
EXACT_PERMUTATION_LIMIT = 8


@dataclass
class FittedModel:
    """Candidate fit: labels, per-class item scores, fitted means and variances.

    ``memberships_hat`` holds 1-based cluster labels. ``r_hat`` repeats each
    cluster's item scores across its subjects, and ``v_hat`` is the implied
    binomial variance ``r_hat * (1 - r_hat / max_category)``, zero exactly
    where the fitted mean sits on the scale boundary.
    """

    k_candidate: int
    memberships_hat: np.ndarray
    theta_hat: np.ndarray
    r_hat: np.ndarray
    v_hat: np.ndarray
    max_category: int


def fit_sc_lcm(responses: ResponseMatrix, k_candidate: int, seed: int = 0) -> FittedModel:
    """Fit a ``k_candidate``-class model by spectral clustering.

    Subjects are clustered by k-means on the rows of the top-``k_candidate``
    left singular vectors of the raw response matrix; item scores are the
    resulting class-wise column means. ``k_candidate == 1`` skips the SVD and
    uses plain column means. Deterministic given ``seed``.
    """
    n, j = responses.data.shape
    if not 1 <= k_candidate <= min(n, j):
        raise ValueError(
            f"k_candidate must lie in [1, min(N, J)] = [1, {min(n, j)}], got {k_candidate}"
        )
    data = responses.data.astype(np.float64)
    if k_candidate == 1:
        labels = np.ones(n, dtype=np.int64)
    else:
        factors = top_k_svd(data, k_candidate)
        labels = kmeans(factors.left_vectors, k_candidate, seed=seed).labels
    theta_hat = np.empty((j, k_candidate))
    for c in range(1, k_candidate + 1):
        theta_hat[:, c - 1] = data[labels == c].mean(axis=0)
    r_hat = theta_hat.T[labels - 1]
    v_hat = r_hat * (1.0 - r_hat / responses.max_category)
    return FittedModel(
        k_candidate=k_candidate,
        memberships_hat=labels,
        theta_hat=theta_hat,
        r_hat=r_hat,
        v_hat=v_hat,
        max_category=responses.max_category,
    )


def _pair_costs(labels_hat: np.ndarray, labels_true: np.ndarray, k: int) -> np.ndarray:
    """cost[k, l]: misassignment fraction of true class k matched to cluster l."""
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (labels_true - 1, labels_hat - 1), 1)
    true_sizes = confusion.sum(axis=1)
    hat_sizes = confusion.sum(axis=0)
    lost = true_sizes[:, None] - confusion
    gained = hat_sizes[None, :] - confusion
    return (lost + gained) / true_sizes[:, None]


def clustering_error(labels_hat, labels_true) -> float:
    """Worst-class misassignment fraction, minimized over label matchings.

    For each matching of estimated clusters to true classes, every true class
    is charged the subjects it lost plus the strangers its matched cluster
    gained, relative to its size; the score is the worst class's charge. The
    minimum over matchings is exact (all permutations) up to
    ``EXACT_PERMUTATION_LIMIT`` classes and uses a sum-minimizing assignment
    as a heuristic beyond that. Zero iff the two partitions coincide.
    """
    labels_hat = np.asarray(labels_hat, dtype=np.int64)
    labels_true = np.asarray(labels_true, dtype=np.int64)
    if labels_hat.shape != labels_true.shape or labels_hat.ndim != 1:
        raise ValueError("label vectors must be 1-D and of equal length")
    if labels_true.min() < 1 or labels_hat.min() < 1:
        raise ValueError("labels must be 1-based positive integers")
    k = int(labels_true.max())
    if labels_hat.max() > k:
        raise ValueError("estimated labels exceed the number of true classes")
    if np.bincount(labels_true, minlength=k + 1)[1:].min() == 0:
        raise ValueError("every true class must be non-empty")
    costs = _pair_costs(labels_hat, labels_true, k)
    if k <= EXACT_PERMUTATION_LIMIT:
        best = np.inf
        for perm in itertools.permutations(range(k)):
            worst = max(costs[c, perm[c]] for c in range(k))
            if worst < best:
                best = worst
        return float(best)
    rows, cols = linear_sum_assignment(costs)
    return float(costs[rows, cols].max())
