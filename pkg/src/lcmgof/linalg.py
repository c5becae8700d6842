"""Dense linear algebra: dominant singular values, Gram-matrix SVD, k-means.

All routines work on the smaller Gram matrix of the input, which keeps the
cost at ``min(N, J)^3`` for the tall or wide matrices this package sees.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

# singular values below RANK_FLOOR * sigma_1 are treated as exact zeros
RANK_FLOOR = 1e-12
# columns with sigma below REORTH_FLOOR * sigma_1 get re-orthonormalized
REORTH_FLOOR = 1e-6


@dataclass
class SvdResult:
    """Top-k factors: left_vectors (N, k), singular_values (k,), right_vectors (J, k)."""

    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    def __post_init__(self):
        s = self.singular_values
        if (s < 0).any() or (np.diff(s) > 0).any():
            raise NumericError("singular values must be non-negative and non-increasing")
        gram = self.left_vectors.T @ self.left_vectors
        if np.abs(gram - np.eye(gram.shape[0])).max() > 1e-8:
            raise NumericError("left singular vectors lost orthonormality")


@dataclass
class KmeansResult:
    """Clustering with 1-based labels, centroids (k, d), total inertia, iteration count."""

    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int


def _as_finite_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.isfinite(a).all():
        raise ValueError("matrix contains non-finite entries")
    return a


def _smaller_gram(a: np.ndarray) -> np.ndarray:
    n, m = a.shape
    return a.T @ a if m <= n else a @ a.T


def spectral_norm(a, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Largest singular value of ``a``.

    Power iteration on the smaller Gram matrix from a deterministic start
    vector; if the iteration has not met ``tol`` (relative eigen-residual)
    within ``max_iter`` steps, falls back to a full symmetric
    eigendecomposition of the Gram matrix.
    """
    a = _as_finite_matrix(a)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if a.size == 0:
        return 0.0
    gram = _smaller_gram(a)
    scale = np.linalg.norm(gram, "fro")
    if scale == 0.0:
        return 0.0
    dim = gram.shape[0]
    x = np.ones(dim) / np.sqrt(dim)
    perturbed = False
    prev_lam = -np.inf
    for _ in range(max_iter):
        y = gram @ x
        lam = float(x @ y)
        norm_y = np.linalg.norm(y)
        if norm_y == 0.0 or (not perturbed and abs(lam - prev_lam) <= 1e-15 * scale):
            # start vector (nearly) orthogonal to the top space: nudge it once
            x = x + _deterministic_perturbation(dim)
            x /= np.linalg.norm(x)
            perturbed = True
            prev_lam = -np.inf
            continue
        if np.linalg.norm(y - lam * x) <= tol * max(lam, tol * scale):
            return float(np.sqrt(max(lam, 0.0)))
        x = y / norm_y
        prev_lam = lam
    try:
        eigenvalues = np.linalg.eigvalsh(gram)
    except np.linalg.LinAlgError as exc:
        raise NumericError("spectral norm: eigendecomposition fallback failed") from exc
    return float(np.sqrt(max(eigenvalues[-1], 0.0)))


def _deterministic_perturbation(dim: int) -> np.ndarray:
    """Fixed-seed noise used to break symmetry deterministically."""
    return 1e-6 * np.random.default_rng(0x5EED).standard_normal(dim)


def singular_values(a) -> np.ndarray:
    """Full singular spectrum (descending) via the smaller Gram matrix."""
    a = _as_finite_matrix(a)
    if a.size == 0:
        return np.zeros(0)
    try:
        eigenvalues = np.linalg.eigvalsh(_smaller_gram(a))
    except np.linalg.LinAlgError as exc:
        raise NumericError("singular spectrum: eigendecomposition failed") from exc
    return np.sqrt(np.clip(eigenvalues[::-1], 0.0, None))


def singular_values_above(a, threshold: float) -> int:
    """Number of singular values strictly greater than ``threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return int((singular_values(a) > threshold).sum())


def _fix_tail_columns(columns: np.ndarray, sigma: np.ndarray, sigma1: float) -> None:
    """Repair trailing columns whose singular values are numerically tiny.

    ``A v / sigma`` loses accuracy once sigma falls toward the Gram noise
    level, and is undefined for exact zeros. Affected columns are
    re-orthonormalized against the leading ones if they still carry a usable
    direction, otherwise completed from the standard basis vector with the
    smallest projection onto the leading columns. Singular values are sorted,
    so every column left of ``i`` is already trustworthy.
    """
    n, k = columns.shape
    for i in range(k):
        if sigma1 > 0.0 and sigma[i] >= REORTH_FLOOR * sigma1:
            continue
        lead = columns[:, :i]
        v = columns[:, i].copy()
        for _ in range(2):
            v -= lead @ (lead.T @ v)
        norm = np.linalg.norm(v)
        if norm > 1e-3:
            columns[:, i] = v / norm
            continue
        row_mass = (lead**2).sum(axis=1)
        candidate = np.zeros(n)
        candidate[int(np.argmin(row_mass))] = 1.0
        for _ in range(2):
            candidate -= lead @ (lead.T @ candidate)
        norm = np.linalg.norm(candidate)
        if norm == 0.0:
            raise NumericError("orthonormal completion failed")
        columns[:, i] = candidate / norm


def top_k_svd(a, k: int) -> SvdResult:
    """Top-k singular triples of ``a``.

    Strategy: symmetric eigendecomposition of the smaller Gram matrix, then
    recover the other side's vectors as ``A v / sigma`` (or ``A^T u / sigma``).
    Singular values below ``RANK_FLOOR * sigma_1`` are reported as exact zeros
    and their vectors completed to an orthonormal set, so a zero matrix yields
    zero singular values with arbitrary (but orthonormal) vectors.
    """
    a = _as_finite_matrix(a)
    n, m = a.shape
    if not 1 <= k <= min(n, m):
        raise ValueError(f"k must lie in [1, min(N, J)] = [1, {min(n, m)}], got {k}")
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(_smaller_gram(a))
    except np.linalg.LinAlgError as exc:
        raise NumericError("top_k_svd: eigendecomposition failed") from exc
    order = np.arange(eigenvalues.size - 1, eigenvalues.size - 1 - k, -1)
    sigma = np.sqrt(np.clip(eigenvalues[order], 0.0, None))
    small = eigenvectors[:, order]
    floor = RANK_FLOOR * sigma[0]
    zeroed = sigma <= floor
    sigma = np.where(zeroed, 0.0, sigma)

    derived = np.zeros((a.shape[0] if m <= n else a.shape[1], k))
    for i in range(k):
        if not zeroed[i]:
            image = a @ small[:, i] if m <= n else a.T @ small[:, i]
            derived[:, i] = image / sigma[i]
    _fix_tail_columns(derived, sigma, float(sigma[0]))
    if m <= n:
        left, right = derived, small
    else:
        left, right = small, derived
    return SvdResult(left_vectors=left, singular_values=sigma, right_vectors=right)


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        (points**2).sum(axis=1)[:, None]
        - 2.0 * points @ centers.T
        + (centers**2).sum(axis=1)[None, :]
    )
    return np.clip(d2, 0.0, None)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # all remaining points coincide with a center; take the first unused
            used = set(chosen[:c].tolist())
            idx = next(i for i in range(n) if i not in used)
        chosen[c] = idx
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return points[chosen].copy()


def _lloyd(points: np.ndarray, k: int, rng: np.random.Generator, max_iter: int):
    n = points.shape[0]
    centers = _kmeans_pp_init(points, k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    prev_inertia = np.inf
    n_iter = 0
    for _ in range(max_iter):
        n_iter += 1
        d2 = _squared_distances(points, centers)
        new_labels = d2.argmin(axis=1)
        assigned = d2[np.arange(n), new_labels]
        counts = np.bincount(new_labels, minlength=k)
        for c in np.flatnonzero(counts == 0):
            # empty cluster: reseed with the point farthest from its centroid
            far = int(np.argmax(assigned))
            new_labels[far] = c
            assigned[far] = -1.0
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            centers[c] = points[labels == c].mean(axis=0)
        if __debug__:
            inertia_now = float(((points - centers[labels]) ** 2).sum())
            assert inertia_now <= prev_inertia * (1.0 + 1e-9) + 1e-12, (
                "k-means inertia increased across a Lloyd iteration"
            )
            prev_inertia = inertia_now
    inertia = float(((points - centers[labels]) ** 2).sum())
    return labels, centers, inertia, n_iter


def kmeans(
    points, k: int, n_restarts: int = 10, max_iter: int = 100, seed: int = 0
) -> KmeansResult:
    """Best-of-``n_restarts`` Lloyd clustering with k-means++ seeding.

    Deterministic given ``seed``. Ties on inertia keep the earliest restart.
    Empty clusters are reseeded with the point farthest from its centroid,
    so every returned cluster is non-empty.
    """
    points = _as_finite_matrix(points)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, n_points] = [1, {n}], got {k}")
    if n_restarts < 1 or max_iter < 1:
        raise ValueError("n_restarts and max_iter must be >= 1")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_restarts):
        labels, centers, inertia, n_iter = _lloyd(points, k, rng, max_iter)
        if best is None or inertia < best[2]:
            best = (labels, centers, inertia, n_iter)
    labels, centers, inertia, n_iter = best
    return KmeansResult(
        labels=labels + 1, centroids=centers, inertia=inertia, n_iter=n_iter
    )
