"""Latent class model containers and the seeded synthetic-data generator.

A population of N subjects is split into K latent classes. Class k answers
item j with expected score ``item_params[j, k]`` on the ordinal scale
``{0, ..., max_category}``, and observed responses are binomial draws around
that expectation. Everything here is a pure function of its inputs and a
64-bit seed, so simulated datasets are reproducible bit for bit.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

_MAX_MEMBERSHIP_ATTEMPTS = 1000


def child_seed(*parts) -> int:
    """Derive a 64-bit seed by hashing a tuple of ints/strings.

    SHA-256 based, so derived streams are stable across platforms and runs
    and never depend on execution order. Used to give every replication,
    candidate fit, and generator stage its own independent stream.
    """
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, str):
            h.update(part.encode("utf-8"))
        else:
            h.update(int(part).to_bytes(16, "big", signed=True))
        h.update(b"\x1f")
    return int.from_bytes(h.digest()[:8], "big")


def rng_from_seed(seed: int) -> np.random.Generator:
    """PCG64 generator for the given seed (the package-wide PRNG)."""
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class GenConfig:
    """Settings for the synthetic item-parameter draw.

    ``delta`` confines expected scores to ``[delta*M, (1-delta)*M]``; smaller
    values allow wider between-class spread and hence a stronger signal.
    """

    delta: float
    max_category: int = 5
    seed: int = 42

    def __post_init__(self):
        if not 0.0 < self.delta <= 0.5:
            raise ValueError(f"delta must lie in (0, 0.5], got {self.delta}")
        if self.max_category < 1:
            raise ValueError(f"max_category must be >= 1, got {self.max_category}")


@dataclass
class LcmParams:
    """Ground-truth model: memberships plus per-class expected item scores.

    ``memberships`` uses 1-based class labels in ``{1, ..., n_classes}`` and
    every class must be non-empty. ``item_params`` has shape
    (n_items, n_classes) with entries in ``[0, max_category]``.
    """

    n_subjects: int
    n_items: int
    n_classes: int
    max_category: int
    memberships: np.ndarray
    item_params: np.ndarray

    def __post_init__(self):
        if min(self.n_subjects, self.n_items, self.n_classes, self.max_category) < 1:
            raise ValueError("all model dimensions must be positive")
        self.memberships = np.asarray(self.memberships, dtype=np.int64)
        self.item_params = np.asarray(self.item_params, dtype=np.float64)
        if self.memberships.shape != (self.n_subjects,):
            raise ValueError("memberships must be a length n_subjects vector")
        if self.item_params.shape != (self.n_items, self.n_classes):
            raise ValueError("item_params must have shape (n_items, n_classes)")
        counts = np.bincount(self.memberships, minlength=self.n_classes + 1)
        if self.memberships.min() < 1 or self.memberships.max() > self.n_classes:
            raise ValueError("membership labels must lie in {1, ..., n_classes}")
        if (counts[1:] == 0).any():
            raise ValueError("every class must contain at least one subject")
        if self.item_params.min() < 0 or self.item_params.max() > self.max_category:
            raise ValueError("item_params entries must lie in [0, max_category]")

    def classification_matrix(self) -> np.ndarray:
        """One-hot (n_subjects, n_classes) membership indicator matrix."""
        z = np.zeros((self.n_subjects, self.n_classes))
        z[np.arange(self.n_subjects), self.memberships - 1] = 1.0
        return z


@dataclass
class ResponseMatrix:
    """Observed (n_subjects, n_items) integer responses in {0, ..., M}."""

    data: np.ndarray
    max_category: int

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2:
            raise ValueError("response data must be a 2-D matrix")
        if not np.issubdtype(self.data.dtype, np.integer):
            if not np.array_equal(self.data, np.floor(self.data)):
                raise ValueError("response entries must be integers")
        self.data = self.data.astype(np.int64)
        if self.max_category < 1:
            raise ValueError("max_category must be >= 1")
        if self.data.size and (self.data.min() < 0 or self.data.max() > self.max_category):
            raise ValueError("response entries must lie in {0, ..., max_category}")

    @property
    def n_subjects(self) -> int:
        return self.data.shape[0]

    @property
    def n_items(self) -> int:
        return self.data.shape[1]


def generate_memberships(n_subjects: int, n_classes: int, seed: int) -> np.ndarray:
    """Assign each subject to one of ``n_classes`` classes uniformly at random.

    Labels are drawn i.i.d. with equal probability. If any class comes out
    empty the whole vector is resampled (the count is logged); after 1000
    failed attempts the assignment is declared degenerate.
    """
    if n_classes < 1:
        raise ValueError("n_classes must be >= 1")
    if n_subjects < n_classes:
        raise ValueError(f"n_subjects < n_classes ({n_subjects} < {n_classes})")
    rng = rng_from_seed(seed)
    for attempt in range(_MAX_MEMBERSHIP_ATTEMPTS):
        labels = rng.integers(1, n_classes + 1, size=n_subjects)
        if np.bincount(labels, minlength=n_classes + 1)[1:].all():
            if attempt:
                logger.debug("memberships resampled %d time(s)", attempt)
            return labels
    raise RuntimeError("degenerate assignment: a class stayed empty after 1000 resamples")


def generate_theta(n_items: int, n_classes: int, cfg: GenConfig) -> np.ndarray:
    """Draw item parameters i.i.d. uniform on [delta*M, (1-delta)*M]."""
    if min(n_items, n_classes) < 1:
        raise ValueError("n_items and n_classes must be positive")
    m = cfg.max_category
    rng = rng_from_seed(cfg.seed)
    return rng.uniform(cfg.delta * m, (1.0 - cfg.delta) * m, size=(n_items, n_classes))


def expected_response(params: LcmParams) -> np.ndarray:
    """Entrywise mean of the observed matrix: row i carries its class's item scores."""
    return params.item_params.T[params.memberships - 1]


def response_variances(params: LcmParams) -> np.ndarray:
    """Binomial variance of each response cell, ``mean * (1 - mean / M)``."""
    mean = expected_response(params)
    return mean * (1.0 - mean / params.max_category)


def sample_responses(params: LcmParams, seed: int) -> ResponseMatrix:
    """Draw one response matrix from the model.

    Each cell is Binomial(M, mean/M), realised as M independent Bernoulli
    draws summed; M is small in every intended use, and the sum exactly
    matches the model.
    """
    probs = expected_response(params) / params.max_category
    rng = rng_from_seed(seed)
    data = np.zeros(probs.shape, dtype=np.int64)
    for _ in range(params.max_category):
        data += rng.random(probs.shape) < probs
    out = ResponseMatrix(data=data, max_category=params.max_category)
    # construction guarantees the range; the ResponseMatrix check enforces it
    return out


def generate_dataset(
    n_subjects: int, n_items: int, n_classes: int, cfg: GenConfig
) -> tuple[LcmParams, ResponseMatrix]:
    """Generate ground truth and one sampled response matrix from ``cfg.seed``.

    Memberships, item parameters, and responses each use an independent
    child stream, so changing one stage never perturbs the others.
    """
    memberships = generate_memberships(n_subjects, n_classes, child_seed(cfg.seed, "members"))
    theta_cfg = GenConfig(
        delta=cfg.delta, max_category=cfg.max_category, seed=child_seed(cfg.seed, "theta")
    )
    theta = generate_theta(n_items, n_classes, theta_cfg)
    params = LcmParams(
        n_subjects=n_subjects,
        n_items=n_items,
        n_classes=n_classes,
        max_category=cfg.max_category,
        memberships=memberships,
        item_params=theta,
    )
    responses = sample_responses(params, child_seed(cfg.seed, "responses"))
    return params, responses
