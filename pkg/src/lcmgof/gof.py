"""Residual-based fit statistics and sequential estimators of the class count.

The central quantity is the normalized residual matrix of a candidate fit:
observed minus fitted responses, scaled by the square root of N times the
fitted binomial variance. When the candidate class count matches the truth,
its largest singular value settles near the centering term
``1 + sqrt(J / N)``; when the candidate is too small, leftover structure
keeps it bounded away from that level. The selectors walk candidate counts
upward and stop on that contrast, either directly (``gof``), through the
ratio of successive statistics (``rgof``), or by thresholding the raw
singular spectrum (``spec``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import NumericError
from .estimator import FittedModel, fit_sc_lcm
from .linalg import singular_values_above, spectral_norm
from .model import LcmParams, ResponseMatrix, child_seed, expected_response, response_variances

_METHODS = ("gof", "rgof", "spec")


class StopReason(str, Enum):
    THRESHOLD_MET = "threshold_met"
    RATIO_MET = "ratio_met"
    EXHAUSTED_KMAX = "exhausted_kmax"


@dataclass(frozen=True)
class CandidateRecord:
    """Statistics recorded for one candidate class count."""

    k0: int
    sigma1: float
    t_stat: float
    ratio: float | None = None

    def to_dict(self) -> dict:
        return {"k0": self.k0, "sigma1": self.sigma1, "t_stat": self.t_stat, "ratio": self.ratio}


@dataclass
class GofTrace:
    """Full record of one sequential selection run."""

    candidates: list[CandidateRecord]
    k_hat: int
    stop_reason: StopReason

    def __post_init__(self):
        for idx, rec in enumerate(self.candidates):
            if rec.k0 != idx + 1:
                raise ValueError("candidate records must cover k0 = 1, 2, ... in order")
            if idx == 0:
                if rec.ratio is not None:
                    raise ValueError("the first candidate has no ratio")
                continue
            prev = self.candidates[idx - 1]
            expected = ratio_statistic(prev.t_stat, rec.t_stat)
            if math.isinf(expected):
                ok = rec.ratio is not None and math.isinf(rec.ratio)
            else:
                ok = rec.ratio is not None and abs(rec.ratio - expected) <= 1e-12
            if not ok:
                raise ValueError("stored ratio disagrees with its defining statistics")

    def to_dict(self) -> dict:
        return {
            "k_hat": self.k_hat,
            "stop_reason": self.stop_reason.value,
            "candidates": [rec.to_dict() for rec in self.candidates],
        }


@dataclass(frozen=True)
class SelectConfig:
    """Tuning knobs for the sequential selectors.

    ``k_max=None`` resolves to ``floor(sqrt(N / log(N + J)))`` clamped to
    ``[1, min(N, J) - 1]``. The acceptance threshold decays as
    ``N ** -tau_exponent`` and the ratio threshold grows as
    ``gamma_multiplier * log(N)``.
    """

    k_max: int | None = None
    tau_exponent: float = 0.2
    gamma_multiplier: float = 1.0
    seed: int = 42
    method: str = "gof"

    def __post_init__(self):
        if self.k_max is not None and self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.tau_exponent <= 0:
            raise ValueError("tau_exponent must be positive")
        if self.gamma_multiplier <= 0:
            raise ValueError("gamma_multiplier must be positive")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")

    def resolved_k_max(self, n_subjects: int, n_items: int) -> int:
        if self.k_max is not None:
            return min(self.k_max, min(n_subjects, n_items))
        return default_k_max(n_subjects, n_items)

    def tau(self, n_subjects: int) -> float:
        return float(n_subjects) ** (-self.tau_exponent)

    def gamma(self, n_subjects: int) -> float:
        return self.gamma_multiplier * math.log(n_subjects)


def default_k_max(n_subjects: int, n_items: int) -> int:
    """Largest candidate count: floor(sqrt(N / log(N + J))), kept SVD-safe."""
    raw = math.floor(math.sqrt(n_subjects / math.log(n_subjects + n_items)))
    return max(1, min(raw, min(n_subjects, n_items) - 1))


def residual_centering(n_subjects: int, n_items: int) -> float:
    """Expected edge of the residual spectrum under a correct fit."""
    return 1.0 + math.sqrt(n_items / n_subjects)


def statistic_bound(max_category: int, n_items: int) -> float:
    """Hard upper bound for the fit statistic; holds on every dataset."""
    return math.sqrt(max_category * n_items)


def ideal_residual(responses: ResponseMatrix, params: LcmParams) -> np.ndarray:
    """Residuals normalized with the true means and variances.

    Only defined when every cell has positive true variance; useful as a
    reference in simulations, never in selection (the truth is unknown there).
    """
    variances = response_variances(params)
    if (variances <= 0).any():
        raise ValueError("ideal residual undefined at boundary (zero-variance cell)")
    means = expected_response(params)
    return (responses.data - means) / np.sqrt(params.n_subjects * variances)


def practical_residual(responses: ResponseMatrix, fit: FittedModel) -> np.ndarray:
    """Residuals normalized with fitted means and variances.

    Cells whose fitted variance is zero (fitted mean on the scale boundary)
    are set to exactly zero.
    """
    if fit.r_hat.shape != responses.data.shape:
        raise ValueError("fit dimensions do not match the response matrix")
    if fit.max_category != responses.max_category:
        raise ValueError("fit and responses disagree on max_category")
    n = responses.n_subjects
    out = np.zeros(responses.data.shape)
    positive = fit.v_hat > 0
    out[positive] = (responses.data[positive] - fit.r_hat[positive]) / np.sqrt(
        n * fit.v_hat[positive]
    )
    return out


def _sigma_and_t(responses: ResponseMatrix, fit: FittedModel) -> tuple[float, float]:
    sigma1 = spectral_norm(practical_residual(responses, fit))
    t = sigma1 - residual_centering(responses.n_subjects, responses.n_items)
    bound = statistic_bound(responses.max_category, responses.n_items)
    if t > bound + 1e-9:
        raise NumericError(
            f"fit statistic {t} exceeded its deterministic bound {bound}"
        )
    return sigma1, t


def t_statistic(responses: ResponseMatrix, fit: FittedModel) -> float:
    """Largest singular value of the normalized residual, minus the centering."""
    return _sigma_and_t(responses, fit)[1]


def ratio_statistic(t_prev: float, t_curr: float) -> float:
    """|t_prev / t_curr|, with +inf when the current statistic is exactly zero."""
    if t_curr == 0.0:
        return math.inf
    return abs(t_prev / t_curr)


class StatisticCurve:
    """Lazily evaluated per-candidate statistics for one dataset.

    Each candidate count is fitted at most once, with its own seed derived
    from the configured master seed, so walking the curve for different
    stopping rules reuses identical fits.
    """

    def __init__(self, responses: ResponseMatrix, cfg: SelectConfig):
        if responses.n_subjects < 2 or responses.n_items < 2:
            raise ValueError("selection requires at least a 2 x 2 response matrix")
        self.responses = responses
        self.cfg = cfg
        self.k_max = cfg.resolved_k_max(responses.n_subjects, responses.n_items)
        self._records: dict[int, CandidateRecord] = {}

    def record(self, k0: int) -> CandidateRecord:
        if k0 not in self._records:
            fit = fit_sc_lcm(self.responses, k0, seed=child_seed(self.cfg.seed, k0))
            sigma1, t = _sigma_and_t(self.responses, fit)
            ratio = None
            if k0 >= 2:
                ratio = ratio_statistic(self.record(k0 - 1).t_stat, t)
            self._records[k0] = CandidateRecord(k0=k0, sigma1=sigma1, t_stat=t, ratio=ratio)
        return self._records[k0]

    def records_through(self, k0: int) -> list[CandidateRecord]:
        return [self.record(i) for i in range(1, k0 + 1)]


def _walk_gof(curve: StatisticCurve, tau: float, k_max: int) -> GofTrace:
    records = []
    for k0 in range(1, k_max + 1):
        rec = curve.record(k0)
        records.append(rec)
        if rec.t_stat < tau:
            return GofTrace(records, k_hat=k0, stop_reason=StopReason.THRESHOLD_MET)
    return GofTrace(records, k_hat=k_max, stop_reason=StopReason.EXHAUSTED_KMAX)


def _walk_rgof(curve: StatisticCurve, tau: float, gamma: float, k_max: int) -> GofTrace:
    first = curve.record(1)
    records = [first]
    if first.t_stat < tau:
        return GofTrace(records, k_hat=1, stop_reason=StopReason.THRESHOLD_MET)
    for k0 in range(2, k_max + 1):
        rec = curve.record(k0)
        records.append(rec)
        if rec.ratio > gamma:
            return GofTrace(records, k_hat=k0, stop_reason=StopReason.RATIO_MET)
    return GofTrace(records, k_hat=k_max, stop_reason=StopReason.EXHAUSTED_KMAX)


def select_gof(responses: ResponseMatrix, cfg: SelectConfig = SelectConfig()) -> GofTrace:
    """Walk candidate counts upward; accept the first whose statistic drops
    below the decaying threshold. Exhausting the range returns ``k_max``."""
    curve = StatisticCurve(responses, cfg)
    return _walk_gof(curve, cfg.tau(responses.n_subjects), curve.k_max)


def select_rgof(responses: ResponseMatrix, cfg: SelectConfig = SelectConfig()) -> GofTrace:
    """Ratio-based walk: accept one class if the first statistic is already
    small, otherwise stop at the first candidate whose successive-statistic
    ratio spikes above the growing threshold."""
    curve = StatisticCurve(responses, cfg)
    n = responses.n_subjects
    return _walk_rgof(curve, cfg.tau(n), cfg.gamma(n), curve.k_max)


def spec_threshold(n_subjects: int, n_items: int) -> float:
    """Singular value cutoff for the spectrum-counting baseline."""
    return 2.01 * (math.sqrt(n_items) + math.sqrt(n_subjects))


def select_spec(responses: ResponseMatrix) -> int:
    """Count singular values of the raw responses above the baseline cutoff.

    Returns the raw count, which can be zero for near-zero matrices.
    """
    return singular_values_above(
        responses.data.astype(np.float64),
        spec_threshold(responses.n_subjects, responses.n_items),
    )


def evaluate_curve(
    responses: ResponseMatrix, cfg: SelectConfig = SelectConfig(), through_k: int | None = None
) -> list[CandidateRecord]:
    """Statistics for every candidate count up to ``through_k`` (default:
    the resolved ``k_max``), ignoring all stopping rules."""
    curve = StatisticCurve(responses, cfg)
    limit = curve.k_max if through_k is None else min(through_k, min(responses.data.shape))
    return curve.records_through(limit)
