"""Seeded Monte Carlo harness: simulation grids, selection accuracy, timing.

A run is defined by an ``ExperimentConfig``: a grid of data-generating cells,
a replication count, a master seed, and the selection methods to score.
Every replication derives its own seed from (master seed, cell index,
replication index), so results are independent of execution order and of how
many worker threads are used. Wall-clock timings are collected around the
method invocations only and are the single non-deterministic output.
"""

from __future__ import annotations

import concurrent.futures
import math
import os
import time
from dataclasses import dataclass, field, fields

import numpy as np
from threadpoolctl import threadpool_limits

from .gof import (
    CandidateRecord,
    SelectConfig,
    StatisticCurve,
    _walk_gof,
    _walk_rgof,
    evaluate_curve,
    select_gof,
    select_rgof,
    select_spec,
)
from .model import GenConfig, ResponseMatrix, child_seed, generate_dataset

KNOWN_METHODS = ("gof", "rgof", "spec")


def _from_strict_dict(cls, raw: dict, context: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(raw) - allowed
    if unknown:
        raise ValueError(f"unknown key(s) in {context}: {sorted(unknown)}")
    return cls(**raw)


@dataclass(frozen=True)
class CellConfig:
    """One data-generating condition of the grid."""

    n_subjects: int
    n_items: int
    n_classes: int
    delta: float
    max_category: int = 5

    def __post_init__(self):
        if min(self.n_subjects, self.n_items, self.n_classes, self.max_category) < 1:
            raise ValueError("cell dimensions must be positive")
        if not 0.0 < self.delta <= 0.5:
            raise ValueError(f"delta must lie in (0, 0.5], got {self.delta}")

    def to_dict(self) -> dict:
        return {
            "n_subjects": self.n_subjects,
            "n_items": self.n_items,
            "n_classes": self.n_classes,
            "delta": self.delta,
            "max_category": self.max_category,
        }


@dataclass(frozen=True)
class Overrides:
    """Optional selector tuning applied to every cell."""

    tau_exponent: float | None = None
    gamma_multiplier: float | None = None
    k_max: int | None = None

    def to_dict(self) -> dict:
        return {
            "tau_exponent": self.tau_exponent,
            "gamma_multiplier": self.gamma_multiplier,
            "k_max": self.k_max,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of a Monte Carlo run."""

    name: str
    grid: tuple[CellConfig, ...]
    reps: int
    master_seed: int = 42
    methods: tuple[str, ...] = ("gof", "rgof")
    overrides: Overrides = Overrides()
    eval_through_k: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.grid:
            raise ValueError("experiment grid must not be empty")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        bad = [m for m in self.methods if m not in KNOWN_METHODS]
        if bad:
            raise ValueError(f"unknown method(s): {bad}")
        if self.eval_through_k is not None and self.eval_through_k < 1:
            raise ValueError("eval_through_k must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        allowed = {f.name for f in fields(cls)}
        unknown = set(raw) - allowed
        if unknown:
            raise ValueError(f"unknown key(s) in experiment config: {sorted(unknown)}")
        data = dict(raw)
        data["grid"] = tuple(
            _from_strict_dict(CellConfig, cell, "grid cell") for cell in raw.get("grid", ())
        )
        if "overrides" in data and data["overrides"] is not None:
            data["overrides"] = _from_strict_dict(Overrides, raw["overrides"], "overrides")
        if "methods" in data:
            data["methods"] = tuple(data["methods"])
        return cls(**data)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "grid": [cell.to_dict() for cell in self.grid],
            "reps": self.reps,
            "master_seed": self.master_seed,
            "methods": list(self.methods),
            "overrides": self.overrides.to_dict(),
            "eval_through_k": self.eval_through_k,
        }

    def select_config(self, seed: int) -> SelectConfig:
        ov = self.overrides
        return SelectConfig(
            k_max=ov.k_max,
            tau_exponent=ov.tau_exponent if ov.tau_exponent is not None else 0.2,
            gamma_multiplier=ov.gamma_multiplier if ov.gamma_multiplier is not None else 1.0,
            seed=seed,
        )


@dataclass
class MethodCellSummary:
    """Scores for one method on one grid cell."""

    method: str
    accuracy: float
    std_error: float
    mean_runtime_ms: float
    stop_distribution: dict[int, int]
    stat_summaries: list[dict]

    def to_dict(self, with_timing: bool = False) -> dict:
        out = {
            "method": self.method,
            "accuracy": self.accuracy,
            "std_error": self.std_error,
            "stop_distribution": {str(k): v for k, v in sorted(self.stop_distribution.items())},
            "stat_summaries": self.stat_summaries,
        }
        if with_timing:
            out["mean_runtime_ms"] = self.mean_runtime_ms
        return out


@dataclass
class CellResult:
    """Everything recorded for one grid cell."""

    cell: CellConfig
    reps: int
    summaries: list[MethodCellSummary]
    curve_stats: list[dict]
    replications: list[dict]

    def to_dict(self) -> dict:
        return {
            "cell": self.cell.to_dict(),
            "reps": self.reps,
            "summaries": [s.to_dict() for s in self.summaries],
            "curve_stats": self.curve_stats,
            "replications": self.replications,
        }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    cells: list[CellResult]
    skipped: list[dict]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "cells": [c.to_dict() for c in self.cells],
            "skipped": self.skipped,
        }


def _cell_feasible(cell: CellConfig) -> str | None:
    if cell.n_subjects < cell.n_classes:
        return "n_subjects < n_classes"
    if cell.n_classes > min(cell.n_subjects, cell.n_items):
        return "n_classes exceeds min(n_subjects, n_items)"
    if min(cell.n_subjects, cell.n_items) < 2:
        return "selection requires at least a 2 x 2 response matrix"
    return None


def _run_replication(cfg: ExperimentConfig, cell_index: int, cell: CellConfig, rep: int) -> dict:
    seed = child_seed(cfg.master_seed, cell_index, rep)
    gen = GenConfig(delta=cell.delta, max_category=cell.max_category, seed=seed)
    _, responses = generate_dataset(cell.n_subjects, cell.n_items, cell.n_classes, gen)
    out: dict = {"rep": rep, "seed": seed, "methods": {}, "curve": None}
    if cfg.eval_through_k is not None:
        records = evaluate_curve(responses, cfg.select_config(seed), through_k=cfg.eval_through_k)
        out["curve"] = [rec.to_dict() for rec in records]
    for method in cfg.methods:
        start = time.perf_counter()
        if method == "gof":
            trace = select_gof(responses, cfg.select_config(seed))
            k_hat, reason, cands = trace.k_hat, trace.stop_reason.value, trace.candidates
        elif method == "rgof":
            trace = select_rgof(responses, cfg.select_config(seed))
            k_hat, reason, cands = trace.k_hat, trace.stop_reason.value, trace.candidates
        else:
            k_hat, reason, cands = select_spec(responses), None, []
        runtime_ms = (time.perf_counter() - start) * 1000.0
        out["methods"][method] = {
            "k_hat": k_hat,
            "stop_reason": reason,
            "candidates": [rec.to_dict() for rec in cands],
            "runtime_ms": runtime_ms,
        }
    return out


def _resolve_workers(threads: int) -> int:
    if threads < 0:
        raise ValueError("threads must be >= 0")
    return threads if threads > 0 else (os.cpu_count() or 1)


def _collect_stat_summaries(candidate_lists: list[list[dict]]) -> list[dict]:
    """Per-candidate mean/sd of the statistic and ratio across replications."""
    by_k0: dict[int, dict[str, list[float]]] = {}
    for cands in candidate_lists:
        for rec in cands:
            slot = by_k0.setdefault(rec["k0"], {"t": [], "r": []})
            slot["t"].append(rec["t_stat"])
            if rec["ratio"] is not None:
                slot["r"].append(rec["ratio"])
    rows = []
    for k0 in sorted(by_k0):
        t_vals = np.array(by_k0[k0]["t"])
        r_vals = np.array(by_k0[k0]["r"])
        row = {
            "k0": k0,
            "n": int(t_vals.size),
            "t_mean": float(t_vals.mean()),
            "t_sd": float(t_vals.std(ddof=1)) if t_vals.size > 1 else 0.0,
            "r_mean": float(r_vals.mean()) if r_vals.size else None,
            "r_sd": float(r_vals.std(ddof=1)) if r_vals.size > 1 else None,
        }
        rows.append(row)
    return rows


def accuracy_std_error(accuracy: float, reps: int) -> float:
    return math.sqrt(accuracy * (1.0 - accuracy) / reps)


def _aggregate_cell(cfg: ExperimentConfig, cell: CellConfig, rep_outputs: list[dict]) -> CellResult:
    summaries = []
    for method in cfg.methods:
        per_method = [out["methods"][method] for out in rep_outputs]
        hits = sum(1 for pm in per_method if pm["k_hat"] == cell.n_classes)
        accuracy = hits / cfg.reps
        stops: dict[int, int] = {}
        for pm in per_method:
            stops[pm["k_hat"]] = stops.get(pm["k_hat"], 0) + 1
        summaries.append(
            MethodCellSummary(
                method=method,
                accuracy=accuracy,
                std_error=accuracy_std_error(accuracy, cfg.reps),
                mean_runtime_ms=float(np.mean([pm["runtime_ms"] for pm in per_method])),
                stop_distribution=stops,
                stat_summaries=_collect_stat_summaries([pm["candidates"] for pm in per_method]),
            )
        )
    curve_stats = []
    if cfg.eval_through_k is not None:
        curve_stats = _collect_stat_summaries([out["curve"] for out in rep_outputs])
    replications = [
        {
            "rep": out["rep"],
            "seed": out["seed"],
            "curve": out["curve"],
            "methods": {
                m: {k: v for k, v in pm.items() if k != "runtime_ms"}
                for m, pm in out["methods"].items()
            },
        }
        for out in rep_outputs
    ]
    return CellResult(
        cell=cell,
        reps=cfg.reps,
        summaries=summaries,
        curve_stats=curve_stats,
        replications=replications,
    )


def run_experiment(cfg: ExperimentConfig, threads: int = 0) -> ExperimentResult:
    """Execute every (cell, replication) task and aggregate the scores.

    Infeasible cells are skipped with a recorded reason. BLAS pools are
    pinned to one thread for the duration of the run so that results are
    byte-identical no matter how many workers execute the tasks.
    """
    workers = _resolve_workers(threads)
    tasks: list[tuple[int, CellConfig, int]] = []
    skipped: list[dict] = []
    active_cells: list[tuple[int, CellConfig]] = []
    for cell_index, cell in enumerate(cfg.grid):
        problem = _cell_feasible(cell)
        if problem is not None:
            skipped.append({"cell": cell.to_dict(), "error": problem})
            continue
        active_cells.append((cell_index, cell))
        tasks.extend((cell_index, cell, rep) for rep in range(cfg.reps))

    outputs: dict[tuple[int, int], dict] = {}
    with threadpool_limits(limits=1, user_api="blas"):
        if workers == 1:
            for cell_index, cell, rep in tasks:
                outputs[(cell_index, rep)] = _run_replication(cfg, cell_index, cell, rep)
        else:
            with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
                futures = {
                    pool.submit(_run_replication, cfg, cell_index, cell, rep): (cell_index, rep)
                    for cell_index, cell, rep in tasks
                }
                for fut in concurrent.futures.as_completed(futures):
                    outputs[futures[fut]] = fut.result()

    cells = [
        _aggregate_cell(cfg, cell, [outputs[(cell_index, rep)] for rep in range(cfg.reps)])
        for cell_index, cell in active_cells
    ]
    return ExperimentResult(config=cfg, cells=cells, skipped=skipped)


def run_threshold_sensitivity(
    kind: str,
    values: list[float],
    base_cell: CellConfig,
    reps: int,
    master_seed: int = 42,
    threads: int = 0,
) -> list[dict]:
    """Accuracy of one selector across a sweep of its threshold parameter.

    ``kind='tau'`` sweeps the decay exponent of the acceptance threshold
    (scores the direct selector); ``kind='gamma'`` sweeps the multiplier of
    the ratio threshold (scores the ratio selector, whose one-class check
    keeps the default decay). Candidate fits are shared across the sweep
    within each replication, since the fitted statistics do not depend on
    the thresholds.
    """
    if kind not in ("tau", "gamma"):
        raise ValueError("kind must be 'tau' or 'gamma'")
    if not values:
        raise ValueError("values must be non-empty")
    if any(v <= 0 for v in values):
        raise ValueError("threshold parameters must be positive")
    if reps < 1:
        raise ValueError("reps must be >= 1")
    problem = _cell_feasible(base_cell)
    if problem is not None:
        raise ValueError(f"infeasible base cell: {problem}")

    n = base_cell.n_subjects

    def one_rep(rep: int) -> list[int]:
        seed = child_seed(master_seed, 0, rep)
        gen = GenConfig(delta=base_cell.delta, max_category=base_cell.max_category, seed=seed)
        _, responses = generate_dataset(
            base_cell.n_subjects, base_cell.n_items, base_cell.n_classes, gen
        )
        curve = StatisticCurve(responses, SelectConfig(seed=seed))
        k_hats = []
        for value in values:
            if kind == "tau":
                trace = _walk_gof(curve, float(n) ** (-value), curve.k_max)
            else:
                trace = _walk_rgof(curve, curve.cfg.tau(n), value * math.log(n), curve.k_max)
            k_hats.append(trace.k_hat)
        return k_hats

    workers = _resolve_workers(threads)
    per_rep: dict[int, list[int]] = {}
    with threadpool_limits(limits=1, user_api="blas"):
        if workers == 1:
            for rep in range(reps):
                per_rep[rep] = one_rep(rep)
        else:
            with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
                futures = {pool.submit(one_rep, rep): rep for rep in range(reps)}
                for fut in concurrent.futures.as_completed(futures):
                    per_rep[futures[fut]] = fut.result()

    rows = []
    for idx, value in enumerate(values):
        hits = sum(1 for rep in range(reps) if per_rep[rep][idx] == base_cell.n_classes)
        accuracy = hits / reps
        rows.append(
            {
                "kind": kind,
                "value": value,
                "reps": reps,
                "accuracy": accuracy,
                "std_error": accuracy_std_error(accuracy, reps),
            }
        )
    return rows


def _preset_stat_behavior(reps: int, master_seed: int) -> ExperimentConfig:
    grid = tuple(
        CellConfig(n_subjects=n, n_items=60, n_classes=4, delta=0.2) for n in (200, 400, 600, 800, 1000)
    )
    return ExperimentConfig(
        name="stat-behavior",
        grid=grid,
        reps=reps,
        master_seed=master_seed,
        methods=(),
        eval_through_k=4,
    )


def _preset_stopping_rates(reps: int, master_seed: int) -> ExperimentConfig:
    grid = tuple(
        CellConfig(n_subjects=1000, n_items=60, n_classes=k, delta=0.2) for k in (2, 3, 4, 5, 6)
    )
    return ExperimentConfig(
        name="stopping-rates", grid=grid, reps=reps, master_seed=master_seed, methods=("gof", "rgof")
    )


def _preset_accuracy_grid(reps: int, master_seed: int) -> ExperimentConfig:
    grid = tuple(
        CellConfig(n_subjects=n, n_items=j, n_classes=k, delta=d)
        for k in (1, 2, 3, 4)
        for n in (200, 600)
        for j in (60, 100)
        for d in (0.1, 0.2, 0.3)
    )
    return ExperimentConfig(
        name="accuracy-grid",
        grid=grid,
        reps=reps,
        master_seed=master_seed,
        methods=("gof", "rgof", "spec"),
    )


def _preset_weak_signal_scaling(reps: int, master_seed: int) -> ExperimentConfig:
    grid = tuple(
        CellConfig(n_subjects=n, n_items=60, n_classes=8, delta=0.3)
        for n in range(400, 4001, 400)
    )
    return ExperimentConfig(
        name="weak-signal-scaling",
        grid=grid,
        reps=reps,
        master_seed=master_seed,
        methods=("gof", "rgof", "spec"),
    )


def _preset_wide_matrix(reps: int, master_seed: int) -> ExperimentConfig:
    grid = tuple(
        CellConfig(n_subjects=600, n_items=j, n_classes=8, delta=0.3)
        for j in range(200, 2001, 200)
    )
    return ExperimentConfig(
        name="wide-matrix", grid=grid, reps=reps, master_seed=master_seed, methods=("gof", "rgof")
    )


PRESETS = {
    "stat-behavior": _preset_stat_behavior,
    "stopping-rates": _preset_stopping_rates,
    "accuracy-grid": _preset_accuracy_grid,
    "weak-signal-scaling": _preset_weak_signal_scaling,
    "wide-matrix": _preset_wide_matrix,
}


def preset_config(name: str, reps: int = 200, master_seed: int = 42) -> ExperimentConfig:
    """Instantiate a named study preset with the requested replication count."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return PRESETS[name](reps, master_seed)
