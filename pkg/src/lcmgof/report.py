"""Figure rendering for the CLI report paths.

Figures are written next to the delimited tables; the core library never
imports matplotlib, so programmatic users pay for plotting only when they
ask for it.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from . import matio
from .experiments import ExperimentResult
from .gof import CandidateRecord, GofTrace, SelectConfig, StatisticCurve, _walk_gof, _walk_rgof
from .model import ResponseMatrix

_AXIS_FIELDS = ("n_subjects", "n_items", "n_classes", "delta")
_AXIS_LABELS = {
    "n_subjects": "subjects (N)",
    "n_items": "items (J)",
    "n_classes": "true classes (K)",
    "delta": "signal width delta",
}


def _varying_axis(cells) -> tuple[str, list]:
    """Pick the single grid field that varies, falling back to cell index."""
    varying = [
        f for f in _AXIS_FIELDS if len({getattr(c.cell, f) for c in cells}) > 1
    ]
    if len(varying) == 1:
        f = varying[0]
        return _AXIS_LABELS[f], [getattr(c.cell, f) for c in cells]
    return "grid cell", list(range(len(cells)))


def render_curves(
    records: list[CandidateRecord], out_path, tau: float | None = None, gamma: float | None = None
) -> Path:
    """Two panels: per-candidate statistic and successive-statistic ratio."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    k0 = [rec.k0 for rec in records]
    t_vals = [rec.t_stat for rec in records]
    ratio_pts = [(rec.k0, rec.ratio) for rec in records if rec.ratio is not None]

    fig, (ax_t, ax_r) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    ax_t.plot(k0, t_vals, "o-", color="tab:blue")
    if tau is not None:
        ax_t.axhline(tau, color="tab:gray", linestyle="--", linewidth=1, label="stop threshold")
        ax_t.legend(fontsize=8)
    ax_t.set_xlabel("candidate class count")
    ax_t.set_ylabel("fit statistic")
    if ratio_pts:
        ax_r.plot([p[0] for p in ratio_pts], [p[1] for p in ratio_pts], "s-", color="tab:orange")
    if gamma is not None:
        ax_r.axhline(gamma, color="tab:gray", linestyle="--", linewidth=1, label="stop threshold")
        ax_r.legend(fontsize=8)
    ax_r.set_xlabel("candidate class count")
    ax_r.set_ylabel("statistic ratio")
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_experiment_figures(result: ExperimentResult, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = result.config.name
    paths = []
    cells = result.cells
    if not cells:
        return paths
    axis_label, xs = _varying_axis(cells)

    if result.config.methods:
        fig, ax = plt.subplots(figsize=(5.4, 3.8))
        for method in result.config.methods:
            ys = [
                next(s.accuracy for s in c.summaries if s.method == method) for c in cells
            ]
            ax.plot(xs, ys, "o-", label=method)
        ax.set_xlabel(axis_label)
        ax.set_ylabel("accuracy")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / f"{name}_accuracy.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)

        fig, ax = plt.subplots(figsize=(5.4, 3.8))
        for method in result.config.methods:
            ys = [
                next(s.mean_runtime_ms for s in c.summaries if s.method == method) for c in cells
            ]
            ax.plot(xs, ys, "o-", label=method)
        ax.set_xlabel(axis_label)
        ax.set_ylabel("mean runtime per replication (ms)")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / f"{name}_runtime.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)

    if any(c.curve_stats for c in cells):
        fig, ax = plt.subplots(figsize=(5.4, 3.8))
        k0_values = sorted({row["k0"] for c in cells for row in c.curve_stats})
        for k0 in k0_values:
            ys = [
                next((row["t_mean"] for row in c.curve_stats if row["k0"] == k0), None)
                for c in cells
            ]
            ax.plot(xs, ys, "o-", label=f"candidate {k0}")
        ax.set_xlabel(axis_label)
        ax.set_ylabel("mean fit statistic")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out_dir / f"{name}_statistics.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)
    return paths


def emit_statistic_curves(
    responses: ResponseMatrix,
    cfg: SelectConfig,
    out_dir,
    basename: str = "curves",
    render_figure: bool = True,
) -> list[Path]:
    """Evaluate every candidate count up to ``k_max`` and write the diagnostics.

    Ignores the stopping rules while evaluating, then applies the configured
    rule to the completed curve so the emitted trace still reports where the
    selector would have stopped. Writes a CSV of per-candidate statistics, a
    JSON of the full trace, and (optionally) a two-panel figure.
    """
    out_dir = Path(out_dir)
    curve = StatisticCurve(responses, cfg)
    curve.records_through(curve.k_max)
    n = responses.n_subjects
    tau, gamma = cfg.tau(n), cfg.gamma(n)
    if cfg.method == "rgof":
        walked = _walk_rgof(curve, tau, gamma, curve.k_max)
    else:
        walked = _walk_gof(curve, tau, curve.k_max)
    records = curve.records_through(curve.k_max)
    trace = GofTrace(candidates=records, k_hat=walked.k_hat, stop_reason=walked.stop_reason)

    paths = [matio.write_curve_csv(records, out_dir / f"{basename}.csv")]
    context = {
        "method": cfg.method if cfg.method in ("gof", "rgof") else "gof",
        "n_subjects": n,
        "n_items": responses.n_items,
        "max_category": responses.max_category,
        "k_max": curve.k_max,
        "tau": tau,
        "gamma": gamma,
        "seed": cfg.seed,
    }
    paths.append(matio.write_trace_json(trace, out_dir / f"{basename}_trace.json", context))
    if render_figure:
        paths.append(render_curves(records, out_dir / f"{basename}.png", tau=tau, gamma=gamma))
    return paths


def render_sensitivity(rows: list[dict], out_path) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    kind = rows[0]["kind"] if rows else "tau"
    xlabel = "threshold decay exponent" if kind == "tau" else "ratio threshold multiplier"
    fig, ax = plt.subplots(figsize=(5.4, 3.8))
    ax.plot([r["value"] for r in rows], [r["accuracy"] for r in rows], "o-", color="tab:green")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("accuracy")
    ax.set_ylim(-0.05, 1.05)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
