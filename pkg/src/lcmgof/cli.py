"""Command line interface.

Exit codes: 0 on success, 2 for input or format problems, 3 for numeric
failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import matio
from .errors import DataFormatError, NumericError
from .estimator import fit_sc_lcm
from .experiments import (
    CellConfig,
    ExperimentConfig,
    PRESETS,
    preset_config,
    run_experiment,
    run_threshold_sensitivity,
)
from .gof import SelectConfig, select_gof, select_rgof, select_spec, spec_threshold
from .model import GenConfig, generate_dataset


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=42, help="master seed (default 42)")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")
    parser.add_argument("--threads", type=int, default=0, help="worker threads, 0 = auto")
    parser.add_argument("--m", type=int, default=None, help="maximum response category")


def _select_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k-max", type=int, default=None, help="largest candidate class count")
    parser.add_argument(
        "--tau-exponent", type=float, default=0.2, help="decay exponent of the stop threshold"
    )
    parser.add_argument(
        "--gamma-multiplier", type=float, default=1.0, help="multiplier of the ratio threshold"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcmgof",
        description="Estimate the number of latent classes in ordinal response data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic response matrix CSV")
    _common_flags(p)
    p.add_argument("--n", type=int, default=200, help="number of subjects")
    p.add_argument("--j", type=int, default=60, help="number of items")
    p.add_argument("--k", type=int, default=3, help="number of latent classes")
    p.add_argument("--delta", type=float, default=0.2, help="signal width in (0, 0.5]")
    p.add_argument("--truth", action="store_true", help="also write memberships and item scores")

    p = sub.add_parser("fit", help="fit a fixed candidate class count")
    _common_flags(p)
    p.add_argument("input", type=Path, help="response matrix CSV")
    p.add_argument("--k", type=int, required=True, help="candidate class count")

    p = sub.add_parser("select", help="estimate the class count")
    _common_flags(p)
    _select_flags(p)
    p.add_argument("input", type=Path, help="response matrix CSV")
    p.add_argument("--method", choices=("gof", "rgof", "spec"), default="gof")

    p = sub.add_parser("curves", help="per-candidate statistic curves and figure")
    _common_flags(p)
    _select_flags(p)
    p.add_argument("input", type=Path, help="response matrix CSV")
    p.add_argument("--method", choices=("gof", "rgof"), default="gof")
    p.add_argument("--no-figure", action="store_true", help="skip the rendered figure")

    p = sub.add_parser("experiment", help="run a named preset or JSON config")
    _common_flags(p)
    p.add_argument(
        "target", help=f"preset name ({', '.join(sorted(PRESETS))}) or a config JSON path"
    )
    p.add_argument("--reps", type=int, default=None, help="replications per cell")
    p.add_argument("--quick", action="store_true", help="reduce preset replications to 50")
    p.add_argument("--no-figures", action="store_true", help="skip rendered figures")

    p = sub.add_parser("sensitivity", help="accuracy across a threshold sweep")
    _common_flags(p)
    p.add_argument("--kind", choices=("tau", "gamma"), required=True)
    p.add_argument("--values", required=True, help="comma-separated parameter values")
    p.add_argument("--n", type=int, default=1000, help="subjects in the base condition")
    p.add_argument("--j", type=int, default=60, help="items in the base condition")
    p.add_argument("--k", type=int, default=5, help="true classes in the base condition")
    p.add_argument("--delta", type=float, default=0.2, help="signal width in the base condition")
    p.add_argument("--reps", type=int, default=200, help="replications")
    p.add_argument("--no-figure", action="store_true", help="skip the rendered figure")
    return parser


def _cmd_simulate(args) -> int:
    m = args.m if args.m is not None else 5
    cfg = GenConfig(delta=args.delta, max_category=m, seed=args.seed)
    params, responses = generate_dataset(args.n, args.j, args.k, cfg)
    paths = [matio.save_response_csv(responses, args.out / "response.csv")]
    if args.truth:
        paths.append(matio.save_labels_csv(params.memberships, args.out / "memberships.csv"))
        paths.append(matio.save_matrix_csv(params.item_params, args.out / "item_params.csv"))
    for path in paths:
        print(path)
    return 0


def _cmd_fit(args) -> int:
    responses = matio.load_response_csv(args.input, max_category=args.m)
    fit = fit_sc_lcm(responses, args.k, seed=args.seed)
    paths = [
        matio.save_labels_csv(fit.memberships_hat, args.out / "memberships_hat.csv"),
        matio.save_matrix_csv(fit.theta_hat, args.out / "theta_hat.csv"),
    ]
    for path in paths:
        print(path)
    return 0


def _cmd_select(args) -> int:
    responses = matio.load_response_csv(args.input, max_category=args.m)
    cfg = SelectConfig(
        k_max=args.k_max,
        tau_exponent=args.tau_exponent,
        gamma_multiplier=args.gamma_multiplier,
        seed=args.seed,
        method=args.method,
    )
    if args.method == "spec":
        k_hat = select_spec(responses)
        payload = {
            "method": "spec",
            "k_hat": k_hat,
            "threshold": spec_threshold(responses.n_subjects, responses.n_items),
        }
        matio.write_json(payload, args.out / "select_trace.json")
    else:
        selector = select_gof if args.method == "gof" else select_rgof
        trace = selector(responses, cfg)
        k_hat = trace.k_hat
        context = {
            "method": args.method,
            "tau": cfg.tau(responses.n_subjects),
            "gamma": cfg.gamma(responses.n_subjects),
            "seed": args.seed,
        }
        matio.write_trace_json(trace, args.out / "select_trace.json", context)
    print(k_hat)
    return 0


def _cmd_curves(args) -> int:
    from . import report

    responses = matio.load_response_csv(args.input, max_category=args.m)
    cfg = SelectConfig(
        k_max=args.k_max,
        tau_exponent=args.tau_exponent,
        gamma_multiplier=args.gamma_multiplier,
        seed=args.seed,
        method=args.method,
    )
    paths = report.emit_statistic_curves(
        responses, cfg, args.out, render_figure=not args.no_figure
    )
    for path in paths:
        print(path)
    return 0


def _load_experiment_config(args) -> ExperimentConfig:
    if args.target in PRESETS:
        reps = args.reps if args.reps is not None else (50 if args.quick else 200)
        return preset_config(args.target, reps=reps, master_seed=args.seed)
    path = Path(args.target)
    if not path.exists():
        raise DataFormatError(f"unknown preset or missing config file: {args.target}")
    with path.open("r", encoding="utf-8") as handle:
        raw = json.load(handle)
    cfg = ExperimentConfig.from_dict(raw)
    if args.reps is not None or args.quick:
        reps = args.reps if args.reps is not None else 50
        cfg = ExperimentConfig.from_dict({**raw, "reps": reps})
    return cfg


def _cmd_experiment(args) -> int:
    cfg = _load_experiment_config(args)
    result = run_experiment(cfg, threads=args.threads)
    paths = matio.write_experiment_outputs(result, args.out, render_figures=not args.no_figures)
    for path in paths:
        print(path)
    for entry in result.skipped:
        print(f"skipped cell {entry['cell']}: {entry['error']}", file=sys.stderr)
    return 0


def _cmd_sensitivity(args) -> int:
    try:
        values = [float(token) for token in args.values.split(",") if token.strip()]
    except ValueError:
        raise DataFormatError(f"could not parse --values {args.values!r}") from None
    m = args.m if args.m is not None else 5
    cell = CellConfig(
        n_subjects=args.n, n_items=args.j, n_classes=args.k, delta=args.delta, max_category=m
    )
    rows = run_threshold_sensitivity(
        args.kind, values, cell, reps=args.reps, master_seed=args.seed, threads=args.threads
    )
    paths = [matio.write_sensitivity_csv(rows, args.out / f"sensitivity_{args.kind}.csv")]
    if not args.no_figure:
        from . import report

        paths.append(report.render_sensitivity(rows, args.out / f"sensitivity_{args.kind}.png"))
    for path in paths:
        print(path)
    for row in rows:
        print(f"{row['kind']}={row['value']}: accuracy {row['accuracy']:.3f}")
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "select": _cmd_select,
    "curves": _cmd_curves,
    "experiment": _cmd_experiment,
    "sensitivity": _cmd_sensitivity,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (DataFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
