"""Command-line interface.

Subcommands:
  select     run the selection rule on an estimate vector
  calibrate  Monte-Carlo threshold calibration for a configured model
  diagnose   structural condition constants and/or oracle diagnostics
  reproduce  regenerate the benchmark tables and figures
  run        full experiment from a config file
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .bench import (
    ExperimentSpec,
    example1_model,
    example2_model,
    run_experiment,
    emit_report,
    threshold_rows,
)
from .calibrate import CalibrationConfig, calibrate
from .config import (
    calibration_from_config,
    experiment_from_config,
    load_config,
    model_spec_from_config,
)
from .diagnose import condition_report
from .errors import DomainError, InvariantError, PropcalError
from .family import (
    FunctionalModelSpec,
    KernelModelSpec,
    SequenceModelSpec,
    design_functional,
    design_kernel,
    design_sequence,
    truth_deltas,
)
from .oracle import (
    build_oracle_report,
    fit_threshold_constant,
    threshold_lower_bound,
    threshold_upper_bound,
)
from .report import read_csv_column, write_csv
from .select import EstimateVector, acceptance_trace, pair_stats, select_index


def _build_design(spec):
    if isinstance(spec, SequenceModelSpec):
        return design_sequence(spec)
    if isinstance(spec, KernelModelSpec):
        return design_kernel(spec)
    if isinstance(spec, FunctionalModelSpec):
        return design_functional(spec)
    raise DomainError(f"unsupported model spec {type(spec).__name__}")


def _load_design(config_path: str):
    cfg = load_config(config_path)
    spec = model_spec_from_config(cfg, base_dir=os.path.dirname(os.path.abspath(config_path)))
    design, truth = _build_design(spec)
    return cfg, design, truth


def _emit(path: str | None, columns, rows, header_comments=None) -> None:
    if path in (None, "-"):
        if header_comments:
            for key, value in header_comments.items():
                sys.stdout.write(f"# {key} = {value}\n")
        sys.stdout.write(",".join(columns) + "\n")
        from .report import format_cell

        for row in rows:
            sys.stdout.write(",".join(format_cell(x) for x in row) + "\n")
    else:
        write_csv(path, columns, rows, header_comments=header_comments)
        print(f"wrote {path}")


def _read_z(path: str) -> np.ndarray:
    for column in ("z_k", "z"):
        try:
            return read_csv_column(path, column)
        except KeyError:
            continue
    raise DomainError(f"critical-values file {path} needs a 'z' or 'z_k' column")


def cmd_select(args) -> int:
    _, design, _ = _load_design(args.config)
    values = read_csv_column(args.estimates, "value")
    zz = _read_z(args.critical_values)
    est = EstimateVector(values=values, v=design.v)
    stats = pair_stats(est)
    khat = select_index(stats, zz)
    trace = acceptance_trace(stats, zz)
    fail = trace if trace is not None else ("", "", "", "")
    _emit(
        args.out,
        ["k_hat", "theta_hat", "fail_l", "fail_m", "fail_t", "fail_z"],
        [(khat, float(est.values[khat - 1]), *fail)],
    )
    return 0


def cmd_calibrate(args) -> int:
    cfg, design, _ = _load_design(args.config)
    config = calibration_from_config(cfg)
    z = calibrate(design, config)
    _emit(
        args.out,
        ["k", "z_k", "achieved_risk_at_K", "target"],
        threshold_rows(z),
        header_comments=z.meta if isinstance(z.meta, dict) else {"meta": z.meta},
    )
    return 0


def cmd_diagnose(args) -> int:
    cfg, design, truth = _load_design(args.config)
    if not (args.conditions or args.oracle):
        raise DomainError("pass --conditions and/or --oracle")
    if args.conditions:
        rep = condition_report(design)
        _emit(
            args.out,
            ["u0", "u", "decay_ok", "gamma", "inv_corr_norm", "chain_bound", "decay_sum"],
            [
                (
                    rep.u0,
                    rep.u,
                    rep.decay_ok,
                    rep.gamma,
                    rep.inv_corr_norm,
                    rep.chain_bound,
                    rep.decay_sum,
                )
            ],
        )
    if args.oracle:
        calib = calibration_from_config(cfg)
        rep = condition_report(design)
        deltas = truth_deltas(design, truth)
        zz = _read_z(args.z) if args.z else None
        z_for_report = zz if zz is not None else np.zeros(design.K - 1)
        orep = build_oracle_report(
            design, truth, args.budget, z_for_report, calib.r, calib.alpha, strict=args.strict
        )
        c1 = (
            fit_threshold_constant(zz, design, calib.r, calib.alpha, rep.gamma)
            if args.c1 == "fit" and zz is not None
            else (float(args.c1) if args.c1 != "fit" else 1.0)
        )
        upper = threshold_upper_bound(design, calib.r, calib.alpha, rep.gamma, c1)
        lower = [
            threshold_lower_bound(design, calib.r, calib.alpha, k, args.c2)
            for k in range(1, design.K)
        ]
        rows = [
            (
                k + 1,
                deltas[k],
                zz[k] if zz is not None and k < design.K - 1 else "",
                upper[k],
                lower[k] if k < design.K - 1 else "",
            )
            for k in range(design.K)
        ]
        _emit(
            args.out,
            ["k", "delta_k", "z_k", "upper_bound", "lower_bound"],
            rows,
            header_comments={
                "k_star": orep.k_star,
                "budget": orep.budget,
                "strict": args.strict,
                "z_at_kstar": orep.z_at_kstar,
                "rhs_power_risk": orep.rhs_power_risk,
                "rhs_absolute_risk": orep.rhs_absolute_risk,
                "gamma": rep.gamma,
                "c1": c1,
                "c2": args.c2,
            },
        )
    return 0


def _reproduce_table(which: int, args) -> int:
    sigma, cutoffs = example1_model() if which == 1 else example2_model()
    spec = SequenceModelSpec(
        sigma=sigma,
        mu=np.zeros(sigma.shape[0]),
        delta=1.0,
        cutoffs=cutoffs,
        label=f"example{which}",
    )
    design, _ = design_sequence(spec)
    os.makedirs(args.out, exist_ok=True)
    for r, tag in ((0.5, "r05"), (1.0, "r10")):
        config = CalibrationConfig(r=r, alpha=1.0, n_replications=args.n_reps, seed=args.seed)
        z = calibrate(design, config)
        path = os.path.join(args.out, f"table{which}_{tag}.csv")
        write_csv(
            path,
            ["k", "z_k", "achieved_risk_at_K", "target"],
            threshold_rows(z),
            header_comments=z.meta,
        )
        print(f"wrote {path}")
    return 0


def _reproduce_figure(which: int, args) -> int:
    spec = ExperimentSpec(
        model_family=f"example{which}",
        num_models=args.num_models,
        num_runs=args.num_runs,
        deltas=tuple(args.deltas),
        calib=CalibrationConfig(n_replications=args.n_reps, seed=args.seed),
    )
    report = run_experiment(spec)
    for path in emit_report(report, args.out, svg=not args.no_svg):
        print(f"wrote {path}")
    return 0


def cmd_reproduce(args) -> int:
    target = args.target
    if target in ("table1", "table2"):
        return _reproduce_table(int(target[-1]), args)
    return _reproduce_figure(int(target[-1]), args)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    spec = experiment_from_config(cfg, base_dir=os.path.dirname(os.path.abspath(args.config)))
    report = run_experiment(spec)
    for path in emit_report(report, args.out, svg=not args.no_svg):
        print(f"wrote {path}")
    worst_ratio = max(m.risk_ratio for m in report.models)
    worst_fa = max(m.false_alarm for m in report.models)
    print(f"models: {len(report.models)}, worst risk ratio {worst_ratio:.2f}, "
          f"worst false-alarm rate {worst_fa:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="propcal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="run the selection rule on an estimate vector")
    p.add_argument("--config", required=True, help="TOML file with a [model] section")
    p.add_argument("--estimates", required=True, help="CSV with a 'value' column")
    p.add_argument("--critical-values", required=True, help="CSV with a 'z' or 'z_k' column")
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("calibrate", help="Monte-Carlo threshold calibration")
    p.add_argument("--config", required=True, help="TOML with [model] and [calibration]")
    p.add_argument("--out", default=None, help="output CSV (default stdout)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("diagnose", help="condition constants / oracle diagnostics")
    p.add_argument("--config", required=True)
    p.add_argument("--conditions", action="store_true")
    p.add_argument("--oracle", action="store_true")
    p.add_argument("--z", default=None, help="calibrated thresholds CSV (for --oracle)")
    p.add_argument("--budget", type=float, default=1.0, help="bias budget (default 1)")
    p.add_argument("--strict", action="store_true", help="ideal index via strict inequality")
    p.add_argument("--c1", default="fit",
                   help="upper-bound constant; 'fit' (default) fits from --z, 1.0 without it")
    p.add_argument("--c2", type=float, default=0.0, help="lower-bound constant (default 0)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("reproduce", help="regenerate benchmark tables/figures")
    p.add_argument("target", choices=["table1", "table2", "figure1", "figure2"])
    p.add_argument("--out", default="propcal-out")
    p.add_argument("--n-reps", type=int, default=50_000, help="calibration replications")
    p.add_argument("--num-runs", type=int, default=500)
    p.add_argument("--num-models", type=int, default=10)
    p.add_argument("--deltas", type=float, nargs="+", default=[1e-4, 1e-5, 1e-6])
    p.add_argument("--seed", type=int, default=20240101)
    p.add_argument("--no-svg", action="store_true")
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("run", help="full experiment from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="propcal-out")
    p.add_argument("--no-svg", action="store_true")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InvariantError as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return 2
    except PropcalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
