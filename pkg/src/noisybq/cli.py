"""``bq`` command line: run experiments, sweep split fractions, fit slopes, query the oracle.

Exit status: 0 on success, 1 on configuration errors, 2 when the reference
integral cannot be computed.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from noisybq import harness
from noisybq import oracle as _oracle
from noisybq.integrands import make_weight, parse_integrand

EXIT_OK, EXIT_CONFIG, EXIT_ORACLE = 0, 1, 2


def _outputs(cfg: harness.ExperimentConfig, override: str | None, default_stem: str) -> tuple[Path, Path]:
    stem = Path(override or cfg.output or default_stem)
    if stem.suffix in (".csv", ".json"):
        stem = stem.with_suffix("")
    stem.parent.mkdir(parents=True, exist_ok=True)
    return stem.with_suffix(".csv"), stem.with_suffix(".json")


def _print_rows(rows, out=None):
    out = out or sys.stdout
    print(f"{'strategy':<16} {'sigma':>10} {'t':>6} {'mean':>12} {'std':>12} {'n':>5}", file=out)
    for r in rows:
        print(f"{r.strategy:<16} {r.sigma:>10.4g} {r.t:>6d} {r.mean:>12.4e} {r.std:>12.4e} {r.n:>5d}", file=out)


def _print_fits(fits, out=None):
    out = out or sys.stdout
    for f in fits:
        if f.degenerate:
            print(f"fit {f.strategy} sigma={f.sigma:g}: degenerate (zero errors)", file=out)
        else:
            print(f"fit {f.strategy} sigma={f.sigma:g}: slope={f.slope:.3f} r2={f.r2:.3f} "
                  f"t=[{f.t_min},{f.t_max}] n={f.n_points}", file=out)


def cmd_run(args) -> int:
    cfg = harness.ExperimentConfig.from_yaml(args.config)
    if args.trials is not None:
        cfg = cfg.replace(n_trials=args.trials)
    records = harness.run_experiment(cfg, args.workers)
    rows = harness.aggregate(records)
    fits = harness.fit_all(rows, cfg.T_min_cut)
    csv_path, json_path = _outputs(cfg, args.output, "bq_results")
    truth = next((harness.Truth(r.truth, r.truth_err, "oracle") for r in records if r.ok), None)
    harness.emit(records, fits, "csv", csv_path)
    harness.emit(records, fits, "json", json_path, cfg, truth)
    failed = sum(not r.ok for r in records)
    _print_rows(rows)
    _print_fits(fits)
    if failed:
        print(f"{failed} trial(s) failed and were skipped", file=sys.stderr)
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = harness.ExperimentConfig.from_yaml(args.config)
    if args.trials is not None:
        cfg = cfg.replace(n_trials=args.trials)
    try:
        splits = [float(s) for s in args.splits.split(",") if s.strip()]
    except ValueError:
        raise harness.ConfigError(f"cannot parse --splits {args.splits!r}") from None
    table, records = harness.split_sweep(cfg, splits, args.workers)
    csv_path, json_path = _outputs(cfg, args.output, "bq_splits")
    harness.emit(records, [], "csv", csv_path)
    truth = next((harness.Truth(r.truth, r.truth_err, "oracle") for r in records if r.ok), None)
    harness.write_json(json_path, cfg, harness.aggregate(records), [], truth, {"split_sweep": table})
    print(f"{'split':>6} {'sigma':>10} {'mean':>12} {'std':>12} {'n':>5}")
    for row in table:
        print(f"{row['split']:>6.3g} {row['sigma']:>10.4g} {row['mean']:>12.4e} {row['std']:>12.4e} {row['n']:>5d}")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_fit(args) -> int:
    try:
        records = harness.read_csv(args.input)
    except (OSError, ValueError) as exc:
        raise harness.ConfigError(str(exc)) from None
    rows = harness.aggregate(records)
    fits = harness.fit_all(rows, args.t_min)
    _print_rows(rows)
    _print_fits(fits)
    if not fits:
        print(f"no cell has >= 4 checkpoints at t >= {args.t_min}", file=sys.stderr)
    return EXIT_OK


def cmd_oracle(args) -> int:
    try:
        f = parse_integrand(args.integrand)
        params = {}
        if args.weight_mean is not None:
            params["mean"] = args.weight_mean
        if args.weight_std is not None:
            params["std"] = args.weight_std
        weight = make_weight(args.weight, params, d=f.dim)
        cfg = _oracle.OracleConfig(method=args.method, abs_tol=args.abs_tol)
    except (ValueError, OSError) as exc:
        raise harness.ConfigError(str(exc)) from None
    res = _oracle.integrate(f, weight, cfg)
    print(f"value={res.value:.17g} err_estimate={res.err_estimate:.3e} method={res.method} "
          f"n_evals={res.n_evals} converged={res.converged}")
    if f.true_integral is not None and weight.is_uniform:
        print(f"known={f.true_integral:.17g}")
    return EXIT_OK if res.converged else EXIT_ORACLE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bq", description="Noisy Bayesian quadrature experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config and write CSV + JSON")
    run.add_argument("--config", required=True)
    run.add_argument("--output", help="output path stem (overrides the config)")
    run.add_argument("--workers", type=int)
    run.add_argument("--trials", type=int, help="override n_trials")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep-splits", help="final error versus MVS split fraction")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--splits", default="0,0.25,0.5,0.75,1")
    sweep.add_argument("--output")
    sweep.add_argument("--workers", type=int)
    sweep.add_argument("--trials", type=int)
    sweep.set_defaults(func=cmd_sweep)

    fit = sub.add_parser("fit", help="fit log-log slopes to a results CSV")
    fit.add_argument("--input", required=True)
    fit.add_argument("--t-min", type=int, default=16)
    fit.set_defaults(func=cmd_fit)

    orc = sub.add_parser("oracle", help="reference integral of an integrand spec")
    orc.add_argument("--integrand", required=True,
                     help="e.g. benchmark:alpine:1, synthetic:d=1,seed=0, constant:0.3, bump:d=1,M=8, sensor:path.csv")
    orc.add_argument("--weight", default="uniform", choices=["uniform", "truncated-gaussian"])
    orc.add_argument("--weight-mean", type=float)
    orc.add_argument("--weight-std", type=float)
    orc.add_argument("--method", choices=list(_oracle.METHODS))
    orc.add_argument("--abs-tol", type=float)
    orc.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except harness.OracleFailure as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
