"""Command-line entry point: ``deepdr estimate`` and ``deepdr simulate``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict

import numpy as np

from . import harness, nnet, simgen
from .data import EstimateReport, align_covariates, load_nonprob_csv, load_prob_csv, minmax_rescale
from .errors import ConfigError, DataError, NumericalError
from .estimators import estimate_all, ols_fit
from .scores import DEFAULT_EPS, fit_dnn_scores, fit_logistic_pl

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ints(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("widths must be positive integers")
    return vals


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    d = nnet.TrainConfig()
    g = p.add_argument_group("network training")
    g.add_argument("--arch", type=_ints, default=(64, 64), metavar="W1,W2,...",
                   help="hidden layer widths (default 64,64)")
    g.add_argument("--lr", type=float, default=d.learning_rate, help="ADAM learning rate")
    g.add_argument("--max-epochs", type=int, default=d.max_epochs)
    g.add_argument("--patience", type=int, default=d.patience)
    g.add_argument("--val-fraction", type=float, default=d.val_fraction)
    g.add_argument("--stop-threshold", type=float, default=d.stop_threshold)
    g.add_argument("--clip", type=float, default=None, help="clamp network output to [-D, D]")
    g.add_argument("--eps", type=float, default=DEFAULT_EPS, help="score truncation level")


def _train_config(args, seed: int) -> nnet.TrainConfig:
    try:
        return nnet.TrainConfig(max_epochs=args.max_epochs, patience=args.patience,
                                val_fraction=args.val_fraction, stop_threshold=args.stop_threshold,
                                seed=seed, clip_D=args.clip, learning_rate=args.lr)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="deepdr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    est = sub.add_parser("estimate", help="estimate a population mean from two CSV samples")
    est.add_argument("--nonprob", required=True, help="CSV with covariates and the outcome")
    est.add_argument("--prob", required=True, help="CSV with covariates and design weights")
    est.add_argument("--outcome", required=True, help="outcome column in --nonprob")
    est.add_argument("--weight", required=True, help="design weight column in --prob")
    est.add_argument("--features", type=_names, default=None, metavar="X1,X2,...",
                     help="covariates to use (default: all common columns)")
    est.add_argument("--rescale", action="store_true", help="min-max rescale covariates to [0, 1]")
    est.add_argument("--seed", type=int, default=0)
    est.add_argument("--json", action="store_true", help="print the report as JSON")
    _add_training_flags(est)

    sim = sub.add_parser("simulate", help="run the Monte Carlo simulation study")
    sim.add_argument("--rho", type=_floats, default=[0.3, 0.5, 0.8], metavar="R1,R2,...")
    sim.add_argument("--scenario", type=_names, default=["TF", "FF"], metavar="TF,FF")
    sim.add_argument("--B", type=int, default=500, help="replications")
    sim.add_argument("--N", type=int, default=20000, help="population size")
    sim.add_argument("--nA", type=int, default=500, help="expected nonprobability sample size")
    sim.add_argument("--nB", type=int, default=1000, help="probability sample size")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--fixed-population", action="store_true",
                     help="reuse one population across replications")
    sim.add_argument("--jobs", type=int, default=1, help="worker processes")
    sim.add_argument("--out", required=True, help="report path")
    sim.add_argument("--format", choices=sorted(harness.FORMATS), default="text")
    sim.add_argument("--archive", default=None, help="also write per-replication estimates (CSV)")
    _add_training_flags(sim)
    return parser


def cli_estimate(args) -> EstimateReport:
    a = load_nonprob_csv(args.nonprob, args.outcome, args.features)
    b = load_prob_csv(args.prob, args.weight, args.features)
    a, b = align_covariates(a, b)
    if args.rescale:
        a, b = minmax_rescale(a, b)
    arch = nnet.Architecture.from_hidden(a.x.r, args.arch)
    pl = fit_logistic_pl(a, b).scores(a, args.eps)
    dnn = fit_dnn_scores(a, b, arch, _train_config(args, args.seed), args.eps)
    m = ols_fit(a)
    diagnostics = {
        "n_A": float(a.n), "n_B": float(b.n), "r": float(a.x.r),
        "N_hat_B": float(np.sum(b.d)),
        "N_hat_A_pl": float(np.sum(1 / pl.pi_hat)),
        "N_hat_A_dnn": float(np.sum(1 / dnn.pi_hat)),
        "pl_weight_ratio": float(pl.pi_hat.max() / pl.pi_hat.min()),
        "dnn_weight_ratio": float(dnn.pi_hat.max() / dnn.pi_hat.min()),
        **{f"pl_{k}": v for k, v in pl.diagnostics.items()},
        **{f"dnn_{k}": v for k, v in dnn.diagnostics.items()},
    }
    return EstimateReport(estimate_all(a, b, m, pl, dnn), diagnostics)


def cli_simulate(args) -> harness.MetricsTable:
    cfg = simgen.SimConfig(N=args.N, n_A=args.nA, n_B=args.nB, rho=args.rho[0],
                           scenario=args.scenario[0], B=args.B, seed=args.seed,
                           fixed_population=args.fixed_population)
    settings = harness.DNNSettings(tuple(args.arch), _train_config(args, 0), args.eps)
    table = harness.run_simulation(cfg, settings, rhos=args.rho, scenarios=args.scenario, n_jobs=args.jobs)
    harness.emit_report(table, args.format, args.out, args.archive)
    return table


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "estimate":
            report = cli_estimate(args)
            if args.json:
                print(json.dumps(asdict(report), indent=2))
            else:
                print(report.format())
        else:
            table = cli_simulate(args)
            if args.verbose:
                print(harness.format_text(table), end="")
    except ConfigError as exc:
        print(f"deepdr: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"deepdr: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"deepdr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
