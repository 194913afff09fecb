"""
Command-line front end
gen | estimate | mom | optimize | tparam | dualprob | omega | bench
"""

import argparse
import csv
import json
import logging
import signal
import sys
from io import StringIO
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .bench import exp_weights, format_records_csv, make_integrand, run_sweep
from .config import ConfigurationError, Settings, load_sweep_config
from .estimators import mse_experiment, qmc_mean
from .logging_setup import setup_logging
from .models import (DualProbRecord, EstimatorConfig, ExperimentRecord, OptimizeRecord,
                     SweepConfig, TParamRecord, to_json)
from .netgen import DesignKind, RngSeed, draw_design, sobol_design, sobol_table_checksum
from .pointgen import PointSet, gen_points_gray
from .walshlab import (dual_prob_exact, lms_dual_prob_exact, mc_dual_prob, t_u_parameter)
from .wce import greedy_select, omega2, omega3, omega_series

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_INTERRUPTED = 130


def _int_list(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _design(text: str) -> DesignKind:
    try:
        return DesignKind.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _common() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--seed", type=int, default=None,
                        help="master seed (default: HANKELNET_SEED or 0; bench: the sweep file)")
    parent.add_argument("--out", help="write the result here instead of stdout")
    return parent


def _design_args(parser: argparse.ArgumentParser, shift_default: bool, dim: bool = True) -> None:
    parser.add_argument("--design", type=_design, default=DesignKind.HRD,
                        help="hrd, urd or lms-sobol (default: hrd)")
    parser.add_argument("--base", type=int, default=2)
    parser.add_argument("--m", type=int, required=True, help="log_b of the number of points")
    if dim:
        parser.add_argument("--dim", type=int, default=1, help="dimension s")
    parser.add_argument("--precision", type=int, dest="E", default=None,
                        help="digits per coordinate (default: largest E with b^E <= 2^53)")
    parser.add_argument("--shift", action=argparse.BooleanOptionalAction, default=shift_default,
                        help="apply a random digital shift")


def _integrand_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--integrand", default="product_power",
                        choices=["product_power", "lognormal", "t_exp"])
    parser.add_argument("--c", type=float, default=1.5, help="product-power exponent")
    parser.add_argument("--weights", choices=["exp", "equal"], default="exp")


def build_parser(settings: Optional[Settings] = None) -> argparse.ArgumentParser:
    settings = settings or Settings()
    common = _common()
    parser = argparse.ArgumentParser(
        prog="hankelnet",
        description="Randomized digital nets: generation, estimation and analysis",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__} (sobol table sha256 {sobol_table_checksum()})")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    gen = sub.add_parser("gen", parents=[common], help="dump the points of one design")
    _design_args(gen, shift_default=False)
    gen.add_argument("--format", choices=["csv", "json"], default="csv")

    estimate = sub.add_parser("estimate", parents=[common], help="QMC mean over one design")
    _design_args(estimate, shift_default=True)
    _integrand_args(estimate)

    mom = sub.add_parser("mom", parents=[common], help="median-of-means MSE experiment")
    _design_args(mom, shift_default=True)
    _integrand_args(mom)
    mom.add_argument("--r", type=int, default=15, help="replicates per median (odd)")
    mom.add_argument("--r-mode", choices=["fixed", "m_log_m"], default="fixed")
    mom.add_argument("--r-log-base", choices=["e", "2", "10"], default="e")
    mom.add_argument("--estimator", choices=["median", "mean"], default="median",
                     help="aggregate of the r replicate means")
    mom.add_argument("--optimize", action="store_true",
                     help="best of --select-r draws by WCE bound per batch, shifted per replicate")
    mom.add_argument("--select-r", type=int, default=15)
    mom.add_argument("--alpha", type=int, default=1, choices=[1, 2], help="smoothness of the WCE bound")
    mom.add_argument("--batches", type=int, default=1)
    mom.add_argument("--workers", type=int, default=settings.workers)

    optimize = sub.add_parser("optimize", parents=[common], help="best-of-r WCE selection")
    _design_args(optimize, shift_default=False)
    optimize.add_argument("--alpha", type=int, default=1, choices=[1, 2])
    optimize.add_argument("--r", type=int, default=15, help="designs drawn per batch")
    optimize.add_argument("--c", type=float, default=2.0, help="weight decay gamma_j = exp(-ceil(c) j)")
    optimize.add_argument("--weights", choices=["exp", "equal"], default="exp")
    optimize.add_argument("--k-max", type=int, default=None, help="series truncation for b != 2")
    optimize.add_argument("--points-out", help="also dump the winning points as CSV")
    optimize.add_argument("--workers", type=int, default=settings.workers)

    tparam = sub.add_parser("tparam", parents=[common], help="t-parameter of a drawn design")
    _design_args(tparam, shift_default=False)
    tparam.add_argument("--u", type=_int_list, default=None, help="1-based coordinate subset")
    tparam.add_argument("--unscrambled", action="store_true",
                        help="use the plain Sobol' matrices for lms-sobol")

    dualprob = sub.add_parser("dualprob", parents=[common], help="Pr(k in dual net) probes")
    _design_args(dualprob, shift_default=False, dim=False)
    dualprob.add_argument("--k", type=_int_list, required=True, help="index vector, e.g. 1,1")
    dualprob.add_argument("--trials", type=int, default=10_000)

    omega = sub.add_parser("omega", parents=[common], help="evaluate omega_{alpha+1}(x)")
    omega.add_argument("--alpha", type=int, default=1)
    omega.add_argument("--x", type=float, required=True)
    omega.add_argument("--base", type=int, default=2)
    omega.add_argument("--k-max", type=int, default=None, help="use the truncated series")

    bench = sub.add_parser("bench", parents=[common], help="run a convergence sweep")
    bench.add_argument("--config", default=settings.sweep_config, help="key = value sweep file")
    bench.add_argument("--workers", type=int, default=None)
    return parser


def _emit(text: str, out: Optional[str]) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if out:
        Path(out).write_text(text)
        logger.info(f"Wrote {out}")
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


def _points_csv(points: PointSet) -> str:
    ordered = points.in_index_order()
    indices = ordered.indices if ordered.indices is not None else range(ordered.n_points)
    buffer = StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["n"] + [f"x{j + 1}" for j in range(points.s)])
    for n, row in zip(indices, ordered.coords):
        writer.writerow([int(n)] + ["%.17g" % v for v in row])
    return buffer.getvalue()


def _draw(args, rng: RngSeed, s: int):
    return draw_design(args.design, rng, args.base, args.E, args.m, s, with_shift=args.shift)


def cmd_gen(args) -> int:
    design = _draw(args, RngSeed(args.seed), args.dim)
    points = gen_points_gray(design)
    if args.format == "json":
        ordered = points.in_index_order()
        payload = {"design_kind": args.design.value, "b": args.base, "m": args.m, "s": args.dim,
                   "seed": args.seed, "points": ordered.coords.tolist()}
        _emit(json.dumps(payload, sort_keys=True), args.out)
    else:
        _emit(_points_csv(points), args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    integrand = make_integrand(args.integrand, args.dim, args.c, args.weights, args.base, args.E)
    design = _draw(args, RngSeed(args.seed), args.dim)
    estimate = qmc_mean(integrand, gen_points_gray(design))
    exact = integrand.exact_integral
    payload = {"design_kind": args.design.value, "b": args.base, "m": args.m, "s": args.dim,
               "integrand": args.integrand, "estimate": estimate, "exact": exact,
               "sq_error": (estimate - exact) ** 2, "seed": args.seed}
    _emit(json.dumps(payload, sort_keys=True), args.out)
    return EXIT_OK


def cmd_mom(args) -> int:
    integrand = make_integrand(args.integrand, args.dim, args.c, args.weights, args.base, args.E)
    config = EstimatorConfig(design_kind=args.design, b=args.base, m=args.m, s=args.dim,
                             r=args.r, r_mode=args.r_mode, seed=args.seed, shift=args.shift,
                             log_base=args.r_log_base, E=args.E, aggregate=args.estimator,
                             optimized=args.optimize, select_r=args.select_r, alpha=args.alpha)
    summary = mse_experiment(integrand, integrand.exact_integral, config, args.batches,
                             args.workers, gamma=exp_weights(args.dim, args.c, args.weights))
    records = [
        ExperimentRecord(design=config.label, b=args.base, m=args.m, s=args.dim,
                         integrand=args.integrand, c=args.c, weight_mode=args.weights,
                         r=summary.r, batch=batch.batch, estimate=batch.estimate,
                         sq_error=batch.sq_error, seed=args.seed)
        for batch in summary.batches
    ]
    _emit(format_records_csv(records), args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    gamma = exp_weights(args.dim, args.c, args.weights)
    result = greedy_select(RngSeed(args.seed), args.r, args.base, args.m, args.dim, gamma,
                           args.alpha, args.design, E=args.E, workers=args.workers,
                           k_max=args.k_max)
    record = OptimizeRecord(design_kind=args.design.value, b=args.base, m=args.m, s=args.dim,
                            alpha=args.alpha, r=args.r, seed=args.seed,
                            wce_values=list(result.wce_values), best_index=result.best_index,
                            best_wce=result.wce)
    _emit(to_json(record), args.out)
    if args.points_out:
        _emit(_points_csv(gen_points_gray(result.design)), args.points_out)
    return EXIT_OK


def cmd_tparam(args) -> int:
    if args.unscrambled:
        if args.design is not DesignKind.LMS_SOBOL:
            raise ValueError("--unscrambled only applies to --design lms-sobol")
        design = sobol_design(args.m, args.dim, args.E)
    else:
        design = _draw(args, RngSeed(args.seed), args.dim)
    u = args.u or list(range(1, args.dim + 1))
    record = TParamRecord(design_kind=args.design.value, b=args.base, m=args.m, s=args.dim,
                          u=sorted(set(u)), t=t_u_parameter(design, u), seed=args.seed)
    _emit(to_json(record), args.out)
    return EXIT_OK


def cmd_dualprob(args) -> int:
    s = len(args.k)
    estimate = mc_dual_prob(RngSeed(args.seed), args.k, args.base, args.m, s,
                            args.design, args.trials)
    if args.design is DesignKind.LMS_SOBOL:
        exact = lms_dual_prob_exact(sobol_design(args.m, s, args.E), args.k)
    else:
        exact = dual_prob_exact(args.k, args.base, args.m, args.design)
    record = DualProbRecord(design_kind=args.design.value, b=args.base, m=args.m, s=s,
                            k=list(args.k), exact=exact, mc_estimate=estimate.estimate,
                            mc_stderr=estimate.stderr, trials=args.trials, seed=args.seed)
    _emit(to_json(record), args.out)
    return EXIT_OK


def cmd_omega(args) -> int:
    if args.base == 2 and args.k_max is None:
        if args.alpha not in (1, 2):
            raise ValueError(f"closed form unavailable for alpha={args.alpha}; pass --k-max")
        value = omega2(args.x) if args.alpha == 1 else omega3(args.x)
        _emit("%.17g" % value, args.out)
        return EXIT_OK
    if args.k_max is None:
        raise ValueError(f"closed form unavailable for base {args.base}; pass --k-max")
    series = omega_series(args.x, args.alpha, args.base, args.k_max)
    payload = {"alpha": args.alpha, "b": args.base, "x": args.x, "k_max": series.k_max,
               "value": series.value, "tail_bound": series.tail_bound}
    _emit(json.dumps(payload, sort_keys=True), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    if not args.config:
        raise ValueError("bench needs --config or HANKELNET_SWEEP_CONFIG")
    config = load_sweep_config(args.config)
    overrides = {key: value for key, value in (("out", args.out), ("seed", args.seed))
                 if value is not None}
    if overrides:
        config = SweepConfig.model_validate({**config.model_dump(), **overrides})
    result = run_sweep(config, workers=args.workers)
    sys.stdout.write(json.dumps(result.summary, sort_keys=True) + "\n")
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "estimate": cmd_estimate,
    "mom": cmd_mom,
    "optimize": cmd_optimize,
    "tparam": cmd_tparam,
    "dualprob": cmd_dualprob,
    "omega": cmd_omega,
    "bench": cmd_bench,
}


def parse_and_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command; returns the process exit code"""
    try:
        settings = Settings.from_env()
    except ConfigurationError as e:
        setup_logging()
        logger.error(str(e))
        return EXIT_RUNTIME
    setup_logging(settings.log_level, settings.log_format)

    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    if args.seed is None and args.command != "bench":
        args.seed = settings.seed

    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        logger.warning(f"{args.command} interrupted")
        return EXIT_INTERRUPTED
    except Exception as e:
        logger.error(f"{args.command} failed unexpectedly: {e}", exc_info=True)
        return EXIT_RUNTIME


def signal_handler(signum, frame):
    """Stop on SIGINT/SIGTERM keeping whatever output was already flushed"""
    logger.warning(f"Received signal {signum}, shutting down")
    sys.stdout.flush()
    sys.exit(EXIT_INTERRUPTED)


def main() -> None:
    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
