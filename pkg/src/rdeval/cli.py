"""Command-line interface.

Subcommands:

* ``rd``: estimated rate-distortion curve for a model and dataset via
  annealed importance sampling with HMC transitions.
* ``bdmc``: bidirectional sandwich bounds on the log-partition value at
  the schedule endpoint, using matched-noise simulated data.
* ``analytic``: closed-form curve for linear-Gaussian models.
* ``oracle``: quadrature curve for models with latent dimension <= 2.
* ``demo2d``: built-in three-model comparison with exact curves.

The curve subcommands share one CSV schema (``point_index, k, beta,
rate_nats, distortion, log_z_hat, mean_accept, ess``); rows averaged over
the dataset carry ``point_index = -1``.  Floats are written with ``repr``
so output is byte-stable, and row order never depends on ``--threads``.
The ``RDEVAL_LOG`` environment variable sets the log level.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from . import __version__
from . import ais
from . import analytic as A
from . import bdmc as B
from . import demo2d
from . import hmc as H
from . import model as M
from . import oracle
from . import rng as R
from . import schedule as S
from . import svg
from .errors import ConfigError, RdevalError

log = logging.getLogger("rdeval")

CSV_HEADER = "point_index,k,beta,rate_nats,distortion,log_z_hat,mean_accept,ess"
BDMC_HEADER = "beta_target,lower,upper,gap,n_pairs"


def _f(v: float) -> str:
    return repr(float(v))


def _setup_logging() -> None:
    name = os.environ.get("RDEVAL_LOG", "warning").strip().upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _add_schedule_flags(sp, n_dists: int, beta_max: float,
                        report_points: int) -> None:
    sp.add_argument("--n-dists", type=_positive_int, default=n_dists,
                    metavar="N",
                    help="number of intermediate distributions "
                         f"(default {n_dists})")
    sp.add_argument("--beta-max", type=float, default=beta_max, metavar="B",
                    help=f"annealing endpoint (default {beta_max})")
    sp.add_argument("--schedule", choices=S.SHAPES, default="sigmoid",
                    help="beta grid shape (default sigmoid)")
    sp.add_argument("--tau", type=float, default=4.0,
                    help="sigmoid sharpness (default 4.0)")
    sp.add_argument("--report-points", type=_positive_int,
                    default=report_points, metavar="K",
                    help="number of schedule indices to report "
                         f"(default {report_points})")


def _add_sampler_flags(sp) -> None:
    sp.add_argument("--chains", type=_positive_int, default=16, metavar="M",
                    help="independent chains per data point (default 16)")
    sp.add_argument("--leapfrog", type=_positive_int, default=20, metavar="L",
                    help="leapfrog steps per HMC proposal (default 20)")
    sp.add_argument("--seed", type=int, required=True,
                    help="master seed; required, all randomness derives "
                         "from it")
    sp.add_argument("--threads", type=_positive_int, default=1,
                    help="worker thread cap; output does not depend on it "
                         "(default 1)")
    sp.add_argument("--tune-in", metavar="PATH",
                    help="replay a saved step-size profile instead of "
                         "running the tuning pass")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rdeval",
        description="Rate-distortion evaluation of generative decoders.")
    p.add_argument("--version", action="version",
                   version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    rd = sub.add_parser(
        "rd", help="trace an estimated rate-distortion curve for a dataset")
    rd.add_argument("--model", required=True, help="model manifest (JSON)")
    rd.add_argument("--data", required=True, help="dataset (CSV)")
    _add_schedule_flags(rd, n_dists=1000, beta_max=10.0, report_points=21)
    _add_sampler_flags(rd)
    rd.add_argument("--tune-out", metavar="PATH",
                    help="write the tuned step-size profile here when the "
                         "tuning pass runs")
    rd.add_argument("--out", metavar="PATH",
                    help="output CSV path (default: stdout)")
    rd.add_argument("--plot", metavar="PATH",
                    help="also write an SVG plot of the curves")
    rd.set_defaults(func=cmd_rd)

    bd = sub.add_parser(
        "bdmc", help="sandwich the endpoint log-partition value on "
                     "simulated data")
    bd.add_argument("--model", required=True, help="model manifest (JSON)")
    _add_schedule_flags(bd, n_dists=5000, beta_max=10.0, report_points=2)
    _add_sampler_flags(bd)
    bd.add_argument("--pairs", type=_positive_int, default=8,
                    help="number of simulated latent/data pairs (default 8)")
    bd.add_argument("--out", metavar="PATH",
                    help="output CSV path (default: stdout)")
    bd.set_defaults(func=cmd_bdmc)

    an = sub.add_parser(
        "analytic", help="closed-form curve for linear-Gaussian models")
    an.add_argument("--model", required=True, help="model manifest (JSON)")
    an.add_argument("--data", required=True, help="dataset (CSV)")
    _add_schedule_flags(an, n_dists=1000, beta_max=10.0, report_points=21)
    an.add_argument("--out", metavar="PATH",
                    help="output CSV path (default: stdout)")
    an.add_argument("--plot", metavar="PATH",
                    help="also write an SVG plot of the curve")
    an.set_defaults(func=cmd_analytic)

    orc = sub.add_parser(
        "oracle", help="quadrature curve for low-dimensional models")
    orc.add_argument("--model", required=True, help="model manifest (JSON)")
    orc.add_argument("--data", required=True, help="dataset (CSV)")
    _add_schedule_flags(orc, n_dists=1000, beta_max=10.0, report_points=21)
    orc.add_argument("--out", metavar="PATH",
                    help="output CSV path (default: stdout)")
    orc.add_argument("--plot", metavar="PATH",
                    help="also write an SVG plot of the curve")
    orc.set_defaults(func=cmd_oracle)

    de = sub.add_parser(
        "demo2d", help="three built-in models with exact overlay curves")
    de.add_argument("--out", required=True, metavar="DIR",
                    help="output directory for the three CSVs and the "
                         "overlay SVG")
    _add_schedule_flags(de, n_dists=demo2d.DEMO_N_DISTS,
                        beta_max=demo2d.DEMO_BETA_MAX,
                        report_points=demo2d.DEMO_N_DISTS + 1)
    de.set_defaults(func=cmd_demo2d)

    return p


class _CsvSink:
    """Writes curve rows; file when a path is given, stdout otherwise."""

    def __init__(self, path):
        self.path = path
        self.fh = None

    def __enter__(self):
        if self.path is None:
            self.fh = sys.stdout
        else:
            self.fh = open(self.path, "w", encoding="utf-8", newline="\n")
        self.fh.write(CSV_HEADER + "\n")
        return self

    def __exit__(self, exc_type, exc, tb):
        if self.path is not None:
            self.fh.close()
        return False

    def rows(self, point_index: int, points) -> None:
        for p in points:
            self.fh.write(
                f"{point_index},{p.k},{_f(p.beta)},{_f(p.rate_nats)},"
                f"{_f(p.distortion)},{_f(p.log_z_hat)},{_f(p.mean_accept)},"
                f"{_f(p.ess)}\n")
        self.fh.flush()


def _build_schedule(args) -> S.Schedule:
    return S.make_schedule(args.n_dists, args.beta_max, args.schedule,
                           report_points=args.report_points, tau=args.tau)


def _resolve_profile(args, model, data, sched):
    """Load --tune-in when given, otherwise run the tuning pass on the
    first data row (writing --tune-out when requested)."""
    if args.tune_in:
        profile = H.load_profile(args.tune_in)
        H.ensure_profile_matches(profile, sched)
        log.info("replaying step-size profile from %s", args.tune_in)
        return profile
    params = H.HmcParams(step_size=H.initial_step_size(model.latent_dim),
                         n_leapfrog=args.leapfrog)
    log.info("tuning step sizes on the first data row")
    profile = H.tune_step_sizes(
        model, data[0], sched, params,
        R.chain_streams(args.seed, 0, args.chains, R.PURPOSE_TUNE))
    if getattr(args, "tune_out", None):
        H.save_profile(profile, args.tune_out)
        log.info("wrote step-size profile to %s", args.tune_out)
    return profile


def _plot_curves(path, labeled_curves) -> None:
    """labeled_curves: (label, points) with distortion on x, rate on y."""
    series = [(label, [p.distortion for p in points],
               [p.rate_nats for p in points])
              for label, points in labeled_curves]
    svg.write_line_plot(path, series, title="rate-distortion curves",
                        x_label="distortion", y_label="rate (nats)")


def cmd_rd(args) -> int:
    model = M.load_model(args.model)
    data = M.load_dataset(args.data, output_dim=model.output_dim)
    sched = _build_schedule(args)
    profile = _resolve_profile(args, model, data, sched)
    log.info("rd: %d points, n=%d, beta_max=%g, M=%d",
             data.shape[0], sched.n, sched.beta_max, args.chains)
    with _CsvSink(args.out) as sink:
        per_point, averaged = ais.rd_curve(
            model, data, sched, args.chains, profile, args.seed,
            n_threads=args.threads, on_point=sink.rows)
        sink.rows(-1, averaged)
    if args.plot:
        labeled = [(f"point {i}", pts) for i, pts in enumerate(per_point)]
        labeled.append(("mean", averaged))
        _plot_curves(args.plot, labeled)
    return 0


def cmd_bdmc(args) -> int:
    model = M.load_model(args.model)
    sched = _build_schedule(args)
    pairs = B.make_pairs(model, sched.beta_max, args.pairs, args.seed)
    if args.tune_in:
        hmc = H.load_profile(args.tune_in)
        H.ensure_profile_matches(hmc, sched)
    else:
        hmc = H.HmcParams(step_size=H.initial_step_size(model.latent_dim),
                          n_leapfrog=args.leapfrog)
    log.info("bdmc: %d pairs at beta_target=%g, n=%d, M=%d",
             args.pairs, sched.beta_max, sched.n, args.chains)
    lower, upper, gap = B.bdmc_gap(model, pairs, sched, args.chains, hmc,
                                   args.seed, n_threads=args.threads)
    line = (f"{_f(sched.beta_max)},{_f(lower)},{_f(upper)},{_f(gap)},"
            f"{args.pairs}\n")
    if args.out is None:
        sys.stdout.write(BDMC_HEADER + "\n" + line)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(BDMC_HEADER + "\n" + line)
    return 0


def _write_exact_curve(args, rows_for_point, n_points) -> list:
    """Shared emitter for the analytic and oracle subcommands.

    rows_for_point(i) returns the RDPoint list for dataset row i; rows are
    written per point followed by the exact-mean rows at point_index -1.
    """
    per_point = []
    with _CsvSink(args.out) as sink:
        for i in range(n_points):
            points = rows_for_point(i)
            per_point.append(points)
            sink.rows(i, points)
        averaged = []
        for r in range(len(per_point[0])):
            first = per_point[0][r]
            averaged.append(ais.RDPoint(
                k=first.k, beta=first.beta,
                rate_nats=math.fsum(pp[r].rate_nats
                                    for pp in per_point) / n_points,
                distortion=math.fsum(pp[r].distortion
                                     for pp in per_point) / n_points,
                log_z_hat=math.fsum(pp[r].log_z_hat
                                    for pp in per_point) / n_points,
                mean_accept=1.0, ess=1.0))
        sink.rows(-1, averaged)
    if args.plot:
        _plot_curves(args.plot, [("mean", averaged)])
    return averaged


def cmd_analytic(args) -> int:
    model = M.load_model(args.model)
    la, sigma = A.from_model(model)
    data = M.load_dataset(args.data, output_dim=model.output_dim)
    sched = _build_schedule(args)
    betas = [float(sched.betas[k]) for k in sched.report_indices]

    def rows_for_point(i):
        points = []
        for k, b in zip(sched.report_indices, betas):
            rate = A.analytic_rate(la, data[i], b)
            dist = A.analytic_distortion_nll(la, data[i], b, sigma)
            points.append(ais.RDPoint(
                k=k, beta=b, rate_nats=rate, distortion=dist,
                log_z_hat=-(rate + b * dist) + 0.0,
                mean_accept=1.0, ess=1.0))
        return points

    log.info("analytic: %d points, %d report betas", data.shape[0],
             len(betas))
    _write_exact_curve(args, rows_for_point, data.shape[0])
    return 0


def cmd_oracle(args) -> int:
    model = M.load_model(args.model)
    data = M.load_dataset(args.data, output_dim=model.output_dim)
    sched = _build_schedule(args)
    betas = [float(sched.betas[k]) for k in sched.report_indices]

    def rows_for_point(i):
        triples = oracle.quad_curve(model, data[i], betas)
        return [ais.RDPoint(k=k, beta=b, rate_nats=r, distortion=d,
                            log_z_hat=lz, mean_accept=1.0, ess=1.0)
                for k, b, (r, d, lz) in zip(sched.report_indices, betas,
                                            triples)]

    log.info("oracle: %d points, %d report betas", data.shape[0], len(betas))
    _write_exact_curve(args, rows_for_point, data.shape[0])
    return 0


def cmd_demo2d(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    sched = S.make_schedule(args.n_dists, args.beta_max, args.schedule,
                            report_points=args.report_points, tau=args.tau)
    overlay = []
    for model in demo2d.demo_models():
        rows = demo2d.curve_rows(model, demo2d.DEMO_X, sched)
        name = model.name.replace("-", "_")
        path = out_dir / f"{name}.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for point_index in (0, -1):
                for k, b, rate, dist, lz in rows:
                    fh.write(f"{point_index},{k},{_f(b)},{_f(rate)},"
                             f"{_f(dist)},{_f(lz)},1.0,1.0\n")
        log.info("wrote %s", path)
        overlay.append((model.name, [row[3] for row in rows],
                        [row[2] for row in rows]))
    svg_path = out_dir / "overlay.svg"
    svg.write_line_plot(svg_path, overlay, title="demo2d exact curves",
                        x_label="distortion", y_label="rate (nats)")
    log.info("wrote %s", svg_path)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging()
    try:
        return args.func(args)
    except RdevalError as exc:
        print(f"rdeval: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
