"""Command-line driver: matrices, simulation, reconstruction, tables.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .detector import DetectorConfig, balanced_config, build_mode_probabilities, load_config, save_config, validate_timing
from .errors import NumericalError, ValidationError
from .io import (
    read_histogram_csv,
    write_confidence_csv,
    write_distribution_csv,
    write_gnuplot_script,
    write_histogram_csv,
    write_manifest,
    write_matrix_csv,
    write_records,
)
from .matrix import DEFAULT_N_MAX, PhotonDistribution, build_matrix
from .reconstruction import (
    DEFAULT_RESAMPLES,
    CountHistogram,
    bootstrap_errors,
    confidence_table,
    direct_invert,
    em_reconstruct,
    mle_poisson_mean,
    truncated_poisson,
)
from .simulator import InputState, sample_clicks

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _config(args) -> DetectorConfig:
    return balanced_config() if args.config is None else load_config(args.config)


def _manifest(args, outputs: list[Path], **extra) -> dict:
    return {
        "command": args.command,
        "config": None if args.config is None else str(args.config),
        "seed": getattr(args, "seed", None),
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
        "argv": list(args.argv),
        **extra,
    }


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_range(text: str) -> list[int]:
    out: list[int] = []
    try:
        for part in text.split(","):
            lo, sep, hi = part.partition("-")
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    except ValueError as exc:
        raise ValidationError(f"expected integers like '1-3' or '1,2,3', got {text!r}") from exc
    return out


def _grid(text: str) -> list[tuple[float, float]]:
    """``"1:0.25,0.5;0.7:0.25"`` -> [(1, 0.25), (1, 0.5), (0.7, 0.25)]."""
    cols = []
    for group in text.split(";"):
        eta, sep, means = group.partition(":")
        if not sep:
            raise ValidationError(f"grid group {group!r} must look like 'eta:mean,mean'")
        cols.extend((float(eta), m) for m in _floats(means))
    return cols


def cmd_default_config(args) -> int:
    cfg = balanced_config(stages=args.stages, transmission=args.transmission)
    save_config(cfg, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_timing(args) -> int:
    report = validate_timing(_config(args))
    print(f"feasible: {report.feasible}")
    print(f"dead time respected: {report.dead_time_ok}  (min margin {report.min_margin_ns:g} ns)")
    print(f"gates non-overlapping: {report.gates_ok}")
    return EXIT_OK if report.feasible else EXIT_INVALID


def cmd_matrix(args) -> int:
    modes = build_mode_probabilities(_config(args))
    matrix = build_matrix(modes, args.n_max)
    write_matrix_csv(matrix, args.out)
    write_manifest(args.out, _manifest(args, [args.out]))
    print("column sums: " + " ".join(f"{s:.6f}" for s in matrix.p.sum(axis=0)))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    modes = build_mode_probabilities(cfg)
    state = InputState.parse(args.input)
    dark = cfg.dark_count_prob if args.dark_count_prob is None else args.dark_count_prob
    result = sample_clicks(modes, state, args.trials, args.seed, dark, keep_records=args.records is not None)
    hist = CountHistogram(result.counts)
    write_histogram_csv(hist, args.out)
    outputs = [args.out]
    if args.records is not None:
        write_records(result.records, args.records)
        outputs.append(args.records)
    write_manifest(args.out, _manifest(args, outputs, input=args.input, trials=args.trials))
    print(f"T = {hist.total}: " + " ".join(map(str, hist.counts.tolist())))
    return EXIT_OK


def cmd_invert(args) -> int:
    modes = build_mode_probabilities(_config(args))
    matrix = build_matrix(modes, args.n_max)
    hist = read_histogram_csv(args.histogram)
    if args.method == "direct":
        dist = direct_invert(matrix, hist)
    else:
        dist = em_reconstruct(matrix, hist)
    err = None
    if args.resamples > 0:
        err = bootstrap_errors(
            matrix, hist, args.resamples, args.seed, method=args.method, count_floor=args.count_floor
        )
    dist = PhotonDistribution(
        rho=dist.rho, signed=dist.signed, std_err=err, iterations=dist.iterations, converged=dist.converged
    )
    write_distribution_csv(dist, args.out)
    outputs = [args.out]
    if args.plot_script is not None:
        ref = truncated_poisson(max(dist.mean, 0.0), matrix.n_max)
        write_gnuplot_script(args.out, args.plot_script, ref, title=f"{args.method} inversion")
        outputs.append(args.plot_script)
    write_manifest(args.out, _manifest(args, outputs, method=args.method, resamples=args.resamples))
    for n, r in enumerate(dist.rho):
        tail = "" if err is None else f" +/- {err[n]:.5f}"
        print(f"n={n}: {r:+.5f}{tail}")
    print(f"mean photon number: {dist.mean:.4f}")
    return EXIT_OK


def cmd_mle(args) -> int:
    modes = build_mode_probabilities(_config(args))
    matrix = build_matrix(modes, args.n_max)
    hist = read_histogram_csv(args.histogram)
    res = mle_poisson_mean(matrix, hist, args.mean_max)
    write_distribution_csv(res.fitted, args.out)
    write_manifest(
        args.out,
        _manifest(args, [args.out], mean=res.mean, log_likelihood=res.log_likelihood, at_boundary=res.at_boundary),
    )
    flag = " (at search boundary)" if res.at_boundary else ""
    print(f"mean: {res.mean:.6f}{flag}")
    print(f"log-likelihood: {res.log_likelihood:.6f}")
    return EXIT_OK


def cmd_confidence(args) -> int:
    modes = build_mode_probabilities(_config(args))
    if args.grid is not None:
        columns = _grid(args.grid)
    else:
        columns = [(e, m) for e in _floats(args.etas) for m in _floats(args.means)]
    table = confidence_table(modes, columns, _int_range(args.l))
    write_confidence_csv(table, args.out)
    write_manifest(args.out, _manifest(args, [args.out]))
    print("eta   " + " ".join(f"{e:>6g}" for e, _ in table.columns))
    print("mean  " + " ".join(f"{m:>6g}" for _, m in table.columns))
    for l, row in zip(table.ls, table.values):
        print(f"l={l:<3} " + " ".join(f"{v:.3f}".rjust(6) for v in row))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fiberpnr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help: str, out: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", type=Path, default=None, help="detector JSON (default: ideal 8-mode tree)")
        if out:
            p.add_argument("--out", type=Path, required=True)
        p.set_defaults(func=func)
        return p

    p = sub.add_parser("default-config", help="write the balanced detector config as JSON")
    p.add_argument("--stages", type=int, default=3)
    p.add_argument("--transmission", type=float, default=1.0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_default_config, config=None)

    add("timing", cmd_timing, "check pulse separations against dead time and gates", out=False)

    p = add("matrix", cmd_matrix, "export p(k|n) as CSV")
    p.add_argument("--n-max", type=int, default=DEFAULT_N_MAX)

    p = add("simulate", cmd_simulate, "simulate a click histogram")
    p.add_argument("--input", default="poisson:0.79", help="poisson:MEAN[:NCUT] | fock:N | explicit:P0,P1,...")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dark-count-prob", type=float, default=None)
    p.add_argument("--records", type=Path, default=None, help="also write per-trial fired modes")

    p = add("invert", cmd_invert, "reconstruct rho(n) from a histogram")
    p.add_argument("--histogram", type=Path, required=True)
    p.add_argument("--method", choices=("direct", "em"), default="direct")
    p.add_argument("--resamples", type=int, default=DEFAULT_RESAMPLES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-max", type=int, default=DEFAULT_N_MAX)
    p.add_argument("--count-floor", action="store_true", help="give empty click bins a one-event error")
    p.add_argument("--plot-script", type=Path, default=None, help="write a gnuplot script")

    p = add("mle", cmd_mle, "fit a Poisson mean by maximum likelihood")
    p.add_argument("--histogram", type=Path, required=True)
    p.add_argument("--n-max", type=int, default=DEFAULT_N_MAX)
    p.add_argument("--mean-max", type=float, default=None)

    p = add("confidence", cmd_confidence, "tabulate P(n=l | k=l) for Poisson inputs")
    p.add_argument("--means", default="0.25,0.5,1.0,1.5")
    p.add_argument("--etas", default="1,0.7,0.5")
    p.add_argument("--grid", default=None, help="per-eta means, e.g. '1:0.25,0.5;0.7:0.25'")
    p.add_argument("--l", default="1-3")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
