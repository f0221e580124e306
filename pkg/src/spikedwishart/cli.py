"""Command-line front end.

Four subcommands: ``sample`` writes per-draw singular values plus
histograms, ``validate`` compares the banded sampler against the dense
brute-force one with KS tests, ``bench`` times both over a grid of sizes,
and ``fit`` recovers spikes from target mean singular values. Every
command is deterministic given ``--seed``: delimited output carries
full-precision floats and the SVG rendering is salted, so repeated runs
are byte-identical (benchmark timings excepted, as measured wall time is
physical).

Exit codes: 0 success, 1 numeric failure (diagnostic on stderr), 2 usage
error. ``validate`` exits 1 when a KS p-value falls below the threshold.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import report
from .errors import ParameterError, SpikedWishartError
from .gradfit import fit_spikes
from .sampler import SpikeSpec
from .spectra import singular_value_draws
from .stats import ks_two_sample
from .variates import RandomStream

__all__ = ["RunConfig", "main", "cmd_sample", "cmd_validate", "cmd_bench", "cmd_fit"]


@dataclass
class RunConfig:
    """Parsed invocation: which command plus every knob it may need."""

    command: str
    m: int = 0
    n: int = 0
    spikes: tuple = ()
    draws: int = 1
    top: int | None = None
    seed: int = 0
    out_dir: str = "."
    format: str = "csv"
    method: str = "banded"
    bins: int = 50
    threshold: float = 0.01
    grid_m: tuple = ()
    coupled: bool = False
    reps: int = 3
    target_path: str | None = None
    init_spikes: tuple = ()
    batch: int = 500
    max_iters: int = 60
    fresh_noise: bool = False


def _parse_floats(parser: argparse.ArgumentParser, text: str, flag: str) -> tuple:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        parser.error(f"{flag} expects a comma-separated list of numbers, got {text!r}")


def _parse_ints(parser: argparse.ArgumentParser, text: str, flag: str) -> tuple:
    values = _parse_floats(parser, text, flag)
    if any(v != int(v) for v in values):
        parser.error(f"{flag} expects integers, got {text!r}")
    return tuple(int(v) for v in values)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikedwishart",
        description="Sample, validate, benchmark and fit spiked "
                    "(pseudo-)Wishart singular values.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, m_default=None, n_default=None, spikes_default="1"):
        req = m_default is None
        p.add_argument("--m", type=int, required=req, default=m_default,
                       help="number of variables (rows)")
        p.add_argument("--n", type=int, required=req, default=n_default,
                       help="number of observations (columns)")
        p.add_argument("--spikes", default=spikes_default,
                       help="comma-separated spike standard deviations")
        p.add_argument("--seed", type=int, default=0, help="base RNG seed")
        p.add_argument("--out-dir", default=".", help="output directory")

    ps = sub.add_parser("sample", help="draw singular values, write table + histograms")
    add_common(ps)
    ps.add_argument("--draws", type=int, default=100)
    ps.add_argument("--top", type=int, default=None,
                    help="keep only the leading singular values")
    ps.add_argument("--method", choices=("banded", "dense"), default="banded")
    ps.add_argument("--format", choices=("csv", "json"), default="csv")
    ps.add_argument("--bins", type=int, default=50)

    pv = sub.add_parser("validate", help="KS comparison of banded vs dense sampler")
    add_common(pv, m_default=50, n_default=40, spikes_default="10,3")
    pv.add_argument("--draws", type=int, default=2000)
    pv.add_argument("--threshold", type=float, default=0.01)
    pv.add_argument("--bins", type=int, default=50)

    pb = sub.add_parser("bench", help="time both samplers over a size grid")
    add_common(pb, m_default=0, n_default=10, spikes_default="100,30,10")
    pb.add_argument("--grid-m", required=True,
                    help="comma-separated m values to benchmark")
    pb.add_argument("--coupled", action="store_true",
                    help="vary n together with m (square case)")
    pb.add_argument("--top", type=int, default=None)
    pb.add_argument("--draws", type=int, default=100)
    pb.add_argument("--reps", type=int, default=3,
                    help="timing repetitions (median reported)")

    pf = sub.add_parser("fit", help="fit spikes to target mean singular values")
    add_common(pf)
    pf.add_argument("--target", required=True, dest="target_path",
                    help="CSV file of descending target singular values")
    pf.add_argument("--init", default="1",
                    help="comma-separated initial spike values")
    pf.add_argument("--batch", type=int, default=500)
    pf.add_argument("--max-iters", type=int, default=60)
    pf.add_argument("--fresh-noise", action="store_true",
                    help="redraw the noise batch every iteration")
    return parser


def _config_from_args(parser: argparse.ArgumentParser,
                      args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    cfg.m, cfg.n = args.m, args.n
    cfg.spikes = _parse_floats(parser, args.spikes, "--spikes")
    cfg.seed = args.seed
    cfg.out_dir = args.out_dir
    if hasattr(args, "draws"):
        if args.draws < 1:
            parser.error(f"--draws must be >= 1, got {args.draws}")
        cfg.draws = args.draws
    cfg.top = getattr(args, "top", None)
    if cfg.top is not None and cfg.top < 1:
        parser.error(f"--top must be >= 1, got {cfg.top}")
    cfg.format = getattr(args, "format", "csv")
    cfg.method = getattr(args, "method", "banded")
    cfg.bins = getattr(args, "bins", 50)
    if cfg.bins < 1:
        parser.error(f"--bins must be >= 1, got {cfg.bins}")
    cfg.threshold = getattr(args, "threshold", 0.01)
    if args.command == "bench":
        cfg.grid_m = _parse_ints(parser, args.grid_m, "--grid-m")
        if not cfg.grid_m:
            parser.error("--grid-m must list at least one size")
        cfg.coupled = args.coupled
        cfg.reps = args.reps
        if cfg.reps < 1:
            parser.error(f"--reps must be >= 1, got {cfg.reps}")
    if args.command == "fit":
        cfg.target_path = args.target_path
        cfg.init_spikes = _parse_floats(parser, args.init, "--init")
        cfg.batch = args.batch
        cfg.max_iters = args.max_iters
        cfg.fresh_noise = args.fresh_noise
    return cfg


def _out(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, name)


def cmd_sample(cfg: RunConfig) -> int:
    spec = SpikeSpec(cfg.m, cfg.n, cfg.spikes)
    values = singular_value_draws(spec, cfg.draws, RandomStream(cfg.seed),
                                  method=cfg.method, top=cfg.top)
    header = [f"d{j}" for j in range(1, values.shape[1] + 1)]
    table = _out(cfg, f"values.{cfg.format}")
    if cfg.format == "csv":
        report.write_table_csv(table, header, values)
    else:
        report.write_table_json(table, header, values)
    tag = f"m={spec.m} n={spec.n} draws={cfg.draws} method={cfg.method}"
    top_svg = _out(cfg, "hist_top.svg")
    report.save_histogram_svg(values[:, 0], cfg.bins, top_svg,
                              f"largest singular value ({tag})", "d1")
    bottom_svg = _out(cfg, "hist_bottom.svg")
    report.save_histogram_svg(
        values[:, -1], cfg.bins, bottom_svg,
        f"smallest reported singular value ({tag})", f"d{values.shape[1]}")
    print(f"wrote {table}, {top_svg}, {bottom_svg}")
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    spec = SpikeSpec(cfg.m, cfg.n, cfg.spikes)
    parent = RandomStream(cfg.seed)
    banded = singular_value_draws(spec, cfg.draws, parent.substream(0), "banded")
    dense = singular_value_draws(spec, cfg.draws, parent.substream(1), "dense")
    results = {}
    for label, col in (("top", 0), ("bottom", banded.shape[1] - 1)):
        ks = ks_two_sample(banded[:, col], dense[:, col])
        results[label] = ks
        print(f"{label}: D={ks.d_statistic!r} p={ks.p_value!r}")
        report.save_overlay_histogram_svg(
            banded[:, col], dense[:, col], ("banded", "dense"), cfg.bins,
            _out(cfg, f"overlay_{label}.svg"),
            f"{label} singular value, banded vs dense "
            f"(m={spec.m} n={spec.n} draws={cfg.draws})",
            f"d{col + 1}")
    report.write_json(_out(cfg, "ks.json"), {
        label: {"d_statistic": ks.d_statistic, "p_value": ks.p_value,
                "n1": ks.n1, "n2": ks.n2}
        for label, ks in results.items()
    } | {"threshold": cfg.threshold})
    ok = all(ks.p_value > cfg.threshold for ks in results.values())
    print("distributions match" if ok else "distributions differ")
    return 0 if ok else 1


def cmd_bench(cfg: RunConfig) -> int:
    rows = []
    for m in cfg.grid_m:
        n = m if cfg.coupled else cfg.n
        # a tiny grid point cannot hold more spikes than rows
        spec = SpikeSpec(m, n, cfg.spikes[:min(len(cfg.spikes), m)])
        for method in ("banded", "dense"):
            times = []
            for _ in range(cfg.reps):
                t0 = time.perf_counter()
                singular_value_draws(spec, cfg.draws, RandomStream(cfg.seed),
                                     method=method, top=cfg.top)
                times.append(time.perf_counter() - t0)
            seconds = float(np.median(times))
            rows.append((m, n, method, seconds))
            print(f"m={m} n={n} {method}: {seconds:.6f} s")
    report.write_table_csv(_out(cfg, "bench.csv"),
                           ["m", "n", "method", "seconds"], rows)
    series = {}
    for method in ("banded", "dense"):
        pts = [(r[0], r[3]) for r in rows if r[2] == method]
        series[method] = ([p[0] for p in pts], [p[1] for p in pts])
    top_note = f", top {cfg.top}" if cfg.top else ""
    report.save_loglog_svg(
        series, _out(cfg, "bench.svg"),
        f"wall time for {cfg.draws} draws"
        f" ({'m = n' if cfg.coupled else f'n = {cfg.n}'}{top_note})",
        "m", "seconds")
    return 0


def _read_target(path) -> np.ndarray:
    try:
        with open(path, "r", newline="") as fh:
            rows = [row for row in csv.reader(fh) if row]
    except OSError as exc:
        raise ParameterError(f"cannot read target file: {exc}") from exc
    values = []
    for idx, row in enumerate(rows):
        if len(row) != 1:
            raise ParameterError(
                f"target file must have one value per row, row {idx + 1} "
                f"has {len(row)} fields")
        try:
            values.append(float(row[0]))
        except ValueError:
            if idx == 0:
                continue  # header row
            raise ParameterError(
                f"non-numeric target value {row[0]!r} on row {idx + 1}")
    if not values:
        raise ParameterError(f"target file {path} holds no values")
    return np.asarray(values)


def cmd_fit(cfg: RunConfig) -> int:
    target = _read_target(cfg.target_path)
    template = SpikeSpec(cfg.m, cfg.n, cfg.init_spikes)
    fit = fit_spikes(target, template, cfg.init_spikes, cfg.batch,
                     cfg.max_iters, RandomStream(cfg.seed),
                     fresh_noise=cfg.fresh_noise)
    report.write_json(_out(cfg, "fit.json"), fit.as_dict())
    report.save_fit_overlay_svg(
        target, np.asarray(fit.final_means), _out(cfg, "fit.svg"),
        f"target vs fitted mean singular values (m={cfg.m} n={cfg.n})")
    spikes_text = ", ".join(repr(s) for s in fit.final_spikes)
    print(f"status={fit.status} spikes=({spikes_text}) "
          f"residual={fit.residual_norms[-1]!r}")
    return 0


_HANDLERS = {
    "sample": cmd_sample,
    "validate": cmd_validate,
    "bench": cmd_bench,
    "fit": cmd_fit,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _config_from_args(parser, args)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    try:
        return _HANDLERS[cfg.command](cfg)
    except ParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (SpikedWishartError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
