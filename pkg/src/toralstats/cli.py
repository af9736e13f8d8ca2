"""Command-line interface: config load, dispatch, deterministic outputs.

Each command writes `<prefix>.<command>.csv` (data rows, 17 significant
digits, '.' decimal) and `<prefix>.<command>.json` (metadata: the full
config echo, its SHA-256 hash, seeds used, library versions, warnings,
and a per-command summary).  Simulation commands can additionally dump
raw samples to `<prefix>.samples.bin` (8-byte little-endian count header
followed by float64 little-endian values).

Exit codes: 0 success, 1 validation/config errors, 2 budget or overflow
errors.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import platform
import sys
from fractions import Fraction
from typing import Any, Sequence

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, default_config, from_mapping, from_toml
from .lattice import (CompositionOverflowError, classify_conjugate_product,
                      hyperbolicity_constants)
from .montecarlo import (SampleStats, annealed_char_fn, annealed_samples,
                         ks_distance_to_normal, large_deviation_tail,
                         paired_second_moment, quenched_samples,
                         sample_environment)
from .rigidity import (CoboundaryVerdict, EnumerationBudgetError,
                       coboundary_obstruction, orbit_sums)
from .rng import CounterStream
from .transfer import lasota_yorke_report
from .variance import annealed_variance, variance_sweep

COMMANDS = ("constants", "variance", "sweep", "ly-report",
            "simulate-annealed", "simulate-quenched", "char-fn",
            "paired-moment", "ldp", "coboundary")

# ly-report iteration depth and the paired-moment inner block size are
# fixed here rather than configured; both only shape diagnostics.
LY_REPORT_DEPTH = 3
PAIRED_INNER = 500
COBOUNDARY_ROW_CAP = 10000


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, Fraction):
        value = float(value)
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _write_csv(path: str, header: Sequence[str],
               rows: Sequence[Sequence[Any]]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_samples(path: str, samples: np.ndarray) -> None:
    data = np.asarray(samples, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(np.uint64(data.size).astype("<u8").tobytes())
        fh.write(data.tobytes())


def read_samples(path: str) -> np.ndarray:
    """Read back a samples.bin file (count header + float64 payload)."""
    with open(path, "rb") as fh:
        count = int(np.frombuffer(fh.read(8), dtype="<u8")[0])
        data = np.frombuffer(fh.read(8 * count), dtype="<f8")
    if data.size != count:
        raise ValueError(f"{path}: header says {count} samples, "
                         f"payload has {data.size}")
    return data


def _json_ready(value: Any) -> Any:
    if isinstance(value, Fraction):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, dict):
        return {k: _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    return value


def _certified_sigma2(cfg: RunConfig) -> tuple[float, bool]:
    res = annealed_variance(cfg.generators, cfg.observable(), cfg.wp,
                            tol=cfg.tol, depth_cap=cfg.depth_cap)
    return float(res.sigma2), res.certified


# -- command handlers ------------------------------------------------------
# each returns (csv_header, csv_rows, summary, samples-or-None)


def _cmd_constants(cfg: RunConfig):
    cones = hyperbolicity_constants(cfg.generators)
    kind = classify_conjugate_product(cfg.generators)
    header = ["lambda", "Lambda_", "c0", "beta", "classification"]
    rows = [[cones.lam_min, cones.lam_max, cones.c0, cones.beta, kind.value]]
    summary = {"lambda": cones.lam_min, "Lambda_": cones.lam_max,
               "c0": cones.c0, "beta": cones.beta,
               "classification": kind.value}
    return header, rows, summary, None


def _cmd_variance(cfg: RunConfig):
    res = annealed_variance(cfg.generators, cfg.observable(), cfg.wp,
                            tol=cfg.tol, depth_cap=cfg.depth_cap)
    header = ["wp", "sigma2", "n_used", "tail_bound", "certified"]
    rows = [[cfg.wp, res.sigma2, res.n_used, res.tail_bound, res.certified]]
    summary = {"sigma2": float(res.sigma2), "certified": res.certified,
               "exact": res.exact, "n_used": res.n_used,
               "terms": [float(t) for t in res.series.terms]}
    return header, rows, summary, None


def _cmd_sweep(cfg: RunConfig):
    table = variance_sweep(cfg.generators, cfg.observable(), cfg.wp_grid,
                           tol=cfg.tol, depth_cap=cfg.depth_cap)
    header = ["wp", "sigma2", "n_used", "tail_bound", "certified"]
    rows = []
    errors = []
    for row in table:
        if row.result is None:
            rows.append([row.wp, math.nan, -1, math.nan, False])
            errors.append({"wp": row.wp, "error": row.error})
        else:
            r = row.result
            rows.append([row.wp, r.sigma2, r.n_used, r.tail_bound,
                         r.certified])
    summary = {"rows": len(rows), "errors": errors,
               "all_certified": all(r.result is not None
                                    and r.result.certified for r in table)}
    return header, rows, summary, None


def _cmd_ly_report(cfg: RunConfig):
    f = cfg.observable(allow_mean=True)
    report = lasota_yorke_report(cfg.generators, [f], cfg.p, cfg.q,
                                 n_max=LY_REPORT_DEPTH, wp=cfg.wp)
    header = ["label", "n", "strong_n", "strong_0", "weak_0", "ratio"]
    rows = [[r.label, r.n, r.strong_n, r.strong_0, r.weak_0, r.ratio]
            for r in report.rows]
    summary = {"sup_ratio": report.sup_ratio, "gap_ok": report.gap_ok,
               "warnings": list(report.warnings)}
    return header, rows, summary, None


def _stats_row(seed: int, stats: SampleStats) -> list[Any]:
    return [seed, stats.count, stats.mean, stats.variance, stats.stderr,
            stats.variance_stderr]


def _cmd_simulate_annealed(cfg: RunConfig):
    f = cfg.observable()
    sigma2, certified = _certified_sigma2(cfg)
    header = ["seed", "count", "mean", "variance", "stderr",
              "variance_stderr", "ks_distance"]
    rows = []
    all_samples = []
    for seed in cfg.seeds:
        s = annealed_samples(cfg.generators, f, cfg.wp, cfg.n_steps,
                             cfg.n_samples, seed)
        all_samples.append(s)
        stats = SampleStats.from_samples(s)
        ks = ks_distance_to_normal(s, sigma2) if sigma2 > 0 else math.nan
        rows.append(_stats_row(seed, stats) + [ks])
    summary = {"sigma2_ref": sigma2, "sigma2_certified": certified,
               "N": cfg.n_steps, "M": cfg.n_samples}
    return header, rows, summary, np.concatenate(all_samples)


def _cmd_simulate_quenched(cfg: RunConfig):
    f = cfg.observable()
    sigma2, certified = _certified_sigma2(cfg)
    header = ["seed", "zeros", "count", "mean", "variance", "stderr",
              "variance_stderr", "ks_distance"]
    rows = []
    all_samples = []
    for seed in cfg.seeds:
        env = sample_environment(cfg.wp, cfg.n_steps, seed)
        s = quenched_samples(cfg.generators, f, env, cfg.n_steps,
                             cfg.n_samples, seed)
        all_samples.append(s)
        stats = SampleStats.from_samples(s)
        ks = ks_distance_to_normal(s, sigma2) if sigma2 > 0 else math.nan
        zeros = sum(1 for w in env.word.symbols if w == 0)
        rows.append([seed, zeros] + _stats_row(seed, stats)[1:] + [ks])
    summary = {"sigma2_ref": sigma2, "sigma2_certified": certified,
               "N": cfg.n_steps, "M": cfg.n_samples}
    return header, rows, summary, np.concatenate(all_samples)


def _cmd_char_fn(cfg: RunConfig):
    f = cfg.observable()
    sigma2, certified = _certified_sigma2(cfg)
    seed = cfg.seeds[0]
    header = ["lambda", "re", "im", "stderr_re", "stderr_im", "target_re"]
    rows = []
    for lam in cfg.lambda_grid:
        est = annealed_char_fn(cfg.generators, f, cfg.wp, lam, cfg.n_steps,
                               cfg.n_samples, seed)
        target = math.exp(-lam * lam * sigma2 / 2.0)
        rows.append([lam, est.value.real, est.value.imag, est.stderr_re,
                     est.stderr_im, target])
    summary = {"sigma2_ref": sigma2, "sigma2_certified": certified,
               "seed": seed, "N": cfg.n_steps, "M": cfg.n_samples}
    return header, rows, summary, None


def _cmd_paired_moment(cfg: RunConfig):
    f = cfg.observable()
    sigma2, certified = _certified_sigma2(cfg)
    seed = cfg.seeds[0]
    inner = min(cfg.n_samples, PAIRED_INNER)
    outer = max(2, cfg.n_samples // inner)
    header = ["lambda", "estimate", "stderr", "target"]
    rows = []
    for lam in cfg.lambda_grid:
        est = paired_second_moment(cfg.generators, f, cfg.wp, lam,
                                   cfg.n_steps, outer, inner, seed)
        rows.append([lam, est.value, est.stderr,
                     math.exp(-lam * lam * sigma2)])
    summary = {"sigma2_ref": sigma2, "sigma2_certified": certified,
               "seed": seed, "N": cfg.n_steps,
               "M_omega": outer, "M_x": inner}
    return header, rows, summary, None


def _cmd_ldp(cfg: RunConfig):
    f = cfg.observable()
    base = CounterStream(cfg.seeds[0])
    ns = sorted({max(1, cfg.n_steps // d) for d in (8, 4, 2, 1)})
    header = ["N", "hits", "count", "phat", "wilson_lo", "wilson_hi"]
    rows = []
    for i, n in enumerate(ns):
        tail = large_deviation_tail(cfg.generators, f, cfg.wp, n,
                                    cfg.l_threshold, cfg.n_samples,
                                    base.u64(i))
        rows.append([n, tail.hits, tail.count, tail.p_hat,
                     tail.wilson_low, tail.wilson_high])
    summary = {"L": cfg.l_threshold, "M": cfg.n_samples,
               "ladder": [int(n) for n in ns]}
    return header, rows, summary, None


def _cmd_coboundary(cfg: RunConfig):
    f = cfg.observable()
    report = coboundary_obstruction(cfg.generators, f, cfg.k_max,
                                    admissible=cfg.admissible)
    header = ["word", "point_x", "point_y", "orbit_sum", "exact_zero"]
    rows = []
    truncated = False
    shortcut = (report.verdict is CoboundaryVerdict.POSITIVE_VARIANCE
                and report.witness is None)
    if not shortcut:
        for length in range(1, cfg.k_max + 1):
            for symbols in itertools.product(cfg.admissible, repeat=length):
                for s in orbit_sums(cfg.generators, f, symbols):
                    if len(rows) >= COBOUNDARY_ROW_CAP:
                        truncated = True
                        break
                    rows.append(["".join(map(str, symbols)),
                                 str(s.point[0]), str(s.point[1]),
                                 s.value, s.exact_zero])
                if truncated:
                    break
            if truncated:
                break
    witness = None
    if report.witness is not None:
        witness = {"word": "".join(map(str, report.witness.word)),
                   "point": [str(c) for c in report.witness.point],
                   "orbit_sum": float(report.witness.orbit_sum)}
    summary = {"verdict": report.verdict.name, "reason": report.reason,
               "k_max": report.k_max, "words_scanned": report.words_scanned,
               "witness": witness, "rows_truncated": truncated,
               "admissible": list(cfg.admissible)}
    return header, rows, summary, None


_HANDLERS = {
    "constants": _cmd_constants,
    "variance": _cmd_variance,
    "sweep": _cmd_sweep,
    "ly-report": _cmd_ly_report,
    "simulate-annealed": _cmd_simulate_annealed,
    "simulate-quenched": _cmd_simulate_quenched,
    "char-fn": _cmd_char_fn,
    "paired-moment": _cmd_paired_moment,
    "ldp": _cmd_ldp,
    "coboundary": _cmd_coboundary,
}


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; 2 is reserved for budget
    # and overflow errors here, so remap usage problems to 1.
    def error(self, message: str):
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="toralstats",
                     description="statistics of random toral automorphisms")
    parser.add_argument("--config", metavar="PATH",
                        help="TOML config file (defaults used when omitted)")
    parser.add_argument("--command", required=True, metavar="NAME",
                        help=f"one of: {', '.join(COMMANDS)}")
    parser.add_argument("--seed", type=int, action="append", metavar="U64",
                        help="replace the config seed list (repeatable)")
    parser.add_argument("--output", metavar="PREFIX",
                        help="output path prefix")
    parser.add_argument("--dump-samples", action="store_true",
                        help="also write <prefix>.samples.bin")
    parser.add_argument("--wp", type=float)
    parser.add_argument("--N", type=int, dest="n_steps")
    parser.add_argument("--M", type=int, dest="n_samples")
    parser.add_argument("--lambda", type=float, dest="lambda_",
                        help="replace lambda_grid with this single value")
    parser.add_argument("--L", type=float, dest="l_threshold")
    parser.add_argument("--p", type=float)
    parser.add_argument("--q", type=float)
    parser.add_argument("--kmax", type=int)
    return parser


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    raw = cfg.to_json_dict()
    if args.seed:
        raw["seeds"] = list(args.seed)
    if args.output is not None:
        raw["output"] = args.output
    if args.wp is not None:
        raw["wp"] = args.wp
    if args.n_steps is not None:
        raw["N"] = args.n_steps
    if args.n_samples is not None:
        raw["M"] = args.n_samples
    if args.lambda_ is not None:
        raw["lambda_grid"] = [args.lambda_]
    if args.l_threshold is not None:
        raw["L"] = args.l_threshold
    if args.p is not None:
        raw["p"] = args.p
    if args.q is not None:
        raw["q"] = args.q
    if args.kmax is not None:
        raw["k_max"] = args.kmax
    return from_mapping(raw)


def run(argv: Sequence[str]) -> int:
    """Execute one command; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)
    if args.command not in _HANDLERS:
        print(f"unknown command {args.command!r}; choose from "
              f"{', '.join(COMMANDS)}", file=sys.stderr)
        return 1
    try:
        cfg = from_toml(args.config) if args.config else default_config()
        cfg = _apply_overrides(cfg, args)
        for line in cfg.warnings():
            print(f"warning: {line}", file=sys.stderr)
        header, rows, summary, samples = _HANDLERS[args.command](cfg)
    except (ConfigError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (EnumerationBudgetError, CompositionOverflowError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    prefix = cfg.output
    csv_path = f"{prefix}.{args.command}.csv"
    meta = {
        "command": args.command,
        "config": cfg.to_json_dict(),
        "config_hash": cfg.config_hash(),
        "seeds": list(cfg.seeds),
        "versions": {"package": __version__,
                     "python": platform.python_version(),
                     "numpy": np.__version__},
        "warnings": list(cfg.warnings()),
        "summary": _json_ready(summary),
    }
    json_path = f"{prefix}.{args.command}.json"
    try:
        _write_csv(csv_path, header, rows)
        with open(json_path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written = [csv_path, json_path]
        if args.dump_samples and samples is not None:
            bin_path = f"{prefix}.samples.bin"
            _write_samples(bin_path, samples)
            written.append(bin_path)
    except OSError as err:
        print(f"error: cannot write output: {err}", file=sys.stderr)
        return 1
    print("wrote " + " ".join(written))
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
