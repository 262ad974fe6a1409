"""Command-line front end: ``selfcal {crlb,verify-optimality,sweep,dl,estimate}``.

Every command accepts ``--config FILE`` (JSON); explicit flags win over the
file. The fully resolved configuration is logged and, when ``--output`` is a
file, written next to it as ``<output>.config.json``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .downlink import DlConfig, run_dl_experiment
from .errors import SelfCalError
from .estimators import dumps_estimate, estimate_full, estimate_relative, residual_full, residual_relative
from .fisher import batched_trace_objective, build_fim, crlb_closed_form, crlb_numerical
from .montecarlo import SweepConfig, compare_strategies, run_sweep
from .rfmodel import ChannelModel, MeasurementSet, generate_gains, snr_to_noise_variance
from .topology import (
    DEFAULT_ENUMERATION_CAP,
    InterconnectionStrategy,
    build_star,
    compute_paths,
    enumerate_tree_edges,
    parse_strategy_spec,
)

log = logging.getLogger("selfcal")

THREADS_ENV = "SELFCAL_THREADS"
EXIT_OK, EXIT_INPUT, EXIT_EXCLUSIONS = 0, 2, 3

DEFAULTS = {
    "crlb": dict(strategy="star", M=128, f=None, a=1.0, b=1.0, snr=20.0, h=1.0, seed=0, format="csv", output=None),
    "verify-optimality": dict(M=5, f=None, a=1.0, b=1.0, snr=20.0, h=1.0, seed=0, cap=DEFAULT_ENUMERATION_CAP,
                              format="json", output=None),
    "sweep": dict(mode="full", strategies="star,daisy,combined:5", M=128, f=None, snr="10:40:5", trials=10_000,
                  sigma_h=0.0, a=1.0, b=1.0, h=1.0, seed=0, block_size=2000, fixed_distortion=False,
                  max_exclusion_rate=0.001, format="csv", output=None, threads=None),
    "dl": dict(M=32, K=6, f=None, strategies="star,combined:3,daisy", snr="10:40:10", schemes="mf,zf", draws=1000,
               mode="full", sigma_h=0.0, a=1.0, b=1.0, h=1.0, seed=0, max_exclusion_rate=0.001,
               format="csv", output=None),
    "estimate": dict(measurements=None, strategy=None, mode="full", h=None, alpha_f=None, beta_f=None, c_f=None,
                     format="json", output=None),
}


def parse_snr_grid(text) -> list[float]:
    """``lo:hi:step`` (inclusive of hi) or a comma list."""
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text)
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        if step <= 0:
            raise SelfCalError(f"SNR grid step must be positive: {text!r}")
        count = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return [round(lo + k * step, 10) for k in range(count)]
    return [float(v) for v in text.split(",") if v.strip()]


def parse_complex(text) -> complex:
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return complex(float(text[0]), float(text[1]))
    if isinstance(text, (int, float, complex)):
        return complex(text)
    parts = str(text).split(",")
    if len(parts) == 2:
        return complex(float(parts[0]), float(parts[1]))
    return complex(str(text).replace(" ", ""))


def _split(text) -> list[str]:
    if isinstance(text, (list, tuple)):
        return [str(v) for v in text]
    return [s.strip() for s in str(text).split(",") if s.strip()]


def _resolve(command: str, args: argparse.Namespace) -> dict:
    resolved = dict(DEFAULTS[command])
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(data) - set(resolved)
        if unknown:
            raise SelfCalError(f"unknown config keys for {command}: {sorted(unknown)}")
        resolved.update(data)
    for key in resolved:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    if "threads" in resolved and resolved["threads"] is None:
        resolved["threads"] = int(os.environ.get(THREADS_ENV, "1"))
    if resolved.get("f", 0) is None:
        resolved["f"] = int(resolved["M"]) // 2 + 1
    return resolved


def _emit(text: str, resolved: dict) -> None:
    out = resolved.get("output")
    if out:
        Path(out).write_text(text, encoding="utf-8")
        Path(str(out) + ".config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text)


def _channel(resolved: dict) -> ChannelModel:
    h = parse_complex(resolved["h"])
    return ChannelModel(h, 0.0, snr_to_noise_variance(float(resolved["snr"]), resolved["a"], resolved["b"], h))


def cmd_crlb(resolved: dict) -> int:
    M, f = int(resolved["M"]), int(resolved["f"])
    strategy = parse_strategy_spec(resolved["strategy"], M, f)
    channel = _channel(resolved)
    gains = generate_gains(M, f, resolved["a"], resolved["b"], seed=resolved["seed"])
    closed = crlb_closed_form(compute_paths(strategy), resolved["a"], resolved["b"], channel, gains=gains)
    numeric = crlb_numerical(build_fim(gains, strategy, channel))
    disc = max(
        abs(getattr(numeric, key)[m] - getattr(closed, key)[m]) / getattr(closed, key)[m]
        for key in ("crlb_alpha", "crlb_beta", "crlb_relative")
        for m in closed.antennas
    )
    log.info("max relative discrepancy closed form vs numerical: %.3e", disc)
    if resolved["format"] == "json":
        text = json.dumps(
            {"closed_form": closed.to_dict(), "numerical": numeric.to_dict(), "max_relative_discrepancy": disc},
            indent=2, sort_keys=True,
        ) + "\n"
    else:
        text = closed.to_csv()
        if resolved.get("output"):
            Path(str(resolved["output"]) + ".numerical.csv").write_text(numeric.to_csv(), encoding="utf-8")
    _emit(text, resolved)
    return EXIT_OK


def cmd_verify_optimality(resolved: dict) -> int:
    M, f = int(resolved["M"]), int(resolved["f"])
    channel = _channel(resolved)
    gains = generate_gains(M, f, resolved["a"], resolved["b"], seed=resolved["seed"])
    traces, edge_blocks = [], []
    for block in enumerate_tree_edges(M, cap=int(resolved["cap"])):
        traces.append(batched_trace_objective(block, gains, channel))
        edge_blocks.append(block)
    trace = np.concatenate(traces)
    edges = np.concatenate(edge_blocks)
    best = float(trace.min())
    ties = np.flatnonzero(np.abs(trace - best) <= 1e-9 * best)
    argmin = [
        InterconnectionStrategy.from_edges(M, f, [(int(p) + 1, int(q) + 1) for p, q in edges[i]]) for i in ties
    ]
    star = build_star(M, f)
    runner_up = float(np.min(np.delete(trace, ties))) if trace.size > ties.size else None
    report = {
        "M": M,
        "f": f,
        "tree_count": int(trace.size),
        "min_trace": best,
        "argmin_count": int(ties.size),
        "argmin_edges": [s.edges for s in argmin],
        "argmin_is_star": all(s == star for s in argmin),
        "unique_minimizer": bool(ties.size == 1),
        "runner_up_trace": runner_up,
    }
    if resolved["format"] == "json":
        text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        for key in sorted(report):
            writer.writerow([key, json.dumps(report[key])])
        text = buf.getvalue()
    _emit(text, resolved)
    return EXIT_OK if report["argmin_is_star"] else 1


def cmd_sweep(resolved: dict) -> int:
    cfg = SweepConfig(
        M=int(resolved["M"]), f=int(resolved["f"]), strategies=_split(resolved["strategies"]),
        snr_grid_db=parse_snr_grid(resolved["snr"]), trials=int(resolved["trials"]),
        sigma_h_sq=float(resolved["sigma_h"]), a=float(resolved["a"]), b=float(resolved["b"]),
        mode=resolved["mode"], base_seed=int(resolved["seed"]), h=parse_complex(resolved["h"]),
        redraw_distortion=not resolved["fixed_distortion"], block_size=int(resolved["block_size"]),
        workers=int(resolved["threads"]),
    )
    result = run_sweep(cfg)
    for row in compare_strategies(result):
        if row.inversion:
            log.warning("rank inversion at %s dB: MSE order %s vs CRLB order %s", row.snr_db, row.by_mse, row.by_crlb)
    _emit(result.to_csv() if resolved["format"] == "csv" else result.to_json() + "\n", resolved)
    rate = result.exclusion_rate
    if rate > float(resolved["max_exclusion_rate"]):
        log.error("excluded-trial rate %.4g exceeds threshold %.4g", rate, resolved["max_exclusion_rate"])
        return EXIT_EXCLUSIONS
    return EXIT_OK


def cmd_dl(resolved: dict) -> int:
    cfg = DlConfig(
        M=int(resolved["M"]), K=int(resolved["K"]), f=int(resolved["f"]), strategies=_split(resolved["strategies"]),
        snr_grid_db=parse_snr_grid(resolved["snr"]), schemes=_split(resolved["schemes"]), draws=int(resolved["draws"]),
        mode=resolved["mode"], a=float(resolved["a"]), b=float(resolved["b"]), h=parse_complex(resolved["h"]),
        sigma_h_sq=float(resolved["sigma_h"]), seed=int(resolved["seed"]),
    )
    result = run_dl_experiment(cfg)
    if resolved["format"] == "csv":
        text = result.to_csv()
    else:
        rows = [
            {k: getattr(r, k) for k in ("strategy", "scheme", "calibration_snr_db", "avg_sum_se", "stderr", "draws", "exclusions")}
            for r in result.rows
        ]
        text = json.dumps({"rows": rows}, indent=2, sort_keys=True) + "\n"
    _emit(text, resolved)
    total = sum(r.draws for r in result.rows)
    rate = sum(r.exclusions for r in result.rows) / total
    if rate > float(resolved["max_exclusion_rate"]):
        log.error("excluded-draw rate %.4g exceeds threshold %.4g", rate, resolved["max_exclusion_rate"])
        return EXIT_EXCLUSIONS
    return EXIT_OK


def cmd_estimate(resolved: dict) -> int:
    if not resolved["measurements"]:
        raise SelfCalError("--measurements is required")
    data = json.loads(Path(resolved["measurements"]).read_text(encoding="utf-8"))
    meas = MeasurementSet.from_dict(data)
    strategy = meas.strategy
    if resolved["strategy"]:
        strategy = parse_strategy_spec(resolved["strategy"], strategy.antenna_count, strategy.reference)
        if strategy != meas.strategy:
            raise SelfCalError("strategy does not match the lines present in the measurement file")
    paths = compute_paths(strategy)
    known = data.get("known", {})
    if resolved["mode"] == "full":
        alpha_f = parse_complex(resolved["alpha_f"] if resolved["alpha_f"] is not None else known.get("alpha_f"))
        beta_f = parse_complex(resolved["beta_f"] if resolved["beta_f"] is not None else known.get("beta_f"))
        if alpha_f is None or beta_f is None:
            raise SelfCalError("full calibration needs the reference gains (--alpha-f/--beta-f or 'known' in the file)")
        h = parse_complex(resolved["h"]) if resolved["h"] is not None else meas.channel.h
        est = estimate_full(meas, paths, (alpha_f, beta_f), h)
        log.info("residual %.3e", residual_full(est, meas, strategy, h))
        rows = [(m + 1, est.alpha_hat[m], est.beta_hat[m]) for m in range(strategy.antenna_count)]
        header = ["antenna", "alpha_re", "alpha_im", "beta_re", "beta_im"]
    elif resolved["mode"] == "relative":
        c_f = resolved["c_f"] if resolved["c_f"] is not None else known.get("c_f")
        if c_f is None and "alpha_f" in known and "beta_f" in known:
            c_f = parse_complex(known["beta_f"]) / parse_complex(known["alpha_f"])
        if c_f is None:
            raise SelfCalError("relative calibration needs the reference coefficient (--c-f or 'known' in the file)")
        est = estimate_relative(meas, paths, parse_complex(c_f))
        log.info("residual %.3e", residual_relative(est, meas, strategy))
        rows = [(m + 1, est.c_hat[m]) for m in range(strategy.antenna_count)]
        header = ["antenna", "c_re", "c_im"]
    else:
        raise SelfCalError(f"unknown mode {resolved['mode']!r}")
    if resolved["format"] == "json":
        text = dumps_estimate(est) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            out = [row[0]]
            for z in row[1:]:
                out += [repr(float(z.real)), repr(float(z.imag))]
            writer.writerow(out)
        text = buf.getvalue()
    _emit(text, resolved)
    return EXIT_OK


COMMANDS = {
    "crlb": cmd_crlb,
    "verify-optimality": cmd_verify_optimality,
    "sweep": cmd_sweep,
    "dl": cmd_dl,
    "estimate": cmd_estimate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with parameters (flags override it)")
    common.add_argument("--output", "-o", help="output file (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="selfcal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def array_args(p, strategy=True):
        if strategy:
            p.add_argument("--strategy", help="star | daisy | combined:<z> | file:<path>")
        p.add_argument("--M", type=int, help="number of antennas")
        p.add_argument("--f", type=int, help="reference antenna (1-based)")
        p.add_argument("--a", type=float, help="transmit gain amplitude")
        p.add_argument("--b", type=float, help="receive gain amplitude")
        p.add_argument("--h", help="nominal line gain, e.g. 1 or 0.8,0.2")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("crlb", parents=[common], help="closed-form and numerical CRLBs for one strategy")
    array_args(p)
    p.add_argument("--snr", type=float, help="calibration SNR in dB")

    p = sub.add_parser("verify-optimality", parents=[common], help="exhaustive search over all trees")
    array_args(p, strategy=False)
    p.add_argument("--snr", type=float)
    p.add_argument("--cap", type=int, help=f"largest M to enumerate (default {DEFAULT_ENUMERATION_CAP})")

    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo MSE vs CRLB sweep")
    array_args(p, strategy=False)
    p.add_argument("--mode", choices=["full", "relative"])
    p.add_argument("--strategies", help="comma list of strategy specs")
    p.add_argument("--snr", help="lo:hi:step or comma list (dB)")
    p.add_argument("--trials", type=int)
    p.add_argument("--sigma-h", dest="sigma_h", type=float, help="line distortion variance")
    p.add_argument("--block-size", dest="block_size", type=int)
    p.add_argument("--fixed-distortion", dest="fixed_distortion", action="store_const", const=True,
                   help="draw line distortions once per strategy instead of every trial")
    p.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    p.add_argument("--max-exclusion-rate", dest="max_exclusion_rate", type=float)

    p = sub.add_parser("dl", parents=[common], help="downlink spectral efficiency with calibrated reciprocity")
    array_args(p, strategy=False)
    p.add_argument("--K", type=int, help="number of users")
    p.add_argument("--strategies")
    p.add_argument("--snr", help="calibration SNR grid, lo:hi:step or comma list (dB)")
    p.add_argument("--schemes", help="comma list of mf,zf")
    p.add_argument("--draws", type=int)
    p.add_argument("--mode", choices=["full", "relative"])
    p.add_argument("--sigma-h", dest="sigma_h", type=float)
    p.add_argument("--max-exclusion-rate", dest="max_exclusion_rate", type=float)

    p = sub.add_parser("estimate", parents=[common], help="run the recursive estimator on a measurement file")
    p.add_argument("--measurements", help="measurement JSON file")
    p.add_argument("--strategy", help="optional strategy spec; must match the file's lines")
    p.add_argument("--mode", choices=["full", "relative"])
    p.add_argument("--h", help="known line gain (default: channel h from the file)")
    p.add_argument("--alpha-f", dest="alpha_f", help="reference transmit gain re,im")
    p.add_argument("--beta-f", dest="beta_f", help="reference receive gain re,im")
    p.add_argument("--c-f", dest="c_f", help="reference relative coefficient re,im")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        resolved = _resolve(args.command, args)
        log.info("resolved config: %s", json.dumps(resolved, sort_keys=True))
        return COMMANDS[args.command](resolved)
    except (SelfCalError, ValueError, OSError) as exc:
        print(f"selfcal {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
