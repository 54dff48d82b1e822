"""``amfcc`` command-line entry point."""

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import charting, io, simgen
from .basis import make_basis
from .benchmark import _write_chart_data, run_benchmark
from .config import METHODS, MODES, RunConfig
from .errors import ConfigError, DataError, NumericError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("amfcc")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="amfcc", description="Adaptive multivariate functional control chart.")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--seed", type=int, help="override the configured seed")
    ap.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    ap.add_argument("--method", action="append", choices=METHODS,
                    help="benchmark method; repeat to select several (default: all configured)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _resolve(cfg: RunConfig, args) -> RunConfig:
    cfg.mode = args.mode
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    if args.method:
        cfg.benchmark.methods = list(dict.fromkeys(args.method))
    cfg.validate()
    return cfg


def _need(path, what):
    if not path:
        raise ConfigError(f"paths.{what} is required for this mode")
    return path


def _read(path):
    try:
        return io.load_samples(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x):
    return repr(float(x))


def cmd_simulate(cfg, out):
    samples = simgen.generate(cfg.scenario_spec(), cfg.simulate.n)
    path = out / "samples.csv"
    io.save_samples(samples, path)
    log.info("wrote %d observations to %s", len(samples), path)


def cmd_fit(cfg, out):
    p = cfg.paths
    if p.train and p.tune:
        train, tune = _read(p.train), _read(p.tune)
    else:
        pool = _read(_need(p.input, "input (or paths.train and paths.tune)"))
        cut = int(round(cfg.chart.train_fraction * len(pool)))
        train, tune = pool[:cut], pool[cut:]
    ch = cfg.chart
    grid = charting.ParameterGrid(charting.default_lambdas(ch.lambda_min, ch.lambda_max, ch.n_lambdas), tuple(ch.deltas))
    chart = charting.fit_chart(
        make_basis(0.0, 1.0, ch.n_basis), train, tune, grid, ch.alpha, ch.combiner, ch.alpha_k,
        ch.diag_combiner, ch.dense_points, cfg.n_threads,
    )
    model_path = Path(p.model) if p.model else out / "model.json"
    io.save_model(chart, model_path)
    _write_chart_data(out, "chart_tuning", [], chart.control_limit, chart.combined_reference)
    log.info("fitted %d cells; control limit %.6g; model saved to %s", chart.grid.T, chart.control_limit, model_path)


def _load_chart(cfg):
    path = _need(cfg.paths.model, "model")
    try:
        return io.load_model(path)
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc


def cmd_monitor(cfg, out):
    chart = _load_chart(cfg)
    res = charting.score_batch(chart, _read(_need(cfg.paths.input, "input")), cfg.n_threads)
    _write_csv(out / "monitor.csv", ["obs_id", "combined", "limit", "signal"], [
        [oid, _fmt(c), _fmt(chart.control_limit), int(s)]
        for oid, c, s in zip(res.obs_ids, res.combined, res.signal)
    ])
    _write_chart_data(out, "chart_monitor", res.combined, chart.control_limit, chart.combined_reference)
    log.info("%d of %d observations signal", int(res.signal.sum()), len(res.obs_ids))


def cmd_diagnose(cfg, out):
    chart = _load_chart(cfg)
    res = charting.score_batch(chart, _read(_need(cfg.paths.input, "input")), cfg.n_threads)
    limits = chart.diag_reference.limits
    rows, doc = [], []
    for i, oid in enumerate(res.obs_ids):
        for k in range(chart.p):
            rows.append([oid, k + 1, _fmt(res.contributions[i, k]), _fmt(limits[k]), int(res.flagged[i, k])])
        doc.append({
            "obs_id": oid,
            "signal": bool(res.signal[i]),
            "components": [
                {"component": k + 1, "value": float(res.contributions[i, k]), "limit": float(limits[k]),
                 "flagged": bool(res.flagged[i, k])}
                for k in range(chart.p)
            ],
        })
    _write_csv(out / "diagnose.csv", ["obs_id", "component", "value", "limit", "flagged"], rows)
    (out / "diagnose.json").write_text(json.dumps(doc, indent=1))
    log.info("flagged components in %d of %d observations", int(res.flagged.any(axis=1).sum()), len(res.obs_ids))


def cmd_benchmark(cfg, out):
    report = run_benchmark(cfg, out)
    log.info("benchmark: %d rows in %.1f s", len(report.rows), report.wall_time)


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "monitor": cmd_monitor,
    "diagnose": cmd_diagnose,
    "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore")
    try:
        cfg = _resolve(RunConfig.load(args.config), args)
        out = cfg.output_dir()
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[cfg.mode](cfg, out)
    except ConfigError as exc:
        print(f"amfcc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"amfcc: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"amfcc: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
