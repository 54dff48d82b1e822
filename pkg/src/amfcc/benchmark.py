"""Monte Carlo comparison of the adaptive chart against MFCC, MCC and DCC."""

import csv
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import charting, competitors, simgen
from .basis import make_basis
from .config import RunConfig
from .errors import AMFCCError, NumericError

log = logging.getLogger(__name__)

_ROLE = {"train": 1, "tune": 2, "test": 3}
_SCEN = {"bessel": 1, "gaussian": 2}
_SHIFT = {"none": 0, "A": 1, "B": 2, "C": 3, "D": 4}

REPORT_COLUMNS = [
    "method", "scenario", "delta_c", "shift", "severity", "metric", "rate",
    "c_metric", "c_rate", "replicates", "failures",
]


def stream_seed(seed: int, *key: int) -> int:
    """Deterministic 63-bit seed for a named stream."""
    state = np.random.SeedSequence([int(seed), *[int(k) for k in key]]).generate_state(2, np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


@dataclass
class BenchmarkReport:
    rows: list = field(default_factory=list)
    wall_time: float = 0.0
    failures: dict = field(default_factory=dict)
    p: int = 0

    def columns(self) -> list:
        return REPORT_COLUMNS[:9] + [f"c_rate_{k}" for k in range(1, self.p + 1)] + REPORT_COLUMNS[9:]

    def lookup(self, method, shift, severity, scenario="bessel", delta_c=1.0) -> dict:
        for r in self.rows:
            if (r["method"], r["shift"], r["severity"], r["scenario"], r["delta_c"]) == (
                method, shift, float(severity), scenario, float(delta_c)
            ):
                return r
        raise KeyError((method, shift, severity, scenario, delta_c))

    def write_csv(self, path) -> None:
        cols = self.columns()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in self.rows:
                w.writerow([_cell(r.get(c)) for c in cols])


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _test_cells(cfg):
    """(shift, severity) pairs; severity 0 is the in-control set, listed once."""
    out = []
    if any(d == 0 for d in cfg.benchmark.severities):
        out.append(("none", 0.0))
    for shift in cfg.benchmark.shifts:
        for d in cfg.benchmark.severities:
            if d > 0:
                out.append((simgen.ScenarioSpec(shift=shift).shift, float(d)))
    return out


def _fit_methods(cfg, basis, train, tune, methods):
    ch = cfg.chart
    fitted = {}
    want_amfcc = [m for m in methods if m.startswith("amfcc")]
    if want_amfcc:
        lambdas = charting.default_lambdas(ch.lambda_min, ch.lambda_max, ch.n_lambdas)
        grid = charting.ParameterGrid(lambdas, tuple(ch.deltas))
        base = charting.fit_chart(
            basis, train, tune, grid, ch.alpha, "fisher", ch.alpha_k, None, ch.dense_points,
        )
        for m in want_amfcc:
            comb = "fisher" if m == "amfcc-f" else "tippett"
            fitted[m] = base if comb == "fisher" else charting.with_combiner(base, comb)
    mf = [m for m in methods if m.startswith("mfcc")]
    if mf:
        deltas = [int(m[4:]) / 10 for m in mf]
        for m, model in zip(mf, competitors.fit_mfcc_family(
            basis, train, tune, deltas, ch.alpha, ch.mfcc_lambda, ch.alpha_k, ch.dense_points,
        )):
            fitted[m] = model
    if "mcc" in methods:
        fitted["mcc"] = competitors.fit_mcc(train, tune, ch.alpha)
    if "dcc" in methods:
        fitted["dcc"] = competitors.fit_dcc(train, tune, ch.alpha)
    return fitted


def _score(model, samples):
    """(signal, flagged or None, chart-data series) for one method on one test set."""
    if isinstance(model, charting.ChartModel):
        res = charting.score_batch(model, samples)
        series = {"": (res.combined, model.control_limit, model.combined_reference)}
        return res.signal, res.flagged, series
    res = competitors.score_competitor_batch(model, samples)
    if isinstance(model, competitors.MFCCModel):
        series = {"_t2": (res.statistics["t2"], model.t2_limit, None),
                  "_spe": (res.statistics["spe"], model.spe_limit, None)}
    else:
        series = {"": (res.statistics["t2"], model.limit, None)}
    return res.signal, res.flagged, series


def _replicate(cfg, basis, scenario, delta_c, rep, cells, methods):
    spec = simgen.ScenarioSpec(
        scenario=scenario, delta_c=delta_c, p=cfg.scenario.p, n_points=cfg.scenario.n_points,
        noise_sd=cfg.scenario.noise_sd,
    )
    key = (_SCEN[spec.scenario], int(round(delta_c * 1000)), rep)
    b = cfg.benchmark
    train = simgen.generate(spec.with_(seed=stream_seed(cfg.seed, *key, _ROLE["train"])), b.n_train, id_prefix="train")
    tune = simgen.generate(spec.with_(seed=stream_seed(cfg.seed, *key, _ROLE["tune"])), b.n_tune, id_prefix="tune")
    fitted = _fit_methods(cfg, basis, train, tune, methods)
    out = {}
    for shift, d in cells:
        tspec = spec.with_(shift=shift, severity=d,
                           seed=stream_seed(cfg.seed, *key, _ROLE["test"], _SHIFT[shift], int(round(d * 1000))))
        test = simgen.generate(tspec, b.n_test, id_prefix="test")
        for m in methods:
            signal, flagged, series = _score(fitted[m], test)
            out[(m, shift, d)] = (
                float(np.mean(signal)),
                None if flagged is None else np.mean(flagged, axis=0),
                series,
            )
    return out


def _write_chart_data(outdir: Path, name: str, statistic, limit, tuning) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / f"{name}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "statistic", "limit", "phase"])
        idx = 1
        if tuning is not None:
            for v in tuning:
                w.writerow([idx, repr(float(v)), repr(float(limit)), "tuning"])
                idx += 1
        for v in statistic:
            w.writerow([idx, repr(float(v)), repr(float(limit)), "phase2"])
            idx += 1


def run_benchmark(cfg: RunConfig, outdir=None) -> BenchmarkReport:
    """Replicated FAR/TDR and cFAR/cTDR study; writes report files when ``outdir`` is given."""
    t0 = time.perf_counter()
    b = cfg.benchmark
    basis = make_basis(0.0, 1.0, cfg.chart.n_basis)
    methods = [m for m in cfg.benchmark.methods]
    cells = _test_cells(cfg)
    report = BenchmarkReport(p=cfg.scenario.p)
    outdir = None if outdir is None else Path(outdir)

    for scenario in b.scenarios:
        for delta_c in b.delta_cs:
            delta_c = float(delta_c)
            scen_name = simgen.ScenarioSpec(scenario=scenario).scenario

            def task(rep):
                try:
                    return rep, _replicate(cfg, basis, scen_name, delta_c, rep, cells, methods), None
                except (AMFCCError, np.linalg.LinAlgError) as exc:
                    log.warning("replicate %d (%s, D%g) failed: %s", rep, scen_name, delta_c, exc)
                    return rep, None, f"{type(exc).__name__}: {exc}"

            reps = list(range(b.replicates))
            if cfg.n_threads > 1 and len(reps) > 1:
                with ThreadPoolExecutor(max_workers=cfg.n_threads) as ex:
                    results = list(ex.map(task, reps))
            else:
                results = [task(r) for r in reps]
            ok = [(r, res) for r, res, err in results if res is not None]
            failed = {r: err for r, _, err in results if err is not None}
            report.failures[(scen_name, delta_c)] = failed
            if len(failed) > b.max_failure_fraction * b.replicates:
                raise NumericError(f"{len(failed)} of {b.replicates} replicates failed for {scen_name} D{delta_c:g}")

            for m in methods:
                for shift, d in cells:
                    rates = [res[(m, shift, d)][0] for _, res in ok]
                    comp = [res[(m, shift, d)][1] for _, res in ok]
                    ic = d == 0
                    row = {
                        "method": m, "scenario": scen_name, "delta_c": delta_c, "shift": shift, "severity": d,
                        "metric": "FAR" if ic else "TDR", "rate": float(np.mean(rates)),
                        "replicates": len(ok), "failures": len(failed),
                    }
                    if comp and comp[0] is not None:
                        per = np.mean(comp, axis=0)
                        row["c_metric"] = "cFAR" if ic else "cTDR"
                        row["c_rate"] = float(np.mean(per))
                        for k, v in enumerate(per, start=1):
                            row[f"c_rate_{k}"] = float(v)
                    report.rows.append(row)

            if outdir is not None and b.chart_data and ok:
                rep0 = ok[0][1]
                for (m, shift, d), (_, _, series) in sorted(rep0.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
                    for suffix, (stat, limit, tuning) in series.items():
                        name = f"{m}{suffix}_{scen_name}_D{delta_c:g}_{shift}_d{d:g}"
                        _write_chart_data(outdir / "chartdata", name, stat, limit, tuning)

    report.wall_time = time.perf_counter() - t0
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        report.write_csv(outdir / "report.csv")
        # timing lives apart from report.csv so the report is reproducible byte for byte
        (outdir / "timing.json").write_text(json.dumps({"wall_time_s": report.wall_time}))
    return report
