"""Run configuration for the command-line tool."""

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError

MODES = ("simulate", "fit", "monitor", "diagnose", "benchmark")
METHODS = ("amfcc-f", "amfcc-t", "mfcc07", "mfcc08", "mfcc09", "mcc", "dcc")
OUTPUT_ENV = "AMFCC_OUTPUT_DIR"


def _from_dict(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    return cls(**data)


@dataclass
class Paths:
    input: Optional[str] = None  # samples to monitor/diagnose, or Phase I pool for fit
    train: Optional[str] = None
    tune: Optional[str] = None
    model: Optional[str] = None
    output_dir: Optional[str] = None


@dataclass
class ChartSettings:
    n_basis: int = 20
    lambda_min: float = 1e-6
    lambda_max: float = 1e2
    n_lambdas: int = 10
    deltas: list = field(default_factory=lambda: [0.40, 0.50, 0.60, 0.70, 0.80, 0.90, 0.95, 0.99])
    alpha: float = 0.05
    alpha_k: Optional[float] = None
    combiner: str = "fisher"
    diag_combiner: Optional[str] = None
    dense_points: int = 512
    mfcc_lambda: float = 1e-2
    train_fraction: float = 0.5  # split of paths.input when train/tune are not given

    def validate(self):
        if self.n_basis < 5:
            raise ConfigError("chart.n_basis must be >= 5")
        if not 0 < self.lambda_min <= self.lambda_max:
            raise ConfigError("chart.lambda_min/lambda_max must satisfy 0 < min <= max")
        if self.n_lambdas < 1 or (self.n_lambdas > 1 and self.lambda_min == self.lambda_max):
            raise ConfigError("chart.n_lambdas must be >= 1 and the lambda range non-degenerate")
        if not self.deltas or any(not 0 < d < 1 for d in self.deltas) or sorted(set(self.deltas)) != list(self.deltas):
            raise ConfigError("chart.deltas must be strictly increasing values in (0, 1)")
        for name in ("alpha", "alpha_k"):
            v = getattr(self, name)
            if v is not None and not 0 < v < 0.5:
                raise ConfigError(f"chart.{name} must be in (0, 0.5)")
        for name in ("combiner", "diag_combiner"):
            v = getattr(self, name)
            if v is not None and v not in ("fisher", "tippett"):
                raise ConfigError(f"chart.{name} must be 'fisher' or 'tippett'")
        if self.dense_points < 16:
            raise ConfigError("chart.dense_points must be >= 16")
        if not self.mfcc_lambda > 0:
            raise ConfigError("chart.mfcc_lambda must be positive")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("chart.train_fraction must be in (0, 1)")


@dataclass
class ScenarioSettings:
    scenario: str = "bessel"
    delta_c: float = 1.0
    p: int = 5
    n_points: int = 100
    noise_sd: float = 0.1
    shift: str = "none"
    severity: float = 0.0


@dataclass
class SimulateSettings:
    n: int = 100


@dataclass
class BenchmarkSettings:
    scenarios: list = field(default_factory=lambda: ["bessel"])
    delta_cs: list = field(default_factory=lambda: [1.0])
    shifts: list = field(default_factory=lambda: ["A", "B", "C", "D"])
    severities: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    n_train: int = 300
    n_tune: int = 300
    n_test: int = 200
    replicates: int = 10
    methods: list = field(default_factory=lambda: list(METHODS))
    chart_data: bool = True
    max_failure_fraction: float = 0.2

    def validate(self):
        if self.replicates < 1:
            raise ConfigError("benchmark.replicates must be >= 1")
        if self.n_train < 10 or self.n_tune < 20 or self.n_test < 1:
            raise ConfigError("benchmark sizes: n_train >= 10, n_tune >= 20, n_test >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"benchmark.methods: unknown {bad}; choose from {METHODS}")
        if any(d < 0 for d in self.severities):
            raise ConfigError("benchmark.severities must be nonnegative")
        if not self.scenarios or not self.delta_cs:
            raise ConfigError("benchmark needs at least one scenario and one delta_c")


PRESETS = {
    "desk": {"n_train": 300, "n_tune": 300, "n_test": 200, "replicates": 10},
    "full": {"n_train": 1000, "n_tune": 1000, "n_test": 500, "replicates": 50},
}


@dataclass
class RunConfig:
    mode: Optional[str] = None
    seed: int = 0
    threads: Optional[int] = None
    paths: Paths = field(default_factory=Paths)
    chart: ChartSettings = field(default_factory=ChartSettings)
    scenario: ScenarioSettings = field(default_factory=ScenarioSettings)
    simulate: SimulateSettings = field(default_factory=SimulateSettings)
    benchmark: BenchmarkSettings = field(default_factory=BenchmarkSettings)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        top = {"mode", "seed", "threads", "paths", "chart", "scenario", "simulate", "benchmark", "preset"}
        unknown = sorted(set(data) - top)
        if unknown:
            raise ConfigError(f"unknown top-level key(s) {unknown}")
        bench = dict(data.get("benchmark") or {})
        preset = data.get("preset")
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
            bench = {**PRESETS[preset], **bench}
        try:
            cfg = cls(
                mode=data.get("mode"),
                seed=data.get("seed", 0),
                threads=data.get("threads"),
                paths=_from_dict(Paths, data.get("paths"), "paths"),
                chart=_from_dict(ChartSettings, data.get("chart"), "chart"),
                scenario=_from_dict(ScenarioSettings, data.get("scenario"), "scenario"),
                simulate=_from_dict(SimulateSettings, data.get("simulate"), "simulate"),
                benchmark=_from_dict(BenchmarkSettings, bench, "benchmark"),
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def validate(self) -> None:
        if self.mode is not None and self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.threads is not None and (not isinstance(self.threads, int) or self.threads < 1):
            raise ConfigError("threads must be a positive integer")
        self.chart.validate()
        self.benchmark.validate()
        if self.simulate.n < 1:
            raise ConfigError("simulate.n must be >= 1")
        self.scenario_spec()

    def scenario_spec(self, seed: Optional[int] = None):
        from .simgen import ScenarioSpec

        sc = self.scenario
        return ScenarioSpec(
            scenario=sc.scenario, delta_c=float(sc.delta_c), p=int(sc.p), n_points=int(sc.n_points),
            noise_sd=float(sc.noise_sd), shift=sc.shift, severity=float(sc.severity),
            seed=self.seed if seed is None else seed,
        )

    @property
    def n_threads(self) -> int:
        return self.threads or os.cpu_count() or 1

    def output_dir(self) -> Path:
        return Path(self.paths.output_dir or os.environ.get(OUTPUT_ENV) or "amfcc_out")
