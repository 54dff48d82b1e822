"""Simulated in-control and out-of-control multichannel profiles.

Components follow a zero-mean Gaussian process with covariance

    G_{k1 k2}(s, t) = 0.01 / ((8 / delta_c) |k1 - k2| + 1) * rho(s - t, delta_c)

observed on an equally spaced grid with i.i.d. Gaussian noise. Out-of-control
samples add the same mean shift to every component.
"""

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ConfigError, NumericError
from .smoothing import DiscreteSample

SCENARIOS = ("bessel", "gaussian")
SHIFTS = ("none", "A", "B", "C", "D")

_SERIES_TOL = 1e-14
_SERIES_MAX_TERMS = 200
_JITTER_START = 1e-12
_JITTER_MAX = 1e-6


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str = "bessel"
    delta_c: float = 1.0
    p: int = 5
    n_points: int = 100
    noise_sd: float = 0.1
    shift: str = "none"
    severity: float = 0.0
    seed: int = 0

    def __post_init__(self):
        scen = str(self.scenario).lower()
        if scen in ("1", "scenario1"):
            scen = "bessel"
        elif scen in ("2", "scenario2"):
            scen = "gaussian"
        if scen not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        shift = "none" if self.shift in (None, "None", "none", "") else str(self.shift).upper()
        if shift not in SHIFTS:
            raise ConfigError(f"unknown shift {self.shift!r}; expected one of {SHIFTS}")
        if not self.delta_c > 0:
            raise ConfigError("delta_c must be positive")
        if self.n_points < 2:
            raise ConfigError("n_points must be at least 2")
        if self.p < 1:
            raise ConfigError("p must be at least 1")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be nonnegative")
        if self.severity < 0:
            raise ConfigError("severity must be nonnegative")
        object.__setattr__(self, "scenario", scen)
        object.__setattr__(self, "shift", shift)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_points)

    def with_(self, **changes) -> "ScenarioSpec":
        return replace(self, **changes)


@lru_cache(maxsize=4096)
def bessel_j0_series(x: float) -> float:
    """J0(x) from its power series, summed exactly in rational arithmetic."""
    q = Fraction(x) ** 2 / 4
    term = Fraction(1)
    total = Fraction(1)
    for j in range(1, _SERIES_MAX_TERMS):
        term = -term * q / (j * j)
        total += term
        if abs(term) < _SERIES_TOL:
            break
    return float(total)


def correlation_rho(scenario: str, z: float, delta_c: float) -> float:
    az = abs(float(z))
    if az > 1:
        raise ConfigError(f"|z| must be <= 1, got {z}")
    if scenario == "bessel":
        prefactor = -10 * ((1 - az) - 1) / (1 + (delta_c - 1) * 4) + 1
        return bessel_j0_series(az * 50 / 3) / prefactor
    if scenario == "gaussian":
        return math.exp(-((az * 40 / delta_c) ** 2))
    raise ConfigError(f"unknown scenario {scenario!r}")


def _raw_covariance(spec: ScenarioSpec) -> np.ndarray:
    t = spec.grid
    lags = np.abs(t[:, None] - t[None, :])
    uniq, inv = np.unique(lags, return_inverse=True)
    rho = np.array([correlation_rho(spec.scenario, z, spec.delta_c) for z in uniq])[inv].reshape(lags.shape)
    k = np.arange(spec.p)
    between = 0.01 / ((8 / spec.delta_c) * np.abs(k[:, None] - k[None, :]) + 1)
    cov = np.kron(between, rho)
    return 0.5 * (cov + cov.T)


@lru_cache(maxsize=16)
def _factor(scenario, delta_c, p, n_points):
    spec = ScenarioSpec(scenario=scenario, delta_c=delta_c, p=p, n_points=n_points)
    cov = _raw_covariance(spec)
    scale = float(np.mean(np.diag(cov)))
    eps = 0.0
    while True:
        try:
            chol = np.linalg.cholesky(cov + eps * np.eye(cov.shape[0]) if eps else cov)
            break
        except np.linalg.LinAlgError:
            eps = _JITTER_START * scale if eps == 0 else 2 * eps
            if eps > _JITTER_MAX * scale:
                raise NumericError(f"covariance not factorizable with jitter up to {_JITTER_MAX * scale:g}")
    chol.setflags(write=False)
    return chol, eps


def build_covariance(spec: ScenarioSpec) -> np.ndarray:
    """Stacked (p * n_points) covariance, with any diagonal jitter the factorization needed."""
    _, eps = _factor(spec.scenario, spec.delta_c, spec.p, spec.n_points)
    cov = _raw_covariance(spec)
    if eps:
        cov = cov + eps * np.eye(cov.shape[0])
    return cov


def covariance_jitter(spec: ScenarioSpec) -> float:
    return _factor(spec.scenario, spec.delta_c, spec.p, spec.n_points)[1]


def shift_mean(shift: str, d: float, t):
    """Mean shift profile added to every component."""
    t = np.asarray(t, dtype=np.float64)
    shift = "none" if shift in (None, "None", "none") else str(shift).upper()
    if shift == "none":
        out = np.zeros_like(t)
    elif shift == "A":
        inside = (t >= 0.25) & (t <= 0.75)
        out = np.where(inside, d * 0.07 / (0.75 - 0.5) ** 2 * (t - 0.5) ** 2 - d * 0.07, 0.0)
    elif shift == "B":
        out = np.where(t >= 0.5, -d * 0.09 / (1 - 0.5) * (t - 0.5), 0.0)
    elif shift == "C":
        out = d * 0.05 * np.sin(t * 2 * np.pi)
    elif shift == "D":
        out = d * 0.12 * t**2 - d * 0.06
    else:
        raise ConfigError(f"unknown shift {shift!r}")
    return out if out.ndim else float(out)


def observation_streams(seed: int, n: int, start: int = 0):
    """One Philox generator per observation; stream i depends only on (seed, i)."""
    return [
        np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(start + i,))))
        for i in range(n)
    ]


def generate_values(spec: ScenarioSpec, n: int, start: int = 0) -> np.ndarray:
    """Raw values with shape (n, p, n_points)."""
    if n < 0:
        raise ConfigError("n must be nonnegative")
    chol, _ = _factor(spec.scenario, spec.delta_c, spec.p, spec.n_points)
    dim = spec.p * spec.n_points
    latent = np.empty((n, dim))
    noise = np.empty((n, dim))
    for i, rng in enumerate(observation_streams(spec.seed, n, start)):
        latent[i] = rng.standard_normal(dim)
        noise[i] = rng.standard_normal(dim)
    x = latent @ chol.T
    x = x.reshape(n, spec.p, spec.n_points)
    x += shift_mean(spec.shift, spec.severity, spec.grid)
    x += spec.noise_sd * noise.reshape(n, spec.p, spec.n_points)
    return x


def generate(spec: ScenarioSpec, n: int, start: int = 0, id_prefix: str = "") -> list:
    if n < 1:
        raise ConfigError("n must be at least 1")
    vals = generate_values(spec, n, start)
    grid = spec.grid
    grids = (grid,) * spec.p
    return [
        DiscreteSample(f"{id_prefix}{start + i}", grids, tuple(vals[i]))
        for i in range(n)
    ]
