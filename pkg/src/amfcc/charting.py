"""Adaptive chart: partial T^2 tests over a (lambda, L) grid combined through empirical p-values."""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Hashable, Optional, Sequence

import numpy as np

from . import diagnostics
from .basis import BasisSystem
from .errors import DataError, DegenerateModelWarning, NumericError
from .mfpca import DENSE_POINTS, MFPCAModel, ScoreVector, fit_mfpca_arrays, scores_from_standardized, standardize, truncate_rank_values
from .smoothing import DiscreteSample, _DesignCache, smooth_batch_arrays
from .stats import COMBINERS, combine, combine_fisher, combine_tippett, empirical_pvalue, empirical_quantile, pvalues_against

__all__ = [
    "ParameterGrid",
    "ChartModel",
    "MonitorResult",
    "partial_t2",
    "empirical_pvalue",
    "combine_fisher",
    "combine_tippett",
    "fit_chart",
    "monitor",
    "monitor_batch",
    "with_combiner",
]

DEFAULT_DELTAS = (0.40, 0.50, 0.60, 0.70, 0.80, 0.90, 0.95, 0.99)


def default_lambdas(lo: float = 1e-6, hi: float = 1e2, count: int = 10) -> tuple:
    return tuple(np.logspace(np.log10(lo), np.log10(hi), count))


@dataclass(frozen=True)
class ParameterGrid:
    lambdas: tuple = field(default_factory=default_lambdas)
    deltas: tuple = DEFAULT_DELTAS
    cells: tuple = ()  # (lambda_index, L) pairs, filled by fit_chart

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lambdas)
        del_ = tuple(float(v) for v in self.deltas)
        if not lam or not del_:
            raise DataError("parameter grid needs at least one lambda and one delta")
        if any(v <= 0 for v in lam) or any(b <= a for a, b in zip(lam, lam[1:])):
            raise DataError("lambdas must be positive and strictly increasing")
        if any(not 0 < v < 1 for v in del_) or any(b <= a for a, b in zip(del_, del_[1:])):
            raise DataError("deltas must lie in (0, 1) and be strictly increasing")
        cells = tuple((int(i), int(L)) for i, L in self.cells)
        if len(set(cells)) != len(cells):
            raise DataError("duplicate grid cells")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "deltas", del_)
        object.__setattr__(self, "cells", cells)

    @property
    def T(self) -> int:
        return len(self.cells)


@dataclass(frozen=True, eq=False)
class ChartModel:
    basis: BasisSystem
    grid: ParameterGrid
    models: tuple  # one MFPCAModel per lambda, None where the fit was dropped
    reference_partials: np.ndarray  # (n_tune, T)
    combined_reference: np.ndarray  # (n_tune,)
    control_limit: float
    alpha: float
    combiner: str
    diag_reference: Optional[diagnostics.DiagnosticReference] = None
    n_train: int = 0

    @property
    def n_tune(self) -> int:
        return self.reference_partials.shape[0]

    @property
    def p(self) -> int:
        return next(m for m in self.models if m is not None).p

    def sorted_reference(self) -> np.ndarray:
        cached = self.__dict__.get("_sorted")
        if cached is None:
            cached = np.sort(self.reference_partials, axis=0)
            object.__setattr__(self, "_sorted", cached)
        return cached


@dataclass(frozen=True, eq=False)
class MonitorResult:
    obs_id: Hashable
    partials: np.ndarray
    pvalues: np.ndarray
    combined: float
    signal: bool
    contributions: Optional[np.ndarray] = None  # combined contribution per component
    flagged_components: Optional[np.ndarray] = None


def partial_t2(model: MFPCAModel, scores: ScoreVector, L: int) -> float:
    """Hotelling-type statistic sum_{l<=L} xi_l^2 / eta_l."""
    if not 0 <= L <= model.rank:
        raise DataError(f"L={L} outside 0..{model.rank}")
    xi = np.asarray(scores.scores, dtype=np.float64)[:L]
    return float(np.sum(xi**2 / model.eigenvalues[:L]))


def resolve_cells(models: Sequence[Optional[MFPCAModel]], deltas: Sequence[float]) -> tuple:
    cells = []
    for i, m in enumerate(models):
        if m is None:
            continue
        levels = sorted({truncate_rank_values(m.eigenvalues, d) for d in deltas})
        cells.extend((i, L) for L in levels)
    return tuple(cells)


def _cells_by_lambda(cells):
    out = {}
    for t, (i, L) in enumerate(cells):
        out.setdefault(i, []).append((t, L))
    return out


def cell_statistics(basis, models, cells, samples, cache=None, n_jobs: int = 1):
    """Partial statistics (n, T) and component contributions (n, p, T) for every cell."""
    cache = cache if cache is not None else _DesignCache(basis)
    by_lambda = _cells_by_lambda(cells)
    n = len(samples)
    p = samples[0].p
    partials = np.empty((n, len(cells)))
    contrib = np.empty((n, p, len(cells)))

    def work(i):
        model = models[i]
        coeffs, _, _ = smooth_batch_arrays(basis, samples, model.lambda_, cache)
        ctilde = standardize(model, coeffs)
        xi = scores_from_standardized(model, ctilde)
        cum_t2 = np.cumsum(xi**2 / model.eigenvalues, axis=-1)
        cum_c = diagnostics.cumulative_contributions(model, ctilde, xi)
        return i, cum_t2, cum_c

    for i, cum_t2, cum_c in _map(work, sorted(by_lambda), n_jobs):
        for t, L in by_lambda[i]:
            partials[:, t] = cum_t2[:, L - 1]
            contrib[:, :, t] = cum_c[:, :, L - 1]
    return partials, contrib


def _map(fn, items, n_jobs):
    if n_jobs and n_jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _check_combiner(name):
    if name not in COMBINERS:
        raise DataError(f"unknown combiner {name!r}; expected one of {COMBINERS}")


def fit_chart(
    basis: BasisSystem,
    train: Sequence[DiscreteSample],
    tune: Sequence[DiscreteSample],
    grid: Optional[ParameterGrid] = None,
    alpha: float = 0.05,
    combiner: str = "fisher",
    alpha_k: Optional[float] = None,
    diag_combiner: Optional[str] = None,
    dense_points: int = DENSE_POINTS,
    n_jobs: int = 1,
) -> ChartModel:
    """Phase I: MFPCA per lambda on ``train``, reference distributions and limits on ``tune``."""
    train, tune = list(train), list(tune)
    if len(train) < 10:
        raise DataError(f"training set needs at least 10 observations, got {len(train)}")
    if len(tune) < 20:
        raise DataError(f"tuning set needs at least 20 observations, got {len(tune)}")
    if not 0 < alpha < 0.5:
        raise DataError(f"alpha must be in (0, 0.5), got {alpha}")
    alpha_k = alpha if alpha_k is None else alpha_k
    if not 0 < alpha_k < 0.5:
        raise DataError(f"alpha_k must be in (0, 0.5), got {alpha_k}")
    diag_combiner = combiner if diag_combiner is None else diag_combiner
    _check_combiner(combiner)
    _check_combiner(diag_combiner)
    grid = grid or ParameterGrid()
    cache = _DesignCache(basis)

    def fit_one(lam):
        coeffs, _, _ = smooth_batch_arrays(basis, train, lam, cache)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateModelWarning)
            model = fit_mfpca_arrays(basis, coeffs, lam, dense_points)
        return model if model.rank > 0 else None

    models = tuple(_map(fit_one, list(grid.lambdas), n_jobs))
    for lam, m in zip(grid.lambdas, models):
        if m is None:
            warnings.warn(f"MFPCA degenerate at lambda={lam:g}; its cells are dropped", DegenerateModelWarning, stacklevel=2)
    cells = resolve_cells(models, grid.deltas)
    if not cells:
        raise NumericError("every lambda produced a degenerate MFPCA model")
    grid = replace(grid, cells=cells)
    partials, contrib = cell_statistics(basis, models, cells, tune, cache, n_jobs)
    return _assemble_chart(basis, grid, models, partials, contrib, alpha, combiner, alpha_k, diag_combiner, len(train))


def _assemble_chart(basis, grid, models, partials, contrib, alpha, combiner, alpha_k, diag_combiner, n_train):
    srt = np.sort(partials, axis=0)
    combined = combine(pvalues_against(srt, partials), combiner)
    limit = empirical_quantile(combined, 1 - alpha)
    diag_ref = diagnostics.build_reference(contrib, alpha_k, diag_combiner)
    chart = ChartModel(basis, grid, models, partials, combined, limit, float(alpha), combiner, diag_ref, n_train)
    object.__setattr__(chart, "_sorted", srt)
    return chart


def with_combiner(chart: ChartModel, combiner: str, diag_combiner: Optional[str] = None) -> ChartModel:
    """Same Phase I fit and tuning statistics, different combining function."""
    _check_combiner(combiner)
    diag_combiner = combiner if diag_combiner is None else diag_combiner
    ref = chart.diag_reference
    return _assemble_chart(
        chart.basis, chart.grid, chart.models, chart.reference_partials, ref.raw,
        chart.alpha, combiner, ref.alpha, diag_combiner, chart.n_train,
    )


@dataclass(frozen=True, eq=False)
class BatchResult:
    """Array form of many :class:`MonitorResult` rows."""

    obs_ids: list
    partials: np.ndarray  # (m, T)
    pvalues: np.ndarray  # (m, T)
    combined: np.ndarray  # (m,)
    signal: np.ndarray  # (m,)
    raw_contributions: np.ndarray  # (m, p, T)
    contributions: np.ndarray  # (m, p)
    flagged: np.ndarray  # (m, p)

    def rows(self) -> list:
        return [
            MonitorResult(oid, self.partials[i], self.pvalues[i], float(self.combined[i]), bool(self.signal[i]),
                          self.contributions[i], self.flagged[i])
            for i, oid in enumerate(self.obs_ids)
        ]


def score_batch(chart: ChartModel, samples: Sequence[DiscreteSample], n_jobs: int = 1) -> BatchResult:
    samples = list(samples)
    if not samples:
        raise DataError("no observations to monitor")
    if samples[0].p != chart.p:
        raise DataError(f"observations have {samples[0].p} components, chart expects {chart.p}")
    partials, raw = cell_statistics(chart.basis, chart.models, chart.grid.cells, samples, n_jobs=n_jobs)
    pvals = pvalues_against(chart.sorted_reference(), partials)
    combined = combine(pvals, chart.combiner)
    contrib, flags = diagnostics.combine_contributions(chart, raw)
    return BatchResult(
        [s.obs_id for s in samples], partials, pvals, combined, combined > chart.control_limit, raw, contrib, flags
    )


def monitor_batch(chart: ChartModel, samples: Sequence[DiscreteSample], n_jobs: int = 1) -> list:
    return score_batch(chart, samples, n_jobs).rows()


def monitor(chart: ChartModel, obs: DiscreteSample) -> MonitorResult:
    """Phase II scoring of one observation."""
    try:
        return monitor_batch(chart, [obs])[0]
    except (DataError, NumericError) as exc:
        raise type(exc)(f"obs {obs.obs_id!r}: {exc}") from exc
