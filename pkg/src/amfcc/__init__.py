"""Adaptive multivariate functional control chart."""

from .basis import BasisSystem, eval_basis, eval_expansion, make_basis
from .benchmark import BenchmarkReport, run_benchmark
from .charting import (
    ChartModel, MonitorResult, ParameterGrid, fit_chart, monitor, monitor_batch, score_batch, with_combiner,
)
from .competitors import fit_dcc, fit_mcc, fit_mfcc, fit_mfcc_family, score_competitor, score_competitor_batch
from .config import RunConfig
from .diagnostics import ContributionTable, combine_contributions, contributions, diagnose, diagnose_batch
from .errors import (
    AMFCCError, ConfigError, DataError, DegenerateInputError, DegenerateModelWarning, ModelFormatError, NumericError,
)
from .io import load_model, load_samples, save_model, save_samples
from .mfpca import MFPCAModel, ScoreVector, fit_mfpca, project_scores, reconstruct, truncate_rank
from .simgen import ScenarioSpec, generate
from .smoothing import DiscreteSample, SmoothedObservation, smooth_adaptive, smooth_batch, smooth_fixed
from .stats import combine_fisher, combine_tippett, empirical_pvalue, empirical_quantile

__version__ = "0.1.0"
