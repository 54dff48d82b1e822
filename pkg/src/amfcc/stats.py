"""Empirical p-values, combining functions and empirical quantiles."""

import math

import numpy as np

from . import _kernels
from .errors import DataError

COMBINERS = ("fisher", "tippett")


def empirical_pvalue(reference, x: float) -> float:
    """``(1 + #{reference >= x}) / (n + 1)``."""
    ref = np.asarray(reference, dtype=np.float64).reshape(-1)
    if ref.size == 0:
        raise DataError("empty reference sample")
    return (1.0 + np.count_nonzero(ref >= x)) / (ref.size + 1.0)


def pvalues_against(sorted_ref: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Column-wise empirical p-values of ``x`` (m, T) against ascending ``sorted_ref`` (n, T)."""
    counts = _kernels.upper_counts(sorted_ref, x)
    return (1.0 + counts) / (sorted_ref.shape[0] + 1.0)


def _check_p(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0:
        raise DataError("no p-values to combine")
    if np.any(~(p > 0)) or np.any(p > 1):
        raise DataError("p-values must lie in (0, 1]")
    return p


def combine_fisher(pvalues) -> np.ndarray:
    """Fisher omnibus ``-2 * mean(log p)`` along the last axis."""
    p = _check_p(pvalues)
    return -2.0 * np.log(p).sum(axis=-1) / p.shape[-1]


def combine_tippett(pvalues) -> np.ndarray:
    """Tippett ``-2 * log(min p)`` along the last axis."""
    p = _check_p(pvalues)
    return -2.0 * np.log(p.min(axis=-1))


def combine(pvalues, combiner: str):
    if combiner == "fisher":
        return combine_fisher(pvalues)
    if combiner == "tippett":
        return combine_tippett(pvalues)
    raise DataError(f"unknown combiner {combiner!r}; expected one of {COMBINERS}")


def empirical_quantile(values, level: float) -> float:
    """Inverted-ECDF quantile: the ceil(level * n)-th order statistic."""
    v = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    if v.size == 0:
        raise DataError("empty sample for quantile")
    rank = max(1, math.ceil(level * v.size - 1e-9))
    return float(v[min(rank, v.size) - 1])
