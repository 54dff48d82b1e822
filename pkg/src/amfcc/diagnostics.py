"""Per-component contributions to the partial T^2 statistics and their combination."""

from dataclasses import dataclass
from typing import Hashable

import numpy as np

from . import _kernels
from .errors import DataError
from .mfpca import MFPCAModel, ScoreVector, check_compatible, standardize
from .smoothing import SmoothedObservation
from .stats import COMBINERS, combine, empirical_quantile, pvalues_against


@dataclass(frozen=True, eq=False)
class DiagnosticReference:
    """Tuning-set contribution distribution for every (component, cell)."""

    raw: np.ndarray  # (n_tune, p, T)
    combined: np.ndarray  # (n_tune, p)
    limits: np.ndarray  # (p,)
    alpha: float
    combiner: str

    @property
    def n(self) -> int:
        return self.raw.shape[0]

    def sorted_columns(self) -> np.ndarray:
        """Reference values sorted per (component, cell), shape (p, n_tune, T)."""
        cached = self.__dict__.get("_sorted")
        if cached is None:
            cached = np.sort(np.moveaxis(self.raw, 1, 0), axis=1)
            object.__setattr__(self, "_sorted", cached)
        return cached


@dataclass(frozen=True, eq=False)
class ContributionTable:
    obs_id: Hashable
    raw: np.ndarray  # (p, T)
    pvalues: np.ndarray  # (p, T)
    combined: np.ndarray  # (p,)
    flags: np.ndarray  # (p,)


def component_inner_products(model: MFPCAModel, ctilde: np.ndarray) -> np.ndarray:
    """``<psi_lk, Z_k>`` for each component and mode, shape (..., p, M)."""
    kk = model.basis.n_basis
    y = np.einsum("ab,...kb->...ka", model.gram_sqrt, ctilde)
    u = model.eigenvectors.reshape(model.p, kk, model.rank)
    return np.einsum("...ka,kal->...kl", y, u)


def cumulative_contributions(model: MFPCAModel, ctilde: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Contributions for every truncation level, shape (..., p, M); entry L-1 is level L."""
    inner = component_inner_products(model, ctilde)
    weight = scores / model.eigenvalues
    return np.cumsum(weight[..., None, :] * inner, axis=-1)


def contributions(model: MFPCAModel, obs: SmoothedObservation, scores: ScoreVector, L: int) -> np.ndarray:
    """Component contributions to the partial statistic at truncation ``L``; they sum to it."""
    check_compatible(model, obs)
    if not 1 <= L <= model.rank:
        raise DataError(f"L={L} outside 1..{model.rank}")
    ctilde = standardize(model, obs.coeffs)
    inner = component_inner_products(model, ctilde)[:, :L]
    xi = np.asarray(scores.scores)[:L]
    return inner @ (xi / model.eigenvalues[:L])


def build_reference(raw: np.ndarray, alpha: float, combiner: str) -> DiagnosticReference:
    """Contribution limits from tuning contributions ``raw`` (n, p, T); p-values include each point itself."""
    if combiner not in COMBINERS:
        raise DataError(f"unknown combiner {combiner!r}")
    n, p, n_cells = raw.shape
    combined = np.empty((n, p))
    for k in range(p):
        ref = np.sort(raw[:, k, :], axis=0)
        combined[:, k] = combine(pvalues_against(ref, raw[:, k, :]), combiner)
    limits = np.array([empirical_quantile(combined[:, k], 1 - alpha) for k in range(p)])
    return DiagnosticReference(raw, combined, limits, float(alpha), combiner)


def contribution_pvalues(reference: DiagnosticReference, raw: np.ndarray) -> np.ndarray:
    """P-values of new contributions ``raw`` (m, p, T) against the tuning reference."""
    srt = reference.sorted_columns()
    out = np.empty(raw.shape)
    for k in range(raw.shape[1]):
        counts = _kernels.upper_counts(srt[k], raw[:, k, :])
        out[:, k, :] = (1.0 + counts) / (reference.n + 1.0)
    return out


def combine_contributions(chart, table_raw) -> tuple:
    """Combined contribution per component and its flag against the component limit.

    ``table_raw`` is (p, T) for one observation or (m, p, T) for many.
    """
    reference = getattr(chart, "diag_reference", None)
    if reference is None:
        raise DataError("chart carries no diagnostic reference")
    raw = np.asarray(table_raw, dtype=np.float64)
    single = raw.ndim == 2
    if single:
        raw = raw[None]
    if raw.shape[1:] != reference.raw.shape[1:]:
        raise DataError(f"contribution table shape {raw.shape[1:]} does not match reference {reference.raw.shape[1:]}")
    pvals = contribution_pvalues(reference, raw)
    combined = combine(pvals, reference.combiner)
    flags = combined > reference.limits
    if single:
        return combined[0], flags[0]
    return combined, flags


def diagnose_batch(chart, samples) -> list:
    """Contribution tables for many raw observations."""
    from .charting import score_batch

    res = score_batch(chart, samples)
    pvals = contribution_pvalues(chart.diag_reference, res.raw_contributions)
    return [
        ContributionTable(oid, res.raw_contributions[i], pvals[i], res.contributions[i], res.flagged[i])
        for i, oid in enumerate(res.obs_ids)
    ]


def diagnose(chart, obs) -> ContributionTable:
    return diagnose_batch(chart, [obs])[0]
