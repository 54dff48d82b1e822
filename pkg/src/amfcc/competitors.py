"""Comparison charts: MFCC (fixed-variance MFPCA with T^2 and SPE), MCC and DCC."""

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import diagnostics
from .basis import BasisSystem
from .errors import DataError
from .mfpca import DENSE_POINTS, MFPCAModel, fit_mfpca_arrays, scores_from_standardized, standardize, truncate_rank
from .smoothing import DiscreteSample, _DesignCache, smooth_batch_arrays
from .stats import empirical_quantile

MFCC_LAMBDA = 1e-2
PINV_REL_TOL = 1e-10


def sidak_alpha(alpha: float, n_charts: int = 2) -> float:
    """Per-chart level giving joint level ``alpha`` for independent charts."""
    return 1.0 - (1.0 - alpha) ** (1.0 / n_charts)


@dataclass(frozen=True, eq=False)
class MFCCModel:
    delta: float
    basis: BasisSystem
    model: MFPCAModel
    L: int
    t2_limit: float
    spe_limit: float
    t2_contrib_limits: np.ndarray  # (p,)
    spe_contrib_limits: np.ndarray  # (p,)
    alpha: float
    alpha_k: float
    kind: str = "mfcc"

    @property
    def name(self) -> str:
        tenths = self.delta * 10
        if abs(tenths - round(tenths)) < 1e-9:
            return f"mfcc{int(round(tenths)):02d}"
        return f"mfcc{self.delta:g}"


@dataclass(frozen=True, eq=False)
class HotellingModel:
    kind: str  # "mcc" or "dcc"
    mean: np.ndarray
    precision: np.ndarray
    limit: float
    alpha: float
    grids: tuple
    dropped_rank: int = 0

    @property
    def name(self) -> str:
        return self.kind


@dataclass(frozen=True, eq=False)
class CompetitorScores:
    """Statistics and decisions for a batch of observations."""

    obs_ids: list
    statistics: dict  # name -> (m,) array
    signal: np.ndarray  # (m,)
    flagged: Optional[np.ndarray] = None  # (m, p), MFCC only


def mfcc_statistics(model: MFPCAModel, L: int, coeffs: np.ndarray) -> dict:
    """T^2, SPE and their per-component contributions for smoothed coefficients (n, p, K)."""
    ctilde = standardize(model, coeffs)
    xi = scores_from_standardized(model, ctilde)
    t2 = np.sum(xi[:, :L] ** 2 / model.eigenvalues[:L], axis=1)
    t2_contrib = diagnostics.cumulative_contributions(model, ctilde, xi)[:, :, L - 1]
    kk = model.basis.n_basis
    n, p = coeffs.shape[:2]
    y = np.einsum("ab,ikb->ika", model.gram_sqrt, ctilde).reshape(n, p * kk)
    u = model.eigenvectors[:, :L]
    resid = (y - (y @ u) @ u.T).reshape(n, p, kk)
    spe_contrib = np.sum(resid**2, axis=2)
    return {"t2": t2, "spe": spe_contrib.sum(axis=1), "t2_contrib": t2_contrib, "spe_contrib": spe_contrib}


def fit_mfcc_family(
    basis: BasisSystem,
    train: Sequence[DiscreteSample],
    tune: Sequence[DiscreteSample],
    deltas: Sequence[float],
    alpha: float = 0.05,
    lam: float = MFCC_LAMBDA,
    alpha_k: Optional[float] = None,
    dense_points: int = DENSE_POINTS,
) -> list:
    """MFCC charts sharing one smoothing and MFPCA fit, one per explained-variance level."""
    train, tune = list(train), list(tune)
    if len(train) < 3 or len(tune) < 1:
        raise DataError("MFCC needs at least 3 training and 1 tuning observation")
    alpha_k = alpha if alpha_k is None else alpha_k
    cache = _DesignCache(basis)
    coeffs, _, _ = smooth_batch_arrays(basis, train, lam, cache)
    model = fit_mfpca_arrays(basis, coeffs, lam, dense_points)
    tune_coeffs, _, _ = smooth_batch_arrays(basis, tune, lam, cache)
    a1 = sidak_alpha(alpha)
    ak = sidak_alpha(alpha_k)
    out = []
    for delta in deltas:
        if not 0 < delta < 1:
            raise DataError(f"delta must be in (0, 1), got {delta}")
        L = truncate_rank(model, delta)
        st = mfcc_statistics(model, L, tune_coeffs)
        p = st["t2_contrib"].shape[1]
        out.append(MFCCModel(
            delta=float(delta),
            basis=basis,
            model=model,
            L=L,
            t2_limit=empirical_quantile(st["t2"], 1 - a1),
            spe_limit=empirical_quantile(st["spe"], 1 - a1),
            t2_contrib_limits=np.array([empirical_quantile(st["t2_contrib"][:, k], 1 - ak) for k in range(p)]),
            spe_contrib_limits=np.array([empirical_quantile(st["spe_contrib"][:, k], 1 - ak) for k in range(p)]),
            alpha=float(alpha),
            alpha_k=float(alpha_k),
        ))
    return out


def fit_mfcc(basis, train, tune, delta: float, alpha: float = 0.05, lam: float = MFCC_LAMBDA, alpha_k=None) -> MFCCModel:
    return fit_mfcc_family(basis, train, tune, [delta], alpha, lam, alpha_k)[0]


def _common_grids(samples: Sequence[DiscreteSample]) -> tuple:
    grids = samples[0].grids
    for s in samples[1:]:
        if len(s.grids) != len(grids) or any(not np.array_equal(a, b) for a, b in zip(s.grids, grids)):
            raise DataError(f"obs {s.obs_id!r}: grid differs from the common grid required by MCC/DCC")
    return grids


def _features(kind: str, samples: Sequence[DiscreteSample]) -> np.ndarray:
    if kind == "mcc":
        return np.array([[np.mean(v) for v in s.values] for s in samples])
    if kind == "dcc":
        return np.array([np.concatenate(s.values) for s in samples])
    raise DataError(f"unknown competitor kind {kind!r}")


def _pinv_psd(cov: np.ndarray):
    evals, evecs = np.linalg.eigh(cov)
    keep = evals > PINV_REL_TOL * evals.max()
    inv = (evecs[:, keep] / evals[keep]) @ evecs[:, keep].T
    return 0.5 * (inv + inv.T), int(np.sum(~keep))


def _hotelling(x, mean, precision):
    d = x - mean
    return np.einsum("ij,jk,ik->i", d, precision, d)


def _fit_hotelling(kind, train, tune, alpha):
    train, tune = list(train), list(tune)
    if len(train) < 2 or len(tune) < 1:
        raise DataError(f"{kind.upper()} needs at least 2 training and 1 tuning observation")
    grids = _common_grids(train + tune)
    x = _features(kind, train)
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    precision, dropped = _pinv_psd(cov)
    if dropped:
        warnings.warn(f"{kind.upper()} covariance singular; pseudo-inverse drops {dropped} direction(s)", stacklevel=3)
    limit = empirical_quantile(_hotelling(_features(kind, tune), mean, precision), 1 - alpha)
    return HotellingModel(kind, mean, precision, limit, float(alpha), grids, dropped)


def fit_mcc(train, tune, alpha: float = 0.05) -> HotellingModel:
    """Hotelling T^2 on the per-component profile means."""
    return _fit_hotelling("mcc", train, tune, alpha)


def fit_dcc(train, tune, alpha: float = 0.05) -> HotellingModel:
    """Hotelling T^2 on the stacked raw discrete values."""
    return _fit_hotelling("dcc", train, tune, alpha)


def score_competitor_batch(model, samples: Sequence[DiscreteSample]) -> CompetitorScores:
    samples = list(samples)
    ids = [s.obs_id for s in samples]
    if isinstance(model, MFCCModel):
        coeffs, _, _ = smooth_batch_arrays(model.basis, samples, model.model.lambda_)
        st = mfcc_statistics(model.model, model.L, coeffs)
        signal = (st["t2"] > model.t2_limit) | (st["spe"] > model.spe_limit)
        flagged = (st["t2_contrib"] > model.t2_contrib_limits) | (st["spe_contrib"] > model.spe_contrib_limits)
        return CompetitorScores(ids, st, signal, flagged)
    if isinstance(model, HotellingModel):
        for s in samples:
            if len(s.grids) != len(model.grids) or any(not np.array_equal(a, b) for a, b in zip(s.grids, model.grids)):
                raise DataError(f"obs {s.obs_id!r}: grid differs from the model's common grid")
        t2 = _hotelling(_features(model.kind, samples), model.mean, model.precision)
        return CompetitorScores(ids, {"t2": t2}, t2 > model.limit)
    raise DataError(f"unsupported competitor model {type(model).__name__}")


def score_competitor(model, obs: DiscreteSample):
    """Signal for one observation plus its statistics."""
    res = score_competitor_batch(model, [obs])
    stats = {k: (v[0] if v.ndim == 1 else v[0].copy()) for k, v in res.statistics.items()}
    return bool(res.signal[0]), stats
