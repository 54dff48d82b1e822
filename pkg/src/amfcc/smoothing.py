"""Penalized least-squares smoothing of multichannel discrete profiles.

Each component is fitted independently (identity residual weighting) by

    min_c ||y_k - T_k^T c||^2 + lambda_k c^T R c

with ``R`` the integrated squared second-derivative penalty. The adaptive
variant splits one shared ``lambda`` across components in inverse
proportion to the roughness of an initial fit.
"""

from dataclasses import dataclass, field
from typing import Hashable, Optional, Sequence

import numpy as np

from . import _kernels
from .basis import BasisSystem, eval_basis
from .errors import DataError, DegenerateInputError, NumericError

CURVATURE_EPS = 1e-10
WEIGHT_CAP = 1e10


@dataclass(frozen=True, eq=False)
class DiscreteSample:
    """Raw measurements of one observation: per component a sorted grid and values."""

    obs_id: Hashable
    grids: tuple
    values: tuple

    def __post_init__(self):
        if len(self.grids) != len(self.values):
            raise DataError(f"obs {self.obs_id!r}: {len(self.grids)} grids but {len(self.values)} value vectors")
        if len(self.grids) == 0:
            raise DataError(f"obs {self.obs_id!r}: no components")
        grids, values = [], []
        for k, (t, y) in enumerate(zip(self.grids, self.values)):
            t = np.asarray(t, dtype=np.float64).reshape(-1)
            y = np.asarray(y, dtype=np.float64).reshape(-1)
            if t.shape != y.shape:
                raise DataError(f"obs {self.obs_id!r} component {k + 1}: grid/value length mismatch")
            if t.size == 0:
                raise DataError(f"obs {self.obs_id!r} component {k + 1}: empty component")
            if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
                raise DataError(f"obs {self.obs_id!r} component {k + 1}: non-finite values")
            if np.any(np.diff(t) < 0):
                raise DataError(f"obs {self.obs_id!r} component {k + 1}: grid not sorted")
            t.setflags(write=False)
            y.setflags(write=False)
            grids.append(t)
            values.append(y)
        object.__setattr__(self, "grids", tuple(grids))
        object.__setattr__(self, "values", tuple(values))

    @property
    def p(self) -> int:
        return len(self.grids)


@dataclass(frozen=True, eq=False)
class SmoothedObservation:
    obs_id: Hashable
    coeffs: np.ndarray  # (p, n_basis)
    lambda_: float
    component_lambdas: np.ndarray
    capped: np.ndarray = field(default=None)  # components whose adaptive weight hit the cap

    @property
    def p(self) -> int:
        return self.coeffs.shape[0]


class _DesignCache:
    """Basis matrices and cross products keyed by grid content, in the penalty frame."""

    def __init__(self, basis: BasisSystem):
        self.basis = basis
        self._store = {}

    def get(self, grid: np.ndarray):
        key = grid.tobytes()
        hit = self._store.get(key)
        if hit is None:
            q = self.basis.penalty_frame[0]
            tmat = q.T @ eval_basis(self.basis, grid)
            hit = (tmat, tmat @ tmat.T)
            self._store[key] = hit
        return hit


def _assemble(basis: BasisSystem, samples: Sequence[DiscreteSample], cache: Optional[_DesignCache] = None):
    """Cross products (n, p, K, K), right-hand sides (n, p, K) and data scales (n, p)."""
    if cache is None:
        cache = _DesignCache(basis)
    p = samples[0].p
    n = len(samples)
    kk = basis.n_basis
    ttt = np.empty((n, p, kk, kk))
    rhs = np.empty((n, p, kk))
    scale = np.empty((n, p))
    for i, s in enumerate(samples):
        if s.p != p:
            raise DataError(f"obs {s.obs_id!r}: {s.p} components, expected {p}")
        for k in range(p):
            t, y = s.grids[k], s.values[k]
            if np.unique(t).size < 2:
                raise DegenerateInputError(
                    f"obs {s.obs_id!r} component {k + 1}: fewer than 2 distinct grid points"
                )
            tmat, cross = cache.get(t)
            ttt[i, k] = cross
            rhs[i, k] = tmat @ y
            ptp = float(np.ptp(y))
            scale[i, k] = ptp if ptp > 0 else max(float(np.abs(y).max()), 1.0)
    return ttt, rhs, scale


def _solve(basis: BasisSystem, ttt, rhs, lambdas):
    """Coefficients for penalties ``lambdas`` (n, p); returns (n, p, K).

    ``ttt`` and ``rhs`` are expressed in the basis penalty frame.
    """
    n, p, kk = rhs.shape
    q, pen = basis.penalty_frame
    mats = ttt + lambdas[..., None, None] * pen
    try:
        coeffs = _kernels.spd_solve_batch(mats.reshape(n * p, kk, kk), rhs.reshape(n * p, kk))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"penalized system not positive definite: {exc}") from exc
    coeffs = coeffs.reshape(n, p, kk) @ q.T
    if not np.all(np.isfinite(coeffs)):
        raise NumericError("non-finite smoothing coefficients")
    return coeffs


def roughness(basis: BasisSystem, coeffs: np.ndarray) -> np.ndarray:
    """Integrated squared second derivative of each expansion along the last axis."""
    return np.einsum("...i,ij,...j->...", coeffs, basis.penalty, coeffs)


def _adaptive_lambdas(basis, coeffs0, scale, lam):
    rough = roughness(basis, coeffs0)
    capped = rough <= CURVATURE_EPS * scale**2
    with np.errstate(divide="ignore"):
        weights = np.where(capped, WEIGHT_CAP, 1.0 / np.where(capped, 1.0, rough))
    return lam * weights / weights.sum(axis=-1, keepdims=True), capped


def _smooth_arrays(basis, ttt, rhs, scale, lam):
    n, p, _ = rhs.shape
    coeffs0 = _solve(basis, ttt, rhs, np.full((n, p), lam))
    lambdas, capped = _adaptive_lambdas(basis, coeffs0, scale, lam)
    return _solve(basis, ttt, rhs, lambdas), lambdas, capped


def smooth_fixed(basis: BasisSystem, sample: DiscreteSample, lambdas) -> SmoothedObservation:
    """Fit every component with its own fixed smoothing parameter."""
    lambdas = np.asarray(lambdas, dtype=np.float64).reshape(-1)
    if lambdas.size != sample.p:
        raise DataError(f"need {sample.p} smoothing parameters, got {lambdas.size}")
    if not np.all(lambdas > 0):
        raise DataError("smoothing parameters must be positive")
    ttt, rhs, _ = _assemble(basis, [sample])
    coeffs = _solve(basis, ttt, rhs, lambdas[None, :])[0]
    return SmoothedObservation(sample.obs_id, coeffs, float(lambdas.sum()), lambdas.copy(), np.zeros(sample.p, bool))


def smooth_adaptive(basis: BasisSystem, sample: DiscreteSample, lam: float) -> SmoothedObservation:
    """Two-stage fit: equal ``lam`` first, then ``lam`` split by inverse initial roughness."""
    return smooth_batch(basis, [sample], lam)[0]


def smooth_batch(
    basis: BasisSystem,
    samples: Sequence[DiscreteSample],
    lam: float,
    cache: Optional[_DesignCache] = None,
) -> list:
    """``smooth_adaptive`` over many samples, order-preserving.

    Samples that fail are collected and reported together with their ids.
    """
    lam = float(lam)
    if not lam > 0:
        raise DataError(f"smoothing parameter must be positive, got {lam}")
    samples = list(samples)
    if not samples:
        return []
    coeffs, lambdas, capped = smooth_batch_arrays(basis, samples, lam, cache)
    return [
        SmoothedObservation(s.obs_id, coeffs[i], lam, lambdas[i], capped[i])
        for i, s in enumerate(samples)
    ]


def smooth_batch_arrays(basis, samples, lam, cache=None):
    """Array form of :func:`smooth_batch`: coefficients (n, p, K), lambdas (n, p), capped (n, p)."""
    try:
        ttt, rhs, scale = _assemble(basis, samples, cache)
        return _smooth_arrays(basis, ttt, rhs, scale, lam)
    except (DataError, NumericError) as exc:
        if len(samples) == 1:
            raise
        first_error = exc
    failures = []
    for s in samples:
        try:
            ttt, rhs, scale = _assemble(basis, [s], cache)
            _smooth_arrays(basis, ttt, rhs, scale, lam)
        except (DataError, NumericError) as exc:
            failures.append((s.obs_id, exc))
    if not failures:
        raise first_error
    detail = "; ".join(f"{oid!r}: {exc}" for oid, exc in failures)
    cls = NumericError if all(isinstance(e, NumericError) for _, e in failures) else DataError
    raise cls(f"smoothing failed for {len(failures)} sample(s): {detail}")
