"""Multivariate functional PCA in coefficient space.

Curves are standardized pointwise, ``Z_k(t) = (X_k(t) - mu_k(t)) / sqrt(v_k(t))``,
on a dense grid and projected back onto the spline basis (L2 projection with
trapezoid weights). Because the standardization is linear in the coefficients,
it is stored as one K x K matrix per component. PCA then runs on
``W^{1/2} c~`` where ``W`` is the Gram matrix.
"""

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .basis import BasisSystem, eval_basis
from .errors import DataError, DegenerateModelWarning
from .smoothing import SmoothedObservation

DENSE_POINTS = 512
VAR_FLOOR_ABS = 1e-8
VAR_FLOOR_REL = 1e-6
EIG_REL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class MFPCAModel:
    lambda_: float
    basis: BasisSystem
    mean_coeffs: np.ndarray  # (p, K)
    dense_grid: np.ndarray  # (G,)
    var_values: np.ndarray  # (p, G), floored; linear interpolation between grid points
    std_maps: np.ndarray  # (p, K, K): c -> c~ (applied to centered coefficients)
    gram_sqrt: np.ndarray  # (K, K)
    eigenvalues: np.ndarray  # (M,), strictly positive, descending
    eigenvectors: np.ndarray  # (p*K, M), orthonormal columns u_l
    n_train: int

    @property
    def p(self) -> int:
        return self.mean_coeffs.shape[0]

    @property
    def rank(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def eigen_coeffs(self) -> np.ndarray:
        """Eigenfunction coefficients b_l, shape (M, p, K)."""
        kk = self.basis.n_basis
        inv_sqrt = np.linalg.inv(self.gram_sqrt)
        u = self.eigenvectors.T.reshape(self.rank, self.p, kk)
        return np.einsum("ij,lkj->lki", inv_sqrt, u)

    def variance(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return np.stack([np.interp(pts, self.dense_grid, v) for v in self.var_values])


@dataclass(frozen=True, eq=False)
class ScoreVector:
    obs_id: object
    scores: np.ndarray


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    h = np.diff(grid)
    w = np.zeros_like(grid)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def _stack_coeffs(obs: Sequence[SmoothedObservation]) -> np.ndarray:
    return np.stack([o.coeffs for o in obs])


def fit_mfpca(basis: BasisSystem, train: Sequence[SmoothedObservation], dense_points: int = DENSE_POINTS) -> MFPCAModel:
    """Estimate mean, variance, eigenvalues and eigenfunctions from smoothed training curves."""
    train = list(train)
    if len(train) < 3:
        raise DataError(f"MFPCA needs at least 3 training observations, got {len(train)}")
    lam = train[0].lambda_
    if any(o.lambda_ != lam for o in train):
        raise DataError("training observations were smoothed with different lambda")
    if any(o.coeffs.shape[-1] != basis.n_basis for o in train):
        raise DataError("training coefficients do not match the basis size")
    return fit_mfpca_arrays(basis, _stack_coeffs(train), lam, dense_points)


def fit_mfpca_arrays(basis: BasisSystem, coeffs: np.ndarray, lam: float, dense_points: int = DENSE_POINTS) -> MFPCAModel:
    n, p, kk = coeffs.shape
    grid = np.linspace(basis.domain_lo, basis.domain_hi, dense_points)
    bmat = eval_basis(basis, grid)  # (K, G)
    mean = coeffs.mean(axis=0)
    centered = coeffs - mean
    # pointwise variance of the smoothed curves (denominator n - 1)
    values = centered @ bmat  # (n, p, G)
    var = np.einsum("ikg,ikg->kg", values, values) / (n - 1)
    # spread at rounding level of the mean curve counts as no variability
    level = 64 * np.finfo(float).eps * max(1.0, float(np.abs(mean @ bmat).max()))
    flat = bool(var.max() <= level**2)
    floor = np.maximum(VAR_FLOOR_ABS, VAR_FLOOR_REL * var.max(axis=1, keepdims=True))
    var = np.maximum(var, floor)

    q = trapezoid_weights(grid)
    proj = np.linalg.solve((bmat * q) @ bmat.T, bmat * q)  # (K, G)
    std_maps = np.einsum("ag,kg,bg->kab", proj, 1.0 / np.sqrt(var), bmat)

    evals_w, evecs_w = np.linalg.eigh(basis.gram)
    gram_sqrt = (evecs_w * np.sqrt(evals_w)) @ evecs_w.T
    gram_sqrt = 0.5 * (gram_sqrt + gram_sqrt.T)

    ctilde = np.einsum("kab,ikb->ika", std_maps, centered)
    y = np.einsum("ab,ikb->ika", gram_sqrt, ctilde).reshape(n, p * kk)
    y = y - y.mean(axis=0)
    cov = y.T @ y / (n - 1)
    cov = 0.5 * (cov + cov.T)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]

    top = evals[0] if evals.size else 0.0
    if flat or not top > 0:
        warnings.warn("MFPCA training set has no variability; model is degenerate", DegenerateModelWarning, stacklevel=2)
        keep = 0
    else:
        keep = int(np.sum(evals > EIG_REL_TOL * top))
    evals = evals[:keep].copy()
    evecs = evecs[:, :keep].copy()
    _fix_signs(evecs)
    return MFPCAModel(
        lambda_=float(lam),
        basis=basis,
        mean_coeffs=mean,
        dense_grid=grid,
        var_values=var,
        std_maps=std_maps,
        gram_sqrt=gram_sqrt,
        eigenvalues=evals,
        eigenvectors=evecs,
        n_train=n,
    )


def _fix_signs(vecs: np.ndarray) -> None:
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        big = np.flatnonzero(np.abs(col) > 1e-12 * np.abs(col).max())
        if big.size and col[big[0]] < 0:
            vecs[:, j] = -col


def check_compatible(model: MFPCAModel, obs: SmoothedObservation) -> None:
    if obs.lambda_ != model.lambda_:
        raise DataError(f"obs {obs.obs_id!r} smoothed with lambda={obs.lambda_}, model uses {model.lambda_}")
    if obs.coeffs.shape != model.mean_coeffs.shape:
        raise DataError(f"obs {obs.obs_id!r} coefficients {obs.coeffs.shape} do not match model {model.mean_coeffs.shape}")


def standardize(model: MFPCAModel, coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of the standardized curves, same shape as ``coeffs`` (..., p, K)."""
    return np.einsum("kab,...kb->...ka", model.std_maps, coeffs - model.mean_coeffs)


def destandardize(model: MFPCAModel, ctilde: np.ndarray) -> np.ndarray:
    """Inverse of :func:`standardize`."""
    inv = np.linalg.inv(model.std_maps)
    return model.mean_coeffs + np.einsum("kab,...kb->...ka", inv, ctilde)


def scores_from_standardized(model: MFPCAModel, ctilde: np.ndarray) -> np.ndarray:
    flat = np.einsum("ab,...kb->...ka", model.gram_sqrt, ctilde)
    flat = flat.reshape(flat.shape[:-2] + (-1,))
    return flat @ model.eigenvectors


def project_scores(model: MFPCAModel, obs: SmoothedObservation) -> ScoreVector:
    check_compatible(model, obs)
    return ScoreVector(obs.obs_id, scores_from_standardized(model, standardize(model, obs.coeffs)))


def explained_ratio(model: MFPCAModel) -> np.ndarray:
    ev = model.eigenvalues
    return np.cumsum(ev) / ev.sum()


def truncate_rank(model: MFPCAModel, delta: float) -> int:
    """Smallest L whose leading eigenvalues explain at least ``delta`` of the variance."""
    if model.rank == 0:
        raise DataError("model has no positive eigenvalue")
    if not 0 < delta < 1:
        raise DataError(f"delta must be in (0, 1), got {delta}")
    return truncate_rank_values(model.eigenvalues, delta)


def truncate_rank_values(eigenvalues: np.ndarray, delta: float) -> int:
    ratio = np.cumsum(eigenvalues) / np.sum(eigenvalues)
    hit = np.flatnonzero(ratio >= delta * (1 - 1e-12))
    return int(hit[0]) + 1 if hit.size else len(eigenvalues)


def reconstruct(model: MFPCAModel, scores: ScoreVector, L: int) -> SmoothedObservation:
    """Truncated Karhunen-Loeve reconstruction in coefficient form."""
    if not 0 <= L <= model.rank:
        raise DataError(f"L={L} outside 0..{model.rank}")
    xi = np.asarray(scores.scores)[:L]
    ctilde = np.einsum("l,lka->ka", xi, model.eigen_coeffs[:L]) if L else np.zeros_like(model.mean_coeffs)
    coeffs = destandardize(model, ctilde)
    return SmoothedObservation(scores.obs_id, coeffs, model.lambda_, np.full(model.p, np.nan))
