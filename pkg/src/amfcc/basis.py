"""Cubic B-spline bases with exact Gram and second-derivative penalty matrices."""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .errors import DataError

ORDER = 4
PENALTY_DERIV = 2


@dataclass(frozen=True, eq=False)
class BasisSystem:
    """Clamped B-spline basis on ``[domain_lo, domain_hi]``.

    ``knots`` are the strictly increasing breakpoints, end points included;
    ``gram`` holds the L2 inner products of the basis functions and
    ``penalty`` those of their second derivatives.
    """

    domain_lo: float
    domain_hi: float
    order: int
    n_basis: int
    knots: np.ndarray
    gram: np.ndarray = field(repr=False)
    penalty: np.ndarray = field(repr=False)

    @cached_property
    def knot_vector(self) -> np.ndarray:
        return extended_knots(self.knots, self.order)

    @cached_property
    def greville(self) -> np.ndarray:
        """Knot averages; a line a + b t has coefficients a + b * greville."""
        t = self.knot_vector
        return np.array([t[j + 1:j + self.order].mean() for j in range(self.n_basis)])

    @cached_property
    def penalty_frame(self) -> tuple:
        """Orthogonal ``Q`` and ``Q^T penalty Q`` with the exact penalty null space (lines) last.

        Solving in this frame keeps huge penalties from swamping the
        unpenalized directions during a Cholesky factorization.
        """
        lines = np.column_stack([np.ones(self.n_basis), self.greville])
        q_full = np.linalg.qr(lines, mode="complete")[0]
        q = np.hstack([q_full[:, 2:], q_full[:, :2]])
        comp = q[:, :-2]
        rot = np.zeros_like(self.penalty)
        block = comp.T @ self.penalty @ comp
        rot[:-2, :-2] = 0.5 * (block + block.T)
        return q, rot

    def same_as(self, other: "BasisSystem") -> bool:
        return (
            self is other
            or (
                self.order == other.order
                and self.n_basis == other.n_basis
                and np.array_equal(self.knots, other.knots)
            )
        )

    def to_dict(self) -> dict:
        return {"domain_lo": self.domain_lo, "domain_hi": self.domain_hi, "n_basis": self.n_basis}


def extended_knots(breaks: np.ndarray, order: int) -> np.ndarray:
    return np.concatenate([np.repeat(breaks[0], order - 1), breaks, np.repeat(breaks[-1], order - 1)])


def _derivative_matrix(t: np.ndarray, order: int) -> np.ndarray:
    """D with ``d/dx B_{.,order} = D @ B_{.,order-1}`` on the knot vector ``t``."""
    n_hi = len(t) - order
    n_lo = len(t) - order + 1
    dmat = np.zeros((n_hi, n_lo))
    for i in range(n_hi):
        a = t[i + order - 1] - t[i]
        b = t[i + order] - t[i + 1]
        if a > 0:
            dmat[i, i] = (order - 1) / a
        if b > 0:
            dmat[i, i + 1] = -(order - 1) / b
    return dmat


def basis_derivative_values(knots_ext: np.ndarray, order: int, x: np.ndarray, deriv: int = 0) -> np.ndarray:
    """Values of the ``deriv``-th derivatives of all B-splines, shape (n_funcs, len(x))."""
    if deriv >= order:
        return np.zeros((len(knots_ext) - order, len(x)))
    vals = _kernels.basis_values(knots_ext, order - deriv, x)
    for q in range(order - deriv + 1, order + 1):
        vals = _derivative_matrix(knots_ext, q) @ vals
    return vals


def _interval_quadrature(breaks: np.ndarray, n_nodes: int):
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    a, b = breaks[:-1, None], breaks[1:, None]
    half = 0.5 * (b - a)
    pts = (a + b) * 0.5 + half * nodes[None, :]
    wts = half * weights[None, :]
    return pts.ravel(), wts.ravel()


def _weighted_products(knots_ext, order, breaks, deriv, n_nodes):
    pts, wts = _interval_quadrature(breaks, n_nodes)
    vals = basis_derivative_values(knots_ext, order, pts, deriv)
    mat = (vals * wts) @ vals.T
    return 0.5 * (mat + mat.T)


def make_basis(domain_lo: float, domain_hi: float, n_basis: int) -> BasisSystem:
    """Cubic B-spline basis with ``n_basis`` functions and equally spaced interior knots."""
    domain_lo = float(domain_lo)
    domain_hi = float(domain_hi)
    if not (np.isfinite(domain_lo) and np.isfinite(domain_hi)):
        raise DataError("basis domain bounds must be finite")
    if not domain_lo < domain_hi:
        raise DataError(f"empty basis domain [{domain_lo}, {domain_hi}]")
    if int(n_basis) != n_basis or n_basis < ORDER + 1:
        raise DataError(f"n_basis must be an integer >= {ORDER + 1}, got {n_basis}")
    n_basis = int(n_basis)
    breaks = np.linspace(domain_lo, domain_hi, n_basis - ORDER + 2)
    t = extended_knots(breaks, ORDER)
    # products of cubics are degree 6 (4 nodes exact); of linears degree 2 (2 nodes exact)
    gram = _weighted_products(t, ORDER, breaks, 0, ORDER)
    penalty = _weighted_products(t, ORDER, breaks, PENALTY_DERIV, ORDER - PENALTY_DERIV)
    return BasisSystem(domain_lo, domain_hi, ORDER, n_basis, breaks, gram, penalty)


def _check_points(basis: BasisSystem, points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(pts)):
        raise DataError("evaluation points must be finite")
    if pts.size and (pts.min() < basis.domain_lo or pts.max() > basis.domain_hi):
        raise DataError(
            f"points outside basis domain [{basis.domain_lo}, {basis.domain_hi}]: "
            f"range [{pts.min()}, {pts.max()}]"
        )
    return pts


def eval_basis(basis: BasisSystem, points, deriv: int = 0) -> np.ndarray:
    """Basis matrix with shape (n_basis, n_points); column j holds every phi at ``points[j]``."""
    pts = _check_points(basis, points)
    return basis_derivative_values(basis.knot_vector, basis.order, pts, deriv)


def eval_expansion(basis: BasisSystem, coeffs, points) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape[-1] != basis.n_basis:
        raise DataError(f"expected {basis.n_basis} coefficients, got {coeffs.shape[-1]}")
    return coeffs @ eval_basis(basis, points)
