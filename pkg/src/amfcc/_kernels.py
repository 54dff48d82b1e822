"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``AMFCC_DISABLE_NUMBA`` is unset (or ``0``). Both paths are always
importable under explicit names so they can be compared directly.
"""

import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False


def _flag_disabled() -> bool:
    return os.environ.get("AMFCC_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = HAS_NUMBA and not _flag_disabled()


# --------------------------------------------------------------------------
# B-spline values (Cox-de Boor, nonzero functions per span)
# --------------------------------------------------------------------------

def _find_spans(knots, x):
    """Index i with knots[i] <= x < knots[i+1], clamped to the nonempty intervals."""
    first = np.searchsorted(knots, knots[0], side="right") - 1
    last = np.searchsorted(knots, knots[-1], side="left") - 1
    spans = np.searchsorted(knots, x, side="right") - 1
    return np.clip(spans, first, last)


def basis_values_numpy(knots, order, x):
    knots = np.asarray(knots, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    n_funcs = len(knots) - order
    n_pts = x.shape[0]
    spans = _find_spans(knots, x)
    # local[:, j] holds B_{span-order+1+j} at each point
    local = np.zeros((n_pts, order))
    local[:, 0] = 1.0
    left = np.empty((n_pts, order))
    right = np.empty((n_pts, order))
    for j in range(1, order):
        left[:, j] = x - knots[spans + 1 - j]
        right[:, j] = knots[spans + j] - x
        saved = np.zeros(n_pts)
        for r in range(j):
            temp = local[:, r] / (right[:, r + 1] + left[:, j - r])
            local[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        local[:, j] = saved
    out = np.zeros((n_funcs, n_pts))
    cols = np.arange(n_pts)
    for j in range(order):
        out[spans - order + 1 + j, cols] = local[:, j]
    return out


def _basis_values_loop(knots, order, x):
    n_funcs = knots.shape[0] - order
    n_pts = x.shape[0]
    out = np.zeros((n_funcs, n_pts))
    local = np.empty(order)
    left = np.empty(order)
    right = np.empty(order)
    first = 0
    while knots[first + 1] == knots[0]:
        first += 1
    last = knots.shape[0] - 1
    while knots[last] == knots[-1]:
        last -= 1
    for p in range(n_pts):
        xv = x[p]
        # binary search for the span within [first, last]
        if xv >= knots[last]:
            span = last
        elif xv < knots[first + 1]:
            span = first
        else:
            lo = first
            hi = last
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if knots[mid] <= xv:
                    lo = mid
                else:
                    hi = mid
            span = lo
        local[0] = 1.0
        for j in range(1, order):
            left[j] = xv - knots[span + 1 - j]
            right[j] = knots[span + j] - xv
            saved = 0.0
            for r in range(j):
                temp = local[r] / (right[r + 1] + left[j - r])
                local[r] = saved + right[r + 1] * temp
                saved = left[j - r] * temp
            local[j] = saved
        for j in range(order):
            out[span - order + 1 + j, p] = local[j]
    return out


# --------------------------------------------------------------------------
# Batched SPD solve (Cholesky, forward and back substitution)
# --------------------------------------------------------------------------

def spd_solve_batch_numpy(mats, rhs):
    """Solve ``mats[i] @ x[i] = rhs[i]`` for a stack of SPD matrices."""
    chol = np.linalg.cholesky(mats)
    y = np.linalg.solve(chol, rhs[..., None])
    return np.linalg.solve(np.swapaxes(chol, -1, -2), y)[..., 0]


def _spd_solve_batch_loop(mats, rhs):
    m, k, _ = mats.shape
    out = np.empty((m, k))
    chol = np.empty((k, k))
    y = np.empty(k)
    for b in range(m):
        a = mats[b]
        for i in range(k):
            for j in range(i + 1):
                s = a[i, j]
                for q in range(j):
                    s -= chol[i, q] * chol[j, q]
                if i == j:
                    if not s > 0.0:
                        raise np.linalg.LinAlgError("matrix is not positive definite")
                    chol[i, i] = np.sqrt(s)
                else:
                    chol[i, j] = s / chol[j, j]
        for i in range(k):
            s = rhs[b, i]
            for q in range(i):
                s -= chol[i, q] * y[q]
            y[i] = s / chol[i, i]
        for i in range(k - 1, -1, -1):
            s = y[i]
            for q in range(i + 1, k):
                s -= chol[q, i] * out[b, q]
            out[b, i] = s / chol[i, i]
    return out


# --------------------------------------------------------------------------
# Upper-tail counts against sorted reference columns
# --------------------------------------------------------------------------

def upper_counts_numpy(sorted_ref, x):
    """``out[i, t] = #{j : sorted_ref[j, t] >= x[i, t]}``; columns of ``sorted_ref`` ascending."""
    n, n_cols = sorted_ref.shape
    out = np.empty(x.shape, dtype=np.int64)
    for t in range(n_cols):
        out[:, t] = n - np.searchsorted(sorted_ref[:, t], x[:, t], side="left")
    return out


def _upper_counts_loop(sorted_ref, x):
    n, n_cols = sorted_ref.shape
    m = x.shape[0]
    out = np.empty((m, n_cols), dtype=np.int64)
    for t in range(n_cols):
        for i in range(m):
            v = x[i, t]
            lo = 0
            hi = n
            while lo < hi:
                mid = (lo + hi) // 2
                if sorted_ref[mid, t] < v:
                    lo = mid + 1
                else:
                    hi = mid
            out[i, t] = n - lo
    return out


if HAS_NUMBA:
    basis_values_numba = numba.njit(cache=True, nogil=True)(_basis_values_loop)
    spd_solve_batch_numba = numba.njit(cache=True, nogil=True)(_spd_solve_batch_loop)
    upper_counts_numba = numba.njit(cache=True, nogil=True)(_upper_counts_loop)
else:  # pragma: no cover
    basis_values_numba = None
    spd_solve_batch_numba = None
    upper_counts_numba = None


def basis_values(knots, order, x):
    """Values of all B-splines of ``order`` on the extended knot vector, shape (n_funcs, len(x))."""
    knots = np.ascontiguousarray(knots, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA:
        return basis_values_numba(knots, int(order), x)
    return basis_values_numpy(knots, order, x)


def spd_solve_batch(mats, rhs):
    mats = np.ascontiguousarray(mats, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    if mats.shape[0] == 0:
        return np.empty(rhs.shape)
    if USE_NUMBA:
        return spd_solve_batch_numba(mats, rhs)
    return spd_solve_batch_numpy(mats, rhs)


def upper_counts(sorted_ref, x):
    sorted_ref = np.ascontiguousarray(sorted_ref, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA:
        return upper_counts_numba(sorted_ref, x)
    return upper_counts_numpy(sorted_ref, x)
