"""Hot numeric kernels, in two flavors.

Every kernel here exists as a vectorized numpy implementation
(``*_np``) and a plain-loop implementation (``*_loop``) that numba
compiles when available.  The public names (``legendre_table``,
``hermite_table``, ``basis_matrix``, ``basis_row``, ``ar1_loglik``)
point at the active flavor: the njit-compiled loops by default, the
numpy versions when the environment variable ``UQPIPE_DISABLE_NUMBA``
is set (or numba is not importable).

``benchmarks/bench_kernels.py`` compares the two paths.
"""

from __future__ import annotations

import math
import os

import numpy as np

DISABLE_ENV = "UQPIPE_DISABLE_NUMBA"


def _numba_requested() -> bool:
    flag = os.environ.get(DISABLE_ENV, "").strip()
    if flag not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _numba_requested()

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------

def legendre_table_np(u: np.ndarray, max_degree: int) -> np.ndarray:
    """Orthonormal Legendre values ``psi_k(u)`` for k = 0..max_degree.

    The classical three-term recurrence is run first, then each column is
    scaled by sqrt(2k+1) so that E[psi_k^2] = 1 under U(-1, 1).

    Parameters
    ----------
    u : (n,) array of points in [-1, 1]
    max_degree : highest degree to evaluate

    Returns
    -------
    (n, max_degree + 1) array
    """
    u = np.asarray(u, dtype=np.float64)
    n = u.shape[0]
    out = np.empty((n, max_degree + 1))
    out[:, 0] = 1.0
    if max_degree >= 1:
        out[:, 1] = u
    for k in range(1, max_degree):
        out[:, k + 1] = ((2 * k + 1) * u * out[:, k] - k * out[:, k - 1]) / (k + 1)
    out *= np.sqrt(2.0 * np.arange(max_degree + 1) + 1.0)
    return out


def hermite_table_np(u: np.ndarray, max_degree: int) -> np.ndarray:
    """Orthonormal probabilists' Hermite values, normalized by 1/sqrt(k!)."""
    u = np.asarray(u, dtype=np.float64)
    n = u.shape[0]
    out = np.empty((n, max_degree + 1))
    out[:, 0] = 1.0
    if max_degree >= 1:
        out[:, 1] = u
    for k in range(1, max_degree):
        out[:, k + 1] = u * out[:, k] - k * out[:, k - 1]
    norm = np.ones(max_degree + 1)
    for k in range(1, max_degree + 1):
        norm[k] = norm[k - 1] / math.sqrt(k)
    out *= norm
    return out


def basis_matrix_np(tables: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Tensor-product basis matrix from per-dimension value tables.

    Parameters
    ----------
    tables : (M, n, D + 1) univariate values per dimension
    indices : (P, M) integer multi-indices

    Returns
    -------
    (n, P) array with entry [i, p] = prod_m tables[m, i, indices[p, m]]
    """
    n = tables.shape[1]
    n_basis = indices.shape[0]
    out = np.ones((n, n_basis))
    for m in range(tables.shape[0]):
        out *= tables[m][:, indices[:, m]]
    return out


def basis_row_np(table: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Tensor-product basis values at a single point.

    ``table`` is (M, D + 1): one row of univariate values per dimension.
    """
    n_dim = table.shape[0]
    return table[np.arange(n_dim), indices].prod(axis=1)


def legendre_series_point_np(x: np.ndarray, scale: np.ndarray,
                             shift: np.ndarray, indices: np.ndarray,
                             stacked: np.ndarray, eigvecs: np.ndarray,
                             mean: np.ndarray, max_degree: int):
    """Fused single-point surrogate evaluation on an all-Legendre basis.

    Standardizes the physical point (u = scale * x + shift), clips into
    [-1, 1], evaluates the tensor basis, combines the per-component
    coefficient matrix ``stacked`` (P, C) into scores and reconstructs
    mean + eigvecs @ z.  Returns (series, worst) where ``worst`` is
    max|u| before clipping, so the caller can reject out-of-domain
    points without a separate pass.  This is the per-proposal hot path
    of MCMC.
    """
    u = x * scale + shift
    worst = float(np.abs(u).max())
    uc = np.minimum(np.maximum(u, -1.0), 1.0)
    table = legendre_table_np(uc, max_degree)
    psi = basis_row_np(table, indices)
    z = psi @ stacked
    return mean + eigvecs @ z, worst


def legendre_series_point_loop(x, scale, shift, indices, stacked, eigvecs,
                               mean, max_degree):
    n_dim = x.shape[0]
    worst = 0.0
    table = np.empty((n_dim, max_degree + 1))
    for i in range(n_dim):
        ui = x[i] * scale[i] + shift[i]
        if abs(ui) > worst:
            worst = abs(ui)
        if ui > 1.0:
            ui = 1.0
        elif ui < -1.0:
            ui = -1.0
        table[i, 0] = 1.0
        if max_degree >= 1:
            table[i, 1] = ui
        for k in range(1, max_degree):
            table[i, k + 1] = ((2 * k + 1) * ui * table[i, k]
                               - k * table[i, k - 1]) / (k + 1)
        for k in range(max_degree + 1):
            table[i, k] *= math.sqrt(2.0 * k + 1.0)
    n_basis = indices.shape[0]
    n_comp = stacked.shape[1]
    z = np.zeros(n_comp)
    for p in range(n_basis):
        acc = 1.0
        for m in range(n_dim):
            e = indices[p, m]
            if e != 0:        # sparse multi-indices: skip unit factors
                acc *= table[m, e]
        for c in range(n_comp):
            z[c] += acc * stacked[p, c]
    n_out = mean.shape[0]
    out = np.empty(n_out)
    for t in range(n_out):
        s = mean[t]
        for c in range(n_comp):
            s += eigvecs[t, c] * z[c]
        out[t] = s
    return out, worst


def ar1_loglik_np(resid: np.ndarray, sigma: float, rho: float) -> float:
    """Gaussian log-density of a residual vector under AR(1) covariance.

    The covariance is sigma^2 * rho^|i-j| (exponential kernel on a uniform
    grid); the innovations form evaluates it in O(n).
    """
    n = resid.shape[0]
    sig2 = sigma * sigma
    if n == 1:
        return -0.5 * (LOG_2PI + math.log(sig2) + resid[0] * resid[0] / sig2)
    one_m = 1.0 - rho * rho
    d = resid[1:] - rho * resid[:-1]
    quad = resid[0] * resid[0] + float(d @ d) / one_m
    return -0.5 * (n * (LOG_2PI + math.log(sig2))
                   + (n - 1) * math.log(one_m) + quad / sig2)


# ---------------------------------------------------------------------------
# loop implementations (njit targets)
# ---------------------------------------------------------------------------

def legendre_table_loop(u, max_degree):
    n = u.shape[0]
    out = np.empty((n, max_degree + 1))
    for i in range(n):
        out[i, 0] = 1.0
        if max_degree >= 1:
            out[i, 1] = u[i]
        for k in range(1, max_degree):
            out[i, k + 1] = ((2 * k + 1) * u[i] * out[i, k]
                             - k * out[i, k - 1]) / (k + 1)
        for k in range(max_degree + 1):
            out[i, k] *= math.sqrt(2.0 * k + 1.0)
    return out


def hermite_table_loop(u, max_degree):
    n = u.shape[0]
    out = np.empty((n, max_degree + 1))
    norm = np.ones(max_degree + 1)
    for k in range(1, max_degree + 1):
        norm[k] = norm[k - 1] / math.sqrt(k)
    for i in range(n):
        out[i, 0] = 1.0
        if max_degree >= 1:
            out[i, 1] = u[i]
        for k in range(1, max_degree):
            out[i, k + 1] = u[i] * out[i, k] - k * out[i, k - 1]
        for k in range(max_degree + 1):
            out[i, k] *= norm[k]
    return out


def basis_matrix_loop(tables, indices):
    n_dim = tables.shape[0]
    n = tables.shape[1]
    n_basis = indices.shape[0]
    out = np.empty((n, n_basis))
    for i in range(n):
        for p in range(n_basis):
            acc = 1.0
            for m in range(n_dim):
                acc *= tables[m, i, indices[p, m]]
            out[i, p] = acc
    return out


def basis_row_loop(table, indices):
    n_basis = indices.shape[0]
    n_dim = table.shape[0]
    out = np.empty(n_basis)
    for p in range(n_basis):
        acc = 1.0
        for m in range(n_dim):
            acc *= table[m, indices[p, m]]
        out[p] = acc
    return out


def ar1_loglik_loop(resid, sigma, rho):
    n = resid.shape[0]
    sig2 = sigma * sigma
    if n == 1:
        return -0.5 * (LOG_2PI + math.log(sig2) + resid[0] * resid[0] / sig2)
    one_m = 1.0 - rho * rho
    acc = 0.0
    for k in range(1, n):
        d = resid[k] - rho * resid[k - 1]
        acc += d * d
    quad = resid[0] * resid[0] + acc / one_m
    return -0.5 * (n * (LOG_2PI + math.log(sig2))
                   + (n - 1) * math.log(one_m) + quad / sig2)


if NUMBA_ENABLED:
    from numba import njit

    _opts = dict(cache=True, nogil=True)
    legendre_table = njit(**_opts)(legendre_table_loop)
    hermite_table = njit(**_opts)(hermite_table_loop)
    basis_matrix = njit(**_opts)(basis_matrix_loop)
    basis_row = njit(**_opts)(basis_row_loop)
    ar1_loglik = njit(**_opts)(ar1_loglik_loop)
    legendre_series_point = njit(**_opts)(legendre_series_point_loop)
else:
    legendre_table = legendre_table_np
    hermite_table = hermite_table_np
    basis_matrix = basis_matrix_np
    basis_row = basis_row_np
    ar1_loglik = ar1_loglik_np
    legendre_series_point = legendre_series_point_np


def warm_up() -> None:
    """Trigger JIT compilation of every kernel (no-op on the numpy path)."""
    u = np.array([0.25, -0.5])
    legendre_table(u, 3)
    hermite_table(u, 3)
    tables = np.ones((2, 2, 4))
    idx = np.zeros((3, 2), dtype=np.int64)
    basis_matrix(tables, idx)
    basis_row(np.ones((2, 4)), idx)
    ar1_loglik(np.array([0.1, -0.2, 0.3]), 1.0, 0.5)
    legendre_series_point(np.ascontiguousarray(u), np.ones(2), np.zeros(2),
                          idx, np.ones((3, 2)), np.ones((4, 2)),
                          np.zeros(4), 3)
