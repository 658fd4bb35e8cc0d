"""Hot numerical kernels with numba acceleration and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``ETCPDE_NO_NUMBA`` is not set to ``1``.  Both paths implement the
same arithmetic in the same order, so results agree to rounding.  The
module-level aliases (``tridiag_solve_factored``, ``mnn_forward_batch``,
``mnn_jacobian_batch``) point at the selected implementation;
``benchmarks/bench_kernels.py`` times the two paths against each other.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via ETCPDE_NO_NUMBA instead
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("ETCPDE_NO_NUMBA", "0") != "1"

__all__ = [
    "HAS_NUMBA",
    "USE_NUMBA",
    "tridiag_factor",
    "tridiag_solve_factored",
    "tridiag_solve_factored_np",
    "mnn_forward_batch",
    "mnn_forward_batch_np",
    "mnn_jacobian_batch",
    "mnn_jacobian_batch_np",
]


def tridiag_factor(sub: np.ndarray, dia: np.ndarray, sup: np.ndarray):
    """Precompute the Thomas-elimination coefficients of a tridiagonal matrix.

    Parameters
    ----------
    sub, dia, sup : arrays of length n
        Sub-diagonal (sub[0] unused), diagonal, super-diagonal (sup[-1]
        unused).

    Returns
    -------
    cp, den : arrays of length n
        Modified super-diagonal and pivots; feed to
        ``tridiag_solve_factored`` for O(n) solves against many right-hand
        sides of the same matrix.
    """
    n = dia.shape[0]
    cp = np.empty(n)
    den = np.empty(n)
    den[0] = dia[0]
    cp[0] = sup[0] / den[0]
    for i in range(1, n):
        den[i] = dia[i] - sub[i] * cp[i - 1]
        cp[i] = sup[i] / den[i] if i < n - 1 else 0.0
    if not np.all(np.isfinite(den)) or np.any(den == 0.0):
        raise ZeroDivisionError("singular tridiagonal system")
    return cp, den


def tridiag_solve_factored_np(sub, cp, den, b):
    """Solve the factored tridiagonal system for one right-hand side."""
    n = b.shape[0]
    x = np.empty(n)
    x[0] = b[0] / den[0]
    for i in range(1, n):
        x[i] = (b[i] - sub[i] * x[i - 1]) / den[i]
    for i in range(n - 2, -1, -1):
        x[i] = x[i] - cp[i] * x[i + 1]
    return x


def mnn_forward_batch_np(W, V, q, r, X):
    """Network output and hidden activations for a batch of states.

    Returns ``(out, mu, sig)`` with ``out = W @ mu`` row-wise; ``sig`` is the
    logistic factor reused by the Jacobian.
    """
    sig = 1.0 / (1.0 + np.exp(-(X @ V.T) / r))
    mu = q * (2.0 * sig - 1.0)
    out = mu @ W.T
    return out, mu, sig


def mnn_jacobian_batch_np(W, V, q, r, X, mu, sig):
    """Jacobian of the batched network output w.r.t. (W, V) entries.

    Parameter order: row-major W (m*n_h entries) then row-major V
    (n_h*n_in).  Returns J of shape (N*m, m*n_h + n_h*n_in); output rows
    are grouped per sample.
    """
    N, m = X.shape[0], W.shape[0]
    n_h = W.shape[1]
    n_in = X.shape[1]
    dmu = (2.0 * q / r) * sig * (1.0 - sig)
    J = np.zeros((N, m, m * n_h + n_h * n_in))
    for a in range(m):
        J[:, a, a * n_h:(a + 1) * n_h] = mu
    # d out_a / d V[j,k] = W[a,j] * dmu[:,j] * X[:,k]
    jv = np.einsum("aj,nj,nk->najk", W, dmu, X)
    J[:, :, m * n_h:] = jv.reshape(N, m, n_h * n_in)
    return J.reshape(N * m, m * n_h + n_h * n_in)


if HAS_NUMBA:

    @njit(cache=True, fastmath=False)
    def _tridiag_solve_factored_nb(sub, cp, den, b):  # pragma: no cover
        n = b.shape[0]
        x = np.empty(n)
        x[0] = b[0] / den[0]
        for i in range(1, n):
            x[i] = (b[i] - sub[i] * x[i - 1]) / den[i]
        for i in range(n - 2, -1, -1):
            x[i] = x[i] - cp[i] * x[i + 1]
        return x

    @njit(cache=True, fastmath=False)
    def _mnn_forward_batch_nb(W, V, q, r, X):  # pragma: no cover
        N = X.shape[0]
        m = W.shape[0]
        n_h = W.shape[1]
        mu = np.empty((N, n_h))
        sig = np.empty((N, n_h))
        out = np.empty((N, m))
        for n in range(N):
            for j in range(n_h):
                s = 0.0
                for k in range(X.shape[1]):
                    s += X[n, k] * V[j, k]
                sg = 1.0 / (1.0 + np.exp(-s / r[j]))
                sig[n, j] = sg
                mu[n, j] = q[j] * (2.0 * sg - 1.0)
            for a in range(m):
                s = 0.0
                for j in range(n_h):
                    s += W[a, j] * mu[n, j]
                out[n, a] = s
        return out, mu, sig

    @njit(cache=True, fastmath=False)
    def _mnn_jacobian_batch_nb(W, V, q, r, X, mu, sig):  # pragma: no cover
        N = X.shape[0]
        m = W.shape[0]
        n_h = W.shape[1]
        n_in = X.shape[1]
        npar = m * n_h + n_h * n_in
        J = np.zeros((N * m, npar))
        for n in range(N):
            for a in range(m):
                row = n * m + a
                for j in range(n_h):
                    J[row, a * n_h + j] = mu[n, j]
                for j in range(n_h):
                    dmu = (2.0 * q[j] / r[j]) * sig[n, j] * (1.0 - sig[n, j])
                    wd = W[a, j] * dmu
                    for k in range(n_in):
                        J[row, m * n_h + j * n_in + k] = wd * X[n, k]
        return J

    def tridiag_solve_factored_numba(sub, cp, den, b):
        return _tridiag_solve_factored_nb(sub, cp, den, b)

    def mnn_forward_batch_numba(W, V, q, r, X):
        return _mnn_forward_batch_nb(W, V, q, r, X)

    def mnn_jacobian_batch_numba(W, V, q, r, X, mu, sig):
        return _mnn_jacobian_batch_nb(W, V, q, r, X, mu, sig)


if USE_NUMBA:
    tridiag_solve_factored = tridiag_solve_factored_numba
    mnn_forward_batch = mnn_forward_batch_numba
    mnn_jacobian_batch = mnn_jacobian_batch_numba
else:
    tridiag_solve_factored = tridiag_solve_factored_np
    mnn_forward_batch = mnn_forward_batch_np
    mnn_jacobian_batch = mnn_jacobian_batch_np
