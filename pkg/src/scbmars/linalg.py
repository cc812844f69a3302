"""Small least-squares utilities shared by the forward pass and baselines."""

from __future__ import annotations

import numpy as np
from scipy import linalg as sla

__all__ = ["ridge_lstsq", "ridge_solve"]

# Jitter added to the normal equations when a fit is numerically singular;
# scaled by the mean diagonal so it is unit-free.
JITTER = 1e-10


def ridge_lstsq(X: np.ndarray, y: np.ndarray):
    """Least squares via normal equations with a jitter fallback.

    Returns ``(beta, rss)``. Singular designs are never an error: the
    diagonal gets a trace-scaled jitter and the solve is retried, so
    degenerate candidate columns simply contribute ~nothing.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    G = X.T @ X
    c = X.T @ y
    beta = _solve_spd(G, c)
    resid = y - X @ beta
    return beta, float(resid @ resid)


def ridge_solve(X: np.ndarray, y: np.ndarray, alpha: float, penalize=None):
    """Ridge regression ``min ||y - Xb||^2 + alpha * ||b_pen||^2``.

    ``penalize`` is a boolean mask over columns (default: all penalized).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    k = X.shape[1]
    if penalize is None:
        penalize = np.ones(k, dtype=bool)
    G = X.T @ X + alpha * np.diag(penalize.astype(float))
    return _solve_spd(G, X.T @ y)


def _solve_spd(G: np.ndarray, c: np.ndarray) -> np.ndarray:
    k = G.shape[0]
    if k == 0:
        return np.zeros(0)
    try:
        chol = sla.cho_factor(G, lower=True, check_finite=False)
        beta = sla.cho_solve(chol, c, check_finite=False)
        if np.all(np.isfinite(beta)):
            return beta
    except sla.LinAlgError:
        pass
    jitter = JITTER * (np.trace(G) / k + 1.0)
    Gj = G + jitter * np.eye(k)
    try:
        chol = sla.cho_factor(Gj, lower=True, check_finite=False)
        return sla.cho_solve(chol, c, check_finite=False)
    except sla.LinAlgError:
        # pathological even after jitter: fall back to the pseudo-inverse
        return np.linalg.lstsq(Gj, c, rcond=None)[0]
