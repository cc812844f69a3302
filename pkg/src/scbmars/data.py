"""Dataset container and input validation helpers.

Estimators accept plain arrays (sklearn style); :class:`Dataset` bundles the
(covariates, treatment, outcome) triple for the simulator, CSV ingestion and
the CLI, validating the shared invariants once at construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Dataset", "check_covariates", "check_xty"]


def check_covariates(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"covariates must be 2-D, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"need n >= 1 and p >= 1, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("covariates contain non-finite values")
    return X


def check_xty(X, y, treatment, require_both_arms: bool = True):
    """Validate and coerce a (covariates, outcome, treatment) triple.

    Returns ``(X, y, t)`` as float/float/int arrays. ``require_both_arms``
    enforces that both treatment arms are non-empty, which every causal fit
    needs; propensity-free utilities may relax it.
    """
    X = check_covariates(X)
    y = np.asarray(y, dtype=float).ravel()
    t = np.asarray(treatment).ravel()
    n = X.shape[0]
    if y.shape[0] != n or t.shape[0] != n:
        raise ValueError(
            f"length mismatch: X has {n} rows, y has {y.shape[0]}, treatment has {t.shape[0]}"
        )
    if not np.all(np.isfinite(y)):
        raise ValueError("outcome contains non-finite values")
    t_float = np.asarray(t, dtype=float)
    if not np.all(np.isin(t_float, (0.0, 1.0))):
        bad = np.unique(t_float[~np.isin(t_float, (0.0, 1.0))])
        raise ValueError(f"treatment must contain only 0 and 1, found {bad.tolist()}")
    t = t_float.astype(int)
    if require_both_arms and (t.sum() == 0 or t.sum() == n):
        raise ValueError("both treatment arms must be non-empty for a causal fit")
    return X, y, t


@dataclass(frozen=True)
class Dataset:
    """An (x_i, t_i, y_i) sample: n x p covariates, binary treatment, outcome."""

    covariates: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X, y, t = check_xty(
            self.covariates, self.outcome, self.treatment, require_both_arms=False
        )
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "outcome", y)
        object.__setattr__(self, "treatment", t)
        if self.feature_names is not None:
            names = tuple(str(c) for c in self.feature_names)
            if len(names) != X.shape[1]:
                raise ValueError(
                    f"feature_names has {len(names)} entries for p={X.shape[1]}"
                )
            object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    def names(self) -> tuple[str, ...]:
        if self.feature_names is not None:
            return self.feature_names
        return tuple(f"x{j + 1}" for j in range(self.p))
