"""Propensity-score models and the IPTW transformed outcome.

Three model kinds: a known constant (randomized designs), ridge-penalized
logistic regression fit by IRLS, and a bagged forest of probability trees
(the default for observational data). The forest draws a bootstrap resample
and a feature subset per tree with seeds derived from the master seed, and
stores each tree as plain arrays so fitted models serialize to JSON and
predict identically after a round trip.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.tree import DecisionTreeClassifier

from .data import check_xty
from .exceptions import ConvergenceError

__all__ = [
    "ConstantPropensity",
    "LogisticPropensity",
    "ForestPropensity",
    "fit_propensity",
    "TransformedOutcome",
    "transform_outcome",
]


class ConstantPropensity:
    """e(x) identically equal to ``value`` (e.g. 0.5 in an RCT)."""

    kind = "known-constant"

    def __init__(self, value: float):
        if not 0.0 < value < 1.0:
            raise ValueError(f"constant propensity must lie in (0,1), got {value}")
        self.value = float(value)

    def fit(self, X, t):
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.full(X.shape[0], self.value)


class LogisticPropensity:
    """Ridge-penalized logistic regression fit by IRLS.

    The intercept is unpenalized. Fitting iterates Newton steps until the
    penalized gradient norm drops below ``tol``; exceeding ``max_iter``
    raises :class:`ConvergenceError` naming the gradient norm reached.
    """

    kind = "logistic"

    def __init__(self, ridge: float = 1e-4, tol: float = 1e-8, max_iter: int = 100):
        self.ridge = float(ridge)
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.coef_ = None
        self.intercept_ = None

    def fit(self, X, t):
        X, _, t = check_xty(X, np.zeros(len(t)), t, require_both_arms=True)
        n, p = X.shape
        X1 = np.column_stack([np.ones(n), X])
        mask = np.ones(p + 1)
        mask[0] = 0.0  # no penalty on the intercept
        beta = np.zeros(p + 1)
        for _ in range(self.max_iter):
            prob = expit(X1 @ beta)
            grad = X1.T @ (t - prob) - self.ridge * mask * beta
            gnorm = float(np.linalg.norm(grad))
            if gnorm <= self.tol:
                break
            w = np.clip(prob * (1.0 - prob), 1e-10, None)
            H = (X1 * w[:, None]).T @ X1 + self.ridge * np.diag(mask)
            beta = beta + np.linalg.solve(H, grad)
        else:
            raise ConvergenceError(
                f"logistic propensity IRLS did not converge in {self.max_iter} "
                f"iterations (gradient norm {gnorm:.3e}, tol {self.tol:.1e})"
            )
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        return self

    def predict(self, X) -> np.ndarray:
        if self.coef_ is None:
            raise ValueError("model is not fitted")
        X = np.asarray(X, dtype=float)
        return expit(self.intercept_ + X @ self.coef_)


def _export_tree(clf: DecisionTreeClassifier, feature_subset: np.ndarray) -> dict:
    tr = clf.tree_
    feature = tr.feature.copy()
    feature[feature >= 0] = feature_subset[feature[feature >= 0]]
    value = tr.value[:, 0, :]
    totals = value.sum(axis=1)
    if len(clf.classes_) == 1:
        prob1 = np.full(tr.node_count, float(clf.classes_[0]))
    else:
        col1 = int(np.where(clf.classes_ == 1)[0][0])
        prob1 = value[:, col1] / np.where(totals > 0, totals, 1.0)
    return {
        "feature": feature.astype(int),
        "threshold": tr.threshold.copy(),
        "left": tr.children_left.astype(int),
        "right": tr.children_right.astype(int),
        "prob1": prob1.astype(float),
    }


def _tree_predict(tree: dict, X: np.ndarray) -> np.ndarray:
    feature = np.asarray(tree["feature"], dtype=int)
    threshold = np.asarray(tree["threshold"], dtype=float)
    left = np.asarray(tree["left"], dtype=int)
    right = np.asarray(tree["right"], dtype=int)
    prob1 = np.asarray(tree["prob1"], dtype=float)
    node = np.zeros(X.shape[0], dtype=int)
    while True:
        internal = feature[node] >= 0
        if not internal.any():
            break
        idx = np.flatnonzero(internal)
        cur = node[idx]
        go_left = X[idx, feature[cur]] <= threshold[cur]
        node[idx] = np.where(go_left, left[cur], right[cur])
    return prob1[node]


class ForestPropensity:
    """Bagged probability trees: per tree, a bootstrap resample and a feature
    subset drawn from the master seed, Gini splitting, and leaf class
    frequencies; predictions average the per-tree leaf frequencies.

    ``max_depth=0`` yields root-only trees predicting the treated fraction of
    their resample. Fitted trees are held as plain arrays (JSON-safe).
    """

    kind = "random-forest"

    def __init__(
        self,
        n_trees: int = 200,
        max_depth: int = 6,
        min_leaf: int = 10,
        feature_subsample: str | float = "sqrt",
        random_state: int = 0,
    ):
        self.n_trees = int(n_trees)
        self.max_depth = int(max_depth)
        self.min_leaf = int(min_leaf)
        self.feature_subsample = feature_subsample
        self.random_state = random_state
        self.trees_ = None

    def _n_features_per_tree(self, p: int) -> int:
        if self.feature_subsample == "sqrt":
            return max(1, int(round(np.sqrt(p))))
        frac = float(self.feature_subsample)
        if not 0.0 < frac <= 1.0:
            raise ValueError("feature_subsample must be 'sqrt' or a fraction in (0,1]")
        return max(1, int(round(frac * p)))

    def fit(self, X, t):
        X, _, t = check_xty(X, np.zeros(len(t)), t, require_both_arms=True)
        n, p = X.shape
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        m = self._n_features_per_tree(p)
        seeds = np.random.SeedSequence(self.random_state).spawn(self.n_trees)
        trees = []
        for ss in seeds:
            rng = np.random.default_rng(ss)
            rows = rng.integers(0, n, size=n)
            feats = np.sort(rng.choice(p, size=m, replace=False))
            tb, Xb = t[rows], X[np.ix_(rows, feats)]
            if self.max_depth == 0 or len(np.unique(tb)) == 1:
                trees.append(
                    {
                        "feature": np.array([-2]),
                        "threshold": np.array([0.0]),
                        "left": np.array([-1]),
                        "right": np.array([-1]),
                        "prob1": np.array([float(tb.mean())]),
                    }
                )
                continue
            clf = DecisionTreeClassifier(
                criterion="gini",
                max_depth=self.max_depth,
                min_samples_leaf=self.min_leaf,
                random_state=int(rng.integers(0, 2**31 - 1)),
            )
            clf.fit(Xb, tb)
            trees.append(_export_tree(clf, feats))
        self.trees_ = trees
        return self

    def predict(self, X) -> np.ndarray:
        if self.trees_ is None:
            raise ValueError("model is not fitted")
        X = np.asarray(X, dtype=float)
        acc = np.zeros(X.shape[0])
        for tree in self.trees_:
            acc += _tree_predict(tree, X)
        return acc / len(self.trees_)


def fit_propensity(X, t, spec="rf", random_state: int = 0):
    """Build and fit a propensity model from a short spec.

    ``spec`` may be a float (known constant), ``"known:<value>"``,
    ``"logistic"``, ``"rf"``, or an already-constructed model exposing
    ``fit``/``predict``.
    """
    if hasattr(spec, "predict") and hasattr(spec, "fit"):
        return spec.fit(X, t)
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return ConstantPropensity(float(spec))
    if isinstance(spec, str):
        if spec.startswith("known:"):
            return ConstantPropensity(float(spec.split(":", 1)[1]))
        if spec == "logistic":
            return LogisticPropensity().fit(X, t)
        if spec == "rf":
            return ForestPropensity(random_state=random_state).fit(X, t)
    raise ValueError(f"unknown propensity spec {spec!r}")


@dataclass(frozen=True)
class TransformedOutcome:
    """IPTW transformed outcome z with the clipped propensities that built it."""

    z: np.ndarray
    clip_epsilon: float
    propensity_used: np.ndarray


def transform_outcome(y, t, e_hat, clip_epsilon: float = 0.01) -> TransformedOutcome:
    """Build z_i = y_i / e_i for treated rows and -y_i / (1 - e_i) for controls.

    Propensities are clipped into [eps, 1-eps] before dividing;
    ``clip_epsilon=0`` disables clipping (useful with oracle propensities)
    but then requires e strictly inside (0,1).
    """
    y = np.asarray(y, dtype=float).ravel()
    t = np.asarray(t).ravel().astype(int)
    e = np.asarray(e_hat, dtype=float).ravel()
    if not 0.0 <= clip_epsilon < 0.5:
        raise ValueError(f"clip_epsilon must lie in [0, 0.5), got {clip_epsilon}")
    if not np.all(np.isfinite(e)):
        raise ValueError("propensities contain non-finite values")
    if y.shape != e.shape or y.shape != t.shape:
        raise ValueError("y, t and e_hat must have equal length")
    e = np.clip(e, clip_epsilon, 1.0 - clip_epsilon)
    if np.any(e <= 0.0) or np.any(e >= 1.0):
        raise ValueError("propensities must lie strictly inside (0,1) after clipping")
    z = np.where(t == 1, y / e, -y / (1.0 - e))
    return TransformedOutcome(z=z, clip_epsilon=float(clip_epsilon), propensity_used=e)
