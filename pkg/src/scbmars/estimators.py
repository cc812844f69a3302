"""Treatment-effect estimators built on bagged forward basis search.

``ScbmRegressor`` is the main model: forward passes on bootstrap replicates
of the transformed outcome propose hinge bases, and a group-LASSO on the
original outcome with one (treated, control) coefficient pair per basis
shrinks and selects them jointly. ``TransformedOutcomeBaggingMars`` covers
the two simpler variants that regress the transformed outcome itself, with
either per-replicate LASSO averaging or one pooled ridge refit.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator

from .basis import BasisCollection, design_column, design_matrix
from .data import check_covariates, check_xty
from .exceptions import UnsupportedModelError
from .forward import ForwardConfig, forward_pass
from .group_lasso import (
    build_grouped_design,
    cv_lambda,
    raw_grouped_columns,
    solve,
)
from .linalg import ridge_solve
from .propensity import fit_propensity, transform_outcome

__all__ = [
    "ScbmRegressor",
    "TransformedOutcomeBaggingMars",
    "make_estimator",
    "ESTIMATOR_NAMES",
]


def _seed_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1)[0])


def _bootstrap_bases(X, response, n_replicates, config, boot_ss, bootstrap):
    """Run one forward pass per bootstrap replicate and return the basis
    lists, one per replicate (constant included)."""
    n = X.shape[0]
    out = []
    for rep_ss in boot_ss.spawn(n_replicates):
        row_ss, knot_ss = rep_ss.spawn(2)
        if bootstrap:
            rows = np.random.default_rng(row_ss).integers(0, n, size=n)
        else:
            rows = np.arange(n)
        fit = forward_pass(X[rows], response[rows], config, seed=knot_ss)
        out.append(fit.basis)
    return out


def _prune_single_arm(functions, X, t):
    """Drop bases whose column vanishes on one arm; their grouped pair would
    have an identically-zero column and the pair could not move together."""
    kept = []
    for f in functions:
        if f.is_constant:
            kept.append(f)
            continue
        col = design_column(f, X)
        if np.any(col[t == 1] != 0.0) and np.any(col[t == 0] != 0.0):
            kept.append(f)
    return kept


class ScbmRegressor(BaseEstimator):
    """Heterogeneous treatment-effect regressor with grouped shrinkage.

    Pipeline: fit a propensity model, form the inverse-propensity
    transformed outcome z, run a hinge-basis forward pass on each bootstrap
    replicate of (X, z), pool the distinct bases, then fit a group-LASSO of
    the original outcome on per-basis (treated, control) column pairs with
    the penalty level chosen by cross-validation. The effect estimate is the
    difference of the two arm predictions, so a basis either contributes to
    both arms or to neither.

    Parameters
    ----------
    n_replicates : int
        Number of bootstrap forward passes proposing bases.
    m_max : int
        Forward-pass cap on non-constant terms per replicate (even).
    k_max : int
        Maximum interaction degree of a basis.
    min_active : int
        Minimum active rows for a parent to spawn children.
    propensity : str | float | object
        "rf", "logistic", "known:<value>", a probability, or a fitted-like
        model with fit/predict.
    clip_epsilon : float
        Propensities are clipped to [eps, 1-eps] before transforming; 0
        disables clipping.
    n_folds, n_lambda, lambda_ratio : CV grid controls.
    bootstrap : bool
        Draw bootstrap resamples (False reuses the full sample each
        replicate; mainly for tests).
    random_state : int | None
        Master seed; all internal draws derive from it.
    """

    def __init__(
        self,
        n_replicates: int = 25,
        m_max: int = 10,
        k_max: int = 2,
        min_active: int = 5,
        propensity="rf",
        clip_epsilon: float = 0.01,
        n_folds: int = 5,
        n_lambda: int = 30,
        lambda_ratio: float = 1e-3,
        bootstrap: bool = True,
        random_state: int | None = 0,
    ):
        self.n_replicates = n_replicates
        self.m_max = m_max
        self.k_max = k_max
        self.min_active = min_active
        self.propensity = propensity
        self.clip_epsilon = clip_epsilon
        self.n_folds = n_folds
        self.n_lambda = n_lambda
        self.lambda_ratio = lambda_ratio
        self.bootstrap = bootstrap
        self.random_state = random_state

    def fit(self, X, y, treatment):
        X, y, t = check_xty(X, y, treatment)
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be >= 1")
        ss = np.random.SeedSequence(self.random_state)
        prop_ss, boot_ss, cv_ss = ss.spawn(3)

        self.propensity_model_ = fit_propensity(
            X, t, self.propensity, random_state=_seed_int(prop_ss)
        )
        e_hat = self.propensity_model_.predict(X)
        self.transformed_ = transform_outcome(y, t, e_hat, self.clip_epsilon)
        z = self.transformed_.z

        config = ForwardConfig(
            m_max=self.m_max, k_max=self.k_max, min_active=self.min_active
        )
        replicate_bases = _bootstrap_bases(
            X, z, self.n_replicates, config, boot_ss, self.bootstrap
        )
        union = BasisCollection.from_replicates(enumerate(replicate_bases))
        functions = _prune_single_arm(union.functions, X, t)
        self.n_pruned_ = len(union.functions) - len(functions)
        if len(functions) == 1:
            warnings.warn(
                "no replicate produced a usable non-constant basis; the "
                "model reduces to a single intercept difference"
            )

        def raw_builder(rows):
            return raw_grouped_columns(functions, X[rows], t[rows])

        self.cv_result_ = cv_lambda(
            functions,
            X,
            y,
            raw_builder,
            t,
            n_folds=self.n_folds,
            n_lambda=self.n_lambda,
            lambda_ratio=self.lambda_ratio,
            seed=_seed_int(cv_ss),
        )
        design = build_grouped_design(functions, X, t)
        self.solution_ = solve(design, y, self.cv_result_.lam)

        self.basis_ = list(functions)
        beta = self.solution_.beta
        G = len(functions)
        pairs = np.empty((G, 2))
        pairs[:, 1] = beta[0::2]  # treated columns come first in each pair
        pairs[:, 0] = beta[1::2]
        self.coef_pairs_ = pairs
        self.lambda_ = self.solution_.lam
        self.n_features_in_ = X.shape[1]
        self.X_, self.y_, self.t_ = X, y, t
        return self

    def _check_predict(self, X) -> np.ndarray:
        if not hasattr(self, "basis_"):
            raise ValueError("estimator is not fitted; call fit first")
        X = check_covariates(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X

    def predict_outcome(self, X, arm: int) -> np.ndarray:
        """Predicted outcome under the given arm (1 treated, 0 control)."""
        X = self._check_predict(X)
        if arm not in (0, 1):
            raise ValueError("arm must be 0 or 1")
        return design_matrix(self.basis_, X) @ self.coef_pairs_[:, arm]

    def predict(self, X) -> np.ndarray:
        """Estimated treatment effect: exactly the difference of the two
        arm predictions."""
        return self.predict_outcome(X, 1) - self.predict_outcome(X, 0)

    def active_basis_(self):
        """Bases whose coefficient pair is nonzero (constant included when
        its pair is nonzero)."""
        keep = np.any(self.coef_pairs_ != 0.0, axis=1)
        return [f for f, k in zip(self.basis_, keep) if k]


def _ridge_cv(functions, X, z, t, alphas, n_folds, seed):
    """K-fold CV over a descending ridge grid on the standardized basis
    expansion of z; returns (best_alpha, coefficients on original scale)."""
    from .group_lasso import _standardize, _stratified_folds

    n = X.shape[0]
    raw_full = design_matrix(functions, X)
    penalize = np.array([not f.is_constant for f in functions])
    folds = _stratified_folds(t, n_folds, np.random.default_rng(seed))
    errs = np.zeros((n_folds, len(alphas)))
    for k, val in enumerate(folds):
        tr = np.setdiff1d(np.arange(n), val, assume_unique=True)
        cols, scales = _standardize(raw_full[tr])
        for j, alpha in enumerate(alphas):
            beta = ridge_solve(cols, z[tr], alpha, penalize=penalize) / scales
            resid = z[val] - raw_full[val] @ beta
            errs[k, j] = float(np.mean(resid * resid))
    best = int(np.argmin(errs.mean(axis=0)))
    cols, scales = _standardize(raw_full)
    beta = ridge_solve(cols, z, alphas[best], penalize=penalize) / scales
    return float(alphas[best]), beta


class TransformedOutcomeBaggingMars(BaseEstimator):
    """Bagged forward fits that regress the transformed outcome directly.

    With ``ridge_refit=False`` each replicate keeps its own LASSO fit of z
    on that replicate's bases (penalty by CV) and predictions average the
    replicate models. With ``ridge_refit=True`` the replicate bases are
    pooled and a single ridge regression of z on the union (CV for the
    ridge level, constant unpenalized) gives the final model.

    The fitted model estimates the treatment effect directly; there are no
    per-arm outcome predictions.
    """

    def __init__(
        self,
        n_replicates: int = 25,
        m_max: int = 10,
        k_max: int = 2,
        min_active: int = 5,
        propensity="rf",
        clip_epsilon: float = 0.01,
        n_folds: int = 5,
        n_lambda: int = 30,
        lambda_ratio: float = 1e-3,
        ridge_refit: bool = False,
        bootstrap: bool = True,
        random_state: int | None = 0,
    ):
        self.n_replicates = n_replicates
        self.m_max = m_max
        self.k_max = k_max
        self.min_active = min_active
        self.propensity = propensity
        self.clip_epsilon = clip_epsilon
        self.n_folds = n_folds
        self.n_lambda = n_lambda
        self.lambda_ratio = lambda_ratio
        self.ridge_refit = ridge_refit
        self.bootstrap = bootstrap
        self.random_state = random_state

    def fit(self, X, y, treatment):
        X, y, t = check_xty(X, y, treatment)
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be >= 1")
        ss = np.random.SeedSequence(self.random_state)
        prop_ss, boot_ss, cv_ss = ss.spawn(3)

        self.propensity_model_ = fit_propensity(
            X, t, self.propensity, random_state=_seed_int(prop_ss)
        )
        e_hat = self.propensity_model_.predict(X)
        self.transformed_ = transform_outcome(y, t, e_hat, self.clip_epsilon)
        z = self.transformed_.z

        config = ForwardConfig(
            m_max=self.m_max, k_max=self.k_max, min_active=self.min_active
        )
        replicate_bases = _bootstrap_bases(
            X, z, self.n_replicates, config, boot_ss, self.bootstrap
        )
        union = BasisCollection.from_replicates(enumerate(replicate_bases))
        functions = union.functions
        if len(functions) == 1:
            warnings.warn(
                "no replicate produced a usable non-constant basis; the "
                "model reduces to a single intercept"
            )

        if self.ridge_refit:
            n = X.shape[0]
            alphas = n * np.power(10.0, np.linspace(2.0, -6.0, self.n_lambda))
            self.alpha_, coef = _ridge_cv(
                functions, X, z, t, alphas, self.n_folds, _seed_int(cv_ss)
            )
            self.basis_ = list(functions)
            self.coef_ = coef
        else:
            # per-replicate LASSO of z on that replicate's bases over the
            # full sample, then average the replicate models
            index = {f: g for g, f in enumerate(functions)}
            acc = np.zeros(len(functions))
            cv_children = cv_ss.spawn(self.n_replicates)
            for b, fns_b in enumerate(replicate_bases):
                def raw_builder(rows, fns_b=fns_b):
                    return design_matrix(fns_b, X[rows])

                cv = cv_lambda(
                    fns_b,
                    X,
                    z,
                    raw_builder,
                    t,
                    n_folds=self.n_folds,
                    n_lambda=self.n_lambda,
                    lambda_ratio=self.lambda_ratio,
                    seed=_seed_int(cv_children[b]),
                )
                from .group_lasso import build_singleton_design

                sol = solve(build_singleton_design(fns_b, X), z, cv.lam)
                for f, b_f in zip(fns_b, sol.beta):
                    acc[index[f]] += b_f
            self.basis_ = list(functions)
            self.coef_ = acc / self.n_replicates

        self.n_features_in_ = X.shape[1]
        self.X_, self.y_, self.t_ = X, y, t
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "basis_"):
            raise ValueError("estimator is not fitted; call fit first")
        X = check_covariates(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return design_matrix(self.basis_, X) @ self.coef_

    def predict_outcome(self, X, arm: int):
        raise UnsupportedModelError(
            "transformed-outcome models estimate the effect directly and "
            "have no per-arm outcome predictions"
        )


ESTIMATOR_NAMES = ("scbm", "prop0", "prop1", "cm", "bcm")


def make_estimator(name: str, **kwargs):
    """Build an estimator by its short variant name.

    Recognized names: scbm, prop0, prop1, cm, bcm. Keyword arguments are
    passed through to the estimator constructor; prop0/prop1 fix
    ``ridge_refit`` and cm/bcm ignore transformed-outcome options.
    """
    from .baselines import BaggedCausalMars, CausalMars

    if name == "scbm":
        return ScbmRegressor(**kwargs)
    if name == "prop0":
        return TransformedOutcomeBaggingMars(ridge_refit=False, **kwargs)
    if name == "prop1":
        return TransformedOutcomeBaggingMars(ridge_refit=True, **kwargs)
    if name == "cm":
        kwargs.pop("propensity", None)
        kwargs.pop("clip_epsilon", None)
        kwargs.pop("n_replicates", None)
        kwargs.pop("bootstrap", None)
        for k in ("n_folds", "n_lambda", "lambda_ratio"):
            kwargs.pop(k, None)
        return CausalMars(**kwargs)
    if name == "bcm":
        kwargs.pop("clip_epsilon", None)
        for k in ("n_folds", "n_lambda", "lambda_ratio"):
            kwargs.pop(k, None)
        return BaggedCausalMars(**kwargs)
    raise ValueError(f"unknown estimator name {name!r}; choose from {ESTIMATOR_NAMES}")
