"""Model interpretation: variable importance, partial dependence, and
subgroup calibration.

Importance scores a variable by how much the training-data outcome loss
grows when every basis involving that variable is removed, either by zeroing
those coefficient pairs ("zero") or by refitting the remaining bases at the
same penalty level ("refit"). Partial dependence sweeps one variable over a
quantile grid with all other columns left as observed. Calibration
repeatedly fits on half the data, ranks the held-out half by predicted
effect, and compares group-mean predictions against the simple
treated-minus-control outcome difference within each group.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import clone

from .baselines import BaggedCausalMars, CausalMars
from .estimators import ScbmRegressor, TransformedOutcomeBaggingMars
from .exceptions import UnsupportedModelError
from .group_lasso import build_grouped_design, solve
from .linalg import ridge_lstsq

__all__ = [
    "ImportanceResult",
    "variable_importance",
    "PdpResult",
    "partial_dependence",
    "CalibrationResult",
    "subgroup_calibration",
]


def _training_data(model):
    for attr in ("X_", "y_", "t_"):
        if not hasattr(model, attr):
            raise ValueError("model is not fitted; call fit first")
    return model.X_, model.y_, model.t_


def _outcome_loss_pairs(model, basis, coef_pairs, X, y, t) -> float:
    from .basis import design_matrix

    H = design_matrix(basis, X)
    yhat = np.where(t == 1, H @ coef_pairs[:, 1], H @ coef_pairs[:, 0])
    r = y - yhat
    return float(r @ r)


def _loss_bcm(model: BaggedCausalMars, drop_var, mode) -> float:
    X, y, t = _training_data(model)
    sid = model._stratum_of(X)
    mu1 = np.zeros(len(y))
    mu0 = np.zeros(len(y))
    for rep in model.replicates_:
        basis, coef = rep["basis"], rep["coef"]
        if drop_var is not None:
            keep = np.array([drop_var not in f.variables for f in basis])
            if mode == "zero":
                coef = coef * keep[None, :, None]
            else:
                kept = [f for f, k in zip(basis, keep) if k]
                coef = _ls_pairs_by_stratum(kept, X, y, t, rep["map"][sid])
                basis = kept
        from .basis import design_matrix

        H = design_matrix(basis, X)
        gid = rep["map"][sid]
        for g in np.unique(gid):
            m = gid == g
            mu1[m] += H[m] @ coef[g, :, 1]
            mu0[m] += H[m] @ coef[g, :, 0]
    B = len(model.replicates_)
    yhat = np.where(t == 1, mu1 / B, mu0 / B)
    r = y - yhat
    return float(r @ r)


def _ls_pairs_by_stratum(basis, X, y, t, gid) -> np.ndarray:
    from .basis import design_matrix

    H = design_matrix(basis, X)
    G = H.shape[1]
    groups = np.unique(gid)
    coef = np.zeros((groups.max() + 1, G, 2))
    for g in groups:
        m = gid == g
        D = np.empty((int(m.sum()), 2 * G))
        D[:, 0::2] = H[m] * (t[m] == 1)[:, None]
        D[:, 1::2] = H[m] * (t[m] == 0)[:, None]
        beta, _ = ridge_lstsq(D, y[m])
        coef[g, :, 1] = beta[0::2]
        coef[g, :, 0] = beta[1::2]
    return coef


def _loss_without(model, drop_var, mode) -> float:
    """Training outcome loss with every basis using ``drop_var`` removed;
    ``drop_var=None`` gives the baseline loss of the model as fitted."""
    if isinstance(model, TransformedOutcomeBaggingMars):
        raise UnsupportedModelError(
            "variable importance needs per-arm outcome predictions, which "
            "transformed-outcome models do not provide"
        )
    if isinstance(model, BaggedCausalMars):
        return _loss_bcm(model, drop_var, mode)

    X, y, t = _training_data(model)
    basis, pairs = model.basis_, model.coef_pairs_
    if drop_var is None:
        return _outcome_loss_pairs(model, basis, pairs, X, y, t)
    keep = np.array([drop_var not in f.variables for f in basis])
    if mode == "zero":
        return _outcome_loss_pairs(model, basis, pairs * keep[:, None], X, y, t)
    kept = [f for f, k in zip(basis, keep) if k]
    if isinstance(model, ScbmRegressor):
        design = build_grouped_design(kept, X, t)
        sol = solve(design, y, model.lambda_)
        new_pairs = np.empty((len(kept), 2))
        new_pairs[:, 1] = sol.beta[0::2]
        new_pairs[:, 0] = sol.beta[1::2]
    elif isinstance(model, CausalMars):
        new_pairs = _ls_pairs_by_stratum(kept, X, y, t, np.zeros(len(y), dtype=int))[0]
    else:
        raise UnsupportedModelError(f"unsupported model type {type(model).__name__}")
    return _outcome_loss_pairs(model, kept, new_pairs, X, y, t)


@dataclass(frozen=True)
class ImportanceResult:
    variables: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray
    mode: str
    base_loss: float


def variable_importance(model, mode: str = "zero") -> ImportanceResult:
    """Loss increase per variable, with a 0-100 normalized column.

    Variables not appearing in any fitted basis score exactly zero without
    refitting. Normalization divides by the largest raw score and floors
    negative values (possible in refit mode) at zero; the raw column is
    left untouched.
    """
    if mode not in ("zero", "refit"):
        raise ValueError("mode must be 'zero' or 'refit'")
    X, _, _ = _training_data(model)
    p = X.shape[1]
    if isinstance(model, BaggedCausalMars):
        used = set().union(
            *[f.variables for rep in model.replicates_ for f in rep["basis"]]
        )
    else:
        used = set().union(*[f.variables for f in model.basis_]) if model.basis_ else set()
    base = _loss_without(model, None, mode)
    raw = np.zeros(p)
    for j in range(p):
        if j in used:
            raw[j] = _loss_without(model, j, mode) - base
    top = float(raw.max())
    if top > 0.0:
        normalized = np.maximum(raw, 0.0) / top * 100.0
    else:
        normalized = np.zeros(p)
    return ImportanceResult(
        variables=np.arange(p), raw=raw, normalized=normalized,
        mode=mode, base_loss=base,
    )


@dataclass(frozen=True)
class PdpResult:
    variable: int
    grid: np.ndarray
    values: np.ndarray
    target: str
    arm: int | None


def partial_dependence(
    model,
    variable: int,
    X=None,
    target: str = "effect",
    arm: int | None = None,
    n_grid: int = 25,
) -> PdpResult:
    """Mean prediction as one variable sweeps a quantile grid.

    ``target="effect"`` averages the effect estimate; ``target="outcome"``
    averages the outcome prediction for the given ``arm``. Columns with at
    most two distinct values use those values as the grid.
    """
    if target not in ("effect", "outcome"):
        raise ValueError("target must be 'effect' or 'outcome'")
    if X is None:
        X, _, _ = _training_data(model)
    X = np.asarray(X, dtype=float)
    if not 0 <= variable < X.shape[1]:
        raise ValueError(f"variable index {variable} out of range")
    col = X[:, variable]
    distinct = np.unique(col)
    if distinct.size <= 2:
        grid = distinct
    else:
        grid = np.unique(np.quantile(col, np.linspace(0.0, 1.0, n_grid)))
    if target == "outcome":
        if arm not in (0, 1):
            raise ValueError("outcome target needs arm 0 or 1")
        predict = lambda M: model.predict_outcome(M, arm)  # noqa: E731
    else:
        predict = model.predict
    values = np.empty(grid.shape[0])
    work = X.copy()
    for i, v in enumerate(grid):
        work[:, variable] = v
        values[i] = float(np.mean(predict(work)))
    return PdpResult(
        variable=variable, grid=grid, values=values, target=target,
        arm=arm if target == "outcome" else None,
    )


@dataclass(frozen=True)
class CalibrationResult:
    n_groups: int
    mean_predicted: np.ndarray
    mean_ate: np.ndarray
    n_valid: np.ndarray
    predicted: np.ndarray
    ate: np.ndarray


def subgroup_calibration(
    estimator,
    X,
    y,
    treatment,
    n_groups: int = 4,
    n_replications: int = 20,
    seed: int = 0,
) -> CalibrationResult:
    """Half-sample calibration of predicted effects.

    Each replication fits a clone on a stratified half of the data, sorts
    the held-out half by predicted effect, cuts it into ``n_groups`` equal
    groups, and records each group's mean prediction next to its
    treated-minus-control mean outcome. Groups with a single arm yield a
    missing difference for that replication; means below skip them.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    t = np.asarray(treatment).astype(int).ravel()
    if n_groups < 2:
        raise ValueError("n_groups must be at least 2")
    if n_replications < 1:
        raise ValueError("n_replications must be at least 1")
    ss = np.random.SeedSequence(seed)
    pred = np.full((n_replications, n_groups), np.nan)
    ate = np.full((n_replications, n_groups), np.nan)
    for r, rep_ss in enumerate(ss.spawn(n_replications)):
        split_ss, fit_ss = rep_ss.spawn(2)
        rng = np.random.default_rng(split_ss)
        train_idx = []
        for arm in (0, 1):
            idx = np.flatnonzero(t == arm)
            idx = idx[rng.permutation(idx.size)]
            train_idx.extend(idx[: idx.size // 2].tolist())
        train = np.sort(np.array(train_idx, dtype=int))
        hold = np.setdiff1d(np.arange(len(y)), train, assume_unique=True)
        model = clone(estimator)
        if "random_state" in model.get_params():
            model.set_params(random_state=int(fit_ss.generate_state(1)[0]))
        model.fit(X[train], y[train], t[train])
        tau_hat = model.predict(X[hold])
        order = hold[np.argsort(tau_hat, kind="stable")]
        tau_sorted = np.sort(tau_hat, kind="stable")
        bounds = np.array_split(np.arange(hold.size), n_groups)
        for g, pos in enumerate(bounds):
            rows = order[pos]
            pred[r, g] = float(np.mean(tau_sorted[pos]))
            yt = y[rows][t[rows] == 1]
            yc = y[rows][t[rows] == 0]
            if yt.size and yc.size:
                ate[r, g] = float(yt.mean() - yc.mean())
    with warnings.catch_warnings():
        # a group that is single-armed in every replication averages to NaN,
        # which is the documented answer, not a numerical accident
        warnings.simplefilter("ignore", RuntimeWarning)
        mean_pred = np.nanmean(pred, axis=0)
        mean_ate = np.nanmean(ate, axis=0)
    return CalibrationResult(
        n_groups=n_groups,
        mean_predicted=mean_pred,
        mean_ate=mean_ate,
        n_valid=np.sum(~np.isnan(ate), axis=0),
        predicted=pred,
        ate=ate,
    )
