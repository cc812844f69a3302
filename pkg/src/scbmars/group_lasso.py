"""Group-LASSO solver for paired treatment/control basis expansions.

The problem solved is

    minimize  ||y - sum_g X_g beta_g||^2  +  lam * sum_g ||beta_g||_2

with the sum-of-squares term unhalved and no group-size weights, so the
zero-block condition reads ||X_g' r|| <= lam / 2. The constant-basis group is
unpenalized. Columns within a group have disjoint row support (an indicator
for each arm), which makes the within-group Gram diagonal; after scaling
every column to unit root-mean-square the block update is an exact
closed-form group soft-threshold, and block coordinate descent converges
quickly.

Coefficients are reported on the original column scale. ``cv_lambda`` picks
the penalty level by K-fold cross-validation on a shared geometric grid,
warm-starting along the path.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_factor as sp_cho_factor
from scipy.linalg import cho_solve as sp_cho_solve

from .basis import BasisFunction, design_matrix
from .exceptions import ConvergenceError

__all__ = [
    "GroupedDesign",
    "GroupLassoSolution",
    "build_grouped_design",
    "build_singleton_design",
    "lambda_max",
    "lambda_grid",
    "solve",
    "solve_path",
    "cv_lambda",
    "CvResult",
]

_ZERO_COL = 1e-12

# relative slack on the block soft-threshold: a group sitting within float
# noise of the drop boundary is rounded toward zero, so lam >= lambda_max
# yields exact zeros even though the boundary is an equality there
_EDGE_TOL = 1e-10


@dataclass(frozen=True)
class GroupedDesign:
    """Column-standardized design with its group structure.

    ``columns`` holds the standardized columns, ``scales`` the per-column
    root-mean-square of the raw columns (1.0 for identically-zero columns,
    which stay zero). ``groups`` lists the column indices of each group in
    order; ``penalized`` flags which groups enter the penalty.
    """

    columns: np.ndarray
    scales: np.ndarray
    groups: tuple[np.ndarray, ...]
    penalized: np.ndarray

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def group_width(self) -> int:
        """Columns per group; every group has the same width (1 or 2)."""
        return self.groups[0].size if self.groups else 1


@dataclass(frozen=True)
class GroupLassoSolution:
    lam: float
    beta: np.ndarray
    objective: float
    kkt_residual: float
    n_iter: int

    def active_groups(self, design: GroupedDesign) -> np.ndarray:
        scaled = self.beta * design.scales
        return np.array([bool(np.any(scaled[g] != 0.0)) for g in design.groups])


def raw_grouped_columns(
    functions: Sequence[BasisFunction], X: np.ndarray, t: np.ndarray
) -> np.ndarray:
    """Raw design: for each basis, (h * 1[t==1], h * 1[t==0]) side by side."""
    H = design_matrix(functions, X)
    t = np.asarray(t).astype(int)
    n, G = H.shape
    out = np.empty((n, 2 * G))
    out[:, 0::2] = H * (t == 1)[:, None]
    out[:, 1::2] = H * (t == 0)[:, None]
    return out


def _standardize(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = raw.shape[0]
    rms = np.sqrt(np.sum(raw * raw, axis=0) / n)
    scales = np.where(rms > _ZERO_COL, rms, 1.0)
    return raw / scales, scales


def build_grouped_design(
    functions: Sequence[BasisFunction], X: np.ndarray, t: np.ndarray
) -> GroupedDesign:
    """Two-column group per basis (one column per arm); constant unpenalized."""
    raw = raw_grouped_columns(functions, X, t)
    cols, scales = _standardize(raw)
    groups = tuple(np.array([2 * g, 2 * g + 1]) for g in range(len(functions)))
    penalized = np.array([not f.is_constant for f in functions])
    return GroupedDesign(columns=cols, scales=scales, groups=groups, penalized=penalized)


def build_singleton_design(
    functions: Sequence[BasisFunction], X: np.ndarray
) -> GroupedDesign:
    """One column per basis, singleton groups: plain LASSO of the response on
    the basis expansion. The constant column is unpenalized."""
    raw = design_matrix(functions, X)
    cols, scales = _standardize(raw)
    groups = tuple(np.array([g]) for g in range(len(functions)))
    penalized = np.array([not f.is_constant for f in functions])
    return GroupedDesign(columns=cols, scales=scales, groups=groups, penalized=penalized)


def _unpenalized_residual(design: GroupedDesign, y: np.ndarray) -> np.ndarray:
    idx = np.concatenate([g for g, p in zip(design.groups, design.penalized) if not p])
    if idx.size == 0:
        return y.copy()
    Xu = design.columns[:, idx]
    beta, _, _, _ = np.linalg.lstsq(Xu, y, rcond=None)
    return y - Xu @ beta


def lambda_max(design: GroupedDesign, y: np.ndarray) -> float:
    """Smallest lam at which every penalized group is zero: with r0 the
    residual after fitting the unpenalized groups alone, the zero condition
    ||X_g' r0|| <= lam/2 for all g gives lam_max = 2 max_g ||X_g' r0||."""
    r0 = _unpenalized_residual(design, np.asarray(y, dtype=float).ravel())
    best = 0.0
    for g, pen in zip(design.groups, design.penalized):
        if pen:
            best = max(best, float(np.linalg.norm(design.columns[:, g].T @ r0)))
    return 2.0 * best


def lambda_grid(
    lam_hi: float, n_lambda: int = 30, ratio: float = 1e-3
) -> np.ndarray:
    """Geometric grid from lam_hi down to ratio * lam_hi, descending."""
    if lam_hi <= 0.0:
        return np.zeros(max(1, n_lambda))
    return lam_hi * np.power(ratio, np.linspace(0.0, 1.0, n_lambda))


def _row_norms(M: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", M, M))


def _group_kkt(
    xtr: np.ndarray, beta: np.ndarray, lam: float, W: int, pen: np.ndarray
) -> np.ndarray:
    """Per-group stationarity residual from the gradient xtr = X' r.

    Zero penalized groups: amount by which ||X_g' r|| exceeds lam / 2.
    Active penalized groups: distance of X_g' r from (lam/2) b_g/||b_g||.
    Unpenalized groups: plain ||X_g' r||.
    """
    gm = xtr.reshape(-1, W)
    bm = beta.reshape(-1, W)
    gnorm = _row_norms(gm)
    bnorm = _row_norms(bm)
    out = np.where(pen, np.maximum(0.0, gnorm - lam / 2.0), gnorm)
    act = pen & (bnorm > 0.0)
    if act.any():
        scale = np.where(bnorm > 0.0, bnorm, 1.0)
        dev = gm - (lam / 2.0) * bm / scale[:, None]
        out[act] = _row_norms(dev)[act]
    return out


def _kkt_residual(
    design: GroupedDesign, y: np.ndarray, beta: np.ndarray, lam: float
) -> float:
    r = y - design.columns @ beta
    out = _group_kkt(
        design.columns.T @ r, beta, lam, design.group_width, design.penalized
    )
    return float(out.max()) if out.size else 0.0


def _objective(
    design: GroupedDesign, y: np.ndarray, beta: np.ndarray, lam: float
) -> float:
    r = y - design.columns @ beta
    pen = sum(
        float(np.linalg.norm(beta[g]))
        for g, p in zip(design.groups, design.penalized)
        if p
    )
    return float(r @ r) + lam * pen


def _newton_refine(
    G: np.ndarray,
    Xty: np.ndarray,
    d: np.ndarray,
    beta: np.ndarray,
    lam: float,
    design: GroupedDesign,
    live_col: np.ndarray,
    gtol: float,
    max_steps: int,
) -> tuple[np.ndarray, int]:
    """Damped Newton on the smooth restriction to the active groups.

    With the zero groups pinned, the objective is smooth in the remaining
    coordinates; its Hessian adds the penalty curvature (lam/||b_g||)
    (I - bb'/||b||^2) per active group, which is exactly what plain sweeps
    lack when near-collinear groups trade weight along a flat valley.
    Groups whose norm collapses below the float floor are pinned to zero
    on the spot (sweeps revive them if they belong in), so the step
    budget is not spent squeezing them further. The backtracking test is
    evaluated in difference form: the smooth part is an exact quadratic
    along the step, so the decrease condition never suffers cancellation
    against the large absolute objective value.
    """
    W = design.group_width
    pen = design.penalized
    K = beta.shape[0]
    nG = pen.shape[0]
    col_of = np.arange(K).reshape(nG, W)
    grp_live = live_col.reshape(nG, W)
    beta = beta.copy()
    pos_map = np.empty(K, dtype=np.intp)
    steps = 0
    half = lam / 2.0
    for _ in range(max_steps):
        bm = beta.reshape(-1, W)
        bnorm = _row_norms(bm)
        small = np.flatnonzero(pen & (bnorm > 0.0) & (bnorm < 1e-4))
        if small.size:
            # tiny groups wreck the quadratic model when the step drives
            # them through zero; zero the ones whose block minimizer is
            # zero (an exact descent move) so the line search stays honest
            Gb = G @ beta
            for gi in small:
                cols = col_of[gi][grp_live[gi]]
                u = Xty[cols] - Gb[cols] + d[cols] * beta[cols]
                if float(np.linalg.norm(u)) <= half or bnorm[gi] < 1e-11:
                    bm[gi] = 0.0
                    bnorm[gi] = 0.0
        act = (~pen) | (bnorm > 0.0)
        mask = np.repeat(act, W) & live_col
        idx = np.flatnonzero(mask)
        M = idx.size
        if M == 0:
            break
        G_sub = G[np.ix_(idx, idx)]
        b_sub = beta[idx]
        grad_s = 2.0 * (G_sub @ b_sub - Xty[idx])
        ga = grad_s.copy()
        Ha = 2.0 * G_sub
        pos_map[idx] = np.arange(M)
        sel = np.flatnonzero(act & pen)
        sMv = np.zeros((sel.size, W))
        bMv = bm[sel]
        whole = grp_live[sel].all(axis=1)
        good = sel[whole]
        if good.size:
            P = pos_map[col_of[good]]
            nh = bm[good] / bnorm[good, None]
            coef = lam / bnorm[good]
            ga[P] += lam * nh
            if W == 2:
                a, b = nh[:, 0], nh[:, 1]
                Ha[P[:, 0], P[:, 0]] += coef * b * b
                Ha[P[:, 1], P[:, 1]] += coef * a * a
                Ha[P[:, 0], P[:, 1]] -= coef * a * b
                Ha[P[:, 1], P[:, 0]] -= coef * a * b
            # W == 1: |b| has no curvature away from zero, gradient only
        for gi in sel[~whole]:
            cols = col_of[gi][grp_live[gi]]
            p = pos_map[cols]
            nb = bnorm[gi]
            nh1 = beta[cols] / nb
            ga[p] += lam * nh1
            Ha[np.ix_(p, p)] += (lam / nb) * (
                np.eye(p.size) - np.outer(nh1, nh1)
            )
        if float(np.linalg.norm(ga)) <= gtol:
            break
        jitter = _ZERO_COL * (float(np.trace(Ha)) / M + 1.0)
        Ha[np.diag_indices(M)] += jitter
        try:
            cf = sp_cho_factor(Ha, lower=True)
            step = sp_cho_solve(cf, -ga)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(Ha, -ga, rcond=None)[0]
        slope = float(ga @ step)
        if slope >= 0.0:
            break
        a1 = float(grad_s @ step)
        a2 = float(step @ (G_sub @ step))
        if good.size:
            sMv[whole] = step[P]
        for k, gi in zip(np.flatnonzero(~whole), sel[~whole]):
            cols_live = grp_live[gi]
            sMv[k, cols_live] = step[pos_map[col_of[gi][cols_live]]]
        pen0 = float(_row_norms(bMv).sum())
        t = 1.0
        accepted = False
        for _ in range(40):
            dpen = float(_row_norms(bMv + t * sMv).sum()) - pen0
            if t * a1 + t * t * a2 + lam * dpen <= 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        beta[idx] = b_sub + t * step
        steps += 1
    return beta, steps


def solve(
    design: GroupedDesign,
    y: np.ndarray,
    lam: float,
    beta0: np.ndarray | None = None,
    max_iter: int = 5000,
    kkt_tol: float = 1e-8,
) -> GroupLassoSolution:
    """Minimize the penalized sum of squares at one penalty level.

    Works on the set of groups that are nonzero at the warm start or
    violate their zero condition there; after converging on that set a
    full stationarity check pulls in any group the restriction missed.
    Within the working set, cyclic block soft-threshold sweeps (exact per
    group: disjoint arm support makes within-group Grams diagonal) handle
    active-set discovery and take groups to exact zero, and a damped
    Newton refinement removes the slow tail sweeps show when correlated
    groups trade weight near the zero threshold. Iterates until the
    stationarity residual drops below ``kkt_tol`` (absolute, in the units
    of ||X_g' r||). ``max_iter`` caps the combined sweep and refinement
    step count.
    """
    if lam < 0.0:
        raise ValueError("lam must be non-negative")
    y = np.asarray(y, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains non-finite values")
    Xs = design.columns
    n, K = Xs.shape
    if y.shape[0] != n:
        raise ValueError("y length does not match the design")
    G = Xs.T @ Xs
    Xty = Xs.T @ y
    d = np.diag(G).copy()
    live_col = d > _ZERO_COL
    W = design.group_width
    pen = design.penalized
    beta = np.zeros(K) if beta0 is None else np.asarray(beta0, dtype=float).copy()
    beta[~live_col] = 0.0
    c = G @ beta if beta.any() else np.zeros(K)
    half = lam / 2.0
    slices = [slice(int(g[0]), int(g[-1]) + 1) for g in design.groups]
    all_live = [bool(live_col[sl].all()) for sl in slices]

    bnorm0 = _row_norms(beta.reshape(-1, W))
    gres = _group_kkt(Xty - c, beta, lam, W, pen)
    work = (~pen) | (bnorm0 > 0.0) | (gres > kkt_tol)

    kkt = np.inf
    used = 0
    while used < max_iter:
        order = np.flatnonzero(work)
        converged = False
        while used < max_iter:
            for _ in range(3):
                for gi in order:
                    sl = slices[gi]
                    old = beta[sl].copy()
                    if all_live[gi]:
                        u = Xty[sl] - c[sl] + n * old
                        if pen[gi]:
                            un = float(np.linalg.norm(u))
                            # unit-RMS columns make every live diagonal n,
                            # so the block minimizer is a soft-threshold
                            new = (
                                u * ((un - half) / (un * n))
                                if un > half * (1.0 + _EDGE_TOL)
                                else np.zeros_like(u)
                            )
                        else:
                            new = u / n
                    else:
                        live = live_col[sl]
                        if not live.any():
                            continue
                        u = (Xty[sl] - c[sl] + d[sl] * old) * live
                        new = np.zeros_like(old)
                        if pen[gi]:
                            un = float(np.linalg.norm(u))
                            if un > half * (1.0 + _EDGE_TOL):
                                new[live] = u[live] * ((un - half) / (un * n))
                        else:
                            new[live] = u[live] / n
                    delta = new - old
                    if np.any(delta != 0.0):
                        beta[sl] = new
                        c += G[:, sl] @ delta
                used += 1
            gres = _group_kkt(Xty - c, beta, lam, W, pen)
            kkt = float(gres[work].max()) if work.any() else 0.0
            if kkt <= kkt_tol or used >= max_iter:
                converged = kkt <= kkt_tol
                break
            beta, steps = _newton_refine(
                G, Xty, d, beta, lam, design, live_col,
                gtol=kkt_tol / 10.0, max_steps=40,
            )
            used += max(steps, 1)
            c = G @ beta
            gres = _group_kkt(Xty - c, beta, lam, W, pen)
            kkt = float(gres[work].max()) if work.any() else 0.0
            if kkt <= kkt_tol:
                converged = True
                break
        c = G @ beta
        gres = _group_kkt(Xty - c, beta, lam, W, pen)
        kkt = float(gres.max()) if gres.size else 0.0
        if kkt <= kkt_tol or not converged:
            break
        work = work | (gres > kkt_tol)
    if kkt > kkt_tol:
        raise ConvergenceError(
            f"group lasso stopped after {used} iterations with "
            f"stationarity residual {kkt:.3e} above tolerance {kkt_tol:.1e}"
        )
    return GroupLassoSolution(
        lam=float(lam),
        beta=beta / design.scales,
        objective=_objective(design, y, beta, lam),
        kkt_residual=kkt,
        n_iter=used,
    )


def solve_path(
    design: GroupedDesign,
    y: np.ndarray,
    lambdas: Sequence[float],
    max_iter: int = 5000,
    kkt_tol: float = 1e-8,
) -> list[GroupLassoSolution]:
    """Solve along a descending lam path, warm-starting each step."""
    sols = []
    warm = None
    for lam in lambdas:
        sol = solve(design, y, lam, beta0=warm, max_iter=max_iter, kkt_tol=kkt_tol)
        warm = sol.beta * design.scales
        sols.append(sol)
    return sols


@dataclass(frozen=True)
class CvResult:
    lam: float
    lambdas: np.ndarray
    cv_error: np.ndarray
    n_folds: int


def _stratified_folds(
    t: np.ndarray, n_folds: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Fold index arrays with the two arms spread evenly across folds."""
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for arm in (0, 1):
        idx = np.flatnonzero(t == arm)
        idx = idx[rng.permutation(idx.size)]
        for k, chunk in enumerate(np.array_split(idx, n_folds)):
            folds[k].extend(chunk.tolist())
    return [np.sort(np.array(f, dtype=int)) for f in folds]


def cv_lambda(
    functions: Sequence[BasisFunction],
    X: np.ndarray,
    y: np.ndarray,
    raw_builder: Callable[[np.ndarray], np.ndarray],
    t: np.ndarray,
    n_folds: int = 5,
    n_lambda: int = 30,
    lambda_ratio: float = 1e-3,
    seed: int = 0,
    kkt_tol: float = 1e-6,
) -> CvResult:
    """Pick lam on a shared grid by treatment-stratified K-fold CV.

    ``raw_builder(rows)`` must return the raw (unstandardized) design for the
    given row subset; fold designs are re-standardized on their own rows and
    validation error uses original-scale coefficients on raw columns. Ties in
    mean validation MSE go to the larger (sparser) lam.
    """
    y = np.asarray(y, dtype=float).ravel()
    t = np.asarray(t).astype(int)
    n = y.shape[0]
    if n_folds < 2 or n_folds > n:
        raise ValueError("n_folds must be between 2 and n")

    full_raw = raw_builder(np.arange(n))
    cols, scales = _standardize(full_raw)
    groups, penalized = _group_layout(functions, full_raw.shape[1])
    full_design = GroupedDesign(cols, scales, groups, penalized)
    lambdas = lambda_grid(lambda_max(full_design, y), n_lambda, lambda_ratio)

    rng = np.random.default_rng(seed)
    folds = _stratified_folds(t, n_folds, rng)
    errs = np.zeros((n_folds, len(lambdas)))
    for k, val in enumerate(folds):
        tr = np.setdiff1d(np.arange(n), val, assume_unique=True)
        raw_tr = raw_builder(tr)
        cols_tr, scales_tr = _standardize(raw_tr)
        design_tr = GroupedDesign(cols_tr, scales_tr, groups, penalized)
        raw_val = raw_builder(val)
        sols = solve_path(design_tr, y[tr], lambdas, kkt_tol=kkt_tol)
        for j, sol in enumerate(sols):
            resid = y[val] - raw_val @ sol.beta
            errs[k, j] = float(np.mean(resid * resid))
    mean_err = errs.mean(axis=0)
    # descending grid: argmin returns the largest lam among exact ties
    best = int(np.argmin(mean_err))
    return CvResult(
        lam=float(lambdas[best]), lambdas=lambdas, cv_error=mean_err, n_folds=n_folds
    )


def _group_layout(
    functions: Sequence[BasisFunction], n_cols: int
) -> tuple[tuple[np.ndarray, ...], np.ndarray]:
    G = len(functions)
    width = n_cols // G
    if width * G != n_cols or width not in (1, 2):
        raise ValueError("design width must be 1 or 2 columns per basis")
    groups = tuple(
        np.arange(width * g, width * (g + 1), dtype=int) for g in range(G)
    )
    penalized = np.array([not f.is_constant for f in functions])
    return groups, penalized
