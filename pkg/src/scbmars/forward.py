"""Greedy MARS forward pass used as the basis-function generator.

Starting from the constant basis, hinge pairs are added greedily: each
candidate (parent term, variable, knot) is scored by the residual sum of
squares of the least-squares fit including both mirrored children, and the
global minimizer is accepted until the term budget is exhausted or no
candidate improves the fit.

The default scoring path keeps an orthonormalized copy of the accepted
design so one candidate costs O(n * M); a naive full-refit path exists for
cross-checking and is what the test oracles certify against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import CONSTANT, BasisFunction, HingeTerm
from .linalg import ridge_lstsq

__all__ = ["ForwardConfig", "ForwardFit", "forward_pass", "candidate_lof"]

# Relative RSS reduction below which a candidate is considered no improvement.
REL_TOL = 1e-12
# A projected column with squared norm below this fraction of its raw squared
# norm is treated as linearly dependent on the current design.
_DEP_TOL2 = 1e-20


@dataclass(frozen=True)
class ForwardConfig:
    """Forward-pass hyperparameters.

    m_max is the cap on non-intercept terms per fit and must be even (terms
    arrive in mirrored pairs); k_max caps the interaction degree; min_active
    is the minimum number of rows where a parent is strictly positive for it
    to be split; knot_subsample optionally caps candidate knots per
    (parent, variable) pair.
    """

    m_max: int = 10
    k_max: int = 2
    min_active: int = 5
    knot_subsample: int | None = None
    lof_strategy: str = "orthogonal"

    def __post_init__(self):
        if self.m_max < 2 or self.m_max % 2 != 0:
            raise ValueError(f"m_max must be an even integer >= 2, got {self.m_max}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")
        if self.min_active < 1:
            raise ValueError(f"min_active must be >= 1, got {self.min_active}")
        if self.knot_subsample is not None and self.knot_subsample < 1:
            raise ValueError("knot_subsample must be >= 1 when set")
        if self.lof_strategy not in ("orthogonal", "naive"):
            raise ValueError(f"unknown lof_strategy {self.lof_strategy!r}")


@dataclass
class ForwardFit:
    """Result of a forward pass: basis list (constant first), final
    least-squares coefficients, and the RSS after the intercept and after
    each accepted pair."""

    basis: list[BasisFunction]
    coefficients: np.ndarray
    rss_trace: np.ndarray
    accepted: list[tuple[int, int, float]] = field(default_factory=list)


class OrthoDesign:
    """Accepted design kept as an orthonormal column set plus the residual.

    ``pair_lofs`` scores all candidate knots of one (parent, variable) pair
    in a single batch, using that both mirrored children together span the
    same space as {parent * x_j, parent * hinge+} and the first of those is
    knot-independent.
    """

    def __init__(self, response: np.ndarray):
        self.r = np.asarray(response, dtype=float).copy()
        self.n = self.r.shape[0]
        self.Q = np.empty((self.n, 0))
        self.rss = float(self.r @ self.r)

    def add_column(self, col: np.ndarray) -> None:
        v = col - self.Q @ (self.Q.T @ col)
        v -= self.Q @ (self.Q.T @ v)  # second pass keeps Q orthonormal
        nv2 = float(v @ v)
        if nv2 <= _DEP_TOL2 * max(float(col @ col), np.finfo(float).tiny):
            return
        q = v / np.sqrt(nv2)
        self.Q = np.column_stack([self.Q, q])
        self.r = self.r - q * (q @ self.r)
        self.rss = float(self.r @ self.r)

    def _project_out(self, M: np.ndarray) -> np.ndarray:
        return M - self.Q @ (self.Q.T @ M)

    def pair_lofs(self, parent_col: np.ndarray, xj: np.ndarray, knots: np.ndarray):
        """RSS of the augmented fit for every knot, as a vector over knots."""
        w = parent_col * xj
        wt = self._project_out(w)
        wt -= self.Q @ (self.Q.T @ wt)
        nw2 = float(wt @ wt)
        if nw2 > _DEP_TOL2 * max(float(w @ w), np.finfo(float).tiny):
            qw = wt / np.sqrt(nw2)
            r2 = self.r - qw * (qw @ self.r)
        else:
            qw = None
            r2 = self.r
        base = float(r2 @ r2)

        A = parent_col[:, None] * np.maximum(0.0, xj[:, None] - knots[None, :])
        At = self._project_out(A)
        if qw is not None:
            At -= qw[:, None] * (qw @ A)
        num = (r2 @ At) ** 2
        den = np.einsum("ij,ij->j", At, At)
        raw = np.einsum("ij,ij->j", A, A)
        ok = den > _DEP_TOL2 * np.maximum(raw, np.finfo(float).tiny)
        gains = np.where(ok, num / np.where(ok, den, 1.0), 0.0)
        return base - gains


def candidate_lof(current_design, parent_column, xj, c, response) -> float:
    """RSS of least squares over the existing columns plus both mirrored
    children ``parent * [+(x_j - c)]_+`` and ``parent * [-(x_j - c)]_+``.

    Full naive refit; the forward pass only uses this on the "naive"
    strategy, but it defines what the fast path must reproduce.
    """
    parent_column = np.asarray(parent_column, dtype=float)
    xj = np.asarray(xj, dtype=float)
    a = parent_column * np.maximum(0.0, xj - c)
    b = parent_column * np.maximum(0.0, c - xj)
    X = np.column_stack([np.asarray(current_design, dtype=float), a, b])
    _, rss = ridge_lstsq(X, response)
    return rss


def _candidate_knots(x_active: np.ndarray, cfg: ForwardConfig, rng) -> np.ndarray:
    knots = np.unique(x_active)
    if cfg.knot_subsample is not None and knots.size > cfg.knot_subsample:
        idx = rng.choice(knots.size, size=cfg.knot_subsample, replace=False)
        knots = knots[np.sort(idx)]
    return knots


def forward_pass(X, response, config: ForwardConfig | None = None, seed=0) -> ForwardFit:
    """Run the greedy forward pass of ``response`` on ``X``.

    Parameters
    ----------
    X : (n, p) array
    response : (n,) array, must be finite
    config : ForwardConfig
    seed : int or numpy Generator/SeedSequence; only consumed when
        ``knot_subsample`` is set.

    Returns
    -------
    ForwardFit with basis functions (constant first), final least-squares
    coefficients and the non-increasing RSS trace.
    """
    cfg = config or ForwardConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(response, dtype=float).ravel()
    if X.ndim != 2:
        raise ValueError(f"X must be 2-D, got shape {X.shape}")
    n, p = X.shape
    if y.shape[0] != n:
        raise ValueError(f"response length {y.shape[0]} != n rows {n}")
    if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
        raise ValueError("forward_pass requires finite inputs")
    rng = np.random.default_rng(seed)

    basis: list[BasisFunction] = [CONSTANT]
    cols: list[np.ndarray] = [np.ones(n)]
    state = OrthoDesign(y)
    state.add_column(cols[0])
    rss_trace = [state.rss]
    accepted: list[tuple[int, int, float]] = []
    naive = cfg.lof_strategy == "naive"

    n_terms = 0
    while n_terms + 2 <= cfg.m_max:
        rss_now = rss_trace[-1]
        best = None  # (lof, parent_idx, var, knot)
        for pi, parent in enumerate(basis):
            if parent.degree >= cfg.k_max:
                continue
            pcol = cols[pi]
            active = pcol > 0
            if int(active.sum()) < cfg.min_active:
                continue
            for j in range(p):
                if j in parent.variables:
                    continue
                knots = _candidate_knots(X[active, j], cfg, rng)
                if knots.size == 0:
                    continue
                if naive:
                    design = np.column_stack(cols)
                    lofs = np.array(
                        [candidate_lof(design, pcol, X[:, j], c, y) for c in knots]
                    )
                else:
                    lofs = state.pair_lofs(pcol, X[:, j], knots)
                k = int(np.argmin(lofs))  # first minimum = lowest knot on ties
                if best is None or lofs[k] < best[0]:
                    best = (float(lofs[k]), pi, j, float(knots[k]))
        if best is None:
            break
        lof, pi, j, c = best
        if rss_now - lof <= REL_TOL * max(rss_now, np.finfo(float).tiny):
            break
        parent = basis[pi]
        child_a = parent.with_term(HingeTerm(j, +1, c))
        child_b = parent.with_term(HingeTerm(j, -1, c))
        col_a = cols[pi] * np.maximum(0.0, X[:, j] - c)
        col_b = cols[pi] * np.maximum(0.0, c - X[:, j])
        basis.extend([child_a, child_b])
        cols.extend([col_a, col_b])
        state.add_column(col_a)
        state.add_column(col_b)
        accepted.append((pi, j, c))
        rss_trace.append(state.rss)
        n_terms += 2

    coef, _ = ridge_lstsq(np.column_stack(cols), y)
    return ForwardFit(
        basis=basis,
        coefficients=coef,
        rss_trace=np.asarray(rss_trace),
        accepted=accepted,
    )
