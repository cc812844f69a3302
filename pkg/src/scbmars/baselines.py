"""Causal forward-pass baselines.

The forward search here differs from a plain regression forward pass: the
accepted design always carries separate treated/control coefficients, and a
candidate hinge pair is scored by how much worse the fit gets when the new
pair is forced to share one coefficient across arms. The score

    delta = RSS(existing arm-specific + pair shared)
          - RSS(existing arm-specific + pair arm-specific)

is non-negative and is largest where the candidate's contribution differs
between arms, so the search grows terms that carry effect heterogeneity.
``BaggedCausalMars`` runs the search on bootstrap replicates inside
propensity strata and sums the score over strata.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .basis import CONSTANT, BasisFunction, HingeTerm, design_matrix
from .data import check_covariates, check_xty
from .forward import _DEP_TOL2, REL_TOL, ForwardConfig, _candidate_knots
from .linalg import ridge_lstsq
from .propensity import fit_propensity

__all__ = [
    "CausalForwardFit",
    "causal_forward",
    "CausalMars",
    "BaggedCausalMars",
]


def _orth_unit(v: np.ndarray, Q: np.ndarray, extras: list[np.ndarray]):
    """Orthonormalize v against Q and the extra unit vectors; None if v is
    numerically inside their span."""
    raw = float(v @ v)
    u = v - Q @ (Q.T @ v)
    for q in extras:
        u = u - q * (q @ u)
    u = u - Q @ (Q.T @ u)
    for q in extras:
        u = u - q * (q @ u)
    n2 = float(u @ u)
    if n2 <= _DEP_TOL2 * max(raw, np.finfo(float).tiny):
        return None
    return u / np.sqrt(n2)


def _orth_block(A: np.ndarray, Q: np.ndarray, extras: list[np.ndarray]) -> np.ndarray:
    At = A - Q @ (Q.T @ A)
    for q in extras:
        At = At - q[:, None] * (q @ At)
    return At


def _rank1_gains(r: np.ndarray, At: np.ndarray, A_raw: np.ndarray) -> np.ndarray:
    num = (r @ At) ** 2
    den = np.einsum("ij,ij->j", At, At)
    raw = np.einsum("ij,ij->j", A_raw, A_raw)
    ok = den > _DEP_TOL2 * np.maximum(raw, np.finfo(float).tiny)
    return np.where(ok, num / np.where(ok, den, 1.0), 0.0)


class _StratumState:
    """Arm-specific accepted design restricted to one stratum's rows."""

    def __init__(self, y_s: np.ndarray, t_s: np.ndarray):
        self.r = y_s.astype(float).copy()
        self.Q = np.empty((y_s.shape[0], 0))
        self.tmask = (t_s == 1).astype(float)
        self.cmask = 1.0 - self.tmask

    @property
    def rss(self) -> float:
        return float(self.r @ self.r)

    def add_arm_pair(self, col: np.ndarray) -> None:
        """Add one basis column split into its two arm columns."""
        for v in (col * self.tmask, col * self.cmask):
            u = _orth_unit(v, self.Q, [])
            if u is not None:
                self.Q = np.column_stack([self.Q, u])
                self.r = self.r - u * (u @ self.r)

    def delta_gains(
        self, parent: np.ndarray, xj: np.ndarray, knots: np.ndarray
    ) -> np.ndarray:
        """delta over knots for candidates parent * hinge(x_j - c).

        Both branches reduce to knot-independent directions plus the upper
        hinge block: {a, b} spans {w, a} and the arm split spans
        {w*T, w*C, a*T, a*C}, with w = parent * x_j, because the parent's
        arm columns are already in the design.
        """
        Q, r = self.Q, self.r
        w = parent * xj
        A = parent[:, None] * np.maximum(0.0, xj[:, None] - knots[None, :])

        # shared branch: one coefficient per candidate column
        qw = _orth_unit(w, Q, [])
        if qw is not None:
            g_shared = (qw @ r) ** 2
            r2 = r - qw * (qw @ r)
            extras = [qw]
        else:
            g_shared, r2, extras = 0.0, r, []
        g_shared = g_shared + _rank1_gains(r2, _orth_block(A, Q, extras), A)

        # arm-specific branch: candidate columns split by arm
        g_sep = np.zeros(knots.shape[0])
        fixed = 0.0
        r3 = r
        qs: list[np.ndarray] = []
        for v in (w * self.tmask, w * self.cmask):
            q = _orth_unit(v, Q, qs)
            if q is not None:
                fixed += (q @ r3) ** 2
                r3 = r3 - q * (q @ r3)
                qs.append(q)
        AT = A * self.tmask[:, None]
        AC = A * self.cmask[:, None]
        AtT = _orth_block(AT, Q, qs)
        AtC = _orth_block(AC, Q, qs)
        g11 = np.einsum("ij,ij->j", AtT, AtT)
        g22 = np.einsum("ij,ij->j", AtC, AtC)
        g12 = np.einsum("ij,ij->j", AtT, AtC)
        u1 = r3 @ AtT
        u2 = r3 @ AtC
        raw1 = np.einsum("ij,ij->j", AT, AT)
        raw2 = np.einsum("ij,ij->j", AC, AC)
        live1 = g11 > _DEP_TOL2 * np.maximum(raw1, np.finfo(float).tiny)
        live2 = g22 > _DEP_TOL2 * np.maximum(raw2, np.finfo(float).tiny)
        det = g11 * g22 - g12 * g12
        full = live1 & live2 & (det > 1e-12 * g11 * g22)
        with np.errstate(divide="ignore", invalid="ignore"):
            block = np.where(
                full,
                (g22 * u1 * u1 - 2.0 * g12 * u1 * u2 + g11 * u2 * u2)
                / np.where(full, det, 1.0),
                0.0,
            )
            only1 = live1 & ~full
            only2 = live2 & ~full
            s1 = np.where(live1, u1 * u1 / np.where(live1, g11, 1.0), 0.0)
            s2 = np.where(live2, u2 * u2 / np.where(live2, g22, 1.0), 0.0)
            block = np.where(only1 & only2, np.maximum(s1, s2), block)
            block = np.where(only1 & ~only2, s1, block)
            block = np.where(~only1 & only2, s2, block)
        g_sep = fixed + block

        return g_sep - g_shared


@dataclass
class CausalForwardFit:
    """Search result: basis list (constant first), per-stratum coefficient
    array of shape (n_strata, len(basis), 2) with [:, :, 1] the treated
    coefficients, and the accepted (parent_index, variable, knot) triples."""

    basis: list[BasisFunction]
    coef_by_stratum: np.ndarray
    accepted: list[tuple[int, int, float]]


def causal_forward(
    X: np.ndarray,
    y: np.ndarray,
    t: np.ndarray,
    stratum_ids: np.ndarray,
    config: ForwardConfig | None = None,
    seed=0,
) -> CausalForwardFit:
    """Greedy causal forward search over hinge pairs.

    ``stratum_ids`` must label every row with a value in 0..S-1 and every
    stratum must contain both arms. Candidate knots are the distinct values
    of the variable on rows where the parent is active (pooled over strata),
    and the score is summed over strata. Ties break to the earliest parent,
    lowest variable, lowest knot.
    """
    cfg = config or ForwardConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    t = np.asarray(t).astype(int)
    sid = np.asarray(stratum_ids).astype(int)
    n, p = X.shape
    rng = np.random.default_rng(seed)
    strata = np.unique(sid)
    rows_by_s = [np.flatnonzero(sid == s) for s in strata]
    states = [_StratumState(y[rows], t[rows]) for rows in rows_by_s]

    basis: list[BasisFunction] = [CONSTANT]
    known = {CONSTANT}
    cols: list[np.ndarray] = [np.ones(n)]
    for st in states:
        st.add_arm_pair(np.ones(len(st.r)))

    accepted: list[tuple[int, int, float]] = []
    while len(basis) - 1 + 2 <= cfg.m_max:
        total_rss = sum(st.rss for st in states)
        best_delta = -np.inf
        best = None
        for pi, parent in enumerate(basis):
            if parent.degree >= cfg.k_max:
                continue
            pcol = cols[pi]
            active = pcol > 0
            if int(active.sum()) < cfg.min_active:
                continue
            arm1 = active & (t == 1)
            arm0 = active & (t == 0)
            for j in range(p):
                if j in parent.variables:
                    continue
                knots = _candidate_knots(X[active, j], cfg, rng)
                if knots.size == 0:
                    continue
                # both children must keep min_active rows in each arm, or
                # the per-arm least squares rides on a handful of points
                v1 = np.sort(X[arm1, j])
                v0 = np.sort(X[arm0, j])
                m = cfg.min_active
                ok = (
                    (np.searchsorted(v1, knots, side="left") >= m)
                    & (v1.size - np.searchsorted(v1, knots, side="right") >= m)
                    & (np.searchsorted(v0, knots, side="left") >= m)
                    & (v0.size - np.searchsorted(v0, knots, side="right") >= m)
                )
                knots = knots[ok]
                if knots.size == 0:
                    continue
                delta = np.zeros(knots.shape[0])
                for st, rows in zip(states, rows_by_s):
                    delta += st.delta_gains(pcol[rows], X[rows, j], knots)
                k = int(np.argmax(delta))
                if delta[k] > best_delta:
                    best_delta = float(delta[k])
                    best = (pi, j, float(knots[k]))
        if best is None or best_delta <= REL_TOL * max(total_rss, np.finfo(float).tiny):
            break
        pi, j, c = best
        a = basis[pi].with_term(HingeTerm(j, 1, c))
        b = basis[pi].with_term(HingeTerm(j, -1, c))
        if a in known or b in known:
            break
        xa = np.maximum(0.0, X[:, j] - c)
        xb = np.maximum(0.0, c - X[:, j])
        for child, hinge in ((a, xa), (b, xb)):
            basis.append(child)
            known.add(child)
            ccol = cols[pi] * hinge
            cols.append(ccol)
            for st, rows in zip(states, rows_by_s):
                st.add_arm_pair(ccol[rows])
        accepted.append(best)

    G = len(basis)
    H = np.column_stack(cols)
    coef = np.zeros((len(strata), G, 2))
    for si, (st, rows) in enumerate(zip(states, rows_by_s)):
        D = np.empty((rows.shape[0], 2 * G))
        D[:, 0::2] = H[rows] * st.tmask[:, None]
        D[:, 1::2] = H[rows] * st.cmask[:, None]
        beta, _ = ridge_lstsq(D, y[rows])
        coef[si, :, 1] = beta[0::2]
        coef[si, :, 0] = beta[1::2]
    return CausalForwardFit(basis=basis, coef_by_stratum=coef, accepted=accepted)


class CausalMars(BaseEstimator):
    """Single causal forward fit on the full sample (one stratum).

    Suited to randomized data: no propensity model, no bagging. Arm
    predictions come from the arm-specific least-squares coefficients of
    the accepted bases.
    """

    def __init__(
        self,
        m_max: int = 10,
        k_max: int = 2,
        min_active: int = 5,
        random_state: int | None = 0,
    ):
        self.m_max = m_max
        self.k_max = k_max
        self.min_active = min_active
        self.random_state = random_state

    def fit(self, X, y, treatment):
        X, y, t = check_xty(X, y, treatment)
        cfg = ForwardConfig(m_max=self.m_max, k_max=self.k_max, min_active=self.min_active)
        fit = causal_forward(
            X, y, t, np.zeros(len(y), dtype=int), cfg,
            seed=np.random.SeedSequence(self.random_state),
        )
        self.basis_ = fit.basis
        self.coef_pairs_ = fit.coef_by_stratum[0]
        self.accepted_ = fit.accepted
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
        X = self._check_predict(X)
        if arm not in (0, 1):
            raise ValueError("arm must be 0 or 1")
        return design_matrix(self.basis_, X) @ self.coef_pairs_[:, arm]

    def predict(self, X) -> np.ndarray:
        return self.predict_outcome(X, 1) - self.predict_outcome(X, 0)


def _merged_groups(sid_b: np.ndarray, t_b: np.ndarray, n_strata: int, rep: int):
    """Map raw stratum ids to merged group ids so every group that appears
    in the resample holds both arms; neighbors absorb deficient strata."""
    groups: list[list[int]] = [[s] for s in range(n_strata)]

    def bad(group: list[int]) -> bool:
        m = np.isin(sid_b, group)
        return (not np.any(m & (t_b == 1))) or (not np.any(m & (t_b == 0)))

    while len(groups) > 1:
        i = next((k for k, g in enumerate(groups) if bad(g)), None)
        if i is None:
            break
        j = i - 1 if i > 0 else i + 1
        warnings.warn(
            f"replicate {rep}: propensity stratum {groups[i]} lost an arm in "
            f"the resample; merged with {groups[j]}"
        )
        lo, hi = min(i, j), max(i, j)
        groups[lo] = groups[lo] + groups[hi]
        del groups[hi]
    raw_to_group = np.zeros(n_strata, dtype=int)
    for gi, g in enumerate(groups):
        for s in g:
            raw_to_group[s] = gi
    return raw_to_group, len(groups)


class BaggedCausalMars(BaseEstimator):
    """Bagged causal forward fits inside propensity strata.

    Rows are cut into ``n_strata`` equal-frequency bins of the estimated
    propensity (a single stratum skips the propensity model entirely). Each
    bootstrap replicate runs the causal forward search with the selection
    score summed over strata and stratum-local coefficients; predictions
    average the replicates, using the stratum the query point falls in.
    """

    def __init__(
        self,
        n_replicates: int = 25,
        n_strata: int = 5,
        m_max: int = 10,
        k_max: int = 2,
        min_active: int = 5,
        propensity="rf",
        bootstrap: bool = True,
        random_state: int | None = 0,
    ):
        self.n_replicates = n_replicates
        self.n_strata = n_strata
        self.m_max = m_max
        self.k_max = k_max
        self.min_active = min_active
        self.propensity = propensity
        self.bootstrap = bootstrap
        self.random_state = random_state

    def fit(self, X, y, treatment):
        X, y, t = check_xty(X, y, treatment)
        if self.n_strata < 1:
            raise ValueError("n_strata must be >= 1")
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be >= 1")
        n = X.shape[0]
        ss = np.random.SeedSequence(self.random_state)
        prop_ss, boot_ss = ss.spawn(2)

        if self.n_strata > 1:
            self.propensity_model_ = fit_propensity(
                X, t, self.propensity,
                random_state=int(prop_ss.generate_state(1)[0]),
            )
            e_hat = self.propensity_model_.predict(X)
            qs = np.arange(1, self.n_strata) / self.n_strata
            self.stratum_edges_ = np.unique(np.quantile(e_hat, qs))
            raw = np.searchsorted(self.stratum_edges_, e_hat, side="right")
            # tied propensities can leave bins with no training rows at all;
            # fold those into the occupied bin below so the per-replicate
            # merge only ever reacts to resampling accidents
            count = np.bincount(raw, minlength=len(self.stratum_edges_) + 1)
            self.bin_map_ = np.maximum(np.cumsum(count > 0) - 1, 0)
            sid = self.bin_map_[raw]
        else:
            self.propensity_model_ = None
            self.stratum_edges_ = np.array([])
            self.bin_map_ = np.zeros(1, dtype=int)
            sid = np.zeros(n, dtype=int)
        n_used = int(sid.max()) + 1

        cfg = ForwardConfig(m_max=self.m_max, k_max=self.k_max, min_active=self.min_active)
        self.replicates_ = []
        for rep, rep_ss in enumerate(boot_ss.spawn(self.n_replicates)):
            row_ss, knot_ss = rep_ss.spawn(2)
            rng = np.random.default_rng(row_ss)
            if self.bootstrap:
                rows = rng.integers(0, n, size=n)
                while len(np.unique(t[rows])) < 2:  # keep both arms present
                    rows = rng.integers(0, n, size=n)
            else:
                rows = np.arange(n)
            raw_to_group, _ = _merged_groups(sid[rows], t[rows], n_used, rep)
            fit = causal_forward(
                X[rows], y[rows], t[rows], raw_to_group[sid[rows]], cfg, seed=knot_ss
            )
            self.replicates_.append(
                {"basis": fit.basis, "coef": fit.coef_by_stratum, "map": raw_to_group}
            )
        self.n_features_in_ = X.shape[1]
        self.X_, self.y_, self.t_ = X, y, t
        return self

    def _check_predict(self, X) -> np.ndarray:
        if not hasattr(self, "replicates_"):
            raise ValueError("estimator is not fitted; call fit first")
        X = check_covariates(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X

    def _stratum_of(self, X: np.ndarray) -> np.ndarray:
        if self.n_strata == 1:
            return np.zeros(X.shape[0], dtype=int)
        e = self.propensity_model_.predict(X)
        raw = np.searchsorted(self.stratum_edges_, e, side="right")
        return self.bin_map_[raw]

    def _replicate_outcome(self, rep: dict, X, sid: np.ndarray, arm: int) -> np.ndarray:
        H = design_matrix(rep["basis"], X)
        gid = rep["map"][sid]
        out = np.empty(X.shape[0])
        for g in np.unique(gid):
            m = gid == g
            out[m] = H[m] @ rep["coef"][g, :, arm]
        return out

    def predict_outcome(self, X, arm: int) -> np.ndarray:
        X = self._check_predict(X)
        if arm not in (0, 1):
            raise ValueError("arm must be 0 or 1")
        sid = self._stratum_of(X)
        acc = np.zeros(X.shape[0])
        for rep in self.replicates_:
            acc += self._replicate_outcome(rep, X, sid, arm)
        return acc / len(self.replicates_)

    def predict(self, X) -> np.ndarray:
        X = self._check_predict(X)
        sid = self._stratum_of(X)
        acc = np.zeros(X.shape[0])
        for rep in self.replicates_:
            acc += self._replicate_outcome(
                rep, X, sid, 1
            ) - self._replicate_outcome(rep, X, sid, 0)
        return acc / len(self.replicates_)
