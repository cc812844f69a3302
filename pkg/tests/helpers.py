"""Instance builders shared across the test modules."""

from __future__ import annotations

import numpy as np

from scbmars.basis import CONSTANT, BasisFunction, HingeTerm
from scbmars.group_lasso import build_grouped_design


def random_hinge_basis(rng, X, n_basis, max_degree=1):
    """Constant plus ``n_basis`` distinct random hinge products over X."""
    n, p = X.shape
    funcs = [CONSTANT]
    seen = {CONSTANT}
    while len(funcs) < n_basis + 1:
        degree = int(rng.integers(1, max_degree + 1))
        variables = rng.choice(p, size=degree, replace=False)
        terms = []
        for j in variables:
            sign = int(rng.choice([-1, 1]))
            knot = float(X[int(rng.integers(0, n)), int(j)])
            terms.append(HingeTerm(int(j), sign, knot))
        f = BasisFunction(tuple(terms))
        if f not in seen:
            seen.add(f)
            funcs.append(f)
    return funcs


def random_treatment(rng, n):
    """Binary assignment guaranteed to populate both arms."""
    t = rng.integers(0, 2, size=n)
    while t.sum() in (0, n):
        t = rng.integers(0, 2, size=n)
    return t


def random_grouped_instance(seed, n=50, n_basis=5, p=4, noise=1.0):
    """A random grouped design with a response loading on a few groups.

    Returns (functions, X, t, y, design).  The design has one unpenalized
    constant pair and ``n_basis`` penalized two-column groups whose columns
    live on disjoint treatment arms.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    t = random_treatment(rng, n)
    funcs = random_hinge_basis(rng, X, n_basis)
    design = build_grouped_design(funcs, X, t)
    weights = rng.normal(scale=2.0, size=design.columns.shape[1])
    weights[rng.random(weights.shape) < 0.4] = 0.0
    y = design.columns @ weights + noise * rng.standard_normal(n)
    return funcs, X, t, y, design


def fit_r2(predicted, target):
    """Coefficient of determination of predictions against a target."""
    target = np.asarray(target, dtype=float).ravel()
    resid = target - np.asarray(predicted, dtype=float).ravel()
    total = target - target.mean()
    return 1.0 - float(resid @ resid) / float(total @ total)
