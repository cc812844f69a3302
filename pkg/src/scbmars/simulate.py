"""Synthetic benchmark scenarios.

Twelve scenarios: six baseline-mean / effect-surface pairs, each under a
randomized assignment (scenarios 1-6, e = 1/2) and under a confounded
assignment (scenarios 7-12) where the treatment probability is a logistic
function of the mean surface shifted by half the effect. Covariates with odd
1-based index are standard normal, those with even index are Bernoulli(1/2).
The outcome is mu(x) + (t - 1/2) tau(x) plus unit Gaussian noise, so tau is
the treated-minus-control effect.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = ["SCENARIOS", "SimDraw", "mu_tau", "propensity_fn", "draw_scenario",
           "is_randomized"]

SCENARIOS = tuple(range(1, 13))
MIN_FEATURES = 9


def _x(X: np.ndarray, j: int) -> np.ndarray:
    """1-based column accessor matching the scenario formulas."""
    return X[:, j - 1]


def _f1(X: np.ndarray) -> np.ndarray:
    a, b, c = _x(X, 2), _x(X, 4), _x(X, 6)
    return (
        1.0 * a * b * c
        + 2.0 * a * b * (1.0 - c)
        + 3.0 * a * (1.0 - b) * c
        + 4.0 * a * (1.0 - b) * (1.0 - c)
        + 5.0 * (1.0 - a) * b * c
        + 6.0 * (1.0 - a) * b * (1.0 - c)
        + 7.0 * (1.0 - a) * (1.0 - b) * c
        + 8.0 * (1.0 - a) * (1.0 - b) * (1.0 - c)
    )


def _f2(X: np.ndarray) -> np.ndarray:
    return _x(X, 1) + _x(X, 3) + _x(X, 5) + _x(X, 7) + _x(X, 8) + _x(X, 9) - 2.0


def mu_tau(scenario: int, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and effect surfaces for the given scenario (1-12)."""
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario must be in 1..12, got {scenario}")
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < MIN_FEATURES:
        raise ValueError(f"scenarios need at least {MIN_FEATURES} features")
    base = (scenario - 1) % 6 + 1
    x1, x3, x5, x7 = _x(X, 1), _x(X, 3), _x(X, 5), _x(X, 7)
    x2, x4, x8, x9 = _x(X, 2), _x(X, 4), _x(X, 8), _x(X, 9)
    if base == 1:
        mu = 2.0 * x1 - 4.0
        tau = np.zeros(X.shape[0])
    elif base == 2:
        mu = 5.0 * (x1 > 1.0) - 5.0
        tau = (
            4.0 * (x1 > 1.0) * (x3 > 1.0)
            + 4.0 * (x5 > 1.0) * (x7 > 1.0)
            + 2.0 * x8 * x9
        )
    elif base == 3:
        mu = 0.5 * (
            x1**2 + x2 + x3**2 + x4 + x5**2 + _x(X, 6) + x7**2 + x8 + x9**2 - 11.0
        )
        tau = (_f1(X) + _f2(X)) / np.sqrt(2.0)
    elif base == 4:
        mu = (
            4.0 * (x1 > 1.0) * (x3 > 1.0)
            + 4.0 * (x5 > 1.0) * (x7 > 1.0)
            + 2.0 * x8 * x9
        )
        tau = _f2(X)
    elif base == 5:
        mu = _f1(X)
        tau = np.sin(np.pi * x1 * x3) + 2.0 * (x5 - 0.5) ** 2 + x7 + 0.5 * x9
    else:
        mu = (
            0.5
            - 0.1 / (1.0 + np.exp(-x1))
            + 0.1 * np.sin(x3)
            - 0.1 * x5**2
            - 0.2 * x5
            - 0.1 * x7**2
        )
        tau = (
            -0.2
            + 0.5 * np.sin(np.pi * x1 * x3)
            + 0.2 / (1.0 + np.exp(-x5))
            + 0.2 * x2
            + 0.3 * x4
        )
    return np.asarray(mu, dtype=float), np.asarray(tau, dtype=float)


def is_randomized(scenario: int) -> bool:
    if scenario not in SCENARIOS:
        raise ValueError(f"scenario must be in 1..12, got {scenario}")
    return scenario <= 6


def propensity_fn(scenario: int, X: np.ndarray) -> np.ndarray:
    """True assignment probability: 1/2 when randomized, otherwise a
    logistic function of the control-leaning surface mu - tau/2."""
    X = np.asarray(X, dtype=float)
    if is_randomized(scenario):
        return np.full(X.shape[0], 0.5)
    mu, tau = mu_tau(scenario, X)
    return expit(mu - tau / 2.0)


@dataclass(frozen=True)
class SimDraw:
    """One simulated data set with its generating surfaces."""

    scenario: int
    X: np.ndarray
    treatment: np.ndarray
    outcome: np.ndarray
    mu: np.ndarray
    tau: np.ndarray
    propensity: np.ndarray


def draw_covariates(n: int, p: int, rng: np.random.Generator) -> np.ndarray:
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if p < MIN_FEATURES:
        raise ValueError(f"p must be at least {MIN_FEATURES}, got {p}")
    X = np.empty((n, p))
    for j in range(p):
        if (j + 1) % 2 == 1:
            X[:, j] = rng.standard_normal(n)
        else:
            X[:, j] = rng.integers(0, 2, size=n)
    return X


def draw_scenario(scenario: int, n: int, p: int, seed=0, regime=None) -> SimDraw:
    """Draw one data set. ``seed`` may be an int, SeedSequence or Generator;
    the draw order (covariates, assignment, noise) is fixed. ``regime``
    forces the assignment law: "rct" for e = 1/2, "observational" for the
    confounded logistic law, None for the scenario's own."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    X = draw_covariates(n, p, rng)
    mu, tau = mu_tau(scenario, X)
    if regime is None:
        e = propensity_fn(scenario, X)
    elif regime == "rct":
        e = np.full(n, 0.5)
    elif regime == "observational":
        e = expit(mu - tau / 2.0)
    else:
        raise ValueError(
            f"regime must be None, 'rct' or 'observational', got {regime!r}"
        )
    t = (rng.random(n) < e).astype(int)
    y = mu + (t - 0.5) * tau + rng.standard_normal(n)
    return SimDraw(
        scenario=scenario, X=X, treatment=t, outcome=y, mu=mu, tau=tau, propensity=e
    )
