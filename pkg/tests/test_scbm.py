import numpy as np
import pytest

from scbmars.basis import CONSTANT, BasisCollection, BasisFunction, HingeTerm
from scbmars.estimators import (
    ESTIMATOR_NAMES,
    ScbmRegressor,
    TransformedOutcomeBaggingMars,
    _bootstrap_bases,
    _prune_single_arm,
    make_estimator,
)
from scbmars.exceptions import UnsupportedModelError
from scbmars.forward import ForwardConfig, forward_pass
from scbmars.group_lasso import (
    build_grouped_design,
    cv_lambda,
    raw_grouped_columns,
    solve,
)
from scbmars.propensity import transform_outcome
from scbmars.simulate import draw_scenario

from helpers import random_treatment


@pytest.fixture(scope="module")
def fitted_small():
    d = draw_scenario(4, 150, 9, seed=7)
    est = ScbmRegressor(
        n_replicates=5, m_max=6, propensity="known:0.5", random_state=0
    )
    est.fit(d.X, d.outcome, d.treatment)
    return d, est


def _hand_model(funcs, pairs, lam=1.0, p=2):
    """Assemble a fitted-looking model directly from basis and coef pairs."""
    est = ScbmRegressor()
    est.basis_ = list(funcs)
    est.coef_pairs_ = np.asarray(pairs, dtype=float)
    est.lambda_ = lam
    est.n_features_in_ = p
    return est


def test_default_params_roundtrip_sklearn():
    est = ScbmRegressor(n_replicates=7, clip_epsilon=0.02)
    params = est.get_params()
    assert params["n_replicates"] == 7
    assert params["clip_epsilon"] == 0.02
    clone = ScbmRegressor(**params)
    assert clone.get_params() == params


def test_deterministic_under_fixed_seed():
    d = draw_scenario(4, 120, 9, seed=1)
    a = ScbmRegressor(n_replicates=3, m_max=4, propensity="known:0.5", random_state=5)
    b = ScbmRegressor(n_replicates=3, m_max=4, propensity="known:0.5", random_state=5)
    a.fit(d.X, d.outcome, d.treatment)
    b.fit(d.X, d.outcome, d.treatment)
    grid = draw_scenario(4, 40, 9, seed=2).X
    assert np.array_equal(a.predict(grid), b.predict(grid))
    assert np.array_equal(a.coef_pairs_, b.coef_pairs_)
    assert a.lambda_ == b.lambda_


def test_effect_is_exact_arm_difference(fitted_small):
    d, est = fitted_small
    grid = draw_scenario(4, 200, 9, seed=3).X
    tau = est.predict(grid)
    diff = est.predict_outcome(grid, 1) - est.predict_outcome(grid, 0)
    assert np.array_equal(tau, diff)


def test_groups_selected_jointly(fitted_small):
    _, est = fitted_small
    pairs = est.coef_pairs_[1:]  # constant pair is unpenalized
    norms = np.linalg.norm(pairs, axis=1)
    for row, norm in zip(pairs, norms):
        if norm <= 1e-12:
            assert np.all(row == 0.0)


def test_intercept_only_effect_is_constant_difference():
    est = _hand_model([CONSTANT], [[1.25, 3.0]])
    X = np.random.default_rng(0).normal(size=(10, 2))
    # pairs are stored (control, treated)
    assert np.allclose(est.predict(X), 3.0 - 1.25)
    assert np.allclose(est.predict_outcome(X, 1), 3.0)
    assert np.allclose(est.predict_outcome(X, 0), 1.25)


def test_hand_built_two_basis_model():
    h = BasisFunction((HingeTerm(0, 1, 1.0),))
    est = _hand_model([CONSTANT, h], [[0.5, 1.0], [2.0, -1.0]])
    x = np.array([[3.0, 0.0]])  # h(x) = 2
    y1 = 1.0 + (-1.0) * 2.0
    y0 = 0.5 + 2.0 * 2.0
    assert est.predict_outcome(x, 1)[0] == pytest.approx(y1)
    assert est.predict_outcome(x, 0)[0] == pytest.approx(y0)
    assert est.predict(x)[0] == pytest.approx(y1 - y0)
    # below the knot the hinge vanishes and only intercepts remain
    x0 = np.array([[0.0, 9.9]])
    assert est.predict(x0)[0] == pytest.approx(1.0 - 0.5)


def test_predict_validation(fitted_small):
    _, est = fitted_small
    with pytest.raises(ValueError, match="not fitted"):
        ScbmRegressor().predict(np.zeros((3, 9)))
    with pytest.raises(ValueError):
        est.predict(np.zeros((3, 4)))
    with pytest.raises(ValueError):
        est.predict_outcome(np.zeros((3, 9)), 2)


def test_single_replicate_fixed_resample_is_plain_pipeline():
    d = draw_scenario(4, 120, 9, seed=9)
    X, y, t = d.X, d.outcome, d.treatment
    est = ScbmRegressor(
        n_replicates=1,
        bootstrap=False,
        propensity="known:0.5",
        m_max=6,
        random_state=11,
    )
    est.fit(X, y, t)

    # rebuild by hand: transform, one forward pass on the full sample,
    # prune, cross-validate, final group solve
    ss = np.random.SeedSequence(11)
    prop_ss, boot_ss, cv_ss = ss.spawn(3)
    z = transform_outcome(y, t, np.full(len(y), 0.5), clip_epsilon=0.01).z
    config = ForwardConfig(m_max=6)
    bases = _bootstrap_bases(X, z, 1, config, boot_ss, False)
    union = BasisCollection.from_replicates(enumerate(bases))
    funcs = _prune_single_arm(union.functions, X, t)

    def raw_builder(rows):
        return raw_grouped_columns(funcs, X[rows], t[rows])

    cv_seed = int(cv_ss.generate_state(1)[0])
    cv = cv_lambda(funcs, X, y, raw_builder, t, seed=cv_seed)
    design = build_grouped_design(funcs, X, t)
    sol = solve(design, y, cv.lam, kkt_tol=1e-6)

    assert list(est.basis_) == list(funcs)
    assert est.lambda_ == cv.lam
    treated = sol.beta[0::2]
    control = sol.beta[1::2]
    assert np.allclose(est.coef_pairs_[:, 1], treated, atol=1e-12)
    assert np.allclose(est.coef_pairs_[:, 0], control, atol=1e-12)


def test_bootstrap_union_grows_with_replicates():
    d = draw_scenario(4, 150, 9, seed=13)
    small = TransformedOutcomeBaggingMars(
        n_replicates=2, m_max=4, propensity="known:0.5", random_state=3
    ).fit(d.X, d.outcome, d.treatment)
    large = TransformedOutcomeBaggingMars(
        n_replicates=4, m_max=4, propensity="known:0.5", random_state=3
    ).fit(d.X, d.outcome, d.treatment)
    assert set(small.basis_) <= set(large.basis_)


def test_constant_only_union_warns_and_degenerates():
    rng = np.random.default_rng(14)
    X = rng.normal(size=(60, 9))
    t = random_treatment(rng, 60)
    y = np.zeros(60)
    est = ScbmRegressor(n_replicates=2, propensity="known:0.5", random_state=0)
    with pytest.warns(UserWarning, match="constant"):
        est.fit(X, y, t)
    assert est.basis_ == [CONSTANT] or len(est.basis_) == 1
    assert np.allclose(est.predict(X), est.predict(X)[0])


def test_prop0_has_no_outcome_predictions():
    d = draw_scenario(4, 100, 9, seed=15)
    est = TransformedOutcomeBaggingMars(
        n_replicates=2, m_max=4, propensity="known:0.5", random_state=0
    ).fit(d.X, d.outcome, d.treatment)
    with pytest.raises(UnsupportedModelError):
        est.predict_outcome(d.X, 1)
    assert np.all(np.isfinite(est.predict(d.X)))


def test_prop1_infinite_ridge_approaches_mean_transform():
    d = draw_scenario(4, 100, 9, seed=16)
    X, y, t = d.X, d.outcome, d.treatment
    est = TransformedOutcomeBaggingMars(
        n_replicates=2, m_max=4, propensity="known:0.5",
        ridge_refit=True, random_state=0,
    ).fit(X, y, t)
    z = transform_outcome(y, t, np.full(len(y), 0.5), clip_epsilon=0.01).z
    from scbmars.estimators import _ridge_cv

    _, coef = _ridge_cv(est.basis_, X, z, t, np.array([1e14]), 3, 0)
    pred = np.full(len(y), coef[0])  # only the constant survives
    for f, c in zip(est.basis_[1:], coef[1:]):
        assert abs(c) < 1e-6
    assert np.allclose(pred, z.mean(), atol=1e-4)


def test_pruning_drops_single_arm_bases():
    rng = np.random.default_rng(17)
    X = rng.normal(size=(80, 3))
    t = (X[:, 0] > 0).astype(int)
    # active only where x0 > 1, i.e. only on the treated arm
    one_arm = BasisFunction((HingeTerm(0, 1, 1.0),))
    both = BasisFunction((HingeTerm(1, 1, 0.0),))
    kept = _prune_single_arm([CONSTANT, one_arm, both], X, t)
    assert one_arm not in kept
    assert both in kept
    assert kept[0].is_constant


def test_estimator_registry():
    assert ESTIMATOR_NAMES == ("scbm", "prop0", "prop1", "cm", "bcm")
    scbm = make_estimator("scbm", n_replicates=4)
    assert isinstance(scbm, ScbmRegressor)
    prop1 = make_estimator("prop1")
    assert isinstance(prop1, TransformedOutcomeBaggingMars) and prop1.ridge_refit
    prop0 = make_estimator("prop0")
    assert isinstance(prop0, TransformedOutcomeBaggingMars) and not prop0.ridge_refit
    with pytest.raises(ValueError):
        make_estimator("magic")


def test_make_estimator_drops_irrelevant_kwargs():
    cm = make_estimator("cm", propensity="rf", clip_epsilon=0.05, m_max=6)
    assert cm.m_max == 6
    bcm = make_estimator("bcm", clip_epsilon=0.05, n_strata=3)
    assert bcm.n_strata == 3


def test_fit_validates_arms():
    rng = np.random.default_rng(18)
    X = rng.normal(size=(40, 3))
    y = rng.normal(size=40)
    est = ScbmRegressor(n_replicates=1, propensity="known:0.5")
    with pytest.raises(ValueError, match="arm"):
        est.fit(X, y, np.ones(40, dtype=int))


def test_active_basis_reports_nonzero_groups(fitted_small):
    _, est = fitted_small
    active = est.active_basis_()
    active_set = set(active)
    for f, pair in zip(est.basis_, est.coef_pairs_):
        if f in active_set:
            assert np.any(pair != 0.0)
        else:
            assert np.all(pair == 0.0)
    # predictions only need the active bases
    grid = np.random.default_rng(4).normal(size=(20, 9))
    slim = _hand_model(
        active,
        [p for f, p in zip(est.basis_, est.coef_pairs_) if f in active_set],
        p=9,
    )
    assert np.allclose(slim.predict(grid), est.predict(grid), atol=1e-12)
