import numpy as np
import pytest

from scbmars.basis import (
    CONSTANT,
    BasisCollection,
    BasisFunction,
    HingeTerm,
    basis_equal,
    basis_eval,
    design_column,
    design_matrix,
    hinge_eval,
)


def test_hinge_eval_examples():
    x = np.array([0.5, 3.0, -1.0])
    assert hinge_eval(HingeTerm(0, 1, 0.5), x) == 0.0
    assert hinge_eval(HingeTerm(1, 1, 1.0), x) == 2.0
    assert hinge_eval(HingeTerm(1, -1, 1.0), x) == 0.0
    assert hinge_eval(HingeTerm(2, -1, 1.0), x) == 2.0


def test_hinge_eval_index_out_of_range():
    with pytest.raises(ValueError):
        hinge_eval(HingeTerm(3, 1, 0.0), np.array([1.0, 2.0]))


def test_hinge_pair_identities():
    rng = np.random.default_rng(0)
    for _ in range(200):
        c = float(rng.normal())
        x = np.array([float(rng.normal())])
        up = hinge_eval(HingeTerm(0, 1, c), x)
        down = hinge_eval(HingeTerm(0, -1, c), x)
        assert up >= 0.0 and down >= 0.0
        assert up + down == pytest.approx(abs(x[0] - c), abs=1e-12)
        assert up - down == pytest.approx(x[0] - c, abs=1e-12)


def test_hinge_continuity_at_knot():
    c = 0.7316
    h = 1e-9
    for sign in (1, -1):
        term = HingeTerm(0, sign, c)
        at = hinge_eval(term, np.array([c]))
        left = hinge_eval(term, np.array([c - h]))
        right = hinge_eval(term, np.array([c + h]))
        assert at == 0.0
        assert abs(left - at) <= 2 * h
        assert abs(right - at) <= 2 * h


def test_hinge_term_validation():
    with pytest.raises(ValueError):
        HingeTerm(0, 0, 1.0)
    with pytest.raises(ValueError):
        HingeTerm(-1, 1, 1.0)
    with pytest.raises(ValueError):
        HingeTerm(0, 1, float("nan"))


def test_basis_eval_examples():
    assert basis_eval(CONSTANT, np.array([9.0])) == 1.0
    f = BasisFunction((HingeTerm(0, 1, 0.0), HingeTerm(1, -1, 2.0)))
    assert basis_eval(f, np.array([3.0, 1.0])) == 3.0
    g = BasisFunction((HingeTerm(0, 1, 0.0),))
    assert basis_eval(g, np.array([-1.0, 5.0])) == 0.0


def test_basis_eval_nonnegative():
    rng = np.random.default_rng(1)
    f = BasisFunction((HingeTerm(0, -1, 0.3), HingeTerm(2, 1, -0.5)))
    for _ in range(100):
        assert basis_eval(f, rng.normal(size=3)) >= 0.0


def test_basis_function_rejects_repeated_variable():
    with pytest.raises(ValueError):
        BasisFunction((HingeTerm(0, 1, 0.0), HingeTerm(0, -1, 1.0)))


def test_basis_function_canonical_term_order():
    a = BasisFunction((HingeTerm(2, 1, 0.5), HingeTerm(0, -1, 1.5)))
    b = BasisFunction((HingeTerm(0, -1, 1.5), HingeTerm(2, 1, 0.5)))
    assert a.terms == b.terms
    assert a.terms[0].variable_index == 0


def test_basis_degree_and_variables():
    f = BasisFunction((HingeTerm(1, 1, 0.0), HingeTerm(4, -1, 2.0)))
    assert f.degree == 2
    assert f.variables == frozenset({1, 4})
    assert not f.is_constant
    assert CONSTANT.is_constant and CONSTANT.degree == 0


def test_with_term_extends_product():
    f = CONSTANT.with_term(HingeTerm(1, 1, 0.25))
    assert f.degree == 1
    g = f.with_term(HingeTerm(0, -1, 0.0))
    assert g.variables == frozenset({0, 1})
    with pytest.raises(ValueError):
        f.with_term(HingeTerm(1, -1, 0.5))


def test_basis_equal_requires_exact_knots():
    a = BasisFunction((HingeTerm(0, 1, 0.5),))
    b = BasisFunction((HingeTerm(0, 1, 0.5),))
    c = BasisFunction((HingeTerm(0, 1, 0.5 + 1e-7),))
    assert basis_equal(a, b)
    assert not basis_equal(a, c)
    assert not basis_equal(a, BasisFunction((HingeTerm(0, -1, 0.5),)))


def test_basis_equal_ignores_construction_order():
    t1 = HingeTerm(3, 1, -0.25)
    t2 = HingeTerm(1, -1, 0.75)
    assert basis_equal(BasisFunction((t1, t2)), BasisFunction((t2, t1)))


def test_basis_equal_is_an_equivalence_relation():
    rng = np.random.default_rng(2)
    pool = [CONSTANT]
    for _ in range(6):
        pool.append(
            BasisFunction(
                (HingeTerm(int(rng.integers(0, 3)), int(rng.choice([-1, 1])), float(rng.normal())),)
            )
        )
    pool += pool[:3]
    for a in pool:
        assert basis_equal(a, a)
        for b in pool:
            assert basis_equal(a, b) == basis_equal(b, a)
            for c in pool:
                if basis_equal(a, b) and basis_equal(b, c):
                    assert basis_equal(a, c)


def test_design_column_examples():
    X = np.array([[-1.0], [0.0], [2.0]])
    assert np.array_equal(design_column(CONSTANT, X), np.ones(3))
    f = BasisFunction((HingeTerm(0, 1, 0.0),))
    assert np.array_equal(design_column(f, X), np.array([0.0, 0.0, 2.0]))


def test_design_column_matches_pointwise_eval():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 4))
    f = BasisFunction((HingeTerm(1, 1, 0.1), HingeTerm(3, -1, -0.2)))
    col = design_column(f, X)
    for i in range(40):
        assert col[i] == pytest.approx(basis_eval(f, X[i]), abs=1e-12)


def test_design_column_variable_out_of_range():
    f = BasisFunction((HingeTerm(5, 1, 0.0),))
    with pytest.raises(ValueError, match="beyond"):
        design_column(f, np.zeros((3, 2)))


def test_design_matrix_shapes():
    X = np.zeros((7, 2))
    f = BasisFunction((HingeTerm(0, 1, -1.0),))
    D = design_matrix([CONSTANT, f], X)
    assert D.shape == (7, 2)
    assert design_matrix([], X).shape == (7, 0)


def test_collection_constant_first_and_unique():
    f = BasisFunction((HingeTerm(0, 1, 0.0),))
    coll = BasisCollection((CONSTANT, f), (-1, 0))
    assert coll.functions[0].is_constant
    with pytest.raises(ValueError):
        BasisCollection((f, CONSTANT), (0, -1))
    with pytest.raises(ValueError):
        BasisCollection((CONSTANT, f, f), (-1, 0, 1))
    with pytest.raises(ValueError):
        BasisCollection((CONSTANT, f), (-1,))


def test_from_replicates_dedup_keeps_first_producer():
    f = BasisFunction((HingeTerm(0, 1, 0.5),))
    g = BasisFunction((HingeTerm(1, -1, 0.0),))
    coll = BasisCollection.from_replicates(
        [(0, [CONSTANT, f]), (1, [CONSTANT, f, g])]
    )
    assert coll.functions == (CONSTANT, f, g)
    assert coll.provenance == (-1, 0, 1)


def test_from_replicates_constant_only():
    coll = BasisCollection.from_replicates([(0, [CONSTANT]), (1, [CONSTANT])])
    assert coll.functions == (CONSTANT,)
    assert coll.provenance == (-1,)
