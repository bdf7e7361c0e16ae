import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from coagkin.weights import (
    ConvexWeight,
    check_inequality,
    construct_tail_weight,
    evaluate,
    evaluate_derivative,
    identity_weight,
    power_weight,
    sample_class_invariants,
)


def test_power_eval_examples():
    assert evaluate(power_weight(2.0), 3.0) == 9.0
    w1 = power_weight(1.0)
    xs = np.array([0.0, 0.5, 7.0])
    assert np.array_equal(evaluate(w1, xs), xs)
    for w in [w1, power_weight(1.5), power_weight(2.0)]:
        assert evaluate(w, 0.0) == 0.0


def test_domain_and_class_validation():
    with pytest.raises(ValueError):
        evaluate(power_weight(2.0), -1.0)
    with pytest.raises(ValueError):
        power_weight(2.5)
    with pytest.raises(ValueError):
        power_weight(0.5)


def test_derivative_values():
    assert evaluate_derivative(power_weight(2.0), 3.0) == 6.0
    assert evaluate_derivative(power_weight(1.0), 0.0) == 1.0
    assert evaluate_derivative(power_weight(1.5), 0.0) == 0.0


def test_piecewise_structural_validation():
    with pytest.raises(ValueError, match="strictly increasing"):
        ConvexWeight(kind="piecewise", class_tag="G1", name="bad",
                     knots=np.array([0.0, 1.0, 1.0]),
                     derivative_values=np.array([0.0, 1.0, 2.0]))
    with pytest.raises(ValueError, match="nondecreasing"):
        ConvexWeight(kind="piecewise", class_tag="G1", name="bad",
                     knots=np.array([0.0, 1.0, 2.0]),
                     derivative_values=np.array([0.0, 2.0, 1.0]))
    with pytest.raises(ValueError, match="nonincreasing"):
        # slope jumps 1 -> 2: convex but G' not concave
        ConvexWeight(kind="piecewise", class_tag="G1", name="bad",
                     knots=np.array([0.0, 1.0, 2.0]),
                     derivative_values=np.array([0.0, 1.0, 3.0]))


def test_inequality_linear_weight_lhs_vanishes():
    rep = check_inequality(identity_weight(), 50)
    assert rep.passed
    assert rep.metrics["max_lhs_rhs_ratio"] == 0.0


def test_inequality_square_saturates_exactly():
    w2 = power_weight(2.0)
    for i, j in [(1, 1), (2, 3)]:
        lhs = (i + j) * (evaluate(w2, float(i + j)) - evaluate(w2, float(i)) - evaluate(w2, float(j)))
        rhs = 2.0 * (i * evaluate(w2, float(j)) + j * evaluate(w2, float(i)))
        assert lhs == rhs
    rep = check_inequality(w2, 200)
    assert rep.passed
    assert rep.metrics["max_lhs_rhs_ratio"] == 1.0


def test_inequality_catalog_up_to_500():
    for w in [identity_weight(), power_weight(1.5), power_weight(2.0)]:
        assert check_inequality(w, 500).passed


def test_power_weights_pass_class_sampling():
    for p in (1.0, 1.5, 2.0):
        rep = sample_class_invariants(power_weight(p), rng=3)
        assert rep.passed, (p, rep.failing_metrics())


def test_construct_on_geometric_data():
    xi = 0.5 ** np.arange(1, 1001)
    w = construct_tail_weight(xi, tail_budget=1.0)
    assert w.class_tag == "G1_infinity"
    assert not w.degenerate
    sizes = np.arange(1, 1001, dtype=float)
    total = float(np.sum(np.asarray(evaluate(w, sizes)) * xi))
    m1 = float(np.dot(sizes, xi))
    assert total <= m1 + 3.0  # the construction's own guarantee
    ratios = np.asarray(evaluate(w, w.knots[1:])) / w.knots[1:]
    assert np.all(np.diff(ratios) > 0)
    assert ratios.max() > 10.0
    assert sample_class_invariants(w, rng=3).passed
    assert check_inequality(w, 500).passed


def test_construct_finite_support_trivial():
    xi = np.zeros(20)
    xi[:5] = 1.0
    w = construct_tail_weight(xi)
    sizes = np.arange(1, 21, dtype=float)
    total = float(np.sum(np.asarray(evaluate(w, sizes)) * xi))
    assert np.isfinite(total)
    assert sample_class_invariants(w, rng=3).passed


def test_construct_zero_mass_degenerates_to_identity():
    w = construct_tail_weight(np.zeros(8))
    assert w.degenerate
    assert w.class_tag == "G1"
    assert evaluate(w, 5.0) == 5.0


def test_construct_rejects_bad_inputs():
    with pytest.raises(ValueError):
        construct_tail_weight(np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        construct_tail_weight(np.ones(4), tail_budget=0.0)


def test_serialization_roundtrip():
    xi = 0.5 ** np.arange(1, 64)
    for w in [power_weight(1.5), construct_tail_weight(xi)]:
        blob = json.dumps(w.to_dict())
        back = ConvexWeight.from_dict(json.loads(blob))
        xs = np.linspace(0, 50, 201)
        assert np.array_equal(np.asarray(evaluate(w, xs)), np.asarray(evaluate(back, xs)))
        assert np.array_equal(
            np.asarray(evaluate_derivative(w, xs)), np.asarray(evaluate_derivative(back, xs))
        )


def test_piecewise_evaluation_consistent_with_quadrature():
    xi = 0.3 ** np.arange(1, 40)
    w = construct_tail_weight(xi, tail_budget=0.5)
    for x in (0.5, 3.7, 12.0, 400.0):
        grid = np.linspace(0.0, x, 20001)
        num = np.trapezoid(np.asarray(evaluate_derivative(w, grid)), grid)
        assert num == pytest.approx(evaluate(w, x), rel=1e-7)


@given(seed=st.integers(0, 2**32 - 1), budget=st.floats(0.1, 4.0))
def test_constructed_weights_always_valid(seed, budget):
    rng = np.random.default_rng(seed)
    xi = rng.random(rng.integers(2, 200)) * rng.choice([1e-3, 1.0, 50.0])
    w = construct_tail_weight(xi, tail_budget=budget)
    if w.degenerate:
        return
    sizes = np.arange(1, xi.size + 1, dtype=float)
    total = float(np.sum(np.asarray(evaluate(w, sizes)) * xi))
    m1 = float(np.dot(sizes, xi))
    assert total <= (m1 + 3.0 * budget) * (1 + 1e-12)
    assert check_inequality(w, 64).passed
