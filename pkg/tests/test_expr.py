import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_expression, random_tree
from ksopde.expr import (
    Const,
    Cos,
    Dims,
    Div,
    DivisionByZero,
    Dual,
    Exp,
    ExprSyntaxError,
    IndexOutOfRange,
    Mul,
    Neg,
    Pow,
    Sin,
    UnknownVariable,
    Var,
    VarKind,
    central_difference,
    diff,
    eval_dual,
    evaluate,
    parse,
    simplify,
    to_text,
)

D12 = Dims(1, 2)


# --- Dims -------------------------------------------------------------------


def test_dims_layout():
    d = Dims(2, 3)
    assert d.dim == 8
    assert [v.name for v in d.coordinates()] == ["q1", "q2", "v1_1", "v2_1", "v1_2", "v2_2", "v1_3", "v2_3"]
    for idx, v in enumerate(d.coordinates()):
        assert d.index(v) == idx
        assert d.var_at(idx) == v


@pytest.mark.parametrize("n,k", [(0, 1), (1, 0), (-1, 2)])
def test_dims_rejects_nonpositive(n, k):
    with pytest.raises(ValueError):
        Dims(n, k)


# --- parsing ----------------------------------------------------------------


def test_parse_velocity_variable():
    assert parse("v1_2", D12) == Var(VarKind.VELOCITY, 1, 2)


def test_unary_minus_binds_tighter_than_product():
    e = parse("-(1/1)*v1_1", D12)
    assert e == Mul(Neg(Div(Const(1.0), Const(1.0))), Var(VarKind.VELOCITY, 1, 1))


def test_power_binds_tighter_than_unary_minus():
    assert parse("-q1^2", D12) == Neg(Pow(Var(VarKind.BASE, 1), 2))


def test_left_associativity():
    q1 = Var(VarKind.BASE, 1)
    e = parse("q1 - 2 - 3", D12)
    assert evaluate(e, [10.0, 0, 0], D12) == 5.0
    assert parse("q1/2/4", D12) == Div(Div(q1, Const(2.0)), Const(4.0))


def test_functions_and_numbers():
    e = parse(" sin( q1 ) + cos(v1_1)*exp(2.5e-1) ", D12)
    assert math.isclose(evaluate(e, [0.3, 0.2, 0.0], D12), math.sin(0.3) + math.cos(0.2) * math.exp(0.25))


def test_parse_index_out_of_range():
    with pytest.raises(IndexOutOfRange):
        parse("q3", Dims(2, 1))
    with pytest.raises(IndexOutOfRange):
        parse("v1_3", D12)


def test_parse_unknown_variable():
    with pytest.raises(UnknownVariable) as info:
        parse("x + 1", D12)
    assert "q<i>" in str(info.value)


@pytest.mark.parametrize(
    "source,position",
    [("q1 +", 4), ("(q1", 3), ("q1 * * 2", 5), ("sin q1", 4), ("q1 q1", 3), ("2^1.5", 2)],
)
def test_syntax_error_reports_position(source, position):
    with pytest.raises(ExprSyntaxError) as info:
        parse(source, D12)
    assert info.value.position == position
    assert info.value.expected


# --- evaluation -------------------------------------------------------------


def test_evaluate_examples():
    v = Var(VarKind.VELOCITY, 1, 1)
    assert evaluate(v * v, [0.0, 3.0, 5.0], D12) == 9.0
    assert evaluate(Sin(Var(VarKind.BASE, 1)), [0.0, 1.0, 1.0], D12) == 0.0
    e = Mul(Exp(Neg(Var(VarKind.BASE, 1))), Sin(Var(VarKind.BASE, 2)))
    assert math.isclose(evaluate(e, [0.0, math.pi / 2, 0, 0], Dims(2, 1)), 1.0)


def test_evaluate_batches():
    e = parse("q1*v1_2", D12)
    pts = np.arange(12.0).reshape(4, 3)
    np.testing.assert_array_equal(evaluate(e, pts, D12), pts[:, 0] * pts[:, 2])


def test_division_by_zero_reports_subtree():
    e = parse("1/(q1 - q1)", D12)
    with pytest.raises(DivisionByZero) as info:
        evaluate(e, [1.0, 0, 0], D12)
    assert "q1 - q1" in str(info.value)


# --- symbolic derivatives ---------------------------------------------------


def test_diff_examples():
    v = Var(VarKind.VELOCITY, 1, 1)
    q = Var(VarKind.BASE, 1)
    assert evaluate(diff(v * v, v), [0.0, 3.0, 0.0], D12) == 6.0
    assert diff(Sin(q), q) == Cos(q)
    assert diff(Const(4.0), q) == Const(0.0)


def test_diff_folds_constants():
    e = parse("2*3*v1_1 + q1", D12)
    assert simplify(diff(e, Var(VarKind.VELOCITY, 1, 1))) == Const(6.0)


def test_simplify_preserves_value():
    rng = np.random.default_rng(5)
    for _ in range(50):
        p = rng.uniform(-1, 1, 3)
        e = random_expression(rng, D12, p)
        assert math.isclose(evaluate(simplify(e), p, D12), evaluate(e, p, D12), rel_tol=1e-12, abs_tol=1e-12)


# --- dual numbers -----------------------------------------------------------


def test_dual_examples():
    v = Var(VarKind.VELOCITY, 1, 1)
    d = eval_dual(v * v, [0.0, 3.0, 0.0], v, D12)
    assert (d.value, d.derivative) == (9.0, 6.0)
    d = eval_dual(Const(2.5), [0.0, 3.0, 0.0], v, D12)
    assert (d.value, d.derivative) == (2.5, 0.0)


def test_dual_product_rule():
    a, b = Dual(2.0, 3.0), Dual(5.0, 7.0)
    prod = a * b
    assert prod.value == 10.0 and prod.derivative == 3.0 * 5.0 + 2.0 * 7.0


def test_dual_division_by_zero():
    q = Var(VarKind.BASE, 1)
    with pytest.raises(DivisionByZero):
        eval_dual(Div(Const(1.0), q), [0.0, 1.0, 1.0], q, D12)


def test_symbolic_dual_and_fd_agree_on_random_points():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p = rng.uniform(-1, 1, 3)
        e = random_expression(rng, D12, p)
        x = D12.var_at(int(rng.integers(3)))
        sym = float(evaluate(diff(e, x), p, D12))
        dual = eval_dual(e, p, x, D12)
        assert abs(sym - dual.derivative) <= 1e-10 * max(1.0, abs(sym))
        assert abs(dual.derivative - central_difference(e, p, x, D12)) <= 1e-6


# --- properties -------------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=200, deadline=None)
@given(seeds)
def test_round_trip(seed):
    rng = np.random.default_rng(seed)
    e = random_tree(rng, Dims(2, 2), 5)
    assert parse(to_text(e), Dims(2, 2)) == e


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_derivative_consistency(seed):
    rng = np.random.default_rng(seed)
    dims = Dims(2, 2)
    p = rng.uniform(-1, 1, dims.dim)
    e = random_expression(rng, dims, p)
    x = dims.var_at(int(rng.integers(dims.dim)))
    d = eval_dual(e, p, x, dims)
    assert abs(float(evaluate(diff(e, x), p, dims)) - d.derivative) <= 1e-10 * (1 + abs(d.value))


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_diff_is_linear(seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(-1, 1, 3)
    a = random_expression(rng, D12, p, depth=3)
    b = random_expression(rng, D12, p, depth=3)
    x = D12.var_at(int(rng.integers(3)))
    lhs = evaluate(diff(a + b, x), p, D12)
    rhs = evaluate(diff(a, x) + diff(b, x), p, D12)
    assert lhs == pytest.approx(rhs, rel=1e-14, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_mixed_partials_commute(seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(-1, 1, 3)
    e = random_expression(rng, D12, p, depth=3, bound=50.0)
    x, y = (D12.var_at(int(i)) for i in rng.choice(3, 2, replace=False))
    xy = float(evaluate(diff(diff(e, x), y), p, D12))
    yx = float(evaluate(diff(diff(e, y), x), p, D12))
    assert abs(xy - yx) <= 1e-12 * max(1.0, abs(xy))
