import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_connection, random_linear_sopde, random_polynomial
from ksopde.bundle import TangentVector, BundlePoint, apply_tensor, ktangent, liouville_A, probe_points
from ksopde.connection import Connection, curvature, horizontal_projector
from ksopde.expr import Const, Dims, diff, eval_dual, evaluate, parse, to_text
from ksopde.sopde import (
    KVectorField,
    LinearSopde,
    NotLinear,
    PreconditionViolated,
    Sopde,
    check_connection_fixed_point,
    check_sopde_fixed_point,
    connection_from_sopde,
    curvature_vanishes_for_linear,
    fixed_point_residuals,
    heat_sopde,
    horizontal_projector_from_sopde,
    integrability_symmetry,
    is_sopde,
    linearize,
    sopde_from_connection,
    spray_sopde,
)

D12 = Dims(1, 2)
D11 = Dims(1, 1)


def random_sopde(rng, dims, degree=2):
    xi = np.empty((dims.k, dims.n, dims.k), dtype=object)
    for idx in np.ndindex(xi.shape):
        xi[idx] = random_polynomial(rng, dims, degree)
    return Sopde(dims, xi)


# --- is_sopde ---------------------------------------------------------------


def test_heat_is_sopde():
    assert is_sopde(heat_sopde().as_kvector())


def test_wrong_slot_is_not_sopde():
    d = D12
    X = heat_sopde().as_kvector()
    qpart = X.qpart.copy()
    qpart[0, 0] = d.v(1, 2)
    res = is_sopde(KVectorField(d, qpart, X.vpart))
    assert not res
    assert "X_1 component 1" in res.detail


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_sopde_components_hit_liouville(n, k, seed):
    rng = np.random.default_rng(seed)
    d = Dims(n, k)
    s = random_sopde(rng, d, degree=1)
    X = s.as_kvector()
    assert is_sopde(X)
    for p in probe_points(d, 4, seed):
        bp = BundlePoint.from_coords(d, p)
        for A in range(1, k + 1):
            XA = TangentVector.from_array(bp, X.evaluate(A, p))
            got = apply_tensor(ktangent(A, d), XA)
            np.testing.assert_allclose(got.array, liouville_A(A, bp).array, rtol=0, atol=1e-12)


# --- SOPDE -> connection ----------------------------------------------------


def test_heat_connection_components():
    c = connection_from_sopde(heat_sopde())
    assert c.component(1, 1, 1) == Const(2 / 3)
    assert c.component(1, 2, 1) == Const(0.0)


def test_heat_connection_general_constants():
    kappa, lam = 2.0, 0.5
    c = connection_from_sopde(heat_sopde(kappa, lam))
    # -1/3 * (d(xi_1)_1/dv_1 + d(xi_2)_1/dv_2) = 2 kappa / (3 lam^2)
    assert float(evaluate(c.component(1, 1, 1), np.zeros(3), D12)) == pytest.approx(16 / 3, abs=1e-14)
    assert c.component(1, 2, 1) == Const(0.0)


def test_spray_connection_is_grifone():
    c = connection_from_sopde(spray_sopde(1.5))
    v = D11.v(1, 1)
    assert c.component(1, 1, 1) == Const(1.5) * v
    assert to_text(c.component(1, 1, 1)) == "1.5*v1_1"


def test_constant_sopde_gives_zero_connection():
    rng = np.random.default_rng(0)
    d = Dims(2, 2)
    s = Sopde(d, rng.uniform(-1, 1, (2, 2, 2)))
    assert np.all(connection_from_sopde(s).evaluate(probe_points(d)) == 0.0)


def test_connection_components_match_dual_numbers():
    rng = np.random.default_rng(1)
    d = Dims(2, 2)
    s = random_sopde(rng, d)
    c = connection_from_sopde(s)
    for p in probe_points(d, 8):
        for i, B, j in np.ndindex(d.n, d.k, d.n):
            oracle = -sum(eval_dual(s.xi[A, i, B], p, d.v(j + 1, A + 1), d).derivative for A in range(d.k)) / (d.k + 1)
            assert float(evaluate(c.N[i, B, j], p, d)) == pytest.approx(oracle, rel=1e-12, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 2), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_lie_derivative_route_agrees(n, k, seed):
    rng = np.random.default_rng(seed)
    d = Dims(n, k)
    s = random_sopde(rng, d)
    pts = probe_points(d, 6, seed)
    via_lie = horizontal_projector_from_sopde(s).matrix(pts)
    via_components = horizontal_projector(connection_from_sopde(s)).matrix(pts)
    np.testing.assert_allclose(via_lie, via_components, rtol=0, atol=1e-12)


# --- connection -> SOPDE and fixed points -----------------------------------


def test_sopde_from_connection_examples():
    assert np.all(sopde_from_connection(Connection.zero(D12)).evaluate(probe_points(D12)) == 0.0)
    back = sopde_from_connection(connection_from_sopde(heat_sopde()))
    pts = probe_points(D12)
    np.testing.assert_allclose(back.evaluate(pts)[:, 0, 0, 0], -2 / 3 * pts[:, 1], rtol=1e-15)
    spray = spray_sopde(2.0)
    back = sopde_from_connection(connection_from_sopde(spray))
    np.testing.assert_allclose(back.evaluate(probe_points(D11)), spray.evaluate(probe_points(D11)), rtol=1e-15)


def test_fixed_point_examples():
    assert check_sopde_fixed_point(spray_sopde())
    assert check_sopde_fixed_point(Sopde.zero(Dims(2, 2)))
    heat = check_sopde_fixed_point(heat_sopde())
    assert not heat
    pts = probe_points(D12)
    res = fixed_point_residuals(heat_sopde(), pts)
    np.testing.assert_allclose(np.abs(res[:, 0, 0, 0]), np.abs(pts[:, 1]) / 3, rtol=1e-15, atol=1e-15)


def _linear_connection(d, coeffs):
    """``N^j_{Bi} = coeffs[j, B, i, l, A] v^l_A``."""
    N = np.empty((d.n, d.k, d.n), dtype=object)
    for j, B, i in np.ndindex(d.n, d.k, d.n):
        acc = Const(0.0)
        for l, A in np.ndindex(d.n, d.k):
            acc = acc + Const(coeffs[j, B, i, l, A]) * d.v(l + 1, A + 1)
        N[j, B, i] = acc
    return Connection(d, N)


def test_connection_fixed_point_examples():
    d = Dims(2, 2)
    assert check_connection_fixed_point(Connection.zero(d))
    assert not check_connection_fixed_point(Connection(d, np.full((2, 2, 2), 0.5)))
    rng = np.random.default_rng(2)
    coeffs = rng.uniform(-1, 1, (2, 2, 2, 2, 2))
    # linear in v alone is not enough: the condition needs symmetry in (i, l)
    assert not check_connection_fixed_point(_linear_connection(d, coeffs))
    symmetric = _linear_connection(d, coeffs + np.swapaxes(coeffs, 2, 3))
    assert check_connection_fixed_point(symmetric)
    again = connection_from_sopde(sopde_from_connection(symmetric))
    pts = probe_points(d)
    np.testing.assert_allclose(again.evaluate(pts), symmetric.evaluate(pts), atol=1e-12)


def test_fixed_point_sopdes_survive_round_trip():
    d = Dims(2, 1)
    q1, q2, v1, v2 = d.coordinates()
    xi = np.empty((1, 2, 1), dtype=object)
    xi[0, 0, 0] = q1 * v1 * v2 - v2 * v2
    xi[0, 1, 0] = Const(3.0) * v1 * v1
    s = Sopde(d, xi)
    assert check_sopde_fixed_point(s)
    back = sopde_from_connection(connection_from_sopde(s))
    pts = probe_points(d)
    np.testing.assert_allclose(back.evaluate(pts), s.evaluate(pts), atol=1e-12)


# --- integrability symmetry -------------------------------------------------


def test_integrability_symmetry_examples():
    assert integrability_symmetry(heat_sopde())
    assert integrability_symmetry(spray_sopde())
    s = Sopde.from_text(D12, {(1, 1, 2): "v1_1"})
    res = integrability_symmetry(s)
    assert not res
    assert "(xi_1)^1_2" in res.detail or "(xi_2)^1_1" in res.detail


# --- linearization ----------------------------------------------------------


def test_linearize_heat():
    lin = linearize(heat_sopde())
    assert isinstance(lin, LinearSopde)
    expected = np.zeros((1, 2, 2, 2, 1))
    expected[0, 0, 0, 0, 0] = -1  # v1_1 in (xi_1)_1
    expected[0, 0, 1, 1, 0] = -1  # v1_2 in (xi_1)_2
    expected[0, 1, 0, 1, 0] = -1  # v1_2 in (xi_2)_1
    expected[0, 1, 1, 0, 0] = 1  # v1_1 in (xi_2)_2
    np.testing.assert_array_equal(lin.Acoef, expected)
    assert not lin.Bcoef.any() and not lin.Ccoef.any()


def test_linearize_rejects_spray():
    res = linearize(spray_sopde())
    assert isinstance(res, NotLinear) and not res


def test_linearize_constant():
    s = Sopde.from_text(D12, {(1, 1, 1): "2", (2, 1, 2): "-1.5"})
    lin = linearize(s)
    assert not lin.Acoef.any() and not lin.Bcoef.any()
    assert lin.Ccoef[0, 0, 0] == 2.0 and lin.Ccoef[0, 1, 1] == -1.5


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 2), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_linear_sopde_round_trip(n, k, seed):
    rng = np.random.default_rng(seed)
    d = Dims(n, k)
    lin = random_linear_sopde(rng, d)
    s = lin.to_sopde()
    pts = probe_points(d, 8, seed)
    np.testing.assert_allclose(s.evaluate(pts), lin.evaluate(pts), atol=1e-12)
    back = linearize(s)
    np.testing.assert_allclose(back.Acoef, lin.Acoef, atol=1e-12)
    np.testing.assert_allclose(back.Bcoef, lin.Bcoef, atol=1e-12)
    np.testing.assert_allclose(back.Ccoef, lin.Ccoef, atol=1e-12)
    c = connection_from_sopde(s)
    for idx in np.ndindex(c.N.shape):
        for x in d.coordinates():
            assert np.all(evaluate(diff(c.N[idx], x), pts, d) == 0.0)
    assert curvature_vanishes_for_linear(s, pts)


def test_curvature_vanishing_examples():
    assert curvature_vanishes_for_linear(heat_sopde())
    with pytest.raises(PreconditionViolated):
        curvature_vanishes_for_linear(spray_sopde())


def test_nonlinear_sopde_can_curve():
    # xi^1 = q2 (v^1)^2 gives N^1_{1,1} = -q2 v^1 and Omega^1_{1,12} = v^1 / 2
    d = Dims(2, 1)
    s = Sopde.from_text(d, {(1, 1, 1): "q2*v1_1^2"})
    om = curvature(connection_from_sopde(s))
    pts = probe_points(d)
    np.testing.assert_allclose(om.evaluate(pts)[:, 0, 0, 0, 1], pts[:, 2] / 2, rtol=1e-15)


def test_heat_sopde_constants_validated():
    with pytest.raises(ValueError):
        heat_sopde(kappa=0.0)


def test_from_text_rejects_out_of_range():
    from ksopde.expr import IndexOutOfRange

    with pytest.raises(IndexOutOfRange):
        Sopde.from_text(D12, {(3, 1, 1): "v1_1"})


def test_random_connection_round_trip_shape():
    rng = np.random.default_rng(4)
    c = random_connection(rng, Dims(2, 3))
    s = sopde_from_connection(c)
    assert s.xi.shape == (3, 2, 3)
    assert parse("v1_1", D12) == D12.v(1, 1)
