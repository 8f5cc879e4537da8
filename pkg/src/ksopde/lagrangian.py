"""The k-symplectic Lagrangian formalism in coordinates.

For a regular Lagrangian the field equation ``sum_A i_{xi_A} omega^A_L = dE_L``
is equivalent to ``xi`` being a SOPDE whose coefficients satisfy, for every i,

    d2L/dq^j dv^i_A * v^j_A + d2L/dv^i_A dv^j_B * (xi_A)^j_B = dL/dq^i .

This module works with that coordinate form. The 1- and 2-form coefficients
are still assembled for inspection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundle import BundlePoint, evaluate_array, probe_points
from .expr import (
    ZERO,
    Const,
    DimensionMismatch,
    Dims,
    Expr,
    add,
    as_expr,
    diff,
    mul,
    parse,
    simplify,
    sub,
)
from .sopde import Sopde

__all__ = [
    "Lagrangian",
    "LagrangianForms",
    "HessianBlocks",
    "Regularity",
    "ELSolution",
    "SingularHessian",
    "RankDeficiencyUnexpected",
    "forms",
    "energy",
    "hessian",
    "regularity",
    "el_residual",
    "solve_el_coefficients",
    "wave_lagrangian",
    "plane_wave_sopde",
]

DET_THRESHOLD = 1e-9


class SingularHessian(ArithmeticError):
    pass


class RankDeficiencyUnexpected(ArithmeticError):
    pass


@dataclass(frozen=True)
class Lagrangian:
    dims: Dims
    L: Expr

    def __post_init__(self):
        object.__setattr__(self, "L", simplify(as_expr(self.L)))

    @classmethod
    def from_text(cls, text: str, dims: Dims) -> "Lagrangian":
        return cls(dims, parse(text, dims))


@dataclass(frozen=True, eq=False)
class LagrangianForms:
    """Coefficients of ``theta^A_L`` and ``omega^A_L``.

    ``theta[A-1, i-1] = dL/dv^i_A`` (coefficient of ``dq^i``),
    ``omega_qq[A-1, i-1, j-1] = d2L/dq^j dv^i_A`` (of ``dq^i ^ dq^j``),
    ``omega_qv[A-1, i-1, B-1, j-1] = d2L/dv^j_B dv^i_A`` (of ``dq^i ^ dv^j_B``).
    """

    dims: Dims
    theta: np.ndarray = field(repr=False)
    omega_qq: np.ndarray = field(repr=False)
    omega_qv: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class HessianBlocks:
    """``H[A-1, i-1, B-1, j-1] = d2L / dv^i_A dv^j_B``."""

    dims: Dims
    H: np.ndarray = field(repr=False)

    def matrix(self, p) -> np.ndarray:
        """``(..., nk, nk)`` matrix with row/column ``(A, i)`` at ``A*n + i``."""
        n, k = self.dims.n, self.dims.k
        vals = evaluate_array(self.H, p, self.dims)
        return vals.reshape(vals.shape[:-4] + (k * n, k * n))


@dataclass(frozen=True)
class Regularity:
    regular: bool
    min_abs_det: float
    max_abs_det: float

    def __bool__(self):
        return self.regular


@dataclass(frozen=True, eq=False)
class ELSolution:
    """Pointwise SOPDE coefficients ``coefficients[A-1, i-1, B-1]`` solving the field equation."""

    coefficients: np.ndarray
    rank: int
    residual: float
    abs_det: float


def forms(lag: Lagrangian) -> LagrangianForms:
    dims = lag.dims
    n, k = dims.n, dims.k
    theta = np.empty((k, n), dtype=object)
    omega_qq = np.empty((k, n, n), dtype=object)
    for A, i in np.ndindex(k, n):
        theta[A, i] = diff(lag.L, dims.v(i + 1, A + 1))
        for j in range(n):
            omega_qq[A, i, j] = diff(theta[A, i], dims.q(j + 1))
    omega_qv = _second_velocity_derivatives(theta, dims)
    for arr in (theta, omega_qq, omega_qv):
        arr.flags.writeable = False
    return LagrangianForms(dims, theta, omega_qq, omega_qv)


def _second_velocity_derivatives(theta: np.ndarray, dims: Dims) -> np.ndarray:
    n, k = dims.n, dims.k
    out = np.empty((k, n, k, n), dtype=object)
    for A, i, B, j in np.ndindex(k, n, k, n):
        out[A, i, B, j] = diff(theta[A, i], dims.v(j + 1, B + 1))
    return out


def hessian(lag: Lagrangian) -> HessianBlocks:
    return HessianBlocks(lag.dims, forms(lag).omega_qv)


def energy(lag: Lagrangian) -> Expr:
    """``E_L = v^i_A dL/dv^i_A - L``."""
    dims = lag.dims
    acc = ZERO
    for A in range(1, dims.k + 1):
        for i in range(1, dims.n + 1):
            v = dims.v(i, A)
            acc = add(acc, mul(v, diff(lag.L, v)))
    return sub(acc, lag.L)


def regularity(lag: Lagrangian, probes=None, *, seed: int = 0, threshold: float = DET_THRESHOLD) -> Regularity:
    """Velocity Hessian determinant range over the probes; regular iff ``min |det| > threshold``.

    Determinants come from LAPACK's LU factorization with partial pivoting.
    """
    if probes is None:
        probes = probe_points(lag.dims, 32, seed)
    pts = np.atleast_2d(np.asarray(probes, dtype=float))
    dets = np.abs(np.linalg.det(hessian(lag).matrix(pts)))
    lo, hi = float(dets.min()), float(dets.max())
    return Regularity(lo > threshold, lo, hi)


def _coords(p, dims: Dims) -> np.ndarray:
    if isinstance(p, BundlePoint):
        if p.dims != dims:
            raise DimensionMismatch(f"point dims {p.dims} do not match {dims}")
        return p.coords
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (dims.dim,):
        raise DimensionMismatch(f"expected coordinates of length {dims.dim}, got shape {p.shape}")
    return p


def _el_terms(lag: Lagrangian, x: np.ndarray):
    """Velocity Hessian ``(..., k, n, k, n)`` and the right-hand side ``(..., n)`` at ``x``."""
    dims = lag.dims
    n, k = dims.n, dims.k
    f = forms(lag)
    H = evaluate_array(f.omega_qv, x, dims)
    mixed = evaluate_array(f.omega_qq, x, dims)  # [..., A, i, j] = d2L/dq^j dv^i_A
    dLdq = evaluate_array(np.array([diff(lag.L, dims.q(i + 1)) for i in range(n)], dtype=object), x, dims)
    v = x[..., n:].reshape(x.shape[:-1] + (k, n))  # [..., A, j]
    rhs = dLdq - np.einsum("...Aij,...Aj->...i", mixed, v)
    return H, rhs


def el_residual(lag: Lagrangian, s: Sopde, p) -> np.ndarray:
    """Residual of the coordinate field equation at ``p``; shape ``(..., n)``."""
    if s.dims != lag.dims:
        raise DimensionMismatch(f"SOPDE dims {s.dims} do not match Lagrangian dims {lag.dims}")
    x = _coords(p, lag.dims)
    H, rhs = _el_terms(lag, x)
    xi = s.evaluate(x)  # [..., A, j, B]
    return np.einsum("...AiBj,...AjB->...i", H, xi) - rhs


def solve_el_coefficients(
    lag: Lagrangian,
    p,
    symmetrize: bool = False,
    *,
    prior=None,
    tol: float = 1e-10,
) -> ELSolution:
    """Solve the field equation for the SOPDE coefficients at one point.

    For ``k = 1`` the solution is unique. For ``k > 1`` the ``n`` equations
    in ``n k^2`` unknowns are underdetermined; the returned solution is the
    one closest to ``prior`` (zero by default) in the Euclidean norm, found by
    an SVD least-squares solve. ``symmetrize`` adds the constraints
    ``(xi_A)^j_B = (xi_B)^j_A``.

    Raises:
        SingularHessian: velocity Hessian determinant at ``p`` is at most 1e-9.
        RankDeficiencyUnexpected: the system (with constraints) has no exact solution.
    """
    dims = lag.dims
    n, k = dims.n, dims.k
    x = _coords(p, dims)
    if x.ndim != 1:
        raise DimensionMismatch("solve_el_coefficients works at a single point")
    H, rhs = _el_terms(lag, x)
    Hm = H.reshape(k * n, k * n)
    abs_det = float(abs(np.linalg.det(Hm)))
    if abs_det <= DET_THRESHOLD:
        raise SingularHessian(f"velocity Hessian is singular at {x.tolist()} (|det| = {abs_det:.3e})")

    # unknown (A, j, B) sits at A*n*k + j*k + B, matching coefficients[A, j, B]
    M = np.transpose(H, (1, 0, 3, 2)).reshape(n, k * n * k)
    rows, b = [M], [rhs]
    if symmetrize and k > 1:
        cons = []
        for j in range(n):
            for A in range(k):
                for B in range(A + 1, k):
                    row = np.zeros(k * n * k)
                    row[A * n * k + j * k + B] = 1.0
                    row[B * n * k + j * k + A] = -1.0
                    cons.append(row)
        rows.append(np.array(cons))
        b.append(np.zeros(len(cons)))
    system = np.vstack(rows)
    target = np.concatenate(b)
    x0 = np.zeros(k * n * k) if prior is None else np.asarray(prior, dtype=float).reshape(-1)
    if x0.shape != (k * n * k,):
        raise DimensionMismatch(f"prior must hold {k * n * k} coefficients")

    if k == 1 and not symmetrize:
        sol = np.linalg.solve(Hm, rhs)
        rank = n
    else:
        delta, _, rank, _ = np.linalg.lstsq(system, target - system @ x0, rcond=None)
        sol = x0 + delta
        rank = int(rank)
        if np.linalg.matrix_rank(M) < n:
            raise RankDeficiencyUnexpected(f"field equations have rank {np.linalg.matrix_rank(M)} < {n}")
    residual = float(np.max(np.abs(system @ sol - target)))
    if residual > tol * max(1.0, float(np.max(np.abs(target)))):
        raise RankDeficiencyUnexpected(f"no exact solution: residual {residual:.3e}")
    return ELSolution(sol.reshape(k, n, k), rank, residual, abs_det)


def wave_lagrangian(c: float = 1.0) -> Lagrangian:
    """``L = 1/2 (v_1^2 - c^2 (v_2^2 + v_3^2))`` on T^1_3 R."""
    dims = Dims(1, 3)
    v1, v2, v3 = (dims.v(1, A) for A in (1, 2, 3))
    L = mul(Const(0.5), sub(v1**2, mul(Const(c * c), add(v2**2, v3**2))))
    return Lagrangian(dims, L)


def plane_wave_sopde(wavevector) -> Sopde:
    """SOPDE ``(xi_A)_B = -K_A K_B q`` on T^1_k R.

    Its integral sections include the plane waves ``sin(K . t + phase)``.
    """
    K = [float(x) for x in wavevector]
    dims = Dims(1, len(K))
    q = dims.q(1)
    xi = np.empty((dims.k, 1, dims.k), dtype=object)
    for A in range(dims.k):
        for B in range(dims.k):
            xi[A, 0, B] = mul(as_expr(-K[A] * K[B]), q)
    return Sopde(dims, xi)
