"""k-vector fields and second-order partial differential equations (SOPDEs) on T^1_k Q.

A SOPDE is stored by its coefficients ``xi[A-1, i-1, B-1] = (xi_A)^i_B``, so that

    xi_A = v^i_A d/dq^i + (xi_A)^i_B d/dv^i_B .

The predicates in this module decide identities numerically on a probe set
(32 uniform points in ``[-2, 2]^dim`` by default) instead of proving them
symbolically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundle import (
    Tensor11Field,
    evaluate_array,
    expr_array,
    identity_entries,
    ktangent,
    lie_derivative,
    probe_points,
)
from .connection import Connection, curvature
from .expr import (
    ZERO,
    Const,
    Dims,
    Expr,
    add,
    const,
    diff,
    div,
    mul,
    neg,
    parse,
    sub,
)

__all__ = [
    "CheckResult",
    "KVectorField",
    "Sopde",
    "LinearSopde",
    "NotLinear",
    "PreconditionViolated",
    "is_sopde",
    "connection_from_sopde",
    "horizontal_projector_from_sopde",
    "sopde_from_connection",
    "fixed_point_residuals",
    "check_sopde_fixed_point",
    "check_connection_fixed_point",
    "integrability_symmetry",
    "linearize",
    "curvature_vanishes_for_linear",
    "heat_sopde",
    "spray_sopde",
]


class PreconditionViolated(ValueError):
    pass


@dataclass(frozen=True)
class CheckResult:
    """Outcome of a probe-set check. Truthy iff the check passed."""

    name: str
    passed: bool
    max_residual: float
    detail: str = ""

    def __bool__(self):
        return self.passed


def _probes(dims: Dims, probes, seed: int) -> np.ndarray:
    if probes is None:
        return probe_points(dims, 32, seed)
    return np.atleast_2d(np.asarray(probes, dtype=float))


@dataclass(frozen=True, eq=False)
class KVectorField:
    """``X_A = qpart[A-1, i-1] d/dq^i + vpart[A-1, i-1, B-1] d/dv^i_B``."""

    dims: Dims
    qpart: np.ndarray = field(repr=False)
    vpart: np.ndarray = field(repr=False)

    def __post_init__(self):
        n, k = self.dims.n, self.dims.k
        object.__setattr__(self, "qpart", expr_array(self.qpart, (k, n)))
        object.__setattr__(self, "vpart", expr_array(self.vpart, (k, n, k)))

    def component(self, A: int) -> list[Expr]:
        """Vector field ``X_A`` as ``dim`` expressions in coordinate order."""
        n, k = self.dims.n, self.dims.k
        return list(self.qpart[A - 1]) + [self.vpart[A - 1, i, B] for B in range(k) for i in range(n)]

    def evaluate(self, A: int, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return evaluate_array(np.array(self.component(A), dtype=object), p, self.dims)


@dataclass(frozen=True, eq=False)
class Sopde:
    """Coefficients ``xi[A-1, i-1, B-1] = (xi_A)^i_B`` of a SOPDE."""

    dims: Dims
    xi: np.ndarray = field(repr=False)

    def __post_init__(self):
        n, k = self.dims.n, self.dims.k
        object.__setattr__(self, "xi", expr_array(self.xi, (k, n, k)))

    @classmethod
    def zero(cls, dims: Dims) -> "Sopde":
        return cls(dims, np.full((dims.k, dims.n, dims.k), ZERO, dtype=object))

    @classmethod
    def from_text(cls, dims: Dims, coefficients: dict[tuple[int, int, int], str]) -> "Sopde":
        """Build from ``{(A, i, B): text}`` with 1-based keys; missing entries are zero."""
        xi = np.full((dims.k, dims.n, dims.k), ZERO, dtype=object)
        for (A, i, B), text in coefficients.items():
            dims.v(i, A)
            dims.v(i, B)
            xi[A - 1, i - 1, B - 1] = parse(text, dims)
        return cls(dims, xi)

    def coefficient(self, A: int, i: int, B: int) -> Expr:
        return self.xi[A - 1, i - 1, B - 1]

    def evaluate(self, p) -> np.ndarray:
        """Coefficients at ``p`` (shape ``(..., dim)``), result ``(..., k, n, k)``."""
        return evaluate_array(self.xi, p, self.dims)

    def as_kvector(self) -> KVectorField:
        dims = self.dims
        qpart = np.empty((dims.k, dims.n), dtype=object)
        for A in range(dims.k):
            for i in range(dims.n):
                qpart[A, i] = dims.v(i + 1, A + 1)
        return KVectorField(dims, qpart, self.xi)


@dataclass(frozen=True, eq=False)
class LinearSopde:
    """Affine SOPDE coefficients.

    ``(xi_A)^j_B = Acoef[j,A,B,C,m] v^m_C + Bcoef[j,A,B,m] q^m + Ccoef[j,A,B]``
    with 0-based array indices.
    """

    dims: Dims
    Acoef: np.ndarray
    Bcoef: np.ndarray
    Ccoef: np.ndarray

    def __post_init__(self):
        n, k = self.dims.n, self.dims.k
        shapes = {"Acoef": (n, k, k, k, n), "Bcoef": (n, k, k, n), "Ccoef": (n, k, k)}
        for name, shape in shapes.items():
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def evaluate(self, p) -> np.ndarray:
        """Same layout as :meth:`Sopde.evaluate`: ``(..., k, n, k)``."""
        dims = self.dims
        p = np.asarray(p, dtype=float)
        q = p[..., : dims.n]
        v = p[..., dims.n :].reshape(p.shape[:-1] + (dims.k, dims.n))  # [..., C, m]
        out = (
            np.einsum("jABCm,...Cm->...jAB", self.Acoef, v)
            + np.einsum("jABm,...m->...jAB", self.Bcoef, q)
            + self.Ccoef
        )
        return np.moveaxis(out, -3, -2)  # (..., A, j, B)

    def to_sopde(self) -> Sopde:
        dims = self.dims
        xi = np.empty((dims.k, dims.n, dims.k), dtype=object)
        for j, A, B in np.ndindex(dims.n, dims.k, dims.k):
            acc = const(self.Ccoef[j, A, B])
            for m in range(dims.n):
                acc = add(acc, mul(const(self.Bcoef[j, A, B, m]), dims.q(m + 1)))
                for C in range(dims.k):
                    acc = add(acc, mul(const(self.Acoef[j, A, B, C, m]), dims.v(m + 1, C + 1)))
            xi[A, j, B] = acc
        return Sopde(dims, xi)


@dataclass(frozen=True)
class NotLinear:
    """Returned by :func:`linearize` when the affine model does not reproduce the SOPDE."""

    max_residual: float
    detail: str = ""

    def __bool__(self):
        return False


def is_sopde(X: KVectorField, probes=None, *, seed: int = 0, tol: float = 1e-12) -> CheckResult:
    """Check that the q-part of every ``X_A`` is ``v^i_A``, i.e. ``J^A(X_A) = Delta_A``."""
    dims = X.dims
    pts = _probes(dims, probes, seed)
    worst = 0.0
    for A in range(1, dims.k + 1):
        for i in range(1, dims.n + 1):
            got = evaluate_array(np.array([X.qpart[A - 1, i - 1]], dtype=object), pts, dims)[..., 0]
            want = pts[:, dims.index(dims.v(i, A))]
            err = np.abs(got - want)
            worst = max(worst, float(err.max()))
            bad = np.flatnonzero(err > tol * (1.0 + np.abs(want)))
            if bad.size:
                at = int(bad[0])
                return CheckResult(
                    "is_sopde",
                    False,
                    worst,
                    f"q-part of X_{A} component {i} differs from v{i}_{A} at probe {at} {pts[at].tolist()}",
                )
    return CheckResult("is_sopde", True, worst)


def connection_from_sopde(s: Sopde) -> Connection:
    """``(N_xi)^i_{Bj} = -1/(k+1) sum_A d(xi_A)^i_B / dv^j_A``."""
    dims = s.dims
    n, k = dims.n, dims.k
    scale = Const(float(k + 1))
    N = np.empty((n, k, n), dtype=object)
    for i, B, j in np.ndindex(n, k, n):
        acc = ZERO
        for A in range(k):
            acc = add(acc, diff(s.xi[A, i, B], dims.v(j + 1, A + 1)))
        N[i, B, j] = div(neg(acc), scale)
    return Connection(dims, N)


def horizontal_projector_from_sopde(s: Sopde) -> Tensor11Field:
    """``h_xi = 1/(k+1) (1 - sum_A L_{xi_A} J^A)`` through Lie derivatives.

    Independent of :func:`connection_from_sopde`; the two agree through
    :func:`~ksopde.connection.horizontal_projector`.
    """
    dims = s.dims
    X = s.as_kvector()
    total = identity_entries(dims)
    for A in range(1, dims.k + 1):
        L = lie_derivative(X.component(A), ktangent(A, dims))
        total = np.vectorize(sub, otypes=[object])(total, L.entries)
    scale = Const(float(dims.k + 1))
    return Tensor11Field(dims, np.vectorize(lambda e: div(e, scale), otypes=[object])(total))


def sopde_from_connection(c: Connection) -> Sopde:
    """``(xi_A)^j_B = -N^j_{Bi} v^i_A``."""
    dims = c.dims
    n, k = dims.n, dims.k
    xi = np.empty((k, n, k), dtype=object)
    for A, j, B in np.ndindex(k, n, k):
        acc = ZERO
        for i in range(n):
            acc = sub(acc, mul(c.N[j, B, i], dims.v(i + 1, A + 1)))
        xi[A, j, B] = acc
    return Sopde(dims, xi)


def fixed_point_residuals(s: Sopde, points) -> np.ndarray:
    """Signed residuals of ``xi = xi_{H_xi}`` at ``points``, shape ``(..., k, n, k)``.

    Entry ``[A, j, B]`` is ``(xi_A)^j_B - 1/(k+1) sum_{C,i} d(xi_C)^j_B/dv^i_C v^i_A``.
    """
    back = sopde_from_connection(connection_from_sopde(s))
    return s.evaluate(points) - back.evaluate(points)


def check_sopde_fixed_point(s: Sopde, probes=None, *, seed: int = 0, tol: float = 1e-10) -> CheckResult:
    pts = _probes(s.dims, probes, seed)
    res = np.abs(fixed_point_residuals(s, pts))
    worst = float(res.max()) if res.size else 0.0
    detail = ""
    if worst > tol:
        at, A, j, B = np.unravel_index(int(np.argmax(res)), res.shape)
        detail = f"worst (xi_{A + 1})^{j + 1}_{B + 1} at probe {at}"
    return CheckResult("sopde_fixed_point", worst <= tol, worst, detail)


def check_connection_fixed_point(c: Connection, probes=None, *, seed: int = 0, tol: float = 1e-10) -> CheckResult:
    """Check ``N^j_{Bi} = v^l_A dN^j_{Bl}/dv^i_A`` at the probes."""
    dims = c.dims
    n, k = dims.n, dims.k
    pts = _probes(dims, probes, seed)
    rhs = np.empty((n, k, n), dtype=object)
    for j, B, i in np.ndindex(n, k, n):
        acc = ZERO
        for l in range(n):
            for A in range(k):
                acc = add(acc, mul(dims.v(l + 1, A + 1), diff(c.N[j, B, l], dims.v(i + 1, A + 1))))
        rhs[j, B, i] = acc
    res = np.abs(c.evaluate(pts) - evaluate_array(rhs, pts, dims))
    worst = float(res.max()) if res.size else 0.0
    detail = ""
    if worst > tol:
        at, j, B, i = np.unravel_index(int(np.argmax(res)), res.shape)
        detail = f"worst N^{j + 1}_{{{B + 1},{i + 1}}} at probe {at}"
    return CheckResult("connection_fixed_point", worst <= tol, worst, detail)


def integrability_symmetry(s: Sopde, probes=None, *, seed: int = 0, tol: float = 1e-12) -> CheckResult:
    """Necessary condition for integrability: ``(xi_A)^i_B = (xi_B)^i_A``."""
    pts = _probes(s.dims, probes, seed)
    vals = s.evaluate(pts)  # (N, A, i, B)
    res = np.abs(vals - np.swapaxes(vals, -1, -3))
    scale = 1.0 + np.abs(vals)
    worst = float(res.max()) if res.size else 0.0
    bad = res > tol * scale
    if bad.any():
        at, A, i, B = np.unravel_index(int(np.argmax(np.where(bad, res, -1.0))), res.shape)
        return CheckResult(
            "integrability_symmetry",
            False,
            worst,
            f"(xi_{A + 1})^{i + 1}_{B + 1} != (xi_{B + 1})^{i + 1}_{A + 1} at probe {at} {pts[at].tolist()}",
        )
    return CheckResult("integrability_symmetry", True, worst)


def linearize(s: Sopde, probes=None, *, seed: int = 0, tol: float = 1e-10) -> LinearSopde | NotLinear:
    """Read off affine coefficients by interpolation and verify them on the probes.

    The constant term is the value at the origin; each linear coefficient is
    the value at a unit coordinate point minus the constant term.
    """
    dims = s.dims
    n, k, D = dims.n, dims.k, dims.dim
    try:
        basis = s.evaluate(np.vstack([np.zeros(D), np.eye(D)]))  # (1+D, A, j, B)
    except ZeroDivisionError as exc:
        return NotLinear(float("inf"), f"not defined at interpolation nodes: {exc}")
    C0 = basis[0]
    slopes = basis[1:] - C0  # (D, A, j, B)
    Ccoef = np.transpose(C0, (1, 0, 2))
    Bcoef = np.transpose(slopes[:n], (2, 1, 3, 0))
    Acoef = np.transpose(slopes[n:].reshape(k, n, k, n, k), (3, 2, 4, 0, 1))
    lin = LinearSopde(dims, Acoef, Bcoef, Ccoef)
    pts = _probes(dims, probes, seed)
    try:
        exact = s.evaluate(pts)
    except ZeroDivisionError as exc:
        return NotLinear(float("inf"), str(exc))
    res = np.abs(exact - lin.evaluate(pts))
    worst = float(res.max()) if res.size else 0.0
    if np.any(res > tol * (1.0 + np.abs(exact))) or not np.isfinite(worst):
        at, A, j, B = np.unravel_index(int(np.nanargmax(res)), res.shape)
        return NotLinear(worst, f"(xi_{A + 1})^{j + 1}_{B + 1} is not affine (probe {at})")
    return lin


def curvature_vanishes_for_linear(s: Sopde, probes=None, *, seed: int = 0, tol: float = 1e-12) -> bool:
    """For a linearizable SOPDE, check that the curvature of its connection vanishes on the probes.

    Raises:
        PreconditionViolated: ``s`` is not linearizable.
    """
    lin = linearize(s, probes, seed=seed)
    if isinstance(lin, NotLinear):
        raise PreconditionViolated(f"SOPDE is not linearizable: {lin.detail}")
    pts = _probes(s.dims, probes, seed)
    return curvature(connection_from_sopde(s)).max_abs(pts) <= tol


def heat_sopde(kappa: float = 1.0, lam: float = 1.0) -> Sopde:
    """SOPDE on T^1_2 R whose integral sections are prolongations of heat-equation solutions.

    ``(xi_1)_1 = -kappa/lam^2 v_1``, ``(xi_1)_2 = (xi_2)_1 = -kappa/lam^2 v_2``,
    ``(xi_2)_2 = v_1 / kappa``.
    """
    if kappa == 0 or lam == 0:
        raise ValueError("kappa and lam must be nonzero")
    dims = Dims(1, 2)
    rate = Const(-kappa / lam**2)
    v1, v2 = dims.v(1, 1), dims.v(1, 2)
    xi = np.empty((2, 1, 2), dtype=object)
    xi[0, 0, 0] = mul(rate, v1)
    xi[0, 0, 1] = mul(rate, v2)
    xi[1, 0, 0] = mul(rate, v2)
    xi[1, 0, 1] = mul(Const(1.0 / kappa), v1)
    return Sopde(dims, xi)


def spray_sopde(c: float = 1.0) -> Sopde:
    """The k=1, n=1 quadratic spray ``xi = -c v^2``."""
    dims = Dims(1, 1)
    xi = np.empty((1, 1, 1), dtype=object)
    xi[0, 0, 0] = mul(Const(-c), dims.v(1, 1) ** 2)
    return Sopde(dims, xi)
