"""Nonlinear connections on T^1_k Q -> Q, stored by their components ``N^j_{Ai}``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bundle import (
    BundlePoint,
    TangentVector,
    Tensor11Field,
    evaluate_array,
    expr_array,
    identity_entries,
    ktangent,
    probe_points,
)
from .expr import (
    ONE,
    ZERO,
    Const,
    DimensionMismatch,
    Dims,
    Expr,
    VarKind,
    add,
    as_expr,
    diff,
    evaluate,
    mul,
    neg,
    sub,
    variables,
)

__all__ = [
    "Connection",
    "Curvature",
    "NotAConnectionTensor",
    "VelocityDependence",
    "horizontal_map",
    "horizontal_projector",
    "vertical_projector",
    "almost_product",
    "connection_from_gamma",
    "horizontal_lift",
    "curvature",
]


class NotAConnectionTensor(ValueError):
    pass


class VelocityDependence(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Connection:
    """Components ``N[j-1, A-1, i-1] = N^j_{Ai}``, functions on T^1_k Q.

    The horizontal lift of ``d/dq^i`` is ``d/dq^i - N^j_{Ai} d/dv^j_A``.
    """

    dims: Dims
    N: np.ndarray = field(repr=False)

    def __post_init__(self):
        n, k = self.dims.n, self.dims.k
        object.__setattr__(self, "N", expr_array(self.N, (n, k, n)))

    @classmethod
    def zero(cls, dims: Dims) -> "Connection":
        return cls(dims, np.full((dims.n, dims.k, dims.n), ZERO, dtype=object))

    def component(self, j: int, A: int, i: int) -> Expr:
        """``N^j_{Ai}`` with 1-based indices."""
        return self.N[j - 1, A - 1, i - 1]

    def evaluate(self, p) -> np.ndarray:
        """Numeric components at ``p`` (shape ``(..., dim)``), result ``(..., n, k, n)``."""
        return evaluate_array(self.N, p, self.dims)


@dataclass(frozen=True, eq=False)
class Curvature:
    """``Omega[j-1, A-1, i-1, l-1]``: coefficient of ``d/dv^j_A (x) dq^i ^ dq^l``."""

    dims: Dims
    Omega: np.ndarray = field(repr=False)

    def evaluate(self, p) -> np.ndarray:
        return evaluate_array(self.Omega, p, self.dims)

    def max_abs(self, points) -> float:
        values = self.evaluate(points)
        return float(np.max(np.abs(values))) if values.size else 0.0


def horizontal_map(c: Connection, p: BundlePoint, u) -> TangentVector:
    """``H(p, u) = u^i (d/dq^i - N^j_{Ai}(p) d/dv^j_A)``."""
    if p.dims != c.dims:
        raise DimensionMismatch(f"point dims {p.dims} do not match connection dims {c.dims}")
    u = np.asarray(u, dtype=float)
    if u.shape != (c.dims.n,):
        raise DimensionMismatch(f"u must have shape ({c.dims.n},), got {u.shape}")
    N = c.evaluate(p.coords)
    return TangentVector(p, u, -np.einsum("jai,i->ja", N, u))


def _row(dims: Dims, j: int, A: int) -> int:
    return dims.n * (A + 1) + j


def horizontal_projector(c: Connection) -> Tensor11Field:
    dims = c.dims
    D = dims.dim
    h = np.full((D, D), ZERO, dtype=object)
    for i in range(dims.n):
        h[i, i] = ONE
        for A in range(dims.k):
            for j in range(dims.n):
                h[_row(dims, j, A), i] = neg(c.N[j, A, i])
    return Tensor11Field(dims, h)


def vertical_projector(c: Connection) -> Tensor11Field:
    dims = c.dims
    v = identity_entries(dims)
    for i in range(dims.n):
        v[i, i] = ZERO
        for A in range(dims.k):
            for j in range(dims.n):
                v[_row(dims, j, A), i] = c.N[j, A, i]
    return Tensor11Field(dims, v)


def almost_product(c: Connection) -> Tensor11Field:
    """``Gamma = 2h - 1``: identity on the q block, ``-1`` on the velocity blocks."""
    dims = c.dims
    G = identity_entries(dims)
    minus_two = Const(-2.0)
    for b in range(dims.n, dims.dim):
        G[b, b] = Const(-1.0)
    for i in range(dims.n):
        for A in range(dims.k):
            for j in range(dims.n):
                G[_row(dims, j, A), i] = mul(minus_two, c.N[j, A, i])
    return Tensor11Field(dims, G)


def connection_from_gamma(
    G: Tensor11Field,
    probes: np.ndarray | None = None,
    *,
    count: int = 32,
    seed: int = 0,
    tol: float = 1e-12,
) -> Connection:
    """Recover the connection of an almost product structure ``G``.

    ``G`` must satisfy ``J^A G = J^A`` and ``G J^A = -J^A`` for every ``A``;
    this is checked numerically at ``probes`` (random points when omitted).

    Raises:
        NotAConnectionTensor: naming the failing identity, slot and probe.
    """
    dims = G.dims
    if probes is None:
        probes = probe_points(dims, count, seed)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    Gm = G.matrix(probes)
    scale = max(1.0, float(np.max(np.abs(Gm))))
    for A in range(1, dims.k + 1):
        J = ktangent(A, dims).matrix(probes[0])
        checks = (
            (f"J^{A} o G = J^{A}", J @ Gm - J),
            (f"G o J^{A} = -J^{A}", Gm @ J + J),
        )
        for name, residual in checks:
            worst = np.max(np.abs(residual), axis=(-2, -1))
            bad = np.flatnonzero(worst > tol * scale)
            if bad.size:
                at = int(bad[0])
                raise NotAConnectionTensor(
                    f"identity {name} fails at probe {at} ({probes[at].tolist()}): residual {worst[at]:.3e}"
                )
    half = Const(-0.5)
    N = np.empty((dims.n, dims.k, dims.n), dtype=object)
    for j in range(dims.n):
        for A in range(dims.k):
            for i in range(dims.n):
                N[j, A, i] = mul(half, G.entries[_row(dims, j, A), i])
    return Connection(dims, N)


def horizontal_lift(c: Connection, X: Sequence[Expr], p: BundlePoint) -> TangentVector:
    """Value at ``p`` of the horizontal lift of the base vector field ``X``."""
    if len(X) != c.dims.n:
        raise DimensionMismatch(f"vector field on Q needs {c.dims.n} components, got {len(X)}")
    X = [as_expr(x) for x in X]
    for comp in X:
        moving = sorted(v.name for v in variables(comp) if v.kind is VarKind.VELOCITY)
        if moving:
            raise VelocityDependence(f"base vector field depends on {', '.join(moving)}")
    u = np.array([evaluate(comp, p.coords, c.dims) for comp in X], dtype=float)
    return horizontal_map(c, p, u)


def curvature(c: Connection) -> Curvature:
    """Symbolic curvature of the horizontal map.

    ``Omega^j_{A,il} = 1/2 (d_{q^i} N^j_{Al} - d_{q^l} N^j_{Ai}
    + N^m_{Bl} d_{v^m_B} N^j_{Ai} - N^m_{Bi} d_{v^m_B} N^j_{Al})``,
    built for ``i < l`` and negated for ``i > l`` so antisymmetry is exact.
    """
    dims = c.dims
    n, k = dims.n, dims.k
    qs = dims.base_vars()
    dq = np.empty((n, k, n, n), dtype=object)  # dq[j, A, i, m] = d N^j_{Ai} / d q^m
    dv = np.empty((n, k, n, n, k), dtype=object)  # dv[j, A, i, m, B] = d N^j_{Ai} / d v^m_B
    for j, A, i in np.ndindex(n, k, n):
        e = c.N[j, A, i]
        for m in range(n):
            dq[j, A, i, m] = diff(e, qs[m])
            for B in range(k):
                dv[j, A, i, m, B] = diff(e, dims.v(m + 1, B + 1))
    half = Const(0.5)
    Omega = np.full((n, k, n, n), ZERO, dtype=object)
    for j, A in np.ndindex(n, k):
        for i in range(n):
            for l in range(i + 1, n):
                acc = sub(dq[j, A, l, i], dq[j, A, i, l])
                for m in range(n):
                    for B in range(k):
                        acc = add(acc, mul(c.N[m, B, l], dv[j, A, i, m, B]))
                        acc = sub(acc, mul(c.N[m, B, i], dv[j, A, l, m, B]))
                term = mul(half, acc)
                Omega[j, A, i, l] = term
                Omega[j, A, l, i] = neg(term)
    Omega.flags.writeable = False
    return Curvature(dims, Omega)
