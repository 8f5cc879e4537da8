"""Chart model of T^1_k Q and its canonical objects.

Tangent vectors and (1,1)-tensor fields use one coordinate ordering
throughout: the ``q`` block first, then the velocity blocks ``A = 1..k``,
each of length ``n``. This is the same ordering as :class:`~ksopde.expr.Dims`
uses for points, so a tensor's row for ``d/dv^j_A`` sits at
``dims.index(dims.v(j, A))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expr import (
    ONE,
    ZERO,
    DimensionMismatch,
    Dims,
    Expr,
    IndexOutOfRange,
    add,
    const,
    diff,
    evaluate,
    mul,
    simplify,
    sub,
)

__all__ = [
    "BundlePoint",
    "TangentVector",
    "Tensor11Field",
    "map_i",
    "map_j",
    "map_kA",
    "liouville",
    "liouville_A",
    "ktangent",
    "apply_tensor",
    "compose",
    "lie_derivative",
    "probe_points",
    "frozen_array",
    "expr_array",
    "evaluate_array",
]


def frozen_array(values, dtype=None) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


def expr_array(values, shape: tuple[int, ...]) -> np.ndarray:
    src = np.asarray(values, dtype=object)
    if src.shape != shape:
        raise DimensionMismatch(f"expected component array of shape {shape}, got {src.shape}")
    out = np.empty(shape, dtype=object)
    for idx in np.ndindex(shape):
        e = src[idx]
        out[idx] = simplify(e) if isinstance(e, Expr) else const(e)
    out.flags.writeable = False
    return out


def evaluate_array(exprs: np.ndarray, p, dims: Dims) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = np.empty(p.shape[:-1] + exprs.shape)
    for idx in np.ndindex(exprs.shape):
        out[(...,) + idx] = evaluate(exprs[idx], p, dims)
    return out


def probe_points(dims: Dims, count: int = 32, seed: int = 0, box: float = 2.0) -> np.ndarray:
    """``count`` points drawn uniformly from ``[-box, box]^dim``, shape ``(count, dim)``."""
    rng = np.random.default_rng(seed)
    return rng.uniform(-box, box, size=(count, dims.dim))


def _check_index(A: int, dims: Dims):
    if not 1 <= A <= dims.k:
        raise IndexOutOfRange(f"velocity slot {A} outside 1..{dims.k}")


@dataclass(frozen=True, eq=False)
class BundlePoint:
    """A point ``(q, v)`` of T^1_k Q; column ``A-1`` of ``v`` is velocity slot ``A``."""

    dims: Dims
    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim == 0:
            q = q.reshape(1)
        v = np.asarray(self.v, dtype=float)
        if v.ndim == 1 and self.dims.k == 1:
            v = v.reshape(-1, 1)
        if q.shape != (self.dims.n,) or v.shape != (self.dims.n, self.dims.k):
            raise DimensionMismatch(
                f"point needs q of shape ({self.dims.n},) and v of shape ({self.dims.n}, {self.dims.k}); "
                f"got {q.shape} and {v.shape}"
            )
        object.__setattr__(self, "q", frozen_array(q, float))
        object.__setattr__(self, "v", frozen_array(v, float))

    @classmethod
    def from_coords(cls, dims: Dims, coords) -> "BundlePoint":
        coords = np.asarray(coords, dtype=float)
        if coords.shape != (dims.dim,):
            raise DimensionMismatch(f"expected {dims.dim} coordinates, got shape {coords.shape}")
        return cls(dims, coords[: dims.n], coords[dims.n :].reshape(dims.k, dims.n).T)

    @property
    def coords(self) -> np.ndarray:
        return np.concatenate([self.q, self.v.T.reshape(-1)])

    def __eq__(self, other):
        return (
            isinstance(other, BundlePoint)
            and self.dims == other.dims
            and np.array_equal(self.q, other.q)
            and np.array_equal(self.v, other.v)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class TangentVector:
    """``Z^i d/dq^i + Zv[i, A] d/dv^i_A`` attached to ``base``."""

    base: BundlePoint
    Z: np.ndarray
    Zv: np.ndarray

    def __post_init__(self):
        n, k = self.base.dims.n, self.base.dims.k
        Z = np.asarray(self.Z, dtype=float).reshape(-1)
        Zv = np.asarray(self.Zv, dtype=float)
        if Zv.ndim == 1 and k == 1:
            Zv = Zv.reshape(-1, 1)
        if Z.shape != (n,) or Zv.shape != (n, k):
            raise DimensionMismatch(f"tangent vector needs Z ({n},) and Zv ({n}, {k}); got {Z.shape}, {Zv.shape}")
        object.__setattr__(self, "Z", frozen_array(Z, float))
        object.__setattr__(self, "Zv", frozen_array(Zv, float))

    @property
    def dims(self) -> Dims:
        return self.base.dims

    @classmethod
    def from_array(cls, base: BundlePoint, arr) -> "TangentVector":
        dims = base.dims
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (dims.dim,):
            raise DimensionMismatch(f"expected {dims.dim} components, got shape {arr.shape}")
        return cls(base, arr[: dims.n], arr[dims.n :].reshape(dims.k, dims.n).T)

    @property
    def array(self) -> np.ndarray:
        return np.concatenate([self.Z, self.Zv.T.reshape(-1)])

    def is_vertical(self) -> bool:
        return not np.any(self.Z)

    def __add__(self, other: "TangentVector") -> "TangentVector":
        if other.base != self.base:
            raise DimensionMismatch("cannot add tangent vectors at different points")
        return TangentVector(self.base, self.Z + other.Z, self.Zv + other.Zv)

    def __rmul__(self, scalar: float) -> "TangentVector":
        return TangentVector(self.base, scalar * self.Z, scalar * self.Zv)

    def __eq__(self, other):
        return (
            isinstance(other, TangentVector)
            and self.base == other.base
            and np.array_equal(self.Z, other.Z)
            and np.array_equal(self.Zv, other.Zv)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Tensor11Field:
    """A (1,1)-tensor field whose entries are expressions in the chart coordinates.

    ``entries[a, b]`` is the coefficient of ``d/dx^a (x) dx^b``; applying the
    field to a tangent vector is a matrix-vector product in the fixed
    coordinate ordering.
    """

    dims: Dims
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        D = self.dims.dim
        object.__setattr__(self, "entries", expr_array(self.entries, (D, D)))

    @classmethod
    def identity(cls, dims: Dims) -> "Tensor11Field":
        return cls.constant(dims, np.eye(dims.dim))

    @classmethod
    def constant(cls, dims: Dims, matrix) -> "Tensor11Field":
        matrix = np.asarray(matrix, dtype=float)
        return cls(dims, np.vectorize(const, otypes=[object])(matrix))

    def matrix(self, p) -> np.ndarray:
        """Numeric matrix at ``p`` (shape ``(..., dim)``); result shape ``(..., dim, dim)``."""
        return evaluate_array(self.entries, p, self.dims)

    def __matmul__(self, other: "Tensor11Field") -> "Tensor11Field":
        return compose(self, other)


def map_i(p: BundlePoint, w) -> TangentVector:
    """Vertical lift: ``w^i_A d/dv^i_A`` at ``p``."""
    w = np.asarray(w, dtype=float)
    if w.ndim == 1 and p.dims.k == 1:
        w = w.reshape(-1, 1)
    if w.shape != (p.dims.n, p.dims.k):
        raise DimensionMismatch(f"w must have shape ({p.dims.n}, {p.dims.k}), got {w.shape}")
    return TangentVector(p, np.zeros(p.dims.n), w)


def map_j(Z: TangentVector) -> tuple[BundlePoint, np.ndarray]:
    """Projection onto the base: ``(p, Z^i d/dq^i)``."""
    return Z.base, Z.Z.copy()


def map_kA(A: int, u, dims: Dims) -> np.ndarray:
    """``n x k`` matrix carrying ``u`` in column ``A`` and zeros elsewhere."""
    _check_index(A, dims)
    u = np.asarray(u, dtype=float)
    if u.shape != (dims.n,):
        raise DimensionMismatch(f"u must have shape ({dims.n},), got {u.shape}")
    out = np.zeros((dims.n, dims.k))
    out[:, A - 1] = u
    return out


def liouville(p: BundlePoint) -> TangentVector:
    return TangentVector(p, np.zeros(p.dims.n), p.v)


def liouville_A(A: int, p: BundlePoint) -> TangentVector:
    _check_index(A, p.dims)
    Zv = np.zeros_like(p.v)
    Zv[:, A - 1] = p.v[:, A - 1]
    return TangentVector(p, np.zeros(p.dims.n), Zv)


def ktangent(A: int, dims: Dims) -> Tensor11Field:
    """The canonical tensor ``J^A = d/dv^i_A (x) dq^i``."""
    _check_index(A, dims)
    m = np.zeros((dims.dim, dims.dim))
    for i in range(1, dims.n + 1):
        m[dims.index(dims.v(i, A)), dims.index(dims.q(i))] = 1.0
    return Tensor11Field.constant(dims, m)


def apply_tensor(T: Tensor11Field, Z: TangentVector) -> TangentVector:
    if T.dims != Z.dims:
        raise DimensionMismatch(f"tensor dims {T.dims} do not match vector dims {Z.dims}")
    return TangentVector.from_array(Z.base, T.matrix(Z.base.coords) @ Z.array)


def compose(T: Tensor11Field, S: Tensor11Field) -> Tensor11Field:
    """Symbolic product ``T o S``."""
    if T.dims != S.dims:
        raise DimensionMismatch(f"cannot compose tensors with dims {T.dims} and {S.dims}")
    D = T.dims.dim
    out = np.empty((D, D), dtype=object)
    for a in range(D):
        for b in range(D):
            acc = ZERO
            for c in range(D):
                acc = add(acc, mul(T.entries[a, c], S.entries[c, b]))
            out[a, b] = acc
    return Tensor11Field(T.dims, out)


def lie_derivative(X: Sequence[Expr], T: Tensor11Field) -> Tensor11Field:
    """Lie derivative of the (1,1)-tensor ``T`` along the vector field ``X``.

    ``X`` lists the components in coordinate order. In coordinates
    ``(L_X T)^a_b = X^c d_c T^a_b - T^c_b d_c X^a + T^a_c d_b X^c``.
    """
    dims = T.dims
    D = dims.dim
    if len(X) != D:
        raise DimensionMismatch(f"vector field needs {D} components, got {len(X)}")
    coords = dims.coordinates()
    dX = [[diff(X[a], coords[c]) for c in range(D)] for a in range(D)]
    out = np.empty((D, D), dtype=object)
    for a in range(D):
        for b in range(D):
            acc = ZERO
            for c in range(D):
                acc = add(acc, mul(X[c], diff(T.entries[a, b], coords[c])))
                acc = sub(acc, mul(T.entries[c, b], dX[a][c]))
                acc = add(acc, mul(T.entries[a, c], dX[c][b]))
            out[a, b] = acc
    return Tensor11Field(dims, out)


def identity_entries(dims: Dims) -> np.ndarray:
    D = dims.dim
    out = np.full((D, D), ZERO, dtype=object)
    for a in range(D):
        out[a, a] = ONE
    return out
