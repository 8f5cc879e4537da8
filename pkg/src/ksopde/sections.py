"""Sampled maps ``phi: R^k -> Q``, their first prolongations, and integral-section checks.

For ``k >= 2`` integral sections are only verified, never solved for: a
candidate ``phi`` is sampled on a uniform grid and the second-order system
``d2 phi^i / dt^A dt^B = (xi_A)^i_B(phi, dphi/dt)`` is checked with central
differences on interior nodes. For ``k = 1`` the SOPDE is an ODE and
:func:`integrate_k1` integrates it with classical RK4.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bundle import BundlePoint
from .expr import DimensionMismatch
from .sopde import Sopde

__all__ = [
    "Axis",
    "GridMap",
    "Prolongation",
    "SectionResidual",
    "GridTooSmall",
    "GridSchemaError",
    "NonFiniteState",
    "InvalidParameter",
    "HeatSolution",
    "prolong",
    "second_differences",
    "section_residual",
    "integrate_k1",
    "heat_solution",
    "write_csv",
    "read_csv",
]

MIN_NODES = 5
BLOWUP = 1e12


class GridTooSmall(ValueError):
    pass


class GridSchemaError(ValueError):
    pass


class NonFiniteState(ArithmeticError):
    pass


class InvalidParameter(ValueError):
    pass


@dataclass(frozen=True)
class Axis:
    """Uniform grid ``linspace(start, stop, count)``."""

    start: float
    stop: float
    count: int

    @property
    def step(self) -> float:
        return (self.stop - self.start) / (self.count - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True, eq=False)
class GridMap:
    """Samples of ``phi`` on a tensor grid; ``values`` has shape ``(*counts, n)``."""

    axes: tuple[Axis, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        axes = tuple(a if isinstance(a, Axis) else Axis(*a) for a in self.axes)
        if not axes:
            raise DimensionMismatch("a grid needs at least one axis")
        for a in axes:
            if a.count < 2 or not a.stop > a.start:
                raise GridSchemaError(f"axis {a} is degenerate")
        values = np.array(self.values, dtype=float)
        counts = tuple(a.count for a in axes)
        if values.shape == counts:
            values = values[..., None]
        if values.ndim != len(counts) + 1 or values.shape[:-1] != counts:
            raise DimensionMismatch(f"values of shape {values.shape} do not fit a grid of shape {counts}")
        values.flags.writeable = False
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @property
    def k(self) -> int:
        return len(self.axes)

    @property
    def n(self) -> int:
        return self.values.shape[-1]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.count for a in self.axes)

    @property
    def steps(self) -> tuple[float, ...]:
        return tuple(a.step for a in self.axes)

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*(a.nodes for a in self.axes), indexing="ij")

    @classmethod
    def from_function(cls, f: Callable, axes: Sequence) -> "GridMap":
        """Sample ``f(t1, ..., tk)``; ``f`` returns an array with shape ``grid`` or ``(*grid, n)``."""
        axes = tuple(a if isinstance(a, Axis) else Axis(*a) for a in axes)
        mesh = np.meshgrid(*(a.nodes for a in axes), indexing="ij")
        return cls(axes, np.asarray(f(*mesh), dtype=float))


@dataclass(frozen=True, eq=False)
class Prolongation:
    """First prolongation ``(phi, dphi^i/dt^A)`` of a grid map.

    ``velocities`` has shape ``(*counts, n, k)``. When obtained by finite
    differences, nodes on the grid boundary hold NaN.
    """

    base: GridMap
    velocities: np.ndarray = field(repr=False)

    def points(self) -> np.ndarray:
        """Bundle coordinates ``(q, v_1, ..., v_k)`` at every node, shape ``(*counts, n + n k)``."""
        vel = np.swapaxes(self.velocities, -1, -2)  # (..., k, n)
        return np.concatenate([self.base.values, vel.reshape(vel.shape[:-2] + (-1,))], axis=-1)


@dataclass(frozen=True, eq=False)
class SectionResidual:
    """Outcome of :func:`section_residual`.

    ``worst`` maps 1-based ``(A, B)`` to ``(residual, node index, node t-coordinates)``;
    ``residuals`` has shape ``(*interior, k, n, k)`` indexed ``[..., A, i, B]``.
    """

    max_residual: float
    worst: dict = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    max_step: float = 0.0


def _interior(k: int) -> tuple[slice, ...]:
    return (slice(1, -1),) * k


def _shifted(values: np.ndarray, offsets: dict[int, int]) -> np.ndarray:
    """Interior view of ``values`` shifted by ``offsets[axis]`` nodes along each axis."""
    k = values.ndim - 1
    index = []
    for axis in range(k):
        d = offsets.get(axis, 0)
        index.append(slice(1 + d, values.shape[axis] - 1 + d))
    return values[tuple(index)]


def _check_grid(g: GridMap):
    small = [a.count for a in g.axes if a.count < MIN_NODES]
    if small:
        raise GridTooSmall(f"every axis needs at least {MIN_NODES} nodes, got counts {g.shape}")


def prolong(g: GridMap) -> Prolongation:
    """Central-difference prolongation; boundary nodes are NaN."""
    _check_grid(g)
    vel = np.full(g.values.shape + (g.k,), np.nan)
    inner = _interior(g.k)
    for A, h in enumerate(g.steps):
        vel[inner + (slice(None), A)] = (_shifted(g.values, {A: 1}) - _shifted(g.values, {A: -1})) / (2 * h)
    return Prolongation(g, vel)


def second_differences(g: GridMap) -> np.ndarray:
    """Central second differences at interior nodes, shape ``(*interior, k, n, k)`` as ``[..., A, i, B]``.

    Diagonal entries use the 3-point stencil, mixed ones the 4-point cross stencil.
    """
    _check_grid(g)
    k = g.k
    h = g.steps
    f = g.values
    out = np.empty(tuple(c - 2 for c in g.shape) + (k, g.n, k))
    centre = _shifted(f, {})
    for A in range(k):
        out[..., A, :, A] = (_shifted(f, {A: 1}) - 2 * centre + _shifted(f, {A: -1})) / h[A] ** 2
        for B in range(A + 1, k):
            cross = (
                _shifted(f, {A: 1, B: 1})
                - _shifted(f, {A: 1, B: -1})
                - _shifted(f, {A: -1, B: 1})
                + _shifted(f, {A: -1, B: -1})
            ) / (4 * h[A] * h[B])
            out[..., A, :, B] = cross
            out[..., B, :, A] = cross
    return out


def section_residual(s: Sopde, g: GridMap) -> SectionResidual:
    """Compare second differences of ``phi`` with the SOPDE evaluated on the prolongation."""
    if (g.n, g.k) != (s.dims.n, s.dims.k):
        raise DimensionMismatch(f"grid map R^{g.k} -> R^{g.n} does not match SOPDE dims {s.dims}")
    _check_grid(g)
    points = prolong(g).points()[_interior(g.k)]
    residuals = np.abs(second_differences(g) - s.evaluate(points))
    worst = {}
    mesh = g.mesh()
    for A in range(g.k):
        for B in range(g.k):
            block = residuals[..., A, :, B].max(axis=-1)
            node = np.unravel_index(int(np.argmax(block)), block.shape)
            full = tuple(int(i) + 1 for i in node)
            worst[(A + 1, B + 1)] = (float(block[node]), full, tuple(float(m[full]) for m in mesh))
    return SectionResidual(float(residuals.max()), worst, residuals, max(g.steps))


def integrate_k1(s: Sopde, start: BundlePoint, t_end: float, steps: int) -> tuple[GridMap, Prolongation]:
    """Integrate ``q' = v, v' = xi(q, v)`` from ``t = 0`` with classical RK4.

    Returns the sampled curve and its prolongation; the velocities are the
    integrator state, not finite differences.

    Raises:
        NonFiniteState: a coordinate exceeds 1e12 in magnitude or is not finite.
    """
    dims = s.dims
    if dims.k != 1:
        raise DimensionMismatch(f"integrate_k1 needs k = 1, got k = {dims.k}")
    if start.dims != dims:
        raise DimensionMismatch(f"start point dims {start.dims} do not match {dims}")
    if steps < 1 or not t_end > 0:
        raise ValueError("need steps >= 1 and t_end > 0")
    n = dims.n
    dt = t_end / steps

    def rhs(y: np.ndarray) -> np.ndarray:
        return np.concatenate([y[n:], s.evaluate(y)[0, :, 0]])

    states = np.empty((steps + 1, 2 * n))
    y = start.coords.copy()
    states[0] = y
    for step in range(1, steps + 1):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > BLOWUP:
            raise NonFiniteState(f"state left the finite region at t = {step * dt:g}: {y.tolist()}")
        states[step] = y
    grid = GridMap((Axis(0.0, float(t_end), steps + 1),), states[:, :n])
    return grid, Prolongation(grid, states[:, n:, None])


@dataclass(frozen=True)
class HeatSolution:
    """``phi(t, x) = amplitude * exp(-kappa t / lam^2) * sin(x / lam + delta)``."""

    amplitude: float
    delta: float
    kappa: float
    lam: float

    def __call__(self, t, x):
        rate = self.kappa / self.lam**2
        return self.amplitude * np.exp(-rate * np.asarray(t)) * np.sin(np.asarray(x) / self.lam + self.delta)

    def sample(self, t_axis, x_axis) -> GridMap:
        return GridMap.from_function(self, (t_axis, x_axis))


def heat_solution(amplitude: float = 1.0, delta: float = 0.0, kappa: float = 1.0, lam: float = 1.0) -> HeatSolution:
    if lam == 0 or not kappa > 0 or not all(map(math.isfinite, (amplitude, delta, kappa, lam))):
        raise InvalidParameter(f"need lam != 0 and kappa > 0 (got kappa={kappa}, lam={lam})")
    return HeatSolution(float(amplitude), float(delta), float(kappa), float(lam))


def write_csv(g: GridMap, out=None) -> str:
    """CSV with header ``t1..tk,phi1..phin``, one node per row, ``t1`` varying slowest.

    Writes to ``out`` (path or text stream) when given; always returns the text.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"t{A}" for A in range(1, g.k + 1)] + [f"phi{i}" for i in range(1, g.n + 1)])
    mesh = g.mesh()
    for idx in np.ndindex(g.shape):
        writer.writerow([repr(float(m[idx])) for m in mesh] + [repr(float(x)) for x in g.values[idx]])
    text = buf.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    return text


def read_csv(source, n: int | None = None, k: int | None = None) -> GridMap:
    """Read a grid map written by :func:`write_csv`, validating the schema.

    Raises:
        GridSchemaError: wrong header, non-uniform axes, or rows out of order.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise GridSchemaError("empty CSV")
    header = [h.strip() for h in rows[0]]
    t_cols = [h for h in header if h.startswith("t")]
    kk = len(t_cols)
    nn = len(header) - kk
    expected = [f"t{A}" for A in range(1, kk + 1)] + [f"phi{i}" for i in range(1, nn + 1)]
    if header != expected or kk == 0 or nn == 0:
        raise GridSchemaError(f"header must read t1..tk,phi1..phin; got {','.join(header)}")
    if (k is not None and kk != k) or (n is not None and nn != n):
        raise GridSchemaError(f"CSV describes R^{kk} -> R^{nn}, expected R^{k} -> R^{n}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise GridSchemaError(f"non-numeric entry: {exc}") from None
    if data.ndim != 2 or data.shape[1] != kk + nn:
        raise GridSchemaError("every row needs one value per header column")
    axes = []
    for A in range(kk):
        nodes = np.unique(data[:, A])
        if nodes.size < 2:
            raise GridSchemaError(f"axis t{A + 1} has fewer than two nodes")
        axis = Axis(float(nodes[0]), float(nodes[-1]), int(nodes.size))
        if not np.allclose(nodes, axis.nodes, rtol=1e-9, atol=1e-12 * max(1.0, abs(axis.stop))):
            raise GridSchemaError(f"axis t{A + 1} is not uniformly spaced")
        axes.append(axis)
    shape = tuple(a.count for a in axes)
    if data.shape[0] != math.prod(shape):
        raise GridSchemaError(f"expected {math.prod(shape)} rows for grid {shape}, got {data.shape[0]}")
    mesh = np.meshgrid(*(a.nodes for a in axes), indexing="ij")
    for A in range(kk):
        if not np.allclose(data[:, A], mesh[A].reshape(-1), rtol=1e-9, atol=1e-12):
            raise GridSchemaError("rows must be ordered with t1 varying slowest")
    return GridMap(tuple(axes), data[:, kk:].reshape(shape + (nn,)))
