"""Random generators shared by the test modules."""

import numpy as np

from ksopde.bundle import probe_points
from ksopde.connection import Connection
from ksopde.expr import (
    Add,
    Const,
    Cos,
    Dims,
    Div,
    Exp,
    Mul,
    Neg,
    Pow,
    Sin,
    Sub,
    evaluate,
)
from ksopde.sopde import LinearSopde


def random_dims(rng, max_n=3, max_k=3) -> Dims:
    return Dims(int(rng.integers(1, max_n + 1)), int(rng.integers(1, max_k + 1)))


def random_polynomial(rng, dims: Dims, degree: int = 2, terms: int = 4):
    """Sum of ``terms`` random monomials of total degree at most ``degree``, coefficients in [-1, 1]."""
    coords = dims.coordinates()
    acc = Const(0.0)
    for _ in range(terms):
        mono = Const(float(rng.uniform(-1, 1)))
        for _ in range(int(rng.integers(0, degree + 1))):
            mono = mono * coords[int(rng.integers(len(coords)))]
        acc = acc + mono
    return acc


def random_connection(rng, dims: Dims | None = None, degree: int = 2) -> Connection:
    dims = dims or random_dims(rng)
    N = np.empty((dims.n, dims.k, dims.n), dtype=object)
    for idx in np.ndindex(N.shape):
        N[idx] = random_polynomial(rng, dims, degree, terms=int(rng.integers(1, 4)))
    return Connection(dims, N)


def random_linear_sopde(rng, dims: Dims) -> LinearSopde:
    n, k = dims.n, dims.k
    return LinearSopde(
        dims,
        rng.uniform(-1, 1, (n, k, k, k, n)),
        rng.uniform(-1, 1, (n, k, k, n)),
        rng.uniform(-1, 1, (n, k, k)),
    )


_UNARY = (Neg, Sin, Cos, Exp)
_BINARY = (Add, Sub, Mul, Div)


def random_tree(rng, dims: Dims, depth: int):
    """Raw (unsimplified) random expression tree."""
    coords = dims.coordinates()
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.6:
            return coords[int(rng.integers(len(coords)))]
        return Const(float(np.round(rng.uniform(0.1, 3.0), 3)))
    r = rng.random()
    if r < 0.3:
        return _UNARY[int(rng.integers(4))](random_tree(rng, dims, depth - 1))
    if r < 0.4:
        return Pow(random_tree(rng, dims, depth - 1), int(rng.integers(-2, 4)))
    op = _BINARY[int(rng.integers(4))]
    return op(random_tree(rng, dims, depth - 1), random_tree(rng, dims, depth - 1))


def _tame(e, p, dims, bound) -> bool:
    """Every subtree value is finite and moderate; denominators and negative-power bases stay away from zero."""
    try:
        value = float(evaluate(e, p, dims))
    except (ZeroDivisionError, OverflowError, FloatingPointError):
        return False
    if not np.isfinite(value) or abs(value) > bound:
        return False
    if isinstance(e, Div) and abs(float(evaluate(e.right, p, dims))) < 0.3:
        return False
    if isinstance(e, Pow) and e.exponent < 0 and abs(float(evaluate(e.base, p, dims))) < 0.3:
        return False
    if isinstance(e, Exp) and abs(float(evaluate(e.arg, p, dims))) > 5:
        return False
    return all(_tame(c, p, dims, bound) for c in e.children())


def random_expression(rng, dims: Dims, p, depth: int = 4, bound: float = 1e3):
    """Random tree that is well conditioned at ``p`` (rejection sampling)."""
    with np.errstate(all="raise"):
        while True:
            e = random_tree(rng, dims, depth)
            if _tame(e, p, dims, bound):
                return e


def probes(dims: Dims, count: int = 32, seed: int = 0):
    return probe_points(dims, count, seed)
