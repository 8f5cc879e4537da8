"""Command-line front end.

Model files are flat text, one assignment per line, ``#`` starts a comment::

    n = 1
    k = 2
    const kappa = 1
    xi[1][1][1] = -kappa*v1_1
    N[1][1][1] = 2/3
    L = 0.5*v1_1^2

Constants are substituted (as parenthesized text, on word boundaries) before
expressions are parsed. Missing ``xi`` and ``N`` entries are zero.

Exit codes: 0 when every check passes, 1 when a check fails or the Hessian
is singular, 2 on unreadable input.
"""

from __future__ import annotations

import argparse
import re
import sys
from dataclasses import dataclass, field

import numpy as np

from .bundle import BundlePoint, ktangent, probe_points
from .connection import (
    Connection,
    almost_product,
    connection_from_gamma,
    curvature,
    horizontal_projector,
    vertical_projector,
)
from .expr import DimensionMismatch, Dims, ExprSyntaxError, IndexOutOfRange, UnknownVariable, parse, to_text
from .lagrangian import Lagrangian, SingularHessian, RankDeficiencyUnexpected, regularity, solve_el_coefficients
from .sections import GridSchemaError, GridTooSmall, NonFiniteState, integrate_k1, read_csv, section_residual, write_csv
from .sopde import (
    CheckResult,
    Sopde,
    check_sopde_fixed_point,
    connection_from_sopde,
    horizontal_projector_from_sopde,
    integrability_symmetry,
    is_sopde,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

_ASSIGN = re.compile(r"^\s*(?P<lhs>[^=]+?)\s*=\s*(?P<rhs>.*?)\s*$")
_XI = re.compile(r"^xi\[(\d+)\]\[(\d+)\]\[(\d+)\]$")
_N = re.compile(r"^N\[(\d+)\]\[(\d+)\]\[(\d+)\]$")
_CONST = re.compile(r"^const\s+([A-Za-z_][A-Za-z0-9_]*)$")


class ModelError(ValueError):
    """Unreadable model file; the message carries the line number."""


@dataclass
class Model:
    dims: Dims
    sopde: Sopde | None = None
    connection: Connection | None = None
    lagrangian: Lagrangian | None = None
    constants: dict = field(default_factory=dict)


def _substitute(text: str, constants: dict) -> str:
    for name in sorted(constants, key=len, reverse=True):
        text = re.sub(rf"\b{re.escape(name)}\b", f"({constants[name]})", text)
    return text


def _parse_at(text: str, dims: Dims, lineno: int, constants: dict):
    source = _substitute(text, constants)
    try:
        return parse(source, dims)
    except ExprSyntaxError as exc:
        reason = str(exc).splitlines()[0]
        pointer = " " * exc.position + "^"
        raise ModelError(f"line {lineno}, column {exc.position + 1}: {reason}\n  {source}\n  {pointer}") from None
    except (UnknownVariable, IndexOutOfRange) as exc:
        raise ModelError(f"line {lineno}: {exc}") from None


def load_model(text: str) -> Model:
    """Parse model-file text. Raises :class:`ModelError`."""
    header: dict[str, int] = {}
    constants: dict[str, str] = {}
    body = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _ASSIGN.match(line)
        if not m or not m.group("rhs"):
            raise ModelError(f"line {lineno}: expected 'name = value', got '{line}'")
        lhs, rhs = m.group("lhs").strip(), m.group("rhs")
        if lhs in ("n", "k"):
            try:
                header[lhs] = int(rhs)
            except ValueError:
                raise ModelError(f"line {lineno}: {lhs} must be an integer, got '{rhs}'") from None
        elif c := _CONST.match(lhs):
            constants[c.group(1)] = rhs
        else:
            body.append((lineno, lhs, rhs))
    for key in ("n", "k"):
        if key not in header:
            raise ModelError(f"model must set {key}")
    try:
        dims = Dims(header["n"], header["k"])
    except (ValueError, DimensionMismatch) as exc:
        raise ModelError(str(exc)) from None
    n, k = dims.n, dims.k

    xi = N = None
    L = None
    for lineno, lhs, rhs in body:
        expr = _parse_at(rhs, dims, lineno, constants)
        if m := _XI.match(lhs):
            A, i, B = (int(x) for x in m.groups())
            if not (1 <= A <= k and 1 <= i <= n and 1 <= B <= k):
                raise ModelError(f"line {lineno}: {lhs} is outside dims n={n}, k={k}")
            if xi is None:
                xi = Sopde.zero(dims).xi.copy()
            xi[A - 1, i - 1, B - 1] = expr
        elif m := _N.match(lhs):
            j, A, i = (int(x) for x in m.groups())
            if not (1 <= j <= n and 1 <= A <= k and 1 <= i <= n):
                raise ModelError(f"line {lineno}: {lhs} is outside dims n={n}, k={k}")
            if N is None:
                N = Connection.zero(dims).N.copy()
            N[j - 1, A - 1, i - 1] = expr
        elif lhs == "L":
            L = expr
        else:
            raise ModelError(f"line {lineno}: unknown key '{lhs}'")
    return Model(
        dims,
        Sopde(dims, xi) if xi is not None else None,
        Connection(dims, N) if N is not None else None,
        Lagrangian(dims, L) if L is not None else None,
        constants,
    )


class Report:
    """Accumulates report lines; output depends only on inputs and flags."""

    def __init__(self, argv: list[str], args):
        self.lines = [f"command: ksopde {' '.join(argv)}"]
        if hasattr(args, "seed"):
            self.lines.append(f"seed: {args.seed}")
            self.lines.append(f"probes: {args.probes}")
        self.results: list[CheckResult] = []

    def say(self, line: str = ""):
        self.lines.append(line)

    def check(self, result: CheckResult):
        self.results.append(result)
        status = "PASS" if result.passed else "FAIL"
        line = f"check {result.name}: {status} max_residual={result.max_residual:.6e}"
        if result.detail:
            line += f" ({result.detail})"
        self.lines.append(line)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def finish(self, code: int | None = None) -> int:
        if code is None:
            code = EXIT_OK if self.passed else EXIT_FAIL
        self.lines.append(f"status: {'PASS' if code == EXIT_OK else 'FAIL'}")
        self.lines.append(f"exit: {code}")
        return code

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _residual_check(name: str, residual: np.ndarray, tol: float) -> CheckResult:
    worst = float(np.max(np.abs(residual))) if residual.size else 0.0
    return CheckResult(name, worst <= tol, worst)


def _connection_suite(rep: Report, c: Connection, pts: np.ndarray, tol: float, label: str):
    """Projector algebra, the k-tangent identities of Gamma, and the Gamma round trip."""
    dims = c.dims
    h = horizontal_projector(c).matrix(pts)
    v = vertical_projector(c).matrix(pts)
    G = almost_product(c)
    Gm = G.matrix(pts)
    eye = np.eye(dims.dim)
    scale = max(1.0, float(np.max(np.abs(Gm))))
    t = tol * scale * scale
    rep.check(_residual_check(f"{label}h_idempotent", h @ h - h, t))
    rep.check(_residual_check(f"{label}v_idempotent", v @ v - v, t))
    rep.check(_residual_check(f"{label}hv_zero", h @ v, t))
    rep.check(_residual_check(f"{label}h_plus_v", h + v - eye, t))
    rep.check(_residual_check(f"{label}gamma_squared", Gm @ Gm - eye, t))
    worst_left = worst_right = 0.0
    for A in range(1, dims.k + 1):
        J = ktangent(A, dims).matrix(pts[0])
        worst_left = max(worst_left, float(np.max(np.abs(J @ Gm - J))))
        worst_right = max(worst_right, float(np.max(np.abs(Gm @ J + J))))
    rep.check(CheckResult(f"{label}J_gamma", worst_left <= t, worst_left))
    rep.check(CheckResult(f"{label}gamma_J", worst_right <= t, worst_right))
    back = connection_from_gamma(G, pts, tol=tol)
    rep.check(_residual_check(f"{label}gamma_round_trip", back.evaluate(pts) - c.evaluate(pts), t))


def _probes(dims: Dims, args) -> np.ndarray:
    return probe_points(dims, args.probes, args.seed)


def _need(model: Model, attr: str, what: str):
    if getattr(model, attr) is None:
        raise ModelError(f"this command needs a model with {what}")


def _fmt(x: float) -> str:
    return f"{float(x) + 0.0:.12g}"


def cmd_check(model: Model, args, rep: Report) -> int:
    if model.sopde is None and model.connection is None:
        raise ModelError("this command needs a model with xi[...] or N[...] entries")
    pts = _probes(model.dims, args)
    tol = args.tol if args.tol is not None else 1e-12
    if model.sopde is not None:
        s = model.sopde
        rep.check(is_sopde(s.as_kvector(), pts, tol=tol))
        rep.check(integrability_symmetry(s, pts, tol=tol))
        c = connection_from_sopde(s)
        _connection_suite(rep, c, pts, tol, "sopde_connection.")
        direct = horizontal_projector(c).matrix(pts)
        lie = horizontal_projector_from_sopde(s).matrix(pts)
        scale = max(1.0, float(np.max(np.abs(direct))))
        rep.check(_residual_check("lie_projector_agreement", lie - direct, 1e3 * tol * scale))
        fp = check_sopde_fixed_point(s, pts)
        rep.say(
            f"info sopde_fixed_point: {'holds' if fp.passed else 'does not hold'} "
            f"max_residual={fp.max_residual:.6e}"
        )
    if model.connection is not None:
        _connection_suite(rep, model.connection, pts, tol, "connection.")
    return rep.finish()


def cmd_connection(model: Model, args, rep: Report) -> int:
    _need(model, "sopde", "xi[...] entries")
    dims = model.dims
    c = connection_from_sopde(model.sopde)
    pts = _probes(dims, args)
    vals = c.evaluate(pts)
    for j, A, i in np.ndindex(dims.n, dims.k, dims.n):
        comp = vals[:, j, A, i]
        rep.say(
            f"N[{j + 1}][{A + 1}][{i + 1}] = {to_text(c.N[j, A, i])}"
            f"    min={_fmt(comp.min())} max={_fmt(comp.max())}"
        )
    return rep.finish(EXIT_OK)


def cmd_curvature(model: Model, args, rep: Report) -> int:
    if model.sopde is not None:
        c = connection_from_sopde(model.sopde)
        rep.say("connection: from xi")
    elif model.connection is not None:
        c = model.connection
        rep.say("connection: from N")
    else:
        raise ModelError("this command needs a model with xi[...] or N[...] entries")
    dims = c.dims
    omega = curvature(c)
    pts = _probes(dims, args)
    worst = omega.max_abs(pts)
    for j, A, i, l in np.ndindex(dims.n, dims.k, dims.n, dims.n):
        if i < l:
            rep.say(f"Omega[{j + 1}][{A + 1}][{i + 1}][{l + 1}] = {to_text(omega.Omega[j, A, i, l])}")
    tol = args.tol if args.tol is not None else 1e-12
    rep.say(f"max_abs_curvature: {worst:.6e}")
    rep.say(f"vanishes: {'yes' if worst <= tol else 'no'} (tol {tol:.1e})")
    return rep.finish(EXIT_OK)


def _parse_point(text: str | None, dims: Dims) -> np.ndarray:
    if text is None:
        return np.zeros(dims.dim)
    try:
        vals = np.array([float(x) for x in re.split(r"[,\s]+", text.strip()) if x], dtype=float)
    except ValueError:
        raise ModelError(f"--point must be {dims.dim} numbers, got '{text}'") from None
    if vals.shape != (dims.dim,):
        raise ModelError(f"--point needs {dims.dim} coordinates (q, v_1, ..., v_k), got {vals.size}")
    return vals


def cmd_el(model: Model, args, rep: Report) -> int:
    _need(model, "lagrangian", "an L entry")
    lag = model.lagrangian
    dims = lag.dims
    reg = regularity(lag, _probes(dims, args))
    rep.say(f"hessian_abs_det: min={reg.min_abs_det:.6e} max={reg.max_abs_det:.6e}")
    rep.check(CheckResult("regularity", reg.regular, reg.min_abs_det))
    point = _parse_point(args.point, dims)
    rep.say(f"point: {' '.join(_fmt(x) for x in point)}")
    try:
        sol = solve_el_coefficients(lag, point, symmetrize=args.symmetrize)
    except SingularHessian as exc:
        rep.say(f"error: {exc}")
        return rep.finish(EXIT_FAIL)
    except RankDeficiencyUnexpected as exc:
        rep.say(f"error: {exc}")
        return rep.finish(EXIT_FAIL)
    for A, i, B in np.ndindex(dims.k, dims.n, dims.k):
        rep.say(f"xi[{A + 1}][{i + 1}][{B + 1}] = {_fmt(sol.coefficients[A, i, B])}")
    rep.say(f"rank: {sol.rank}")
    tol = args.tol if args.tol is not None else 1e-10
    rep.check(CheckResult("el_residual", sol.residual <= tol, sol.residual))
    return rep.finish()


def cmd_verify_section(model: Model, args, rep: Report) -> int:
    _need(model, "sopde", "xi[...] entries")
    if args.grid is None:
        raise ModelError("verify-section needs --grid FILE")
    dims = model.dims
    g = read_csv(args.grid, n=dims.n, k=dims.k)
    res = section_residual(model.sopde, g)
    h = res.max_step
    if args.tol is None:
        tol = 10.0 * h * h
        rep.say(f"tolerance: {tol:.6e} (10 h^2 with h = {h:.6e})")
    else:
        tol = args.tol
        rep.say(f"tolerance: {tol:.6e}")
    rep.say(f"grid: {'x'.join(str(c) for c in g.shape)}")
    for (A, B), (r, node, t) in sorted(res.worst.items()):
        where = ", ".join(_fmt(x) for x in t)
        rep.say(f"worst ({A},{B}): {r:.6e} at node {list(node)} t=({where})")
    rep.check(CheckResult("section_residual", res.max_residual <= tol, res.max_residual))
    return rep.finish()


def cmd_integrate(model: Model, args, rep: Report) -> int:
    _need(model, "sopde", "xi[...] entries")
    dims = model.dims
    if dims.k != 1:
        raise ModelError(f"integrate needs k = 1, got k = {dims.k}")
    start = BundlePoint.from_coords(dims, _parse_point(args.point, dims))
    try:
        grid, _ = integrate_k1(model.sopde, start, args.t_end, args.steps)
    except NonFiniteState as exc:
        rep.say(f"error: {exc}")
        return rep.finish(EXIT_FAIL)
    if args.out is None:
        rep.lines = []
        rep.say(write_csv(grid).rstrip("\n"))
        return EXIT_OK
    write_csv(grid, args.out)
    rep.say(f"wrote {grid.shape[0]} nodes to {args.out}")
    return rep.finish(EXIT_OK)


COMMANDS = {
    "check": cmd_check,
    "connection": cmd_connection,
    "curvature": cmd_curvature,
    "el": cmd_el,
    "verify-section": cmd_verify_section,
    "integrate": cmd_integrate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ksopde",
        description="Connections, SOPDEs and k-symplectic Lagrangians on T^1_k Q.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "check": "run the invariant checks for the model's SOPDE and/or connection",
        "connection": "print the connection of the model's SOPDE",
        "curvature": "print the curvature of the model's connection",
        "el": "solve the Lagrangian field equations at a point",
        "verify-section": "check a sampled map against the model's SOPDE",
        "integrate": "integrate a k=1 SOPDE with RK4 and emit the curve as CSV",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("model", help="model file")
        p.add_argument("--probes", type=int, default=32, help="number of random probe points (default 32)")
        p.add_argument("--seed", type=int, default=0, help="probe RNG seed (default 0)")
        p.add_argument("--tol", type=float, default=None, help="override the check tolerance")
        p.add_argument("--point", default=None, help="coordinates q, v_1, ..., v_k (comma or space separated)")
        p.add_argument("--out", default=None, help="output file")
        if name == "el":
            p.add_argument("--symmetrize", action="store_true", help="impose (xi_A)^i_B = (xi_B)^i_A")
        if name == "verify-section":
            p.add_argument("--grid", default=None, help="grid map CSV (t1..tk,phi1..phin)")
        if name == "integrate":
            p.add_argument("--t-end", type=float, default=1.0, help="final time (default 1)")
            p.add_argument("--steps", type=int, default=100, help="RK4 steps (default 100)")
    return parser


def run(argv: list[str]) -> tuple[int, str, str]:
    """Run the CLI; returns ``(exit code, stdout text, stderr text)``."""
    args = build_parser().parse_args(argv)
    if args.probes < 1:
        return EXIT_INPUT, "", "error: --probes must be positive\n"
    rep = Report(argv, args)
    try:
        try:
            with open(args.model, encoding="utf-8") as fh:
                model = load_model(fh.read())
        except OSError as exc:
            raise ModelError(f"cannot read model: {exc.strerror}: {args.model}") from None
        code = COMMANDS[args.command](model, args, rep)
    except (ModelError, GridSchemaError, GridTooSmall, DimensionMismatch, OSError) as exc:
        return EXIT_INPUT, "", f"error: {exc}\n"
    return code, rep.text(), ""


def main(argv: list[str] | None = None) -> int:
    code, out, err = run(sys.argv[1:] if argv is None else argv)
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code


if __name__ == "__main__":
    sys.exit(main())
