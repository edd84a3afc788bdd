"""Batch front-end: ``halfline run CONFIG`` and ``halfline catalog``.

Configs are YAML documents::

    command: solve            # solve | converge | truncate | verify | catalog
    problem:
      id: P1                  # catalog id, or an inline linear problem:
      # inline: {alpha1: 1, alpha2: 1, beta: 1, gamma: 0, A: 0.25, B: 0.25,
      #          x0_family: constant, x0_params: {value: 0.75}}
    grid: {h: 0.1, N: 200}    # converge: h_list; truncate: h, N_list, window
    tol: 1.0e-10
    output: solve.csv

Exit codes: 0 success, 1 unconverged or failed check, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
import yaml

from . import catalog as cat
from .problem import (Constants, HalfLineProblem, InvalidProblemError, contraction_q,
                      linear_problem, safe_radius, validate)
from .solver import DEFAULT_MAX_ITER, GridSolution, gronwall_zeta, solve
from .system import apply_operator, assemble, to_physical, transform
from .verify import (ConvergenceTable, TruncationTable, convergence_study, decay_check,
                     error_sup, nodes_for, truncation_study)
from .weights import Grid, UnsolvableConfigurationError

COMMANDS = ("solve", "converge", "truncate", "verify", "catalog")
X0_FAMILIES = ("constant", "exponential", "constant_plus_exponential")
DEFAULT_TOL = 1e-8
DEFAULT_HORIZON = 20.0

EXIT_OK, EXIT_UNCONVERGED, EXIT_INVALID = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    command: str
    problem_id: Optional[str] = None
    inline: Optional[dict] = None
    h: Optional[float] = None
    N: Optional[int] = None
    h_list: Optional[list] = None
    N_list: Optional[list] = None
    window: Optional[int] = None
    tol: float = DEFAULT_TOL
    output: Optional[str] = None
    max_iter: int = DEFAULT_MAX_ITER
    notes: list = field(default_factory=list)


# --- parsing ----------------------------------------------------------------


def _line_index(node, path=(), out=None):
    """Map key paths of a composed YAML tree to 1-based line numbers."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            p = path + (str(key.value),)
            out[p] = key.start_mark.line + 1
            _line_index(value, p, out)
    return out


def _number(value, kind=float):
    if isinstance(value, bool):
        raise ValueError("expected a number, got a boolean")
    if kind is int:
        if isinstance(value, float):
            if not value.is_integer():
                raise ValueError(f"expected an integer, got {value!r}")
            return int(value)
        return int(str(value).strip())
    out = float(value)  # PyYAML reads 1e-8 (no dot) as a string
    if not math.isfinite(out):
        raise ValueError(f"expected a finite number, got {value!r}")
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and check a YAML run configuration; raises ConfigError with line context."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark is not None else ""
        raise ConfigError([f"{where}malformed document: {getattr(exc, 'problem', exc)}"]) from None
    if not isinstance(data, dict):
        raise ConfigError(["line 1: document must be a mapping with a 'command' key"])
    lines = _line_index(root)
    errors: list[str] = []

    def err(path, message):
        line = lines.get(tuple(path.split(".")) if path else (), None)
        errors.append(f"{'line %d: ' % line if line else ''}{path or 'document'}: {message}")

    known = {"command", "problem", "grid", "tol", "output", "max_iter"}
    for key in data:
        if key not in known:
            err(str(key), f"unknown key (allowed: {', '.join(sorted(known))})")

    command = data.get("command")
    if command not in COMMANDS:
        err("command", f"must be one of {', '.join(COMMANDS)} (got {command!r})")
        raise ConfigError(errors)
    cfg = RunConfig(command=command)

    if "tol" in data:
        try:
            cfg.tol = _number(data["tol"])
            if not cfg.tol > 0:
                err("tol", f"SolveReport tolerance must be > 0 (got {cfg.tol!r})")
        except (TypeError, ValueError) as exc:
            err("tol", str(exc))
    elif command != "catalog":
        cfg.notes.append(f"tol not given, default {DEFAULT_TOL:g} applied")

    if "max_iter" in data:
        try:
            cfg.max_iter = _number(data["max_iter"], int)
            if cfg.max_iter < 1:
                err("max_iter", "must be >= 1")
        except (TypeError, ValueError) as exc:
            err("max_iter", str(exc))

    if command == "catalog":
        cfg.output = data.get("output")
        if errors:
            raise ConfigError(errors)
        return cfg

    problem = data.get("problem")
    if not isinstance(problem, dict):
        err("problem", "required mapping with exactly one of 'id' or 'inline'")
    else:
        sources = [k for k in ("id", "inline") if k in problem]
        if len(sources) != 1:
            err("problem", f"RunConfig invariant: exactly one problem source (id or inline), got {sources}")
        elif sources == ["id"]:
            cfg.problem_id = str(problem["id"])
        else:
            cfg.inline = problem["inline"]
            _check_inline(cfg.inline, err)

    grid = data.get("grid") or {}
    if not isinstance(grid, dict):
        err("grid", "must be a mapping")
        grid = {}
    _parse_grid(cfg, grid, err)

    cfg.output = data.get("output")
    if cfg.output is None:
        cfg.output = f"{command}.csv"
        cfg.notes.append(f"output not given, writing {cfg.output}")
    if errors:
        raise ConfigError(errors)
    return cfg


def _parse_grid(cfg: RunConfig, grid: dict, err) -> None:
    def positive_h(key, value):
        try:
            h = _number(value)
        except (TypeError, ValueError) as exc:
            err(f"grid.{key}", str(exc))
            return None
        if not h > 0:
            err(f"grid.{key}", f"Grid invariant violated: h > 0 (got {h!r})")
            return None
        return h

    def count(key, value, minimum=1):
        try:
            n = _number(value, int)
        except (TypeError, ValueError) as exc:
            err(f"grid.{key}", str(exc))
            return None
        if n < minimum:
            err(f"grid.{key}", f"Grid invariant violated: N >= {minimum} (got {n})")
            return None
        return n

    if "h" in grid:
        cfg.h = positive_h("h", grid["h"])
    if "N" in grid:
        cfg.N = count("N", grid["N"])
    if "window" in grid:
        cfg.window = count("window", grid["window"], minimum=0)
    if "h_list" in grid:
        if not isinstance(grid["h_list"], list) or not grid["h_list"]:
            err("grid.h_list", "must be a non-empty list")
        else:
            hs = [positive_h("h_list", v) for v in grid["h_list"]]
            if all(h is not None for h in hs):
                cfg.h_list = hs
                if any(abs(b / a - 0.5) > 1e-12 for a, b in zip(hs, hs[1:])):
                    err("grid.h_list", f"RunConfig invariant: h_list strictly halving (got {hs})")
    if "N_list" in grid:
        if not isinstance(grid["N_list"], list) or not grid["N_list"]:
            err("grid.N_list", "must be a non-empty list")
        else:
            ns = [count("N_list", v) for v in grid["N_list"]]
            if all(n is not None for n in ns):
                cfg.N_list = ns
                if any(b <= a for a, b in zip(ns, ns[1:])):
                    err("grid.N_list", f"RunConfig invariant: N_list strictly increasing (got {ns})")

    c = cfg.command
    if c in ("solve", "verify"):
        for key in ("h", "N"):
            if key not in grid:
                err("grid", f"'{c}' requires grid.{key}")
    elif c == "converge":
        if "h_list" not in grid:
            err("grid", "'converge' requires grid.h_list")
        elif cfg.h_list:
            if cfg.N is None:
                cfg.N = nodes_for(DEFAULT_HORIZON, cfg.h_list[0])
                cfg.notes.append(f"grid.N not given, using N = {cfg.N} at h = {cfg.h_list[0]:g}")
            if cfg.window is None:
                cfg.window = cfg.N // 2
                cfg.notes.append(f"grid.window not given, using {cfg.window} nodes at h = {cfg.h_list[0]:g}")
            if cfg.window > cfg.N:
                err("grid.window", f"window must not exceed N ({cfg.window} > {cfg.N})")
    elif c == "truncate":
        for key in ("h", "N_list"):
            if key not in grid:
                err("grid", f"'truncate' requires grid.{key}")
        if cfg.N_list:
            if cfg.window is None:
                cfg.window = cfg.N_list[0] // 2
                cfg.notes.append(f"grid.window not given, using N0 = {cfg.window}")
            if cfg.window > cfg.N_list[0]:
                err("grid.window", f"TruncationTable window N0 must be <= min(N_list) ({cfg.window} > {cfg.N_list[0]})")


INLINE_REQUIRED = ("alpha1", "alpha2", "beta", "gamma", "A", "B", "x0_family")
INLINE_OPTIONAL = ("x0_params", "Lf", "Lg", "Cf", "Cg")


def _check_inline(inline, err) -> None:
    if not isinstance(inline, dict):
        err("problem.inline", "must be a mapping")
        return
    for key in INLINE_REQUIRED:
        if key not in inline:
            err("problem.inline", f"missing key '{key}'")
    for key in inline:
        if key not in INLINE_REQUIRED + INLINE_OPTIONAL:
            err(f"problem.inline.{key}", "unknown key")
    for key in ("alpha1", "alpha2", "beta", "gamma", "Lf", "Lg", "Cf", "Cg"):
        if key in inline:
            try:
                _number(inline[key])
            except (TypeError, ValueError) as exc:
                err(f"problem.inline.{key}", str(exc))
    if "x0_family" in inline and inline["x0_family"] not in X0_FAMILIES:
        err("problem.inline.x0_family", f"must be one of {', '.join(X0_FAMILIES)} (got {inline['x0_family']!r})")


def _vector(value, n):
    v = np.atleast_1d(np.asarray(value, dtype=float))
    if v.size == 1:
        v = np.full(n, float(v[0]))
    if v.shape != (n,):
        raise ValueError(f"expected scalar or length-{n} vector, got shape {v.shape}")
    return v


def build_x0(family: str, params: dict, n: int):
    """Closed-form forcing families; returns (x0, sup bound over t >= 0)."""
    params = params or {}
    if family == "constant":
        c = _vector(params.get("value", 0.0), n)
        return (lambda t: c.copy()), float(np.max(np.abs(c)))
    rate = float(params.get("rate", 1.0))
    if rate < 0:
        raise ValueError(f"x0_params.rate must be >= 0 for a bounded forcing (got {rate})")
    amp = _vector(params.get("amplitude", 1.0), n)
    if family == "exponential":
        return (lambda t: amp * math.exp(-rate * t)), float(np.max(np.abs(amp)))
    off = _vector(params.get("offset", 0.0), n)
    # monotone in t, so the sup sits at t = 0 or t -> inf
    sup = float(np.max(np.maximum(np.abs(off + amp), np.abs(off))))
    return (lambda t: off + amp * math.exp(-rate * t)), sup


def build_problem(cfg: RunConfig) -> tuple[HalfLineProblem, Optional[Any]]:
    """Return (problem, catalog entry or None)."""
    if cfg.problem_id is not None:
        entry = cat.get(cfg.problem_id)
        return entry.problem(), entry
    d = cfg.inline
    constants = Constants(*(float(_number(d[k])) for k in ("alpha1", "alpha2", "beta", "gamma")))
    A = np.atleast_2d(np.asarray(d["A"], dtype=float))
    x0, sup = build_x0(d["x0_family"], d.get("x0_params"), A.shape[0])
    extra = {k: float(_number(d[k])) for k in ("Lf", "Lg", "Cf", "Cg") if k in d}
    return linear_problem(constants, A, d["B"], x0, sup, name="inline", **extra), None


# --- output -----------------------------------------------------------------


@dataclass(frozen=True)
class Table:
    header: tuple
    rows: tuple


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def emit_csv(table: Table, path: str) -> None:
    """Header plus one newline-terminated row per entry; floats with 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow([format_cell(v) for v in row])


def convergence_csv(table: ConvergenceTable) -> Table:
    return Table(("h", "error", "order"), tuple((r.h, r.error, r.order) for r in table.rows))


def truncation_csv(table: TruncationTable) -> Table:
    return Table(("N", "error"), tuple((r.N, r.error) for r in table.rows))


def solution_csv(sol: GridSolution) -> Table:
    n = sol.x.dim
    header = ("i", "t") + tuple(f"x_{k}" for k in range(n))
    rows = tuple((i, float(t), *map(float, sol.x.values[i])) for i, t in enumerate(sol.grid.nodes))
    return Table(header, rows)


# --- commands ---------------------------------------------------------------


def _summary_line(sol: GridSolution, q: float) -> str:
    r = sol.report
    parts = [f"case {sol.case_tag}", f"q={q:.6g}"]
    if sol.delta is not None:
        parts += [f"theta={sol.delta.theta:.6g}", f"delta={sol.delta.delta:.6g}"]
    parts += [f"h={sol.grid.h:g}", f"N={sol.grid.N}", f"iterations={r.iterations}",
              f"certified_bound={r.certified_bound:.3e}"]
    if sol.delta is not None:
        parts.append(f"x_certified_bound={r.x_certified_bound:.3e}")
    parts.append("converged" if r.converged else "NOT CONVERGED")
    return ", ".join(parts)


def _cmd_solve(cfg, problem, entry, out):
    sol = solve(problem, Grid(cfg.h, cfg.N), cfg.tol, cfg.max_iter)
    q = contraction_q(problem.regularity, problem.constants)
    print(_summary_line(sol, q), file=out)
    if entry is not None and entry.exact is not None:
        print(f"sup error vs exact on i <= N/2: {error_sup(sol, entry.exact, cfg.N // 2):.3e}", file=out)
    return solution_csv(sol), (EXIT_OK if sol.report.converged else EXIT_UNCONVERGED)


def _cmd_converge(cfg, problem, entry, out):
    mp = entry.manufactured() if entry is not None else None
    if mp is None:
        raise _Invalid("ManufacturedProblem required: 'converge' needs a catalog problem with a known exact "
                       f"solution ({', '.join(k for k, e in cat.CATALOG.items() if e.exact is not None)})")
    h0 = cfg.h_list[0]
    table, sols = convergence_study(mp, cfg.h_list, cfg.tol, horizon=cfg.N * h0, window=cfg.window * h0,
                                    max_iter=cfg.max_iter)
    q = contraction_q(problem.regularity, problem.constants)
    for sol, row in zip(sols, table.rows):
        order = "-" if row.order is None else f"{row.order:.4f}"
        print(f"{_summary_line(sol, q)}; error={row.error:.6e}, order={order}", file=out)
    ok = all(s.report.converged for s in sols)
    return convergence_csv(table), (EXIT_OK if ok else EXIT_UNCONVERGED)


def _cmd_truncate(cfg, problem, entry, out):
    table = truncation_study(problem, cfg.h, cfg.N_list, cfg.window, cfg.tol, max_iter=cfg.max_iter)
    system = assemble(problem, Grid(cfg.h, cfg.N_list[0]))
    line = f"case {system.case_tag}, contraction={system.contraction:.6g}"
    if system.delta is not None:
        line += f", delta={system.delta.delta:.6g}"
    print(f"{line}, window N0={table.window}, reference N={table.N_ref}", file=out)
    for r in table.rows:
        print(f"N={r.N}: error={r.error:.6e}", file=out)
    return truncation_csv(table), EXIT_OK


def verify_checks(problem: HalfLineProblem, grid: Grid, tol: float, max_iter: int = DEFAULT_MAX_ITER,
                  exact=None) -> list[tuple[str, str, str]]:
    """(name, status, detail) entries; status is pass, fail or n/a."""
    checks = [(c.name, "pass" if c.passed else "fail", c.detail) for c in validate(problem)]
    if any(s == "fail" for _, s, _ in checks):
        return checks
    R = safe_radius(problem)
    q = contraction_q(problem.regularity, problem.constants)
    system = assemble(problem, grid)
    sol = solve(problem, grid, tol, max_iter)
    r = sol.report
    checks.append(("solver converged", "pass" if r.converged else "fail",
                   f"iterations={r.iterations}, certified_bound={r.certified_bound:.3e}"))
    sup = sol.x.sup_norm
    checks.append(("solution in invariant set", "pass" if sup <= R + r.x_certified_bound else "fail",
                   f"sup|x|={sup:.6g}, R={R:.6g}"))

    def phys(y):
        return to_physical(system, apply_operator(system, y)).values

    n = problem.dim
    ones = np.ones((grid.N + 1, n))
    xs = [sol.x.values, system.b.values * system.scale[:, None], R * ones, -R * ones, np.zeros_like(ones)]
    out_sup = max(float(np.max(np.abs(phys(_sys(system, x))))) for x in xs)
    checks.append(("operator preserves invariant set", "pass" if out_sup <= R * (1 + 1e-12) else "fail",
                   f"max output norm {out_sup:.6g} vs R={R:.6g}"))
    worst = 0.0
    for a in range(len(xs)):
        for b in range(a + 1, len(xs)):
            ya, yb = _sys(system, xs[a]), _sys(system, xs[b])
            d_in = float(np.max(np.abs(ya - yb)))
            if d_in == 0:
                continue
            d_out = float(np.max(np.abs(apply_operator(system, ya).values - apply_operator(system, yb).values)))
            worst = max(worst, d_out / d_in)
    checks.append(("contraction on sampled pairs", "pass" if worst <= system.contraction + 1e-12 else "fail",
                   f"max ratio {worst:.6g} vs contraction {system.contraction:.6g}"))
    zeta = gronwall_zeta(grid, problem.constants, problem.regularity).values
    zok = zeta.min() >= 1 - 1e-12 and zeta.max() <= 1 / (1 - q) + 1e-8
    checks.append(("comparison sequence bounds", "pass" if zok else "fail",
                   f"zeta in [{zeta.min():.6g}, {zeta.max():.6g}], 1/(1-q)={1 / (1 - q):.6g}"))
    dec = decay_check(sol, problem)
    if not dec.applicable:
        checks.append(("decay bound", "n/a", dec.reason))
    else:
        checks.append(("decay bound", "pass" if dec.holds and dec.monotone else "fail",
                       f"min slack {dec.slack.min():.3e}"))
    if exact is not None:
        checks.append(("error vs exact solution", "n/a",
                       f"sup error on i <= N/2: {error_sup(sol, exact, grid.N // 2):.3e}"))
    return checks


def _sys(system, x):
    if system.delta is None:
        return np.asarray(x, dtype=float)
    return transform(x, system.delta, system.grid).values


def _cmd_verify(cfg, problem, entry, out):
    checks = verify_checks(problem, Grid(cfg.h, cfg.N), cfg.tol, cfg.max_iter,
                           exact=entry.exact if entry is not None else None)
    for k, (name, status, detail) in enumerate(checks):
        print(f"[{status:>4}] {name}: {detail}", file=out)
    table = Table(("check", "name", "status", "detail"),
                  tuple((k, name, status, detail) for k, (name, status, detail) in enumerate(checks)))
    if not validate(problem).passed:
        return table, EXIT_INVALID
    return table, (EXIT_UNCONVERGED if any(s == "fail" for _, s, _ in checks) else EXIT_OK)


def _cmd_catalog(out):
    rows = []
    for key, entry in cat.CATALOG.items():
        p = entry.problem()
        q = contraction_q(p.regularity, p.constants)
        case = "II" if p.constants.beta - p.constants.gamma <= 1e-12 else "I"
        rows.append((key, p.dim, case, q, entry.description))
        print(f"{key:<4} dim={p.dim} case={case:<2} q={q:.4g}  {entry.description}", file=out)
    return Table(("id", "dim", "case", "q", "description"), tuple(rows))


class _Invalid(Exception):
    pass


def run(cfg: RunConfig, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    for note in cfg.notes:
        print(f"note: {note}", file=out)
    if cfg.command == "catalog":
        table = _cmd_catalog(out)
        if cfg.output:
            try:
                emit_csv(table, cfg.output)
            except OSError as exc:
                print(f"error: cannot write output {cfg.output!r}: {exc}", file=err)
                return EXIT_INVALID
        return EXIT_OK
    try:
        problem, entry = build_problem(cfg)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=err)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: invalid inline problem: {exc}", file=err)
        return EXIT_INVALID
    report = validate(problem)
    if not report.passed and cfg.command != "verify":
        for c in report.failures:
            print(f"error: invariant violated: {c.name} ({c.detail})", file=err)
        return EXIT_INVALID
    handler = {"solve": _cmd_solve, "converge": _cmd_converge,
               "truncate": _cmd_truncate, "verify": _cmd_verify}[cfg.command]
    try:
        table, status = handler(cfg, problem, entry, out)
    except _Invalid as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INVALID
    except (InvalidProblemError, UnsolvableConfigurationError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INVALID
    if status == EXIT_INVALID:
        for c in report.failures:
            print(f"error: invariant violated: {c.name} ({c.detail})", file=err)
    try:
        emit_csv(table, cfg.output)
    except OSError as exc:
        print(f"error: cannot write output {cfg.output!r}: {exc}", file=err)
        return EXIT_INVALID
    print(f"wrote {cfg.output}", file=out)
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="halfline", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="action", required=True)
    p_run = sub.add_parser("run", help="execute a YAML run configuration")
    p_run.add_argument("config", help="path to the YAML config ('-' for stdin)")
    p_run.add_argument("-o", "--output", help="override the config's output path")
    sub.add_parser("catalog", help="list catalog problems")
    args = parser.parse_args(argv)

    if args.action == "catalog":
        return run(RunConfig(command="catalog"))
    try:
        text = sys.stdin.read() if args.config == "-" else open(args.config, encoding="utf-8").read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    if args.output:
        cfg.output = args.output
        cfg.notes = [n for n in cfg.notes if not n.startswith("output not given")]
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
