"""Convergence sweeps over the manufactured cases and their error tables.

A sweep refines exactly one of the element count ``K``, the time step ``dt``
or the alpha-quadrature spacing ``theta = 1/S`` with everything else fixed,
measures the final-time L2 error against the exact solution and reports the
consecutive-pair observed orders.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .dg_core import build_mesh, l2_error
from .errors import FracLDGError, InvalidArgument, InvalidData
from .frac_time import PRESETS, build_dist_order_scheme
from .manufactured import (
    CASES,
    FORCING_MODES,
    ManufacturedCase,
    canonical_case,
    make_case,
    time_terms,
)
from .solvers import EquationSpec, run

logger = logging.getLogger(__name__)

SWEEPS = ("K", "dt", "theta")
FORMATS = ("csv", "md")
CSV_COLUMNS = (
    "sweep_param", "value", "l2_error", "order", "case",
    "beta", "N", "dt", "theta", "T", "walltime_s",
)
FIELD_SELECTIONS = {"ex4": {"u1": (0, 1), "u2": (2, 3)}}


def parse_value(token, T: float = 1.0) -> float:
    """``"10"``, ``"0.01"``, ``"1/40"`` or ``"T/200"`` as a float."""
    if isinstance(token, (int, float)):
        return float(token)
    tok = str(token).strip().replace(" ", "")
    if not tok:
        raise InvalidArgument("empty value")
    try:
        if tok.startswith("T/"):
            return T / float(Fraction(tok[2:]))
        if tok.startswith("T*"):
            return T * float(Fraction(tok[2:]))
        if tok == "T":
            return T
        return float(Fraction(tok))
    except (ValueError, ZeroDivisionError) as exc:
        raise InvalidArgument(f"cannot parse value {token!r}") from exc


def parse_values(values, T: float = 1.0) -> tuple[float, ...]:
    if isinstance(values, str):
        values = [v for v in values.split(",") if v.strip()]
    return tuple(parse_value(v, T) for v in values)


@dataclass(frozen=True)
class RunSpec:
    """One sweep.  Parameters that are not swept keep their fixed value.

    ``S_ref`` is the alpha resolution of the reference operator used by a
    ``theta`` sweep in discrete forcing mode: the forcing then carries the
    time discretization but not the quadrature error of the swept scheme.
    """

    case: str
    beta: float
    N: int
    sweep: str
    values: tuple[float, ...]
    T: float = 0.5
    S: int = 50
    dt: float | None = None
    K: int = 20
    weight: str = "gamma3"
    forcing: str = "discrete"
    flux: str = "left"
    field: str | None = None
    S_ref: int = 2000
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.case not in CASES:
            raise InvalidArgument(f"unknown case {self.case!r}; choose from {CASES}")
        if not 1.0 < self.beta < 2.0:
            raise InvalidArgument(f"beta must lie in (1, 2): {self.beta}")
        if int(self.N) != self.N or self.N < 0:
            raise InvalidArgument(f"N must be a non-negative integer: {self.N}")
        if self.sweep not in SWEEPS:
            raise InvalidArgument(f"sweep axis must be one of {SWEEPS}: {self.sweep!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "forcing", FORCING_MODES.get(self.forcing, self.forcing))
        if not self.values:
            raise InvalidArgument("sweep needs at least one value")
        if any(not (math.isfinite(v) and v > 0) for v in self.values):
            raise InvalidArgument(f"sweep values must be positive: {self.values}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise InvalidArgument(f"T must be positive: {self.T}")
        if self.S < 1 or self.S_ref < 1 or self.K < 1 or self.jobs < 1:
            raise InvalidArgument("S, S_ref, K and jobs must be >= 1")
        if self.dt is not None and not self.dt > 0:
            raise InvalidArgument(f"dt must be positive: {self.dt}")
        if self.weight not in PRESETS:
            raise InvalidArgument(f"unknown weight {self.weight!r}; choose from {tuple(PRESETS)}")
        if self.forcing not in FORCING_MODES:
            raise InvalidArgument(f"forcing mode must be analytic or discrete: {self.forcing!r}")
        if self.flux not in ("left", "right"):
            raise InvalidArgument(f"flux must be left or right: {self.flux!r}")
        if self.field is not None and self.field not in FIELD_SELECTIONS.get(self.case, {}):
            raise InvalidArgument(f"field {self.field!r} not available for {self.case}")
        for v in self.values:
            self._resolve(v)

    @property
    def fixed_dt(self) -> float:
        return self.T / 500 if self.dt is None else self.dt

    @property
    def label(self) -> str:
        return self.case if self.field is None else f"{self.case}:{self.field}"

    def _resolve(self, value: float) -> tuple[int, int, int]:
        """``(K, M, S)`` of the run at sweep *value*."""
        K, S = self.K, self.S
        dt = self.fixed_dt
        if self.sweep == "K":
            K = _as_count(value, "K")
        elif self.sweep == "dt":
            dt = value
        else:
            S = _as_count(1.0 / value, "1/theta")
        M = _as_count(self.T / dt, "T/dt")
        return K, M, S


def _as_count(x: float, what: str) -> int:
    n = int(round(x))
    if n < 1 or not math.isclose(n, x, rel_tol=1e-9):
        raise InvalidArgument(f"{what} must be a positive integer, got {x}")
    return n


# {{{ problem setup


def _cubic_nls(s):
    return s


def _coupled_density(a, b):
    return a + b


def build_problem(case: ManufacturedCase, terms: np.ndarray) -> EquationSpec:
    """Equation of *case* whose forcing uses the time factors *terms* per level."""

    def forcing(x, n, t):
        return case.forcing(x, t, terms[n])

    kw = {}
    if case.family == "nls":
        kw["nonlin_f"] = _cubic_nls
    elif case.family == "coupled_nls":
        kw["nonlin_f"] = kw["nonlin_g"] = _coupled_density
    return EquationSpec(case.family, case.beta, case.eps, forcing=forcing, **kw)


def _field_error(case: ManufacturedCase, state, T: float, select: Sequence[int] | None) -> float:
    fs = state.fields()
    idx = range(len(fs)) if select is None else select
    sq = 0.0
    for i in idx:
        sq += l2_error(fs[i], lambda x, i=i: case.exact(x, T)[i]) ** 2
    return math.sqrt(sq)


def run_point(spec: RunSpec, value: float) -> dict:
    """Single solver run at one sweep value; returns the row data."""
    t0 = time.perf_counter()
    K, M, S = spec._resolve(value)
    dt = spec.T / M
    case = make_case(spec.case, spec.beta)
    scheme = build_dist_order_scheme(spec.weight, S, dt, M)
    ref = None
    if spec.forcing == "discrete" and spec.sweep == "theta":
        ref = build_dist_order_scheme(spec.weight, spec.S_ref, dt, M)
    terms = time_terms(spec.forcing, scheme, ref)
    problem = build_problem(case, terms)
    state = run(problem, build_mesh(-1.0, 1.0, K), spec.N, scheme, flux=spec.flux)
    select = None if spec.field is None else FIELD_SELECTIONS[spec.case][spec.field]
    err = _field_error(case, state, spec.T, select)
    return {
        "value": float(value),
        "l2_error": err,
        "dt": dt,
        "theta": 1.0 / S,
        "walltime_s": time.perf_counter() - t0,
    }


def _guarded_point(args):
    spec, value = args
    try:
        return run_point(spec, value), None
    except FracLDGError as exc:
        return None, f"{type(exc).__name__}: {exc}"


# }}}


@dataclass(frozen=True)
class ErrorRow:
    value: float
    l2_error: float
    order: float | None
    dt: float
    theta: float
    walltime_s: float = 0.0


@dataclass(frozen=True)
class ErrorTable:
    sweep_param: str
    case: str
    beta: float
    N: int
    T: float
    rows: tuple[ErrorRow, ...] = ()
    failures: tuple[tuple[float, str], ...] = field(default=(), compare=False)

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.l2_error for r in self.rows])

    @property
    def orders(self) -> list[float | None]:
        return [r.order for r in self.rows]

    def without_timing(self) -> ErrorTable:
        return replace(self, rows=tuple(replace(r, walltime_s=0.0) for r in self.rows))


def resolution(sweep: str, value: float) -> float:
    """Refinement measure: ``K``, ``1/dt`` or ``1/theta``."""
    if sweep == "K":
        return value
    if sweep in ("dt", "theta"):
        return 1.0 / value
    raise InvalidArgument(f"unknown sweep axis {sweep!r}")


def estimate_order(errors: Sequence[float], resolutions: Sequence[float]) -> list[float | None]:
    """Consecutive-pair orders ``log(e_{i-1}/e_i) / log(r_i/r_{i-1})``; ``None`` for row 0."""
    e = np.asarray(errors, dtype=float)
    r = np.asarray(resolutions, dtype=float)
    if e.shape != r.shape or e.ndim != 1:
        raise InvalidData("errors and resolutions must be 1-D of equal length")
    if e.size < 1:
        return []
    if np.any(~np.isfinite(e)) or np.any(e <= 0):
        raise InvalidData(f"errors must be positive and finite: {e.tolist()}")
    if np.any(~np.isfinite(r)) or np.any(r <= 0):
        raise InvalidData(f"resolutions must be positive and finite: {r.tolist()}")
    dr = np.diff(r)
    if e.size > 1 and not (np.all(dr > 0) or np.all(dr < 0)):
        raise InvalidData(f"resolutions must be strictly monotone: {r.tolist()}")
    out: list[float | None] = [None]
    for i in range(1, e.size):
        out.append(float(math.log(e[i - 1] / e[i]) / math.log(r[i] / r[i - 1])))
    return out


def run_sweep(spec: RunSpec, jobs: int | None = None) -> ErrorTable:
    """Run every sweep value (in parallel up to *jobs*), keep spec order.

    A row whose solver fails is dropped and reported in ``failures``; orders
    of the remaining rows are taken between consecutive completed rows.
    """
    jobs = spec.jobs if jobs is None else jobs
    tasks = [(spec, v) for v in spec.values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_guarded_point, tasks))
    else:
        results = [_guarded_point(t) for t in tasks]

    done, failures = [], []
    for v, (row, msg) in zip(spec.values, results):
        if row is None:
            logger.warning("row %s=%s failed: %s", spec.sweep, v, msg)
            failures.append((v, msg))
        else:
            done.append(row)
    orders = estimate_order(
        [r["l2_error"] for r in done], [resolution(spec.sweep, r["value"]) for r in done]
    ) if done else []
    rows = tuple(ErrorRow(order=o, **r) for r, o in zip(done, orders))
    return ErrorTable(spec.sweep, spec.label, spec.beta, spec.N, spec.T, rows, tuple(failures))


# {{{ output


def _num(x: float | None) -> str:
    if x is None:
        return ""
    return repr(float(x))


def _value_str(sweep: str, v: float) -> str:
    return str(int(round(v))) if sweep == "K" else repr(float(v))


def table_to_csv(table: ErrorTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in table.rows:
        w.writerow([
            table.sweep_param, _value_str(table.sweep_param, r.value), _num(r.l2_error),
            _num(r.order), table.case, _num(table.beta), table.N, _num(r.dt),
            _num(r.theta), _num(table.T), f"{r.walltime_s:.3f}",
        ])
    return buf.getvalue()


def _axis_label(sweep: str, v: float, T: float) -> str:
    if sweep == "K":
        return str(int(round(v)))
    inv = 1.0 / v if sweep == "theta" else T / v
    if math.isclose(inv, round(inv), rel_tol=1e-9):
        return ("1/" if sweep == "theta" else "T/") + str(int(round(inv)))
    return f"{v:.4g}"


def table_to_markdown(table: ErrorTable) -> str:
    head = {"K": "K", "dt": "Δt", "theta": "θ"}[table.sweep_param]
    lines = [
        f"**{table.case}**, β = {table.beta:g}, N = {table.N}, T = {table.T:g}",
        "",
        f"| {head} | L²-Error | order |",
        "|---|---|---|",
    ]
    for r in table.rows:
        order = "-" if r.order is None else f"{r.order:.2f}"
        lines.append(
            f"| {_axis_label(table.sweep_param, r.value, table.T)} | {r.l2_error:.2e} | {order} |"
        )
    for v, msg in table.failures:
        lines.append(f"| {_axis_label(table.sweep_param, v, table.T)} | failed | {msg} |")
    return "\n".join(lines) + "\n"


def emit_table(table: ErrorTable, fmt: str = "csv", path: str | os.PathLike | None = None) -> str:
    """Render *table*; write it to *path* when given (``OSError`` if unwritable)."""
    if fmt == "csv":
        text = table_to_csv(table)
    elif fmt in ("md", "markdown"):
        text = table_to_markdown(table)
    else:
        raise InvalidArgument(f"unknown table format {fmt!r}")
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _opt_float(s: str) -> float | None:
    return None if s == "" else float(s)


def read_csv(source) -> ErrorTable | None:
    """Parse CSV text or a path back into an :class:`ErrorTable`.

    A header-only file carries no metadata and yields ``None``.
    """
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = str(source)
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        return None
    first = rows[0]
    out = []
    for r in rows:
        if any(r[k] != first[k] for k in ("sweep_param", "case", "beta", "N", "T")):
            raise InvalidData("CSV mixes several sweeps")
        out.append(ErrorRow(
            value=float(r["value"]),
            l2_error=float(r["l2_error"]),
            order=_opt_float(r["order"]),
            dt=float(r["dt"]),
            theta=float(r["theta"]),
            walltime_s=float(r["walltime_s"]),
        ))
    return ErrorTable(
        first["sweep_param"], first["case"], float(first["beta"]), int(first["N"]),
        float(first["T"]), tuple(out),
    )


# }}}


def spec_fields() -> tuple[str, ...]:
    return tuple(f.name for f in fields(RunSpec))


def make_spec(config: dict) -> RunSpec:
    """:class:`RunSpec` from a flat mapping; string values like ``"T/100"`` are accepted."""
    known = set(spec_fields())
    unknown = set(config) - known
    if unknown:
        raise InvalidArgument(f"unknown configuration keys: {sorted(unknown)}")
    cfg = dict(config)
    for key in ("case", "sweep", "values", "beta", "N"):
        if cfg.get(key) is None:
            raise InvalidArgument(f"missing required setting {key!r}")
    cfg["case"] = canonical_case(cfg["case"])
    T = parse_value(cfg.get("T", 0.5))
    cfg["T"] = T
    cfg["values"] = parse_values(cfg["values"], T)
    if cfg.get("dt") is not None:
        cfg["dt"] = parse_value(cfg["dt"], T)
    try:
        cfg["beta"] = float(cfg["beta"])
        for key in ("N", "S", "K", "S_ref", "jobs"):
            if cfg.get(key) is not None:
                cfg[key] = int(cfg[key])
    except (TypeError, ValueError) as exc:
        raise InvalidArgument(str(exc)) from exc
    cfg = {k: v for k, v in cfg.items() if v is not None}
    return RunSpec(**cfg)


def run_many(specs: Iterable[RunSpec]) -> list[ErrorTable]:
    return [run_sweep(s) for s in specs]
