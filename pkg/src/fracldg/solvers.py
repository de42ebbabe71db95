"""Fully implicit time stepping for the four equation families.

Unknowns are stored as flat coefficient vectors, one block of ``K (N + 1)``
entries per real field: ``u`` for the real problems, ``(p, q)`` for
``u = p + i q`` and ``(p, q, v, w)`` for the coupled pair ``u1 = p + i q``,
``u2 = v + i w``.  The linear fractional part is factored once per run; the
nonlinear terms are resolved by Picard iteration against that factorization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

from .dg_core import (
    Mesh1D,
    ModalField,
    gauss01,
    get_basis,
    reference_derivatives,
    reference_values,
)
from .errors import InvalidArgument, NonlinearDivergence, SolverFailure
from .frac_space import FracSpaceOperators, build_operators
from .frac_time import DistOrderScheme, history_kernel

logger = logging.getLogger(__name__)

FAMILIES = ("diffusion", "convection_diffusion", "nls", "coupled_nls")
N_FIELDS = {"diffusion": 1, "convection_diffusion": 1, "nls": 2, "coupled_nls": 4}

PICARD_TOL = 1e-12
PICARD_MAXITER = 50


# {{{ numerical flux


@dataclass(frozen=True)
class LaxFriedrichs:
    """Local Lax-Friedrichs flux ``(f(a) + f(b)) / 2 - lam / 2 (b - a)``."""

    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]

    def speed(self, a, b):
        return np.maximum(np.abs(self.fprime(a)), np.abs(self.fprime(b)))

    def __call__(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return 0.5 * (self.f(a) + self.f(b)) - 0.5 * self.speed(a, b) * (b - a)


BURGERS = LaxFriedrichs(lambda u: 0.5 * u * u, lambda u: u)


# }}}


@dataclass(frozen=True)
class EquationSpec:
    """Coefficients of one model problem.

    ``eps`` holds ``(eps,)`` for the real families, ``(eps1, eps2)`` for
    ``i D u - eps1 (-Delta)^{b/2} u + eps2 f(|u|^2) u = g`` and
    ``(eps1, eps2, eps3, eps4)`` for the coupled system.  ``forcing(x, n, t)``
    returns one array per real field, evaluated at the points ``x``.
    """

    family: str
    beta: float
    eps: tuple[float, ...]
    flux: LaxFriedrichs | None = None
    nonlin_f: Callable | None = None
    nonlin_g: Callable | None = None
    forcing: Callable | None = None

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise InvalidArgument(f"unknown equation family: {self.family!r}")
        if not 1.0 < self.beta < 2.0:
            raise InvalidArgument(f"beta must lie in (1, 2): {self.beta}")
        need = {"diffusion": 1, "convection_diffusion": 1, "nls": 2, "coupled_nls": 4}
        if len(self.eps) < need[self.family]:
            raise InvalidArgument(
                f"{self.family} needs {need[self.family]} coefficients, got {self.eps}"
            )
        if self.family == "convection_diffusion" and self.flux is None:
            object.__setattr__(self, "flux", BURGERS)

    @property
    def n_fields(self) -> int:
        return N_FIELDS[self.family]


@dataclass
class SolverState:
    spec: EquationSpec
    ops: FracSpaceOperators
    scheme: DistOrderScheme
    history: np.ndarray = field(repr=False)
    n: int = 0
    matrix: np.ndarray = field(repr=False, default=None)
    lu: tuple = field(repr=False, default=None)
    picard_iterations: list = field(default_factory=list)
    picard_increments: list = field(default_factory=list, repr=False)
    max_residual: float = 0.0
    check_residual: bool = False

    @property
    def mesh(self) -> Mesh1D:
        return self.ops.mesh

    @property
    def N(self) -> int:
        return self.ops.N

    @property
    def ndof(self) -> int:
        return self.ops.ndof

    @property
    def t(self) -> float:
        return self.n * self.scheme.dt

    def current(self) -> np.ndarray:
        return self.history[self.n]

    def fields(self, level: int | None = None) -> tuple[ModalField, ...]:
        level = self.n if level is None else level
        vec = self.history[level]
        nd = self.ndof
        return tuple(
            ModalField(self.mesh, self.N, vec[i * nd : (i + 1) * nd])
            for i in range(self.spec.n_fields)
        )

    def norms(self) -> np.ndarray:
        """L2 norm of the full state vector at every computed level."""
        return np.linalg.norm(self.history[: self.n + 1], axis=1)


def system_matrix(spec: EquationSpec, ops: FracSpaceOperators, c0: float) -> np.ndarray:
    n = ops.ndof
    I = np.eye(n)
    A = ops.A
    if spec.family in ("diffusion", "convection_diffusion"):
        return c0 * I - spec.eps[0] * A
    if spec.family == "nls":
        e1 = spec.eps[0]
        return np.block([[c0 * I, e1 * A], [-e1 * A, c0 * I]])
    e1, e3 = spec.eps[0], spec.eps[2]
    Z = np.zeros_like(A)
    return np.block(
        [
            [c0 * I, e1 * A, Z, Z],
            [-e1 * A, c0 * I, Z, Z],
            [Z, Z, c0 * I, e3 * A],
            [Z, Z, -e3 * A, c0 * I],
        ]
    )


def init_state(
    spec: EquationSpec,
    mesh: Mesh1D,
    N: int,
    scheme: DistOrderScheme,
    initial: Sequence[ModalField] | ModalField | np.ndarray | None = None,
    *,
    ops: FracSpaceOperators | None = None,
    flux: str = "left",
    check_residual: bool = False,
) -> SolverState:
    if ops is None:
        ops = build_operators(mesh, N, spec.beta, flux)
    elif ops.mesh.K != mesh.K or ops.N != N or ops.order.beta != spec.beta:
        raise InvalidArgument("operators do not match mesh, degree or beta")
    nvec = spec.n_fields * ops.ndof
    history = np.zeros((scheme.M + 1, nvec))
    if initial is not None:
        if isinstance(initial, ModalField):
            initial = [initial]
        if isinstance(initial, np.ndarray):
            u0 = initial.reshape(-1)
        else:
            u0 = np.concatenate([f.flat for f in initial])
        if u0.size != nvec:
            raise InvalidArgument(f"initial data has {u0.size} entries, expected {nvec}")
        history[0] = u0
    mat = system_matrix(spec, ops, scheme.c0)
    try:
        lu = sla.lu_factor(mat, check_finite=True)
    except (ValueError, sla.LinAlgError) as exc:
        raise SolverFailure(f"implicit matrix factorization failed: {exc}") from exc
    if np.any(np.abs(np.diag(lu[0])) == 0.0):
        raise SolverFailure("implicit matrix is singular")
    return SolverState(
        spec, ops, scheme, history, 0, mat, lu, check_residual=check_residual
    )


# {{{ nonlinear terms


class _Quadrature:
    """Tables for evaluating nonlinear terms at ``nq`` points per element."""

    def __init__(self, mesh: Mesh1D, N: int, nq: int):
        xq, wq = gauss01(nq)
        self.V = reference_values(N, xq)
        self.W = self.V * wq[:, None]
        self.sqrt_h = np.sqrt(mesh.h)
        self.K, self.n = mesh.K, N + 1

    def values(self, vec: np.ndarray) -> np.ndarray:
        return vec.reshape(self.K, self.n) @ self.V.T / self.sqrt_h

    def project(self, vals: np.ndarray) -> np.ndarray:
        return (self.sqrt_h * vals @ self.W).reshape(-1)


def convection_residual(u: np.ndarray, mesh: Mesh1D, N: int, flux: LaxFriedrichs,
                        quad: _Quadrature | None = None) -> np.ndarray:
    """``-(f(u), v_x) + fhat v^-|_{k+1/2} - fhat v^+|_{k-1/2}`` with zero exterior data."""
    basis = get_basis(N)
    if quad is None:
        quad = _Quadrature(mesh, N, 2 * N + 3)
    K, n, h = mesh.K, N + 1, mesh.h
    c = u.reshape(K, n)
    nq = quad.V.shape[0]
    xq, wq = gauss01(nq)
    dV = reference_derivatives(N, xq)
    fq = flux.f(quad.values(u))
    vol = -(fq * wq) @ dV / np.sqrt(h)

    sq = np.sqrt(h)
    right = c @ basis.right / sq
    left = c @ basis.left / sq
    um = np.concatenate([[0.0], right])
    up = np.concatenate([left, [0.0]])
    fhat = flux(um, up)
    face = (fhat[1:, None] * basis.right[None, :] - fhat[:-1, None] * basis.left[None, :]) / sq
    return (vol + face).reshape(-1)


def _nonlinear_rhs(state: SolverState, vec: np.ndarray, quad: _Quadrature) -> np.ndarray:
    """Contribution of the nonlinear terms moved to the right-hand side."""
    spec = state.spec
    nd = state.ndof
    if spec.family == "convection_diffusion":
        return -convection_residual(vec, state.mesh, state.N, spec.flux, quad)
    if spec.family == "nls":
        e2 = spec.eps[1]
        p, q = quad.values(vec[:nd]), quad.values(vec[nd:])
        fv = spec.nonlin_f(p * p + q * q)
        return np.concatenate([-e2 * quad.project(fv * q), e2 * quad.project(fv * p)])
    e2, e4 = spec.eps[1], spec.eps[3]
    p, q = quad.values(vec[:nd]), quad.values(vec[nd : 2 * nd])
    v, w = quad.values(vec[2 * nd : 3 * nd]), quad.values(vec[3 * nd :])
    m1, m2 = p * p + q * q, v * v + w * w
    fv = spec.nonlin_f(m1, m2)
    gv = spec.nonlin_g(m1, m2)
    return np.concatenate(
        [
            -e2 * quad.project(fv * q),
            e2 * quad.project(fv * p),
            -e4 * quad.project(gv * w),
            e4 * quad.project(gv * v),
        ]
    )


def _is_linear(spec: EquationSpec) -> bool:
    if spec.family == "diffusion":
        return True
    if spec.family == "nls":
        return spec.nonlin_f is None or spec.eps[1] == 0.0
    if spec.family == "coupled_nls":
        return (spec.nonlin_f is None or spec.eps[1] == 0.0) and (
            spec.nonlin_g is None or spec.eps[3] == 0.0
        )
    return False


# }}}


def _forcing_vector(state: SolverState, forcing, n: int) -> np.ndarray:
    """Right-hand side contribution ``M g`` for every equation of the system."""
    nd = state.ndof
    fam = state.spec.family
    if forcing is None:
        return np.zeros(state.spec.n_fields * nd)
    if isinstance(forcing, np.ndarray):
        g = forcing.reshape(-1)
    else:
        if isinstance(forcing, ModalField):
            forcing = [forcing]
        g = np.concatenate([np.asarray(f.flat if isinstance(f, ModalField) else f).reshape(-1)
                            for f in forcing])
    if g.size != state.spec.n_fields * nd:
        raise InvalidArgument(f"forcing has {g.size} entries, expected {state.spec.n_fields * nd}")
    if fam in ("diffusion", "convection_diffusion"):
        return g
    # g is ordered (re, im) per complex field; equations are (p-eq, q-eq)
    out = np.empty_like(g)
    for c in range(state.spec.n_fields // 2):
        re = g[2 * c * nd : (2 * c + 1) * nd]
        im = g[(2 * c + 1) * nd : (2 * c + 2) * nd]
        out[2 * c * nd : (2 * c + 1) * nd] = im
        out[(2 * c + 1) * nd : (2 * c + 2) * nd] = -re
    return out


def _solve(state: SolverState, rhs: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(rhs)):
        raise NonlinearDivergence("non-finite right-hand side", float("inf"), state.n + 1)
    x = sla.lu_solve(state.lu, rhs, check_finite=False)
    if not np.all(np.isfinite(x)):
        raise SolverFailure("non-finite solution of the implicit system", state.n + 1)
    if state.check_residual:
        res = np.linalg.norm(state.matrix @ x - rhs)
        scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
        state.max_residual = max(state.max_residual, res / scale)
    return x


def advance(state: SolverState, forcing=None) -> np.ndarray:
    """Advance one level; *forcing* holds the projected right-hand side fields."""
    n = state.n + 1
    if n > state.scheme.M:
        raise SolverFailure("no time levels left", n)
    hist = history_kernel(state.history, n, state.scheme.lag_coeffs, state.scheme.start_coeffs)
    base = hist + _forcing_vector(state, forcing, n)

    if _is_linear(state.spec):
        x = _solve(state, base)
        state.picard_iterations.append(0)
        state.picard_increments.append([])
    else:
        quad = _Quadrature(state.mesh, state.N, 2 * state.N + 3)
        x = state.history[n - 1].copy()
        incs = []
        for it in range(1, PICARD_MAXITER + 1):
            x_new = _solve(state, base + _nonlinear_rhs(state, x, quad))
            inc = float(np.linalg.norm(x_new - x))
            incs.append(inc)
            if not np.isfinite(inc):
                raise NonlinearDivergence("Picard iteration blew up", inc, n)
            x = x_new
            if inc <= PICARD_TOL:
                break
        else:
            raise NonlinearDivergence("Picard iteration did not converge", incs[-1], n)
        state.picard_iterations.append(it)
        state.picard_increments.append(incs)
    state.history[n] = x
    state.n = n
    return x


def _check_family(state: SolverState, *families: str) -> None:
    if state.spec.family not in families:
        raise InvalidArgument(f"state holds a {state.spec.family} problem")


def step_diffusion(state: SolverState, g_n=None) -> ModalField:
    _check_family(state, "diffusion")
    advance(state, g_n)
    return state.fields()[0]


def step_convection_diffusion(state: SolverState, g_n=None) -> ModalField:
    _check_family(state, "convection_diffusion", "diffusion")
    advance(state, g_n)
    return state.fields()[0]


def step_nls(state: SolverState, g_real=None, g_imag=None) -> tuple[ModalField, ModalField]:
    _check_family(state, "nls")
    forcing = None
    if g_real is not None or g_imag is not None:
        z = ModalField.zeros(state.mesh, state.N)
        forcing = [g_real if g_real is not None else z, g_imag if g_imag is not None else z]
    advance(state, forcing)
    return state.fields()


def step_coupled_nls(state: SolverState, forcing=None) -> tuple[ModalField, ...]:
    """Forcing is ``(g1_re, g1_im, g2_re, g2_im)``; returns ``(p, q, v, w)``."""
    _check_family(state, "coupled_nls")
    advance(state, forcing)
    return state.fields()


def project_forcing(state: SolverState, n: int) -> np.ndarray | None:
    """L2 projection of ``spec.forcing`` at level *n* for every real field."""
    fn = state.spec.forcing
    if fn is None:
        return None
    basis = get_basis(state.N)
    mesh = state.mesh
    x = mesh.left[:, None] + mesh.h * basis.xq[None, :]
    vals = fn(x, n, n * state.scheme.dt)
    if isinstance(vals, np.ndarray) and vals.shape == x.shape:
        vals = (vals,)
    W = basis.V * basis.wq[:, None]
    return np.concatenate(
        [(np.sqrt(mesh.h) * np.broadcast_to(v, x.shape) @ W).reshape(-1) for v in vals]
    )


def run(
    problem: EquationSpec,
    mesh: Mesh1D,
    N: int,
    scheme: DistOrderScheme,
    initial=None,
    T: float | None = None,
    *,
    ops: FracSpaceOperators | None = None,
    flux: str = "left",
    check_residual: bool = False,
    callback: Callable[[SolverState], None] | None = None,
) -> SolverState:
    """March ``n = 1..M``; the returned state keeps the whole trajectory."""
    if T is not None and not np.isclose(scheme.M * scheme.dt, T, rtol=1e-12, atol=1e-14):
        raise InvalidArgument(f"M * dt = {scheme.M * scheme.dt} does not match T = {T}")
    state = init_state(problem, mesh, N, scheme, initial, ops=ops, flux=flux,
                       check_residual=check_residual)
    for n in range(1, scheme.M + 1):
        try:
            advance(state, project_forcing(state, n))
        except SolverFailure as exc:
            if exc.level is None:
                exc.level = n
                exc.args = (f"{exc.args[0]} (time level n={n})",)
            raise
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            raise SolverFailure(str(exc), n) from exc
        if callback is not None:
            callback(state)
    return state
