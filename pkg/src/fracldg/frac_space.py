"""Riesz fractional integral and LDG derivative operators on the DG space.

The fractional Laplacian is realized as the chain ``p = R_s q``, ``q = d_x r``,
``r = d_x u`` where ``R_s = (I_L^sigma + I_R^sigma) / (2 cos(pi sigma / 2))``
is the Riesz fractional integral of order ``sigma = 2 - beta`` acting on
zero-extended functions.  With this normalization ``d_xx R_s`` has Fourier
symbol ``-|xi|^beta``, i.e. ``p`` approximates ``-(-Delta)^{beta/2} u``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate
from scipy.special import comb, gamma

from .dg_core import Mesh1D, ModalField, gauss01, get_basis, reference_values
from .errors import AssemblyFailure, InvalidArgument

# boundary penalty weight (in units of 1/h) closing the LDG chain
PENALTY = 1.0


@dataclass(frozen=True)
class FracOrder:
    beta: float

    def __post_init__(self) -> None:
        if not 1.0 < self.beta < 2.0:
            raise InvalidArgument(f"spatial order beta must lie in (1, 2): {self.beta}")

    @property
    def sigma(self) -> float:
        return 2.0 - self.beta

    @property
    def s(self) -> float:
        return 0.5 * self.sigma

    @property
    def riesz_constant(self) -> float:
        """``1 / (2 cos(s pi))``, positive for every admissible order."""
        return 0.5 / math.cos(math.pi * self.s)


def _check_sigma(sigma: float) -> None:
    if not 0.0 < sigma < 1.0:
        raise InvalidArgument(f"integral order must lie in (0, 1): {sigma}")


# {{{ pointwise definition (reference implementation, slow)


def riemann_liouville_integrals(
    sigma: float, v: Callable[[float], float], x: float, a: float, b: float
) -> tuple[float, float]:
    """Left and right RL integrals of order *sigma* of *v* restricted to ``[a, b]``."""
    _check_sigma(sigma)
    if not a <= x <= b:
        raise InvalidArgument(f"point {x} outside [{a}, {b}]")
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=200)
    left = right = 0.0
    if x > a:
        left, _ = integrate.quad(v, a, x, weight="alg", wvar=(0.0, sigma - 1.0), **opts)
    if x < b:
        right, _ = integrate.quad(v, x, b, weight="alg", wvar=(sigma - 1.0, 0.0), **opts)
    g = math.gamma(sigma)
    return left / g, right / g


def riesz_integral(
    sigma: float, v: Callable[[float], float], x: float, domain: tuple[float, float]
) -> float:
    a, b = domain
    left, right = riemann_liouville_integrals(sigma, v, x, a, b)
    return (left + right) / (2.0 * math.cos(0.5 * math.pi * sigma))


# }}}


# {{{ cell-pair moments


def _shifted_power_moment(p: int, gam: float, c: float) -> float:
    """``int_0^1 xi^p (xi + c)^gam dxi`` for ``c >= 0`` by binomial expansion in ``xi + c``."""
    if c == 0.0:
        return 1.0 / (p + gam + 1.0)
    total = 0.0
    for i in range(p + 1):
        e = i + gam + 1.0
        total += comb(p, i, exact=True) * (-c) ** (p - i) * ((1.0 + c) ** e - c**e) / e
    return total


def _normalized_moment(sigma: float, d: int, p: int, q: int) -> float:
    # (1/Gamma(sigma)) int_0^1 int_0^1 xi^p eta^q (xi - eta + d)_+^(sigma-1) deta dxi
    # via I^sigma[eta^q 1_[0,1]](x) = q!/Gamma(q+sigma+1) x^(q+sigma)
    #                                - sum_n C(q,n) n!/Gamma(n+sigma+1) (x-1)_+^(n+sigma)
    val = math.gamma(q + 1) / math.gamma(q + sigma + 1) * _shifted_power_moment(
        p, q + sigma, float(d)
    )
    if d >= 1:
        for n in range(q + 1):
            coef = comb(q, n, exact=True) * math.gamma(n + 1) / math.gamma(n + sigma + 1)
            val -= coef * _shifted_power_moment(p, n + sigma, float(d - 1))
    return val


def kernel_moment(sigma: float, d: int, p: int, q: int) -> float:
    """Exact ``int_0^1 int_0^1 xi^p (x - t)_+^(sigma-1) eta^q deta dxi``.

    Target cell ``x = d + xi`` (unit width), source cell ``t = eta``.  Only
    ``d = 0`` (coincident) and ``d = 1`` (touching) cells are singular and use
    the closed form; for ``d >= 2`` the kernel is smooth and a tensor Gauss
    rule is exact to round-off (the binomial expansion would lose accuracy
    like ``d^(p+q)`` there).
    """
    if not 0.0 < sigma <= 1.0:
        raise InvalidArgument(f"integral order must lie in (0, 1]: {sigma}")
    if d < 0 or int(d) != d:
        raise InvalidArgument(f"cell offset must be a non-negative integer: {d}")
    d, p, q = int(d), int(p), int(q)
    if d >= 2:
        x, w = gauss01(max(p, q) + 1 + (28 if d <= 3 else 16))
        ker = (d + x[:, None] - x[None, :]) ** (sigma - 1.0)
        return float((w * x**p) @ ker @ (w * x**q))
    try:
        return math.gamma(sigma) * _normalized_moment(sigma, d, p, q)
    except OverflowError as exc:
        raise AssemblyFailure(f"moment overflow for degrees ({p}, {q})") from exc


@lru_cache(maxsize=None)
def monomial_coefficients(N: int) -> np.ndarray:
    """``C[m, p]`` with ``phi_m(xi) = sum_p C[m, p] xi^p`` on ``[0, 1]``."""
    C = np.zeros((N + 1, N + 1))
    for m in range(N + 1):
        c = np.zeros(N + 1)
        c[m] = math.sqrt(2 * m + 1)
        # P_m(2 xi - 1) in the power basis of xi
        poly = np.polynomial.Polynomial(legendre.leg2poly(c))
        shifted = poly(np.polynomial.Polynomial([-1.0, 2.0]))
        C[m, : shifted.coef.size] = shifted.coef
    return C


def _block_closed_form(sigma: float, d: int, N: int) -> np.ndarray:
    mom = np.array(
        [[_normalized_moment(sigma, d, p, q) for q in range(N + 1)] for p in range(N + 1)]
    )
    C = monomial_coefficients(N)
    return C @ mom @ C.T


def _block_quadrature(sigma: float, d: int, N: int, nq: int | None = None) -> np.ndarray:
    if nq is None:
        nq = N + 1 + (28 if d <= 3 else 16)
    xq, wq = gauss01(nq)
    V = reference_values(N, xq) * wq[:, None]
    kern = (xq[:, None] - xq[None, :] + d) ** (sigma - 1.0)
    return V.T @ kern @ V / math.gamma(sigma)


def rl_block(sigma: float, d: int, N: int) -> np.ndarray:
    """Left RL integral block ``(phi_i(. - d), I^sigma phi_j)`` on unit cells."""
    if d <= 1:
        return _block_closed_form(sigma, d, N)
    return _block_quadrature(sigma, d, N)


# }}}


def assemble_rl_left(mesh: Mesh1D, N: int, sigma: float) -> np.ndarray:
    """Dense ``B[i, j] = (phi_i, I_L^sigma phi_j)`` (block lower triangular)."""
    _check_sigma(sigma)
    K, n = mesh.K, N + 1
    B = np.zeros((K * n, K * n))
    scale = mesh.h**sigma
    for d in range(K):
        blk = scale * rl_block(sigma, d, N)
        for k in range(d, K):
            B[k * n : (k + 1) * n, (k - d) * n : (k - d + 1) * n] = blk
    if not np.all(np.isfinite(B)):
        raise AssemblyFailure("non-finite entries in the fractional integral matrix")
    return B


def assemble_riesz_gram(mesh: Mesh1D, N: int, order: FracOrder) -> np.ndarray:
    B = assemble_rl_left(mesh, N, order.sigma)
    return order.riesz_constant * (B + B.T)


# {{{ LDG derivatives


def ldg_derivative(mesh: Mesh1D, N: int, side: str, boundary: str) -> np.ndarray:
    """Weak derivative ``(w, v) = -(u, v_x) + uhat v^-|_{k+1/2} - uhat v^+|_{k-1/2}``.

    ``side`` picks the interior trace used for ``uhat`` (``"minus"``: from the
    left cell, ``"plus"``: from the right cell).  ``boundary`` is ``"zero"``
    (homogeneous Dirichlet exterior value) or ``"interior"`` (the inner trace).
    """
    if side not in ("minus", "plus") or boundary not in ("zero", "interior"):
        raise InvalidArgument(f"bad flux configuration: {side!r}, {boundary!r}")
    basis = get_basis(N)
    K, n, h = mesh.K, N + 1, mesh.h
    S = (basis.dV * basis.wq[:, None]).T @ basis.V  # S[i, j] = int phi_i' phi_j
    L, R = basis.left, basis.right
    RR, LL = np.outer(R, R), np.outer(L, L)
    RL, LR = np.outer(R, L), np.outer(L, R)

    D = np.zeros((K * n, K * n))
    blk = lambda k, j: (slice(k * n, (k + 1) * n), slice(j * n, (j + 1) * n))  # noqa: E731
    for k in range(K):
        D[blk(k, k)] -= S
        # right face of cell k
        if k < K - 1:
            if side == "minus":
                D[blk(k, k)] += RR
            else:
                D[blk(k, k + 1)] += RL
        elif boundary == "interior":
            D[blk(k, k)] += RR
        # left face of cell k
        if k > 0:
            if side == "minus":
                D[blk(k, k - 1)] -= LR
            else:
                D[blk(k, k)] -= LL
        elif boundary == "interior":
            D[blk(k, k)] -= LL
    return D / h


def assemble_ldg_derivatives(
    mesh: Mesh1D, N: int, flux: str = "left"
) -> tuple[np.ndarray, np.ndarray]:
    """``(D_minus, D_plus)`` for ``r = d_x u`` and ``q = d_x r``.

    ``flux="left"`` takes ``uhat = u^-``, ``rhat = r^+``; ``"right"`` mirrors
    both.  ``uhat`` vanishes on the boundary, ``rhat`` uses interior traces, so
    ``D_plus == -D_minus.T``.
    """
    if flux == "left":
        return ldg_derivative(mesh, N, "minus", "zero"), ldg_derivative(mesh, N, "plus", "interior")
    if flux == "right":
        return ldg_derivative(mesh, N, "plus", "zero"), ldg_derivative(mesh, N, "minus", "interior")
    raise InvalidArgument(f"unknown flux orientation: {flux!r}")


def boundary_penalty(mesh: Mesh1D, N: int, flux: str = "left", alpha: float = PENALTY) -> np.ndarray:
    """``P`` from ``rhat = r_int -/+ (alpha / h) u_int`` at the end point where the
    one-sided choice for ``rhat`` would need exterior data (``x = b`` for
    ``flux="left"``, ``x = a`` for ``"right"``).  Without it the Dirichlet
    value there is only weakly enforced and the second-derivative chain loses
    about half an order.
    """
    if alpha < 0:
        raise InvalidArgument(f"penalty must be non-negative: {alpha}")
    basis = get_basis(N)
    n = N + 1
    e = np.zeros(mesh.K * n)
    if flux == "left":
        e[-n:] = basis.right
    elif flux == "right":
        e[:n] = basis.left
    else:
        raise InvalidArgument(f"unknown flux orientation: {flux!r}")
    e /= math.sqrt(mesh.h)
    return (alpha / mesh.h) * np.outer(e, e)


# }}}


@dataclass(frozen=True)
class FracSpaceOperators:
    mesh: Mesh1D
    N: int
    order: FracOrder
    flux: str
    M: np.ndarray = field(repr=False)
    D_minus: np.ndarray = field(repr=False)
    D_plus: np.ndarray = field(repr=False)
    P: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)

    @property
    def ndof(self) -> int:
        return self.M.shape[0]

    @property
    def laplacian(self) -> np.ndarray:
        """Classical LDG second derivative ``M^-1 (D_plus M^-1 D_minus - P)``."""
        return self.D_plus @ self.D_minus - self.P


def build_operators(
    mesh: Mesh1D,
    N: int,
    beta: float | FracOrder,
    flux: str = "left",
    penalty: float = PENALTY,
) -> FracSpaceOperators:
    order = beta if isinstance(beta, FracOrder) else FracOrder(float(beta))
    Dm, Dp = assemble_ldg_derivatives(mesh, N, flux)
    P = boundary_penalty(mesh, N, flux, penalty)
    G = assemble_riesz_gram(mesh, N, order)
    M = np.eye(mesh.K * (N + 1))
    # orthonormal basis: M^-1 is the identity
    A = G @ (Dp @ Dm - P)
    return FracSpaceOperators(mesh, N, order, flux, M, Dm, Dp, P, G, A)


def frac_laplacian_apply(ops: FracSpaceOperators, u: ModalField | np.ndarray):
    """Discrete ``-(-Delta)^{beta/2} u``: solves ``M p = A u``."""
    if isinstance(u, ModalField):
        if u.mesh.K != ops.mesh.K or u.N != ops.N:
            raise InvalidArgument("field does not match the operator space")
        return ModalField(ops.mesh, ops.N, ops.A @ u.flat)
    u = np.asarray(u, dtype=float)
    if u.shape[0] != ops.ndof:
        raise InvalidArgument(f"expected {ops.ndof} coefficients, got {u.shape[0]}")
    return ops.A @ u
