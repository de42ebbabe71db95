"""Manufactured solutions for the four model problems on ``[-1, 1]``.

All exact solutions have the separable form ``t^2 X(x)`` with
``X = (x^2 - 1)^m``, so the distributed-order time term reduces to
``X(x) * D^W[t^2]`` and the space term to ``t^2 (-Delta)^{beta/2} X``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy.special import gamma

from .errors import InvalidArgument, InvalidManufacturedSolution
from .frac_time import DistOrderScheme, WeightFunction, apply_scalar, weight_function

CASES = ("ex1", "ex2", "ex3", "ex4")
FORCING_MODES = {"analytic": "analytic", "discrete": "discrete", "discrete_consistent": "discrete"}
_ALIASES = {
    "ex1_diffusion": "ex1",
    "ex2_burgers": "ex2",
    "ex3_nls": "ex3",
    "ex4_coupled": "ex4",
}


def dist_order_of_t2(W: str | WeightFunction | Callable, t: float, S: int | None = None) -> float:
    """``int_0^1 W(alpha) cD^alpha[t^2] dalpha`` with ``cD^alpha t^2 = 2 t^(2-alpha) / Gamma(3-alpha)``.

    With ``S`` given the alpha integral is taken by the ``S``-point mid-point
    rule (the rule used by the time discretization); otherwise the closed form
    is used for ``gamma3`` and a 200-point Gauss rule for any other weight.
    """
    W = weight_function(W)
    if not t > 0:
        raise InvalidArgument(f"distributed-order derivative of t^2 needs t > 0: {t}")
    if S is not None:
        if S < 1:
            raise InvalidArgument(f"S must be >= 1: {S}")
        alpha = (np.arange(1, S + 1) - 0.5) / S
        w = np.full(S, 1.0 / S)
    elif W.name == "gamma3":
        lt = math.log(t)
        if abs(lt) < 1e-6:
            # 2 (t^2 - t) / ln t = 2 t (e^lt - 1) / lt
            return 2.0 * t * (1.0 + lt / 2.0 + lt * lt / 6.0)
        return 2.0 * (t * t - t) / lt
    else:
        x, w = legendre.leggauss(200)
        alpha = 0.5 * (x + 1.0)
        w = 0.5 * w
    vals = np.asarray(W(alpha), dtype=float) * 2.0 * t ** (2.0 - alpha) / gamma(3.0 - alpha)
    return float(np.dot(w, vals))


# {{{ fractional Laplacian of polynomials


def _as_fractions(coeffs: Sequence) -> list[Fraction]:
    return [c if isinstance(c, Fraction) else Fraction(c) for c in coeffs]


def taylor_shift(coeffs: Sequence, c) -> list[Fraction]:
    """Coefficients of ``p(x)`` in powers of ``(x - c)`` (exact rational arithmetic)."""
    a = _as_fractions(coeffs)
    c = Fraction(c)
    n = len(a)
    # repeated synthetic division
    out = []
    work = list(a)
    for _ in range(n):
        acc = Fraction(0)
        quot = [Fraction(0)] * (len(work) - 1)
        for i in range(len(work) - 1, -1, -1):
            acc = acc * c + work[i]
            if i > 0:
                quot[i - 1] = acc
        out.append(acc)
        work = quot
        if not work:
            break
    return out + [Fraction(0)] * (n - len(out))


def bump_coefficients(m: int) -> list[Fraction]:
    """Power-basis coefficients of ``(x^2 - 1)^m``."""
    out = [Fraction(0)] * (2 * m + 1)
    for i in range(m + 1):
        out[2 * i] = Fraction(math.comb(m, i) * (-1) ** (m - i))
    return out


def _rl_power_sum(shifted: list[Fraction], beta: float, y: np.ndarray) -> np.ndarray:
    total = np.zeros_like(y, dtype=float)
    for k, ck in enumerate(shifted):
        if ck == 0:
            continue
        total += float(ck) * math.gamma(k + 1) / math.gamma(k + 1 - beta) * y ** (k - beta)
    return total


def frac_laplacian_poly(coeffs: Sequence, beta: float, x) -> np.ndarray | float:
    """``(-Delta)^{beta/2}`` of the zero extension of a polynomial on ``[-1, 1]``.

    *coeffs* are power-basis coefficients (lowest first).  The left and right
    Riemann-Liouville derivatives follow from the power rule after expanding
    in ``(1 + x)`` and ``(1 - x)``; they combine as
    ``(D_L + D_R) / (2 cos(beta pi / 2))``.
    """
    if not 1.0 < beta < 2.0:
        raise InvalidArgument(f"beta must lie in (1, 2): {beta}")
    at_left = taylor_shift(coeffs, -1)
    at_right = taylor_shift(coeffs, 1)
    if at_left[0] != 0 or at_right[0] != 0:
        raise InvalidManufacturedSolution("polynomial does not vanish at x = +-1")
    # powers of (1 - x): flip odd coefficients of the (x - 1) expansion
    at_right = [c * (-1) ** k for k, c in enumerate(at_right)]

    xa = np.asarray(x, dtype=float)
    if np.any(~(np.abs(xa) <= 1.0)):
        raise InvalidArgument("fractional Laplacian is evaluated on [-1, 1] only")
    with np.errstate(divide="ignore"):
        # a simple root at an end point makes the value there infinite
        out = (
            _rl_power_sum(at_left, beta, 1.0 + xa) + _rl_power_sum(at_right, beta, 1.0 - xa)
        ) / (2.0 * math.cos(0.5 * math.pi * beta))
    if xa.ndim == 0:
        return float(out)
    return out


# }}}


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact data of one example; ``eps`` lists the equation coefficients."""

    case_id: str
    family: str
    power: int
    beta: float
    eps: tuple[float, ...]

    @property
    def n_fields(self) -> int:
        return {"diffusion": 1, "convection_diffusion": 1, "nls": 2, "coupled_nls": 4}[
            self.family
        ]

    def profile(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) ** 2 - 1.0) ** self.power

    def profile_laplacian(self, x) -> np.ndarray:
        return frac_laplacian_poly(bump_coefficients(self.power), self.beta, x)

    def exact(self, x, t: float) -> tuple[np.ndarray, ...]:
        u = t * t * self.profile(x)
        return (u,) * self.n_fields

    def forcing(self, x, t: float, time_term: float) -> tuple[np.ndarray, ...]:
        """Right-hand side at *t*; ``time_term`` is ``D^W[t^2]`` (exact or discrete)."""
        X = self.profile(x)
        LX = self.profile_laplacian(x)
        t2 = t * t
        if self.family in ("diffusion", "convection_diffusion"):
            (eps,) = self.eps[:1]
            g = X * time_term + eps * t2 * LX
            if self.family == "convection_diffusion":
                xa = np.asarray(x, dtype=float)
                g = g + 8.0 * t**4 * xa * (xa * xa - 1.0) ** 7
            return (g,)
        if self.family == "nls":
            eps = self.eps[0]
            a = X * time_term
            b = -eps * t2 * LX + 2.0 * t**6 * X**3
            # (1 + i)(b + i a)
            return (b - a, a + b)
        eps1, _, eps3, _ = self.eps
        a = X * time_term
        b1 = -eps1 * t2 * LX + 8.0 * t**6 * X**3
        b2 = -eps3 * t2 * LX + 16.0 * t**6 * X**3
        return (b1 - a, a + b1, b2 - a, a + b2)


def canonical_case(case_id: str) -> str:
    """``"ex2_burgers"`` -> ``"ex2"``; unknown ids are returned unchanged."""
    cid = str(case_id).strip().lower()
    return _ALIASES.get(cid, cid)


def make_case(case_id: str, beta: float) -> ManufacturedCase:
    cid = canonical_case(case_id)
    if cid == "ex1":
        eps = math.gamma(8 - beta) / math.gamma(8)
        return ManufacturedCase("ex1", "diffusion", 4, beta, (eps,))
    if cid == "ex2":
        eps = math.gamma(8 - beta) / math.gamma(8)
        return ManufacturedCase("ex2", "convection_diffusion", 4, beta, (eps,))
    if cid == "ex3":
        eps = math.gamma(10 - beta) / math.gamma(10)
        return ManufacturedCase("ex3", "nls", 5, beta, (eps, 1.0))
    if cid == "ex4":
        eps = math.gamma(13 - beta) / (2.0 * math.gamma(13))
        return ManufacturedCase("ex4", "coupled_nls", 6, beta, (eps, 2.0, eps, 4.0))
    raise InvalidArgument(f"unknown manufactured case: {case_id!r}")


def exact_solution(case: ManufacturedCase, x, t: float):
    """Real field for real problems, ``(re, im)`` pairs for complex ones."""
    vals = case.exact(x, t)
    if case.n_fields == 1:
        return vals[0]
    return vals


def time_terms(
    mode: str, scheme: DistOrderScheme, reference: DistOrderScheme | None = None
) -> np.ndarray:
    """``D^W[t^2]`` at every level ``t_n`` (entry 0 unused).

    ``"analytic"`` uses the continuous value, ``"discrete"`` applies the
    discrete operator of *reference* (defaults to *scheme*) to the samples
    ``t_n^2`` so that the time discretization error of the solver cancels.
    """
    t = scheme.times()
    out = np.zeros_like(t)
    mode = FORCING_MODES.get(mode, mode)
    if mode == "analytic":
        for n in range(1, t.size):
            out[n] = dist_order_of_t2(scheme.weight, t[n])
        return out
    if mode == "discrete":
        ref = scheme if reference is None else reference
        if ref.M != scheme.M or not math.isclose(ref.dt, scheme.dt):
            raise InvalidArgument("reference scheme must share the time grid")
        return apply_scalar(ref, t * t)
    raise InvalidArgument(f"unknown forcing mode: {mode!r}")


def forcing(
    case: ManufacturedCase,
    x,
    t_n: float,
    scheme: DistOrderScheme,
    mode: str = "analytic",
):
    """Forcing at ``t_n`` (must be a level of *scheme* in discrete mode)."""
    if not t_n > 0:
        raise InvalidArgument(f"forcing needs t_n > 0: {t_n}")
    mode = FORCING_MODES.get(mode, mode)
    if mode == "analytic":
        term = dist_order_of_t2(scheme.weight, t_n)
    else:
        n = int(round(t_n / scheme.dt))
        if not math.isclose(n * scheme.dt, t_n, rel_tol=1e-12) or not 1 <= n <= scheme.M:
            raise InvalidArgument(f"t_n = {t_n} is not a level of the scheme")
        term = time_terms("discrete", scheme)[n]
    vals = case.forcing(x, t_n, term)
    return vals[0] if case.n_fields == 1 else vals
