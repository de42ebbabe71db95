"""Distributed-order Caputo time operator.

The order integral over ``alpha in (0, 1)`` is replaced by the mid-point rule
on ``S`` cells and every node is discretized with the L1 formula::

    D^W u(t_n) ~ sum_j w_j / lam_j * (u^n - sum_{l=1}^{n-1} (a_{n-l-1} - a_{n-l}) u^l
                                          - a_{n-1} u^0)

with ``w_j = W(alpha_j) / S``, ``lam_j = dt**alpha_j * Gamma(2 - alpha_j)`` and
``a_l = (l + 1)**(1 - alpha_j) - l**(1 - alpha_j)``.  Solvers only need the
implicit coefficient ``c0 = sum_j w_j / lam_j`` and the history term, which is
collapsed over ``j`` into one coefficient per time lag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gamma

from ._accel import HAVE_NUMBA, njit
from .dg_core import ModalField
from .errors import InvalidArgument, InvalidWeight


@dataclass(frozen=True)
class WeightFunction:
    name: str
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)

    def __call__(self, alpha):
        return self.func(alpha)


FLAT = WeightFunction("flat", lambda a: np.ones_like(np.asarray(a, dtype=float)))
GAMMA3 = WeightFunction("gamma3", lambda a: gamma(3.0 - np.asarray(a, dtype=float)))

PRESETS = {"flat": FLAT, "gamma3": GAMMA3}


def weight_function(spec: str | WeightFunction | Callable) -> WeightFunction:
    if isinstance(spec, WeightFunction):
        return spec
    if isinstance(spec, str):
        try:
            return PRESETS[spec]
        except KeyError:
            raise InvalidArgument(f"unknown weight preset: {spec!r}") from None
    if callable(spec):
        return WeightFunction(getattr(spec, "__name__", "custom"), spec)
    raise InvalidArgument(f"cannot interpret weight function: {spec!r}")


def l1_coefficients(alpha: float, count: int) -> np.ndarray:
    """``a_l = (l+1)^(1-alpha) - l^(1-alpha)`` for ``l = 0..count-1``."""
    l = np.arange(count, dtype=float)
    return (l + 1.0) ** (1.0 - alpha) - l ** (1.0 - alpha)


@dataclass(frozen=True)
class DistOrderScheme:
    weight: WeightFunction
    S: int
    dt: float
    M: int
    alphas: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    c0: float = 0.0
    # lag_coeffs[m] multiplies u^{n-m} for 1 <= m <= n-1, start_coeffs[n-1] multiplies u^0
    lag_coeffs: np.ndarray = field(repr=False, default=None)
    start_coeffs: np.ndarray = field(repr=False, default=None)

    @property
    def theta(self) -> float:
        return 1.0 / self.S

    @property
    def T(self) -> float:
        return self.M * self.dt

    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.M + 1)


def build_dist_order_scheme(
    W: str | WeightFunction | Callable, S: int, dt: float, M: int
) -> DistOrderScheme:
    W = weight_function(W)
    if int(S) != S or S < 1:
        raise InvalidArgument(f"quadrature node count must be >= 1: {S}")
    if not (math.isfinite(dt) and dt > 0):
        raise InvalidArgument(f"time step must be positive: {dt}")
    if int(M) != M or M < 0:
        raise InvalidArgument(f"number of time levels must be >= 0: {M}")
    S, M = int(S), int(M)

    alphas = (2.0 * np.arange(1, S + 1) - 1.0) / (2.0 * S)
    Wj = np.asarray(W(alphas), dtype=float) * np.ones(S)
    if not np.all(np.isfinite(Wj)) or np.any(Wj < 0):
        raise InvalidWeight(f"weight {W.name!r} is negative or non-finite at a node")
    weights = Wj / S
    lam = dt**alphas * gamma(2.0 - alphas)
    count = max(M, 1)
    a = np.stack([l1_coefficients(al, count) for al in alphas])
    scale = weights / lam
    c0 = float(np.sum(scale))

    start = scale @ a
    lag = np.zeros(count)
    lag[1:] = scale @ (a[:, :-1] - a[:, 1:])

    return DistOrderScheme(
        weight=W,
        S=S,
        dt=float(dt),
        M=M,
        alphas=alphas,
        weights=weights,
        lam=lam,
        a=a,
        c0=c0,
        lag_coeffs=lag,
        start_coeffs=start,
    )


def caputo_l1_apply(alpha: float, dt: float, samples: Sequence[float]) -> float:
    """L1 approximation of the Caputo derivative of order *alpha* at the last sample."""
    if not 0.0 < alpha < 1.0:
        raise InvalidArgument(f"order must lie in (0, 1): {alpha}")
    y = np.asarray(samples, dtype=float)
    n = y.size - 1
    if n < 1:
        raise InvalidArgument("need at least two samples y^0, y^1")
    a = l1_coefficients(alpha, n)
    lam = dt**alpha * math.gamma(2.0 - alpha)
    acc = y[n] - a[n - 1] * y[0]
    if n > 1:
        l = np.arange(1, n)
        acc -= np.sum((a[n - l - 1] - a[n - l]) * y[1:n])
    return float(acc / lam)


# {{{ history kernels


@njit(cache=True)
def _history_numba(U, n, lag, start):
    # row-wise sweep (contiguous) with a Kahan compensation per dof
    ndof = U.shape[1]
    s = start[n - 1] * U[0]
    c = np.zeros(ndof)
    for l in range(1, n):
        w = lag[n - l]
        row = U[l]
        for i in range(ndof):
            y = w * row[i] - c[i]
            t = s[i] + y
            c[i] = (t - s[i]) - y
            s[i] = t
    return s


def _history_numpy(U, n, lag, start):
    # pairwise summation along the contiguous lag axis
    if n == 1:
        return start[0] * U[0]
    terms = np.ascontiguousarray(U[1:n].T) * lag[n - 1 : 0 : -1]
    return start[n - 1] * U[0] + np.sum(terms, axis=1)


def history_kernel(U: np.ndarray, n: int, lag: np.ndarray, start: np.ndarray,
                   use_numba: bool | None = None) -> np.ndarray:
    """History sum over the first ``n`` rows of ``U`` (shape ``(>=n, ndof)``)."""
    if use_numba is None:
        use_numba = HAVE_NUMBA
    if use_numba:
        return _history_numba(np.ascontiguousarray(U), n, lag, start)
    return _history_numpy(U, n, lag, start)


# }}}


def history_rhs(
    scheme: DistOrderScheme, history: Sequence[ModalField] | np.ndarray, n: int
) -> ModalField | np.ndarray:
    """History part of the discrete operator so that ``D u^n = c0 u^n - history_rhs``."""
    if not 1 <= n <= max(scheme.M, 1):
        raise InvalidArgument(f"time level {n} outside 1..{scheme.M}")
    if isinstance(history, np.ndarray):
        if history.shape[0] < n:
            raise InvalidArgument(f"history has {history.shape[0]} levels, need {n}")
        return history_kernel(history, n, scheme.lag_coeffs, scheme.start_coeffs)

    fields = list(history)[:n]
    if len(fields) < n:
        raise InvalidArgument(f"history has {len(fields)} levels, need {n}")
    ref = fields[0]
    for f in fields[1:]:
        if f.mesh is not ref.mesh and (f.mesh.K != ref.mesh.K or f.N != ref.N):
            raise InvalidArgument("history fields live on different spaces")
        if f.N != ref.N:
            raise InvalidArgument("history fields have different degrees")
    U = np.stack([f.flat for f in fields])
    out = history_kernel(U, n, scheme.lag_coeffs, scheme.start_coeffs)
    return ModalField(ref.mesh, ref.N, out)


def apply_scalar(scheme: DistOrderScheme, y: np.ndarray) -> np.ndarray:
    """Discrete distributed-order derivative of samples ``y^0..y^M`` at every level.

    Entry 0 is set to zero (the operator is undefined at ``t = 0``).
    """
    y = np.asarray(y, dtype=float)
    M = y.size - 1
    out = np.zeros(M + 1)
    if M < 1:
        return out
    lag, start = scheme.lag_coeffs, scheme.start_coeffs
    if lag.size < M:
        raise InvalidArgument("scheme has fewer time levels than samples")
    n = np.arange(1, M + 1)
    # lag[0] == 0, so conv[n-1] == sum_{l=1}^{n-1} lag[n-l] y[l]
    conv = np.convolve(lag[:M], y[1:], mode="full")[:M]
    out[1:] = scheme.c0 * y[1:] - start[n - 1] * y[0] - conv
    return out
