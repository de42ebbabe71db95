"""Uniform 1-D meshes, orthonormal modal Legendre basis, projection and norms.

Every element carries the basis ``phi_m(x) = sqrt((2m + 1) / h) P_m(2 xi - 1)``
with ``xi`` the local coordinate in ``[0, 1]``, so the global mass matrix is
the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import legendre

from .errors import InvalidArgument

ScalarFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Mesh1D:
    a: float
    b: float
    K: int
    nodes: np.ndarray = field(repr=False, compare=False)

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.K

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def left(self) -> np.ndarray:
        return self.nodes[:-1]

    def locate(self, x: np.ndarray, side: str = "plus") -> np.ndarray:
        """Element index holding *x*; ``side`` picks the cell at a face."""
        s = (np.asarray(x, dtype=float) - self.a) / self.h
        if side == "plus":
            k = np.floor(s)
        elif side == "minus":
            k = np.ceil(s) - 1
        else:
            raise InvalidArgument(f"unknown trace side: {side!r}")
        return np.clip(k, 0, self.K - 1).astype(np.int64)


def build_mesh(a: float, b: float, K: int) -> Mesh1D:
    if not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidArgument(f"non-finite domain endpoints: ({a}, {b})")
    if not a < b:
        raise InvalidArgument(f"expected a < b, got ({a}, {b})")
    if int(K) != K or K < 1:
        raise InvalidArgument(f"element count must be a positive integer: {K}")
    K = int(K)
    nodes = np.linspace(a, b, K + 1)
    nodes[0], nodes[-1] = a, b
    return Mesh1D(float(a), float(b), K, nodes)


@dataclass(frozen=True)
class Basis:
    """Reference tables on ``[0, 1]`` for polynomials of degree ``N``."""

    N: int
    xq: np.ndarray = field(repr=False)
    wq: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    dV: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)

    @property
    def nq(self) -> int:
        return self.xq.size


def _scale(N: int) -> np.ndarray:
    return np.sqrt(2.0 * np.arange(N + 1) + 1.0)


def reference_values(N: int, xi: np.ndarray) -> np.ndarray:
    """``(len(xi), N+1)`` table of the orthonormal basis on ``[0, 1]``."""
    xi = np.asarray(xi, dtype=float)
    return legendre.legvander(2.0 * xi - 1.0, N) * _scale(N)


def reference_derivatives(N: int, xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    out = np.empty((xi.size, N + 1))
    for m in range(N + 1):
        c = np.zeros(N + 1)
        c[m] = 1.0
        out[:, m] = 2.0 * legendre.legval(2.0 * xi - 1.0, legendre.legder(c))
    return out * _scale(N)


def gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def get_basis(N: int, nq: int | None = None) -> Basis:
    if int(N) != N or N < 0:
        raise InvalidArgument(f"polynomial degree must be >= 0: {N}")
    N = int(N)
    nq = N + 3 if nq is None else int(nq)
    xq, wq = gauss01(nq)
    return Basis(
        N=N,
        xq=xq,
        wq=wq,
        V=reference_values(N, xq),
        dV=reference_derivatives(N, xq),
        left=reference_values(N, np.array([0.0]))[0],
        right=reference_values(N, np.array([1.0]))[0],
    )


@dataclass(frozen=True)
class ModalField:
    mesh: Mesh1D
    N: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=float).reshape(self.mesh.K, self.N + 1)
        object.__setattr__(self, "coeffs", c)

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    def __len__(self) -> int:
        return self.coeffs.size

    @classmethod
    def zeros(cls, mesh: Mesh1D, N: int) -> ModalField:
        return cls(mesh, N, np.zeros((mesh.K, N + 1)))

    def norm(self) -> float:
        """L2 norm, exact because the basis is orthonormal."""
        return float(np.linalg.norm(self.coeffs))

    def __call__(self, x, side: str = "plus"):
        return eval_field(self, x, side=side)


def quadrature_points(mesh: Mesh1D, nq: int) -> tuple[np.ndarray, np.ndarray]:
    """Physical points ``(K, nq)`` and weights ``(nq,)`` (weights include ``h``)."""
    xq, wq = gauss01(nq)
    return mesh.left[:, None] + mesh.h * xq[None, :], mesh.h * wq


def project_l2(
    f: ScalarFunction, mesh: Mesh1D, N: int, nq: int | None = None
) -> ModalField:
    basis = get_basis(N)
    nq = basis.nq if nq is None else nq
    xq, wq = gauss01(nq)
    V = reference_values(N, xq)
    x = mesh.left[:, None] + mesh.h * xq[None, :]
    fx = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    coeffs = np.sqrt(mesh.h) * (fx * wq) @ V
    return ModalField(mesh, N, coeffs)


def eval_field(u: ModalField, x, side: str = "plus"):
    """Evaluate *u* at *x*; ``side`` selects ``u^-`` or ``u^+`` at faces."""
    mesh = u.mesh
    xa = np.asarray(x, dtype=float)
    tol = 1e-14 * (mesh.b - mesh.a)
    if np.any(~np.isfinite(xa)) or np.any(xa < mesh.a - tol) or np.any(xa > mesh.b + tol):
        raise InvalidArgument("evaluation point outside the mesh domain")
    flat = xa.reshape(-1)
    k = mesh.locate(flat, side=side)
    xi = np.clip((flat - mesh.left[k]) / mesh.h, 0.0, 1.0)
    V = reference_values(u.N, xi)
    vals = np.einsum("ij,ij->i", V, u.coeffs[k]) / np.sqrt(mesh.h)
    if xa.ndim == 0:
        return float(vals[0])
    return vals.reshape(xa.shape)


def field_at_quadrature(u: ModalField, nq: int | None = None) -> np.ndarray:
    nq = get_basis(u.N).nq if nq is None else nq
    xq, _ = gauss01(nq)
    return u.coeffs @ reference_values(u.N, xq).T / np.sqrt(u.mesh.h)


def l2_error(u: ModalField, exact: ScalarFunction, nq: int | None = None) -> float:
    nq = u.N + 3 if nq is None else max(int(nq), u.N + 3)
    x, w = quadrature_points(u.mesh, nq)
    diff = field_at_quadrature(u, nq) - np.asarray(exact(x), dtype=float)
    return float(np.sqrt(np.sum(diff**2 * w)))


def inner(u: ModalField, v: ModalField) -> float:
    return float(np.dot(u.flat, v.flat))
