"""Small dense kernels: signatures, finite differences, path quadrature.

Matrix orders here never exceed ``2m + 1`` with ``m <= 4``, so everything is
direct and dense; numpy does the linear algebra.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .dsl import DomainError

__all__ = [
    "DegenerateError", "FDConfig", "PathSpec", "symmetrize", "is_symmetric",
    "inverse", "det", "signature", "pfaffian", "fd_derivative", "fd_jacobian",
    "fd_hessian", "gauss_legendre", "line_integral",
]


class DegenerateError(ValueError):
    """A quantity is undefined because a matrix is (numerically) singular."""


def symmetrize(M) -> np.ndarray:
    """Return ``(M + M^T)/2``; the result is exactly symmetric."""
    M = np.asarray(M)
    return 0.5 * (M + M.T)


def is_symmetric(M, tol: float = 0.0) -> bool:
    M = np.asarray(M)
    return M.ndim == 2 and M.shape[0] == M.shape[1] and bool(np.all(np.abs(M - M.T) <= tol))


def inverse(M) -> np.ndarray:
    M = np.asarray(M)
    try:
        return np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise DegenerateError("matrix is singular") from exc


def det(M) -> float:
    return np.linalg.det(np.asarray(M))


def signature(M, tol: float | None = None) -> tuple[int, int]:
    """Inertia ``(p, q)`` of a real symmetric or complex Hermitian matrix.

    ``tol`` defaults to ``1e-12 * (1 + max|M_ij|)``.  Any eigenvalue inside
    ``(-tol, tol)`` makes the signature undefined.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("signature needs a square matrix")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if not np.allclose(M, M.conj().T, rtol=0, atol=1e-12 * (1 + scale)):
        raise ValueError("signature needs a symmetric/Hermitian matrix")
    if tol is None:
        tol = 1e-12 * (1 + scale)
    ev = np.linalg.eigvalsh(0.5 * (M + M.conj().T))
    if np.any(np.abs(ev) < tol):
        raise DegenerateError("signature undefined: eigenvalue within tolerance of 0")
    return int(np.sum(ev > 0)), int(np.sum(ev < 0))


def pfaffian(W) -> float:
    """Pfaffian of an antisymmetric matrix by expansion along the first row."""
    W = np.asarray(W, dtype=float)
    n = W.shape[0]
    if n % 2:
        return 0.0
    if n == 0:
        return 1.0
    total = 0.0
    rest = list(range(1, n))
    for k, j in enumerate(rest):
        if W[0, j] == 0:
            continue
        keep = [r for r in rest if r != j]
        total += (-1) ** k * W[0, j] * pfaffian(W[np.ix_(keep, keep)])
    return total


# ---------------------------------------------------------------------------
# finite differences


@dataclass(frozen=True)
class FDConfig:
    """Central-difference step (relative to coordinate magnitude) and Richardson levels."""

    base_step: float = 1e-5
    levels: int = 2

    def __post_init__(self):
        if not 1e-9 < self.base_step < 1e-2:
            raise ValueError(f"base_step {self.base_step} outside (1e-9, 1e-2)")
        if not 1 <= int(self.levels) <= 4 or int(self.levels) != self.levels:
            raise ValueError(f"levels {self.levels} must be an integer in 1..4")

    def step(self, point) -> float:
        return self.base_step * max(1.0, float(np.max(np.abs(point))) if np.size(point) else 1.0)


def _safe_eval(fn, x):
    try:
        val = np.asarray(fn(x), dtype=float)
    except (DomainError, DegenerateError, ZeroDivisionError) as exc:
        raise DomainError(f"finite-difference stencil leaves the domain: {exc}") from exc
    if not np.all(np.isfinite(val)):
        raise DomainError("finite-difference stencil leaves the domain: non-finite value")
    return val


def fd_derivative(fn: Callable, point, direction, cfg: FDConfig = FDConfig()) -> np.ndarray:
    """Directional derivative of ``fn`` at ``point`` along ``direction``.

    Central differences at steps ``h, h/2, ...`` combined by Richardson
    extrapolation; the error is ``O(h^(2*levels))``.  The output has the
    shape of ``fn(point)``.
    """
    x = np.asarray(point, dtype=float)
    d = np.asarray(direction, dtype=float)
    h = cfg.step(x)
    table = []
    for k in range(cfg.levels):
        hk = h / 2**k
        table.append((_safe_eval(fn, x + hk * d) - _safe_eval(fn, x - hk * d)) / (2 * hk))
    for j in range(1, cfg.levels):
        factor = 4.0**j
        table = [(factor * table[k + 1] - table[k]) / (factor - 1) for k in range(len(table) - 1)]
    return table[0]


def fd_jacobian(fn: Callable, point, cfg: FDConfig = FDConfig()) -> np.ndarray:
    """All coordinate partials: ``out[b, ...] = d fn / d x_b``."""
    x = np.asarray(point, dtype=float)
    eye = np.eye(x.size)
    return np.stack([fd_derivative(fn, x, eye[b], cfg) for b in range(x.size)])


def fd_hessian(fn: Callable[[np.ndarray], float], point, cfg: FDConfig = FDConfig()) -> np.ndarray:
    """Hessian of a scalar function from second differences with Richardson extrapolation."""
    x = np.asarray(point, dtype=float)
    n = x.size
    h = cfg.step(x)
    f0 = float(_safe_eval(fn, x))
    eye = np.eye(n)
    cache: dict = {}

    def f(offset):
        key = tuple(np.round(offset / (h / 2 ** (cfg.levels - 1))).astype(int))
        if key not in cache:
            cache[key] = float(_safe_eval(fn, x + offset))
        return cache[key]

    tables = []
    for k in range(cfg.levels):
        hk = h / 2**k
        H = np.empty((n, n))
        for i in range(n):
            ei = hk * eye[i]
            H[i, i] = (f(ei) - 2 * f0 + f(-ei)) / hk**2
            for j in range(i + 1, n):
                ej = hk * eye[j]
                H[i, j] = H[j, i] = (f(ei + ej) - f(ei - ej) - f(-ei + ej) + f(-ei - ej)) / (4 * hk**2)
        tables.append(H)
    for j in range(1, cfg.levels):
        factor = 4.0**j
        tables = [(factor * tables[k + 1] - tables[k]) / (factor - 1) for k in range(len(tables) - 1)]
    return tables[0]


# ---------------------------------------------------------------------------
# path quadrature


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on ``[0, 1]``."""
    t, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (t + 1.0), 0.5 * w


@dataclass(frozen=True)
class PathSpec:
    """Polyline in ``C^m`` with a Gauss-Legendre order per segment."""

    waypoints: tuple
    order: int | tuple = 16

    def __init__(self, waypoints: Sequence, order: int | Sequence[int] = 16):
        pts = tuple(np.atleast_1d(np.asarray(w, dtype=complex)) for w in waypoints)
        if len(pts) < 2:
            raise ValueError("a path needs at least two waypoints")
        for a, b in zip(pts, pts[1:]):
            if a.shape != b.shape:
                raise ValueError("waypoints must share one dimension")
            if np.array_equal(a, b):
                raise ValueError("consecutive waypoints must be distinct")
        if not isinstance(order, int):
            order = tuple(int(o) for o in order)
            if len(order) != len(pts) - 1:
                raise ValueError("need one quadrature order per segment")
        object.__setattr__(self, "waypoints", pts)
        object.__setattr__(self, "order", order)

    def segment_orders(self) -> list[int]:
        if isinstance(self.order, int):
            return [self.order] * (len(self.waypoints) - 1)
        return list(self.order)

    def __add__(self, other: "PathSpec") -> "PathSpec":
        if not np.array_equal(self.waypoints[-1], other.waypoints[0]):
            raise ValueError("paths do not join")
        return PathSpec(self.waypoints + other.waypoints[1:], self.segment_orders() + other.segment_orders())


def line_integral(form: Callable[[np.ndarray], np.ndarray], path: PathSpec) -> float:
    """Integrate a real 1-form along a polyline in the z-domain.

    ``form(z)`` returns the coefficients of ``dx^1..dx^m, dv^1..dv^m`` where
    ``z = x + i v``.
    """
    total = 0.0
    for (a, b), order in zip(zip(path.waypoints, path.waypoints[1:]), path.segment_orders()):
        dz = b - a
        dxi = np.concatenate([dz.real, dz.imag])
        t, w = gauss_legendre(order)
        try:
            coeffs = np.array([form(a + tk * dz) for tk in t], dtype=float)
        except (DomainError, DegenerateError, ZeroDivisionError) as exc:
            raise DomainError(f"path crosses singular/degenerate locus: {exc}") from exc
        if not np.all(np.isfinite(coeffs)):
            raise DomainError("path crosses singular/degenerate locus: non-finite form value")
        total += float(w @ (coeffs @ dxi))
    return total
