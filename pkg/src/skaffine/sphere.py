"""Realisation as a parabolic affine hypersphere.

The flat (Darboux) coordinates are ``q = (x, y) = (Re z, Re dF/dz)``.  The
graph potential ``u(q)`` has ``du = sum_i s_i dx^i - v^i dy_i`` with
``s = Im dF/dz`` and ``v = Im z``, so ``Hess_q u = G`` where::

    G = [[B + A B^-1 A, -A B^-1],
         [-B^-1 A,       B^-1  ]]

and ``det G = 1`` identically.  The graph ``(x, y, u)`` with constant
transversal ``e_{2m+1}`` is the Blaschke immersion.
"""
from __future__ import annotations

import math
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dsl import Const, DomainError, Prepotential, jet
from .numerics import (
    DegenerateError, FDConfig, PathSpec, fd_hessian, inverse, line_integral,
    pfaffian, signature,
)
from .point import SKPoint, sk_point, tol_deg, xi_to_z, z_to_xi

__all__ = [
    "DarbouxFrame", "ImmersionSample", "Immersion", "GridSpec", "CongruenceResult",
    "darboux", "darboux_frame", "metric_G", "potential_form", "potential_u",
    "fd_hessian_u", "ma_residual", "constancy_certificates", "immerse",
    "is_quadratic", "paraboloid_congruence", "complex_structure_0",
]


def complex_structure_0(m: int) -> np.ndarray:
    """Standard complex structure in the ``(x, v)`` chart: ``J d/dx = d/dv``."""
    I, O = np.eye(m), np.zeros((m, m))
    return np.block([[O, -I], [I, O]])


@dataclass(frozen=True)
class DarbouxFrame:
    x: np.ndarray
    y: np.ndarray
    T: np.ndarray  # d(x, y)/d(x, v)
    G: np.ndarray
    Jmat: np.ndarray
    omega: np.ndarray  # omega(X, Y) = G(JX, Y)

    @property
    def q(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])


def darboux(p: SKPoint) -> tuple[np.ndarray, np.ndarray]:
    return p.z.real.copy(), p.jet.grad.real.copy()


def metric_G(p: SKPoint) -> np.ndarray:
    """Blaschke metric in Darboux coordinates (closed form)."""
    p.require_nondegenerate()
    A, B = p.A, p.B
    Binv = inverse(B)
    G = np.block([[B + A @ Binv @ A, -A @ Binv], [-Binv @ A, Binv]])
    return 0.5 * (G + G.T)


def darboux_frame(p: SKPoint) -> DarbouxFrame:
    m = p.m
    x, y = darboux(p)
    T = np.block([[np.eye(m), np.zeros((m, m))], [p.A, -p.B]])
    G = metric_G(p)
    Jmat = T @ complex_structure_0(m) @ inverse(T)
    omega = Jmat.T @ G
    return DarbouxFrame(x=x, y=y, T=T, G=G, Jmat=Jmat, omega=omega)


def ma_residual(p: SKPoint) -> float:
    """``|det G - 1|``: the Monge-Ampère equation ``det Hess u = 1``."""
    return abs(float(np.linalg.det(metric_G(p))) - 1.0)


# ---------------------------------------------------------------------------
# the graph potential


def potential_form(F: Prepotential, z) -> np.ndarray:
    """Coefficients of ``du`` on ``dx, dv`` at ``z``.

    ``du = s.dx - v.dy`` with ``dy = A dx - B dv`` gives ``(s - A v) dx + (B v) dv``.
    """
    j = jet(F, z, order=2)
    v = np.asarray(z).imag
    s = j.grad.imag
    A, B = j.hess.real, j.hess.imag
    return np.concatenate([s - A @ v, B @ v])


def _det_b(F: Prepotential, z) -> tuple[float, float]:
    j = jet(F, z, order=2)
    return float(np.linalg.det(j.hess.imag)), tol_deg(j.hess)


def _segment_integral(F: Prepotential, a, b, order: int, strict: bool) -> float:
    if not strict:
        return line_integral(lambda z: potential_form(F, z), PathSpec([a, b], order))
    signs = []

    def form(z):
        j = jet(F, z, order=2)
        d = float(np.linalg.det(j.hess.imag))
        if abs(d) <= tol_deg(j.hess):
            raise DegenerateError(f"det Im Hess F vanishes at z = {z}")
        signs.append(math.copysign(1.0, d))
        v = z.imag
        return np.concatenate([j.grad.imag - j.hess.real @ v, j.hess.imag @ v])

    for end in (a, b):
        d, tol = _det_b(F, end)
        if abs(d) <= tol:
            raise DomainError(f"path crosses singular/degenerate locus: endpoint z = {end} is degenerate")
        signs.append(math.copysign(1.0, d))
    value = line_integral(form, PathSpec([a, b], order))
    if len(set(signs)) > 1:
        raise DomainError("path crosses singular/degenerate locus: det Im Hess F changes sign")
    return value


def potential_u(p: SKPoint, base, path: PathSpec | None = None, strict: bool = True) -> float:
    """Graph potential at ``p`` normalised by ``u(base) = 0``.

    Integrates the closed form ``du`` along ``path`` (default: the straight
    segment from ``base`` to ``p.z``).  With ``strict`` every segment is
    checked against the degenerate locus ``det Im Hess F = 0``.
    """
    base = np.atleast_1d(np.asarray(base, dtype=complex))
    if path is None:
        if np.array_equal(base, p.z):
            return 0.0
        path = PathSpec([base, p.z])
    if not np.allclose(path.waypoints[0], base) or not np.allclose(path.waypoints[-1], p.z):
        raise ValueError("path must run from base to the point")
    pts = path.waypoints
    return sum(
        _segment_integral(p.F, a, b, order, strict)
        for a, b, order in zip(pts, pts[1:], path.segment_orders())
    )


def _invert_darboux(F: Prepotential, q: np.ndarray, z0: np.ndarray, j0=None) -> np.ndarray:
    """Solve ``(Re z, Re dF/dz) = q`` for ``z`` by Newton's method from ``z0``.

    With the jet ``j0`` at ``z0`` the start is the linear prediction
    ``dv = B^-1 (A dx - dy)``.
    """
    m = F.m
    x, y = q[:m], q[m:]
    z0 = np.asarray(z0)
    v = z0.imag.copy()
    if j0 is not None:
        v += np.linalg.solve(j0.hess.imag, j0.hess.real @ (x - z0.real) - (y - j0.grad.real))
    for _ in range(30):
        z = x + 1j * v
        j = jet(F, z, order=2)
        r = j.grad.real - y
        dv = np.linalg.solve(j.hess.imag, r)
        v = v + dv
        if np.max(np.abs(dv)) <= 4e-16 * (1 + np.max(np.abs(v))):
            break
    return x + 1j * v


def fd_hessian_u(p: SKPoint, base, cfg: FDConfig = FDConfig(1e-3, 2)) -> np.ndarray:
    """Independent oracle for ``G``: finite-difference Hessian of ``u`` in ``(x, y)``.

    Stencil points in Darboux coordinates are mapped back to the chart by
    Newton iteration; ``u`` there is ``u(p)`` plus a short segment integral.
    The constant ``u(p)`` drops out of every difference, so only the
    increments are formed.  ``base`` must connect to ``p`` without meeting
    the degenerate locus.
    """
    potential_u(p, base)  # reachability check only
    q0 = np.concatenate(darboux(p))

    def du_of_q(q):
        if np.array_equal(q, q0):
            return 0.0
        z = _invert_darboux(p.F, q, p.z, p.jet)
        return _segment_integral(p.F, p.z, z, 4, strict=False)

    return fd_hessian(du_of_q, q0, cfg)


# ---------------------------------------------------------------------------
# certificates


def constancy_certificates(samples: Sequence[SKPoint]) -> tuple[float, float, float]:
    """Spreads over samples of ``det G``, of each ``omega_ab``, and of ``omega^m / nu``.

    Darboux coordinates are affine for the flat connection, so parallel
    tensors have constant components there.
    """
    if len(samples) < 2:
        raise ValueError("constancy certificates need at least 2 samples")
    dets, omegas, ratios = [], [], []
    for p in samples:
        fr = darboux_frame(p)
        d = float(np.linalg.det(fr.G))
        dets.append(d)
        omegas.append(fr.omega)
        # omega^m = m! Pf(omega) dq^1 ^ ... ^ dq^2m, nu = sqrt|det G| dq^1 ^ ... ^ dq^2m
        ratios.append(math.factorial(p.m) * pfaffian(fr.omega) / math.sqrt(abs(d)))
    omegas = np.array(omegas)
    return (
        float(np.ptp(dets)),
        float(np.max(np.ptp(omegas, axis=0))),
        float(np.ptp(ratios)),
    )


# ---------------------------------------------------------------------------
# immersion over a grid


@dataclass(frozen=True)
class ImmersionSample:
    index: int  # flat grid index
    xi: np.ndarray
    z: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: float
    G: np.ndarray
    detG: float
    normal: np.ndarray  # affine normal, constant e_{2m+1} for a graph

    @property
    def point(self) -> np.ndarray:
        """Ambient point ``(x, y, u)`` in ``R^{2m+1}``."""
        return np.concatenate([self.x, self.y, [self.u]])


@dataclass(frozen=True)
class GridSpec:
    """Rectangular grid in the ``(x, v)`` chart, one ``(lo, hi, n)`` per real axis."""

    x: tuple
    v: tuple

    def __init__(self, x: Sequence, v: Sequence):
        x = tuple(tuple(a) for a in x)
        v = tuple(tuple(a) for a in v)
        if len(x) != len(v) or not x:
            raise ValueError("need one x-range and one v-range per complex axis")
        for lo, hi, n in x + v:
            if int(n) != n or n < 2:
                raise ValueError("grid resolution must be an integer >= 2")
            if not hi > lo:
                raise ValueError("grid range needs hi > lo")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def m(self) -> int:
        return len(self.x)

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, int(n)) for lo, hi, n in self.x + self.v]

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(n) for _, _, n in self.x + self.v)

    def node(self, idx: tuple[int, ...]) -> np.ndarray:
        return np.array([ax[k] for ax, k in zip(self.axes, idx)])


@dataclass
class Immersion:
    """Samples in grid order plus the nodes that were skipped and why."""

    samples: list[ImmersionSample]
    skipped: dict[int, str] = field(default_factory=dict)
    shape: tuple[int, ...] = ()

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, k):
        return self.samples[k]


def _sample(p: SKPoint, index: int, u: float) -> ImmersionSample:
    fr = darboux_frame(p)
    n = 2 * p.m + 1
    normal = np.zeros(n)
    normal[-1] = 1.0
    return ImmersionSample(
        index=index, xi=p.xi, z=p.z, x=fr.x, y=fr.y, u=float(u), G=fr.G,
        detG=float(np.linalg.det(fr.G)), normal=normal,
    )


def immerse(F: Prepotential, grid: GridSpec, base, path_policy: str = "strict",
            order: int = 16) -> Immersion:
    """Sample the parabolic sphere over ``grid``.

    ``u`` is accumulated along grid edges of a breadth-first spanning tree
    rooted at the node nearest ``base``.  Degenerate nodes are skipped.  With
    ``path_policy="strict"`` edges that meet the degenerate locus are refused
    (nodes behind it are skipped as unreachable); ``"crossing"`` integrates
    through it, which is legitimate because ``du`` is finite wherever ``F``
    is holomorphic.
    """
    if path_policy not in ("strict", "crossing"):
        raise ValueError("path_policy must be 'strict' or 'crossing'")
    if grid.m != F.m:
        raise ValueError("grid dimension does not match prepotential arity")
    strict = path_policy == "strict"
    base = np.atleast_1d(np.asarray(base, dtype=complex))
    shape = grid.shape
    nodes = list(np.ndindex(*shape))
    flat = {idx: k for k, idx in enumerate(nodes)}
    points: dict[tuple, SKPoint] = {}
    skipped: dict[int, str] = {}
    for idx in nodes:
        p = sk_point(F, xi_to_z(grid.node(idx)), order=2)
        points[idx] = p
        if not p.nondegenerate:
            skipped[flat[idx]] = "degenerate"

    def traversable(idx):
        return points[idx].nondegenerate or not strict

    candidates = [idx for idx in nodes if points[idx].nondegenerate]
    bxi = z_to_xi(base)
    candidates.sort(key=lambda idx: (float(np.sum((grid.node(idx) - bxi) ** 2)), flat[idx]))
    u: dict[tuple, float] = {}
    if candidates:
        root = candidates[0]
        rz = points[root].z
        u[root] = 0.0 if np.array_equal(rz, base) else _segment_integral(F, base, rz, order, strict)
        queue = deque([root])
        while queue:
            idx = queue.popleft()
            for ax in range(len(shape)):
                for step in (-1, 1):
                    nb = list(idx)
                    nb[ax] += step
                    nb = tuple(nb)
                    if not 0 <= nb[ax] < shape[ax] or nb in u or not traversable(nb):
                        continue
                    try:
                        u[nb] = u[idx] + _segment_integral(F, points[idx].z, points[nb].z, order, strict)
                    except DomainError:
                        continue
                    queue.append(nb)
    samples = []
    for idx in nodes:
        k = flat[idx]
        if k in skipped:
            continue
        if idx not in u:
            skipped[k] = "unreachable"
            continue
        samples.append(_sample(points[idx], k, u[idx]))
    if skipped:
        warnings.warn(f"{len(skipped)} grid node(s) skipped (degenerate or unreachable)", stacklevel=2)
    return Immersion(samples=samples, skipped=dict(sorted(skipped.items())), shape=shape)


# ---------------------------------------------------------------------------
# paraboloid congruence for quadratic prepotentials


def is_quadratic(F: Prepotential) -> bool:
    """True when every third derivative of ``F`` vanishes."""
    import itertools

    keys = list(itertools.combinations_with_replacement(range(F.m), 3))
    if all(F.derivative(*k) == Const(0) for k in keys):
        return True
    rng = np.random.default_rng(0)
    for _ in range(5):
        z = rng.uniform(-0.7, 0.7, F.m) + 1j * rng.uniform(-0.7, 0.7, F.m)
        try:
            j = jet(F, z, order=3)
        except DomainError:
            return False
        if np.max(np.abs(j.third)) > 1e-12:
            return False
    return True


@dataclass(frozen=True)
class CongruenceResult:
    applicable: bool
    message: str
    signature: tuple[int, int] | None = None
    linear: np.ndarray | None = None  # (2m+1) x (2m+1)
    translation: np.ndarray | None = None
    det: float | None = None
    residual: float | None = None
    factor: np.ndarray | None = None  # L with G = L L^T

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.linear.T + self.translation


def paraboloid_congruence(F: Prepotential, base=None, samples: Sequence | None = None) -> CongruenceResult:
    """Equiaffine map taking the graph of ``u`` onto ``h = |X|^2``.

    Only for quadratic ``F`` with positive definite ``G``.  With ``G = L L^T``
    and ``lam = 2^(-1/(2m+2))`` the map is ``q -> lam L^T (q - q0)``,
    ``h -> 2 lam^2 (h - c)``, whose linear part has determinant 1.
    """
    m = F.m
    if not is_quadratic(F):
        return CongruenceResult(False, "not applicable: prepotential is not quadratic")
    base = np.zeros(m, dtype=complex) if base is None else np.atleast_1d(np.asarray(base, dtype=complex))
    p = sk_point(F, base)
    if not p.nondegenerate:
        return CongruenceResult(False, "not applicable: Im Hess F is degenerate")
    G = metric_G(p)
    sig = signature(G)
    if sig != (2 * m, 0):
        return CongruenceResult(
            False,
            f"not applicable: G has signature {sig}; the graph is congruent to the standard "
            "indefinite paraboloid, not the elliptic one",
            signature=sig,
        )
    L = np.linalg.cholesky(G)
    lam = 2.0 ** (-1.0 / (2 * m + 2))
    qb = np.concatenate(darboux(p))
    gb = np.concatenate([p.jet.grad.imag, -base.imag])  # du at the base
    Ginv = inverse(G)
    q0 = qb - Ginv @ gb
    c = -0.5 * gb @ Ginv @ gb
    n = 2 * m + 1
    M = np.zeros((n, n))
    M[: 2 * m, : 2 * m] = lam * L.T
    M[-1, -1] = 2 * lam**2
    t = np.concatenate([-lam * L.T @ q0, [-2 * lam**2 * c]])

    if samples is None:
        rng = np.random.default_rng(0)
        samples = [base + rng.uniform(-1, 1, m) + 1j * rng.uniform(-1, 1, m) for _ in range(12)]
    residual = 0.0
    for z in samples:
        s = sk_point(F, z, order=2)
        X = M @ np.concatenate([*darboux(s), [potential_u(s, base)]]) + t
        residual = max(residual, abs(X[-1] - X[:-1] @ X[:-1]))
    return CongruenceResult(
        True, "congruent to the paraboloid h = |X|^2", signature=sig, linear=M,
        translation=t, det=float(np.linalg.det(M)), residual=float(residual), factor=L,
    )
