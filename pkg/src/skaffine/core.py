"""Special Kähler structure induced by a prepotential and its residual identities.

All tensors live in the working chart ``xi = (x, v)``.  Index conventions
for arrays:

* ``gamma[a, b, c]``      Christoffel symbol ``Gamma^a_{bc}``
* ``dgamma[e, a, b, c]``  ``d_e Gamma^a_{bc}``
* ``riem[a, b, c, d]``    components of ``R(d_b, d_c) d_d``
* ``dT[e, ...]``          partial derivative of a tensor field ``T`` along ``xi^e``

The flat connection ``nabla`` has affine coordinates ``(x, y)`` with
``y = Re dF/dz``; its conjugate ``nablaJ = J nabla J^-1`` has affine
coordinates ``(v, s)`` with ``s = Im dF/dz``.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dsl import Prepotential
from .numerics import FDConfig, fd_jacobian, inverse, signature
from .point import SKPoint, lift, sk_point, xi_to_z
from .sphere import complex_structure_0, darboux_frame

__all__ = [
    "KINDS", "ConnectionField", "LeviCivitaField", "ResidualReport",
    "hermitian_form", "hermitian_form_oracle", "ambient_gamma", "nondegenerate",
    "lagrangian_residual", "christoffels", "connection", "chart_metric",
    "chart_metric_derivative", "chart_J", "chart_omega", "conjugacy_residual",
    "special_residuals", "nijenhuis", "nijenhuis_tensor", "nijenhuis_field",
    "riemann", "ricci", "curvature_torsion", "shape_tensor",
    "levi_civita_curvature", "point_residuals", "residual_sweep",
]

KINDS = ("nabla", "nablaJ")


# ---------------------------------------------------------------------------
# Hermitian form and nondegeneracy


def hermitian_form(p: SKPoint) -> np.ndarray:
    """Pullback of ``gamma = i Omega(., tau .)`` by ``dF``: ``h = 2 Im Hess F``."""
    return (2.0 * p.B).astype(complex)


def _omega_ambient(X: np.ndarray, Y: np.ndarray, m: int) -> complex:
    # Omega = sum_k dz^k ^ dw_k on T*C^m, vectors ordered (z, w)
    return complex(X[:m] @ Y[m:] - X[m:] @ Y[:m])


def hermitian_form_oracle(p: SKPoint) -> np.ndarray:
    """``i Omega(phi_* e_i, tau phi_* e_j)`` evaluated in ``T*C^m`` coordinates."""
    m = p.m
    H = p.jet.hess
    tangent = [np.concatenate([np.eye(m)[i], H[:, i]]) for i in range(m)]
    return np.array([[1j * _omega_ambient(tangent[i], np.conj(tangent[j]), m) for j in range(m)]
                     for i in range(m)])


def ambient_gamma(m: int) -> np.ndarray:
    """Matrix of ``gamma`` on the standard basis of ``V = T*C^m``."""
    E = np.eye(2 * m)
    return np.array([[1j * _omega_ambient(E[a], np.conj(E[b]), m) for b in range(2 * m)]
                     for a in range(2 * m)])


def nondegenerate(p: SKPoint) -> tuple[bool, tuple[int, int] | None]:
    return p.nondegenerate, p.sigB


def lagrangian_residual(p: SKPoint, method: str = "jet", cfg: FDConfig = FDConfig()) -> float:
    """``max_{i<j} |Omega(phi_* e_i, phi_* e_j)| = |F_ij - F_ji|``.

    ``method="fd"`` rebuilds ``F_ij`` from finite differences of ``F_i``
    along ``x^j`` instead of using the symmetrised jet.
    """
    if method == "jet":
        H = p.jet.hess
    elif method == "fd":
        m = p.m

        def grad(xi):
            g = sk_point(p.F, xi_to_z(xi), order=2).jet.grad
            return np.concatenate([g.real, g.imag])

        d = fd_jacobian(grad, p.xi, cfg)[:m]  # d/dx^j of (Re F_i, Im F_i)
        H = (d[:, :m] + 1j * d[:, m:]).T  # H[i, j] = d_j F_i
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(np.max(np.abs(H - H.T))) if p.m > 1 else 0.0


# ---------------------------------------------------------------------------
# connections


def _affine_chart(kind: str, p: SKPoint):
    """Jacobian ``T = d q / d xi`` and the ``xi``-Hessians of the curved coordinates."""
    if kind not in KINDS:
        raise ValueError(f"unknown connection kind {kind!r}")
    if p.jet.third is None:
        raise ValueError("connection coefficients need a third-order jet")
    m = p.m
    part = np.real if kind == "nabla" else np.imag
    top = np.hstack([np.eye(m), np.zeros((m, m))]) if kind == "nabla" else np.hstack([np.zeros((m, m)), np.eye(m)])
    T = np.vstack([top, part(lift(p.jet.hess, 1))])
    H = part(lift(p.jet.third, 2))
    return T, H, part


def christoffels(kind: str, p: SKPoint) -> np.ndarray:
    """``Gamma^a_{bc} = (d xi^a / d q^d)(d^2 q^d / d xi^b d xi^c)``."""
    p.require_nondegenerate()
    T, H, _ = _affine_chart(kind, p)
    K = inverse(T)[:, p.m:]
    return np.einsum("ai,ibc->abc", K, H)


def _christoffels_derivative_exact(kind: str, p: SKPoint) -> np.ndarray:
    if p.jet.fourth is None:
        p = sk_point(p.F, p.z, order=4)
    T, H, part = _affine_chart(kind, p)
    m = p.m
    dH = part(lift(p.jet.fourth, 3))  # dH[i, b, c, e]
    Tinv = inverse(T)
    K = Tinv[:, m:]
    n = 2 * m
    out = np.empty((n, n, n, n))
    for e in range(n):
        dT = np.zeros((n, n))
        dT[m:, :] = H[:, :, e]
        dK = -(Tinv @ dT @ Tinv)[:, m:]
        out[e] = np.einsum("ai,ibc->abc", dK, H) + np.einsum("ai,ibc->abc", K, dH[..., e])
    return out


@dataclass(frozen=True)
class ConnectionField:
    """Christoffel symbols of ``nabla`` or ``nablaJ`` as a field on the chart."""

    kind: str
    F: Prepotential

    def __call__(self, xi) -> np.ndarray:
        return christoffels(self.kind, sk_point(self.F, xi_to_z(xi)))

    def derivative(self, xi, method: str = "fd", cfg: FDConfig = FDConfig()) -> np.ndarray:
        if method == "exact":
            return _christoffels_derivative_exact(self.kind, sk_point(self.F, xi_to_z(xi), order=4))
        return fd_jacobian(self, xi, cfg)


def connection(kind: str, F: Prepotential) -> ConnectionField:
    if kind not in KINDS:
        raise ValueError(f"unknown connection kind {kind!r}")
    return ConnectionField(kind, F)


def _gamma_derivative(conn: Callable, xi, method: str, cfg: FDConfig) -> np.ndarray:
    if hasattr(conn, "derivative"):
        return conn.derivative(xi, method, cfg)
    return fd_jacobian(conn, xi, cfg)


# ---------------------------------------------------------------------------
# metric, complex structure and Kähler form in the working chart


def chart_metric(p: SKPoint) -> np.ndarray:
    """Pullback ``T^T G T`` of the Blaschke metric; equals ``diag(B, B)``."""
    fr = darboux_frame(p)
    g = fr.T.T @ fr.G @ fr.T
    return 0.5 * (g + g.T)


def chart_J(p: SKPoint) -> np.ndarray:
    fr = darboux_frame(p)
    return inverse(fr.T) @ fr.Jmat @ fr.T


def chart_omega(p: SKPoint) -> np.ndarray:
    fr = darboux_frame(p)
    return fr.T.T @ fr.omega @ fr.T


def _dB(p: SKPoint) -> np.ndarray:
    """``dB[e, i, j] = d_e Im F_ij`` from the third-order jet."""
    return np.moveaxis(lift(p.jet.third, 1).imag, -1, 0)


def chart_metric_derivative(p: SKPoint, method: str = "fd", cfg: FDConfig = FDConfig()) -> np.ndarray:
    if method == "exact":
        dB = _dB(p)
        Z = np.zeros_like(dB)
        return np.concatenate([np.concatenate([dB, Z], 2), np.concatenate([Z, dB], 2)], 1)
    return fd_jacobian(lambda xi: chart_metric(sk_point(p.F, xi_to_z(xi), order=2)), p.xi, cfg)


def conjugacy_residual(p: SKPoint, method: str = "fd", cfg: FDConfig = FDConfig(),
                       conjugate: Callable | None = None) -> float:
    """Residual of ``X g(Y, Z) = g(nabla_X Y, Z) + g(Y, nablaJ_X Z)`` on coordinate fields.

    ``conjugate`` replaces ``nablaJ`` (used for negative controls).
    """
    p.require_nondegenerate()
    g = chart_metric(p)
    dg = chart_metric_derivative(p, method, cfg)
    G1 = christoffels("nabla", p)
    G2 = christoffels("nablaJ", p) if conjugate is None else conjugate(p.xi)
    res = dg - np.einsum("ebc,ed->bcd", G1, g) - np.einsum("ebd,ce->bcd", G2, g)
    return float(np.max(np.abs(res)))


def special_residuals(p: SKPoint, method: str = "fd", cfg: FDConfig = FDConfig(),
                      connection_field: Callable | None = None) -> tuple[float, float]:
    """``(|nabla omega|, |d^nabla J|)`` maxima in the working chart."""
    p.require_nondegenerate()
    m = p.m
    gamma = christoffels("nabla", p) if connection_field is None else connection_field(p.xi)
    w = chart_omega(p)
    J = chart_J(p)
    if method == "exact":
        dB = _dB(p)
        Z = np.zeros_like(dB)
        dw = np.concatenate([np.concatenate([Z, dB], 2), np.concatenate([-dB, Z], 2)], 1)
        dJ = np.zeros((2 * m,) * 3)
    else:
        dw = fd_jacobian(lambda xi: chart_omega(sk_point(p.F, xi_to_z(xi), order=2)), p.xi, cfg)
        dJ = fd_jacobian(lambda xi: chart_J(sk_point(p.F, xi_to_z(xi), order=2)), p.xi, cfg)
    r1 = dw - np.einsum("ebc,ed->bcd", gamma, w) - np.einsum("ebd,ce->bcd", gamma, w)
    # nJ[b, a, c] = (nabla_b J)^a_c
    nJ = dJ + np.einsum("abe,ec->bac", gamma, J) - np.einsum("ebc,ae->bac", gamma, J)
    r2 = nJ - np.transpose(nJ, (2, 1, 0))
    return float(np.max(np.abs(r1))), float(np.max(np.abs(r2)))


# ---------------------------------------------------------------------------
# Nijenhuis tensor


def nijenhuis_tensor(J: np.ndarray, dJ: np.ndarray) -> np.ndarray:
    """``N(d_b, d_c)^a`` for ``N(X,Y) = [JX,JY] - [X,Y] - J[X,JY] - J[JX,Y]``; ``dJ[d, a, c] = d_d J^a_c``."""
    return (np.einsum("db,dac->abc", J, dJ) - np.einsum("dc,dab->abc", J, dJ)
            - np.einsum("ad,bdc->abc", J, dJ) + np.einsum("ad,cdb->abc", J, dJ))


def nijenhuis_field(jfield: Callable, xi, cfg: FDConfig = FDConfig()) -> float:
    """Max-abs Nijenhuis tensor of an almost complex structure field given in the chart."""
    J = np.asarray(jfield(np.asarray(xi, dtype=float)))
    return float(np.max(np.abs(nijenhuis_tensor(J, fd_jacobian(jfield, xi, cfg)))))


def nijenhuis(p: SKPoint, method: str = "fd", cfg: FDConfig = FDConfig()) -> float:
    """Nijenhuis tensor of ``J`` evaluated in Darboux coordinates, where ``J`` is not constant."""
    p.require_nondegenerate()
    m = p.m
    fr = darboux_frame(p)
    Tinv = inverse(fr.T)
    if method == "exact":
        _, H, _ = _affine_chart("nabla", p)
        J0 = complex_structure_0(m)
        n = 2 * m
        dJxi = np.empty((n, n, n))
        for e in range(n):
            dT = np.zeros((n, n))
            dT[m:, :] = H[:, :, e]
            dJxi[e] = dT @ J0 @ Tinv - fr.Jmat @ dT @ Tinv
    else:
        dJxi = fd_jacobian(lambda xi: darboux_frame(sk_point(p.F, xi_to_z(xi), order=2)).Jmat, p.xi, cfg)
    dJq = np.einsum("cb,cad->bad", Tinv, dJxi)  # chain rule to d/dq^b
    return float(np.max(np.abs(nijenhuis_tensor(fr.Jmat, dJq))))


# ---------------------------------------------------------------------------
# curvature


def riemann(gamma: np.ndarray, dgamma: np.ndarray) -> np.ndarray:
    return (np.transpose(dgamma, (1, 0, 2, 3)) - np.transpose(dgamma, (1, 2, 0, 3))
            + np.einsum("abe,ecd->abcd", gamma, gamma) - np.einsum("ace,ebd->abcd", gamma, gamma))


def ricci(riem: np.ndarray) -> np.ndarray:
    """``Ric(Y, Z) = tr(X -> R(X, Y) Z)``."""
    return np.einsum("aacd->cd", riem)


def curvature_torsion(kind: str, p: SKPoint, method: str = "fd", cfg: FDConfig = FDConfig()) -> tuple[float, float]:
    p.require_nondegenerate()
    conn = connection(kind, p.F)
    gamma = christoffels(kind, p)
    torsion = float(np.max(np.abs(gamma - np.transpose(gamma, (0, 2, 1)))))
    R = riemann(gamma, conn.derivative(p.xi, method, cfg))
    return torsion, float(np.max(np.abs(R)))


def shape_tensor(p: SKPoint, connection_field: Callable | None = None, method: str = "fd",
                 cfg: FDConfig = FDConfig()) -> tuple[np.ndarray, float]:
    """Shape operator from ``g(SX, Y) = Ric(X, Y)`` of the conjugate connection, and ``tr S / 2m``."""
    p.require_nondegenerate()
    conn = connection("nablaJ", p.F) if connection_field is None else connection_field
    gamma = conn(p.xi)
    Ric = ricci(riemann(gamma, _gamma_derivative(conn, p.xi, method, cfg)))
    S = inverse(chart_metric(p)) @ Ric.T
    return S, float(np.trace(S) / (2 * p.m))


@dataclass(frozen=True)
class LeviCivitaField:
    """Levi-Civita connection of the chart metric ``g = diag(B, B)`` (a control, not a flat connection)."""

    F: Prepotential

    def __call__(self, xi) -> np.ndarray:
        p = sk_point(self.F, xi_to_z(xi))
        ginv = inverse(chart_metric(p))
        dg = chart_metric_derivative(p, "exact")
        # Gamma^a_{bc} = 1/2 g^{ad} (d_b g_dc + d_c g_db - d_d g_bc)
        lower = dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg
        return 0.5 * np.einsum("ad,dbc->abc", ginv, lower)


def levi_civita_curvature(p: SKPoint, cfg: FDConfig = FDConfig()) -> tuple[float, float | None]:
    """Scalar curvature of the metric, and the Gauss curvature when ``m = 1``."""
    p.require_nondegenerate()
    lc = LeviCivitaField(p.F)
    Ric = ricci(riemann(lc(p.xi), fd_jacobian(lc, p.xi, cfg)))
    scalar = float(np.einsum("cd,cd->", inverse(chart_metric(p)), Ric))
    return scalar, (scalar / 2 if p.m == 1 else None)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class ResidualReport:
    """Named max-abs residuals over a sample set."""

    entries: dict[str, float] = field(default_factory=dict)
    samples: int = 0
    tolerances: dict[str, float] = field(default_factory=dict)

    def passed(self, name: str) -> bool:
        v = self.entries[name]
        return v is not None and math.isfinite(v) and v <= self.tolerances.get(name, math.inf)

    @property
    def ok(self) -> bool:
        return all(self.passed(k) for k in self.entries)

    def update(self, values: dict[str, float]):
        for k, v in values.items():
            self.entries[k] = max(self.entries.get(k, 0.0), float(v))

    def to_dict(self) -> dict:
        return {k: {"max": v, "tolerance": self.tolerances.get(k), "pass": self.passed(k)}
                for k, v in sorted(self.entries.items())}


def point_residuals(F: Prepotential, z, method: str = "fd", cfg: FDConfig = FDConfig()) -> dict[str, float]:
    """Every special-Kähler residual at one nondegenerate point."""
    p = sk_point(F, z)
    p.require_nondegenerate()
    r1, r2 = special_residuals(p, method, cfg)
    out = {
        "lagrangian": lagrangian_residual(p),
        "hermitian": float(np.max(np.abs(hermitian_form(p) - hermitian_form_oracle(p)))),
        "conjugacy": conjugacy_residual(p, method, cfg),
        "nabla_omega": r1,
        "d_nabla_J": r2,
        "nijenhuis": nijenhuis(p, method, cfg),
    }
    for kind in KINDS:
        t, c = curvature_torsion(kind, p, method, cfg)
        out[f"torsion_{kind}"] = t
        out[f"curvature_{kind}"] = c
    S, lam = shape_tensor(p, method=method, cfg=cfg)
    out["shape"] = float(np.max(np.abs(S)))
    out["shape_lambda"] = abs(lam)
    return out


def _point_residuals_args(args):
    return point_residuals(*args)


def residual_sweep(F: Prepotential, zs: Sequence, method: str = "fd", cfg: FDConfig = FDConfig(),
                   tolerances: dict[str, float] | None = None, jobs: int = 1) -> ResidualReport:
    """Max-reduce :func:`point_residuals` over ``zs`` (order independent)."""
    report = ResidualReport(tolerances=dict(tolerances or {}))
    args = [(F, np.atleast_1d(np.asarray(z, dtype=complex)), method, cfg) for z in zs]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_point_residuals_args, args, chunksize=max(1, len(args) // (4 * jobs))))
    else:
        results = [point_residuals(*a) for a in args]
    for r in results:
        report.update(r)
    report.samples = len(results)
    return report
