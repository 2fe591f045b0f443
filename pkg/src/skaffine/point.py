"""Base points of the special Kähler structure and the real working chart.

The working chart is ``xi = (x, v) = (Re z, Im z)`` in ``R^{2m}``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dsl import HoloJet, Prepotential, jet
from .numerics import DegenerateError, signature

__all__ = ["SKPoint", "sk_point", "xi_to_z", "z_to_xi", "lift", "tol_deg"]


def xi_to_z(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    m = xi.size // 2
    return xi[:m] + 1j * xi[m:]


def z_to_xi(z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return np.concatenate([z.real, z.imag])


def lift(tensor: np.ndarray, nderiv: int) -> np.ndarray:
    """Turn holomorphic derivative indices into real chart indices.

    ``tensor`` has shape ``(m,)*(k + nderiv)``; the last ``nderiv`` axes are
    holomorphic derivative directions.  Each is doubled to ``2m`` entries:
    ``d/dx^j`` acts as ``d/dz^j`` and ``d/dv^j`` as ``i d/dz^j``.
    """
    out = tensor
    for ax in range(tensor.ndim - nderiv, tensor.ndim):
        out = np.concatenate([out, 1j * out], axis=ax)
    return out


def tol_deg(hess: np.ndarray) -> float:
    """Scale-aware nondegeneracy threshold for ``|det Im Hess F|``."""
    return 1e-8 * (1.0 + np.linalg.norm(hess, np.inf))


@dataclass(frozen=True)
class SKPoint:
    """A chart point with its jet, ``A = Re Hess F`` and ``B = Im Hess F``."""

    F: Prepotential
    z: np.ndarray
    jet: HoloJet
    A: np.ndarray
    B: np.ndarray
    nondegenerate: bool
    sigB: tuple[int, int] | None
    tol: float

    @property
    def m(self) -> int:
        return self.F.m

    @property
    def xi(self) -> np.ndarray:
        return z_to_xi(self.z)

    def require_nondegenerate(self):
        if not self.nondegenerate:
            raise DegenerateError(f"degenerate point z = {self.z}: |det Im Hess F| <= {self.tol:.3g}")


def sk_point(F: Prepotential, z: Sequence[complex], order: int = 3) -> SKPoint:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    j = jet(F, z, order)
    A = j.hess.real.copy()
    B = j.hess.imag.copy()
    tol = tol_deg(j.hess)
    nondeg = bool(abs(np.linalg.det(B)) > tol)
    sigB = None
    if nondeg:
        try:
            sigB = signature(B)
        except DegenerateError:
            nondeg = False
    return SKPoint(F=F, z=z, jet=j, A=A, B=B, nondegenerate=nondeg, sigB=sigB, tol=tol)
