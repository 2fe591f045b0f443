"""Special Kähler geometry from a holomorphic prepotential, realised as a parabolic affine sphere.

Typical use::

    from skaffine import Prepotential, sk_point, metric_G, conjugacy_residual

    F = Prepotential.from_text("z1^3/6", 1)
    p = sk_point(F, [1 + 1j])
    metric_G(p)              # [[2, -1], [-1, 1]]
    conjugacy_residual(p)    # ~1e-11
"""
from .dsl import (
    DomainError, Expr, HoloJet, ParseError, Prepotential, differentiate, evaluate,
    jet, parse, to_string,
)
from .numerics import (
    DegenerateError, FDConfig, PathSpec, fd_derivative, line_integral, signature,
)
from .point import SKPoint, sk_point
from .sphere import (
    CongruenceResult, DarbouxFrame, GridSpec, ImmersionSample, constancy_certificates,
    darboux, darboux_frame, immerse, ma_residual, metric_G, paraboloid_congruence,
    potential_u,
)
from .core import (
    ConnectionField, ResidualReport, christoffels, conjugacy_residual,
    curvature_torsion, hermitian_form, lagrangian_residual, levi_civita_curvature,
    nijenhuis, nondegenerate, residual_sweep, shape_tensor, special_residuals,
)

__version__ = "0.1.0"
