"""The graph potential u over Darboux coordinates solves det Hess u = 1."""
import numpy as np

from skaffine import metric_G, potential_u, sk_point
from skaffine.prepotentials import get
from skaffine.sphere import darboux, fd_hessian_u

b = get("exp")
F = b.F
print(F, "base", b.base)

for z in b.random_points(5, seed=1):
    p = sk_point(F, z)
    G = metric_G(p)                      # closed form from A = Re Hess F, B = Im Hess F
    H = fd_hessian_u(p, b.base)          # finite differences of u itself
    x, y = darboux(p)
    print(f"z = {z[0]:.3f}  (x, y) = ({x[0]:+.3f}, {y[0]:+.3f})  u = {potential_u(p, b.base):+.6f}"
          f"  det G - 1 = {np.linalg.det(G) - 1:+.1e}  |G - Hess u| = {np.max(np.abs(G - H)):.1e}")
