"""Quadratic prepotentials give a flat metric and the paraboloid; z^3/6 is curved."""
from skaffine import levi_civita_curvature, paraboloid_congruence, sk_point
from skaffine.prepotentials import get

for name in ("flat", "sheared", "flat2"):
    b = get(name)
    r = paraboloid_congruence(b.F, b.base)
    print(f"{name:8s} applicable={r.applicable} det={r.det:.15f} residual={r.residual:.1e}")
    print("         L =", r.factor.round(6).tolist())

cubic = get("cubic").F
for v in (0.5, 1.0, 2.0):
    _, K = levi_civita_curvature(sk_point(cubic, [0.2 + 1j * v]))
    print(f"z^3/6 at v = {v}: Gauss curvature {K:.6f} (1/(2v^3) = {1 / (2 * v**3):.6f})")

print(paraboloid_congruence(cubic, [1j]).message)
