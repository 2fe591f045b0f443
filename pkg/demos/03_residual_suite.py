"""Every structure identity at random points, plus controls that must fail."""
import numpy as np

from skaffine import residual_sweep, sk_point
from skaffine.core import LeviCivitaField, connection, conjugacy_residual, shape_tensor
from skaffine.prepotentials import BUNDLED

for name, b in BUNDLED.items():
    rep = residual_sweep(b.F, b.random_points(5, seed=0))
    worst = max(rep.entries, key=rep.entries.get)
    print(f"{name:8s} {b.text:40s} worst: {worst} = {rep.entries[worst]:.1e}")

# swapping in the wrong connection breaks the identities
F = BUNDLED["cubic"].F
p = sk_point(F, [1 + 1j])
print("conjugacy with nabla twice:", conjugacy_residual(p, conjugate=connection("nabla", F)))
S, lam = shape_tensor(p, connection_field=LeviCivitaField(F))
print("shape operator from the Levi-Civita connection:\n", np.round(S, 4))
