"""Parse a prepotential, differentiate it and take jets."""
import numpy as np

from skaffine import Prepotential, differentiate, evaluate, jet, parse, to_string

e = parse("exp(z1) + (i/2)*z1^2", 1)
print("parsed :", to_string(e))

d = differentiate(e, 1)
print("d/dz1  :", to_string(d))
print("at 0.3+0.7i:", evaluate(d, [0.3 + 0.7j]))

# jets hold F, F_i, F_ij, F_ijk at a point; tensors are symmetric by construction
F = Prepotential.from_text("z1*z2^2 + (i/2)*(z1^2 + z2^2)", 2)
j = jet(F, [0.5 + 0.2j, -0.1 + 1j])
print("Hess F =\n", np.round(j.hess, 6))
print("F_122 =", j.third[0, 1, 1])

# errors point at the failing piece
try:
    evaluate(parse("1 + log(z1 - 1)", 1), [1])
except ArithmeticError as exc:
    print("domain error:", exc)
