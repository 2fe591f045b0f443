"""Reference prepotentials with boxes on which they are nondegenerate."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsl import Prepotential

__all__ = ["Bundled", "BUNDLED", "get"]


@dataclass(frozen=True)
class Bundled:
    name: str
    text: str
    m: int
    x_box: tuple[float, float]  # same range on every complex axis
    v_box: tuple[float, float]
    base: tuple[complex, ...]
    quadratic: bool = False

    @property
    def F(self) -> Prepotential:
        return Prepotential.from_text(self.text, self.m)

    def random_points(self, count: int, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        x = rng.uniform(*self.x_box, size=(count, self.m))
        v = rng.uniform(*self.v_box, size=(count, self.m))
        return x + 1j * v


BUNDLED = {
    b.name: b
    for b in [
        Bundled("flat", "(i/2)*z1^2", 1, (-1, 1), (-1, 1), (0j,), quadratic=True),
        Bundled("sheared", "((1+i)/2)*z1^2", 1, (-1, 1), (-1, 1), (0j,), quadratic=True),
        Bundled("cubic", "z1^3/6", 1, (-1, 1), (0.5, 2), (1j,)),
        Bundled("exp", "exp(z1)+(i/2)*z1^2", 1, (-1, 1), (0.1, 1), (0.5j,)),
        Bundled("flat2", "z1*z2+(i/2)*(z1^2+z2^2)", 2, (-1, 1), (-1, 1), (0j, 0j), quadratic=True),
        Bundled("cubic2", "(i/6)*(z1^3+z2^3)+(i/2)*(z1^2+z2^2)", 2, (0, 1), (-1, 1), (0.5 + 0j, 0.5 + 0j)),
    ]
}


def get(name: str) -> Bundled:
    return BUNDLED[name]
