"""Acceptance criteria 1-9, one test each, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines print even when
output is captured) or ``python tests/test_acceptance.py`` for the summary
alone.
"""
import json
import time
from functools import lru_cache

import numpy as np
import pytest

from skaffine.cli import main
from skaffine.core import (
    KINDS, ambient_gamma, connection, conjugacy_residual, hermitian_form,
    hermitian_form_oracle, levi_civita_curvature, nijenhuis_field, residual_sweep,
)
from skaffine.dsl import Prepotential
from skaffine.numerics import signature
from skaffine.point import sk_point
from skaffine.prepotentials import BUNDLED, get
from skaffine.sphere import (
    complex_structure_0, fd_hessian_u, ma_residual, metric_G, paraboloid_congruence,
    potential_u,
)

CUBIC = Prepotential.from_text("z1^3/6", 1)
SWEEP_POINTS = 12


def announce(number, title, ok, detail, capsys=None):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


@lru_cache(maxsize=None)
def sweep(name):
    b = get(name)
    return residual_sweep(b.F, b.random_points(SWEEP_POINTS, seed=21)).entries


def worst(key):
    return max(sweep(name)[key] for name in sorted(BUNDLED))


# ---------------------------------------------------------------------------


def criterion_1():
    start = time.perf_counter()
    closed = fd = 0.0
    count = {}
    for name, b in BUNDLED.items():
        F = b.F
        count[name] = 0
        for z in b.random_points(100, seed=0):
            p = sk_point(F, z, order=2)
            if not p.nondegenerate:
                continue
            closed = max(closed, ma_residual(p))
            fd = max(fd, abs(np.linalg.det(fd_hessian_u(p, b.base)) - 1))
            count[name] += 1
    elapsed = time.perf_counter() - start
    ok = closed <= 1e-9 and fd <= 1e-5 and min(count.values()) >= 100 and elapsed < 10
    return ok, f"closed form {closed:.1e}, FD of u {fd:.1e}, {min(count.values())}+ points each, {elapsed:.1f} s"


def criterion_2():
    r = worst("conjugacy")
    control = conjugacy_residual(sk_point(CUBIC, [1 + 1j]), conjugate=connection("nabla", CUBIC))
    return r <= 1e-6 and control >= 0.5, f"residual {r:.1e}, control {control:.2f}"


def criterion_3():
    r1, r2 = worst("nabla_omega"), worst("d_nabla_J")
    flat = max(worst(f"{what}_{kind}") for what in ("torsion", "curvature") for kind in KINDS)
    ok = r1 <= 1e-6 and r2 <= 1e-6 and flat <= 1e-5
    return ok, f"|nabla omega| {r1:.1e}, |d J| {r2:.1e}, torsion/curvature {flat:.1e}"


def rotated_J(xi):
    theta = xi[0] * xi[3]
    c, s = np.cos(theta), np.sin(theta)
    R = np.eye(4)
    R[0, 0], R[0, 1], R[1, 0], R[1, 1] = c, -s, s, c
    return R @ complex_structure_0(2) @ R.T


def criterion_4():
    r = worst("nijenhuis")
    control = nijenhuis_field(rotated_J, np.array([0.5, 0.2, 0.3, 0.7]))
    return r <= 1e-6 and control >= 1e-2, f"residual {r:.1e}, control {control:.2f}"


def criterion_5():
    S, lam = worst("shape"), worst("shape_lambda")
    return S <= 1e-5 and lam <= 1e-5, f"max |S| {S:.1e}, max |lambda| {lam:.1e}"


def criterion_6():
    G = metric_G(sk_point(CUBIC, [1 + 1j]))
    eG = float(np.max(np.abs(G - [[2, -1], [-1, 1]])))
    eu = abs(potential_u(sk_point(CUBIC, [1 + 2j]), [1j]) - 7 / 3)
    K1 = levi_civita_curvature(sk_point(CUBIC, [1j]))[1]
    K2 = levi_civita_curvature(sk_point(CUBIC, [2j]))[1]
    p = sk_point(CUBIC, [1 + 2j])
    eh = max(abs(hermitian_form(p)[0, 0] - 4), abs(hermitian_form_oracle(p)[0, 0] - 4))
    ok = eG <= 1e-12 and eu <= 1e-9 and abs(K1 - 0.5) <= 1e-4 and abs(K2 - 0.0625) <= 1e-4 and eh <= 1e-12
    return ok, f"G err {eG:.0e}, u err {eu:.0e}, K(1) {K1:.6f}, K(2) {K2:.6f}, h err {eh:.0e}"


def criterion_7():
    scalar = cong = det = 0.0
    for name in ("flat", "sheared", "flat2"):
        b = get(name)
        for z in b.random_points(3, seed=2):
            scalar = max(scalar, abs(levi_civita_curvature(sk_point(b.F, z))[0]))
        r = paraboloid_congruence(b.F, b.base)
        if not r.applicable:
            return False, f"{name}: {r.message}"
        cong, det = max(cong, r.residual), max(det, abs(r.det - 1))
    witness = levi_civita_curvature(sk_point(CUBIC, [0.3 + 1j]))[1]
    ok = scalar <= 1e-8 and cong <= 1e-12 and det <= 1e-12 and witness >= 0.4
    return ok, (f"quadratic curvature {scalar:.0e}, congruence {cong:.0e}, |det - 1| {det:.0e}, "
                f"z^3/6 curvature {witness:.3f}")


def criterion_8():
    sigs = {m: signature(ambient_gamma(m)) for m in range(1, 5)}
    return all(sigs[m] == (m, m) for m in sigs), ", ".join(f"m={m}: {s}" for m, s in sigs.items())


def criterion_9(tmp_path):
    cfg = {
        "m": 1, "F": "exp(z1)+(i/2)*z1^2", "base": [[0, 0.5]],
        "plan": {"kind": "random", "count": 6, "seed": 7, "box": {"x": [-1, 1], "v": [0.1, 1]}},
        "out": {"report": str(tmp_path / "report.json")},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    reports = []
    for _ in range(2):
        code = main(["check", "--config", str(path)])
        reports.append((code, (tmp_path / "report.json").read_bytes()))
    same = reports[0] == reports[1]
    return same and reports[0][0] == 0, f"exit {reports[0][0]}, byte-identical {same}"


TITLES = {
    1: "Monge-Ampere certificate", 2: "conjugacy identity", 3: "special conditions",
    4: "Nijenhuis tensor", 5: "shape tensor", 6: "fixture values",
    7: "complete flat case and incomplete witness", 8: "ambient signature", 9: "determinism",
}


@pytest.mark.parametrize("number", range(1, 9))
def test_criterion(number, capsys):
    ok, detail = globals()[f"criterion_{number}"]()
    assert announce(number, TITLES[number], ok, detail, capsys), detail


def test_criterion_9(tmp_path, capsys):
    ok, detail = criterion_9(tmp_path)
    assert announce(9, TITLES[9], ok, detail, capsys), detail


if __name__ == "__main__":
    import pathlib
    import tempfile

    results = []
    for n in range(1, 9):
        results.append(announce(n, TITLES[n], *globals()[f"criterion_{n}"]()))
    with tempfile.TemporaryDirectory() as d:
        results.append(announce(9, TITLES[9], *criterion_9(pathlib.Path(d))))
    print(f"{sum(results)}/9 criteria pass")
