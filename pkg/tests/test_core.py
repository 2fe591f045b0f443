import numpy as np
import pytest

from skaffine.core import (
    KINDS, LeviCivitaField, ambient_gamma, chart_metric, christoffels, conjugacy_residual,
    connection, curvature_torsion, hermitian_form, hermitian_form_oracle, lagrangian_residual,
    levi_civita_curvature, nijenhuis, nijenhuis_field, nondegenerate, point_residuals,
    residual_sweep, riemann, shape_tensor, special_residuals,
)
from skaffine.dsl import Prepotential, differentiate, evaluate
from skaffine.numerics import DegenerateError, FDConfig, fd_hessian, fd_jacobian, signature
from skaffine.point import sk_point, xi_to_z
from skaffine.prepotentials import BUNDLED, get
from skaffine.sphere import complex_structure_0

CUBIC = Prepotential.from_text("z1^3/6", 1)
FLAT = Prepotential.from_text("(i/2)*z1^2", 1)
QUADRATICS = [b.F for b in BUNDLED.values() if b.quadratic] + [Prepotential.from_text("(-i/2)*z1^2", 1)]
FD_KEYS = ["conjugacy", "nabla_omega", "d_nabla_J", "nijenhuis", "curvature_nabla",
           "curvature_nablaJ", "shape", "shape_lambda"]


def cubic_points(count, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1, 1, count) + 1j * rng.uniform(0.5, 2, count)


def christoffels_oracle(F, z, kind):
    """Differentiate the chart map xi -> q numerically; uses only F_i from the DSL."""
    m = F.m
    grads = [differentiate(F.expr, k + 1) for k in range(m)]
    part = np.real if kind == "nabla" else np.imag

    def q(xi, d):
        if d < m:
            return xi[d] if kind == "nabla" else xi[m + d]
        return float(part(evaluate(grads[d - m], xi_to_z(xi))))

    xi0 = np.concatenate([np.real(z), np.imag(z)])
    cfg = FDConfig(1e-3, 3)
    T = np.stack([fd_jacobian(lambda xi: q(xi, d), xi0, cfg) for d in range(2 * m)])
    H = np.stack([fd_hessian(lambda xi: q(xi, d), xi0, cfg) for d in range(2 * m)])
    return np.einsum("ad,dbc->abc", np.linalg.inv(T), H)


# --- hermitian form and nondegeneracy --------------------------------------


def test_hermitian_form_flat():
    for z in [0, 1 + 2j, -0.3j]:
        p = sk_point(FLAT, [z])
        assert np.allclose(hermitian_form(p), [[2]], atol=0)
        assert np.max(np.abs(hermitian_form_oracle(p) - 2)) <= 1e-12


def test_hermitian_form_cubic():
    p = sk_point(CUBIC, [1 + 2j])
    assert abs(hermitian_form(p)[0, 0] - 4) <= 1e-12
    assert abs(hermitian_form_oracle(p)[0, 0] - 4) <= 1e-12


def test_hermitian_form_flat2():
    p = sk_point(get("flat2").F, [0.2 - 0.1j, 0.5j])
    assert np.max(np.abs(hermitian_form(p) - 2 * np.eye(2))) <= 1e-12
    assert np.max(np.abs(hermitian_form_oracle(p) - 2 * np.eye(2))) <= 1e-12


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_hermitian_form_matches_oracle(name):
    b = get(name)
    F = b.F
    for z in b.random_points(100, seed=1):
        p = sk_point(F, z)
        assert np.max(np.abs(hermitian_form(p) - hermitian_form_oracle(p))) <= 1e-12


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_ambient_form_is_split(m):
    H = ambient_gamma(m)
    assert np.array_equal(H, H.conj().T)
    assert signature(H) == (m, m)
    ev = np.linalg.eigvalsh(H)
    assert (int(np.sum(ev > 0)), int(np.sum(ev < 0))) == (m, m)


def test_nondegenerate_flags():
    assert nondegenerate(sk_point(CUBIC, [0.7]))[0] is False
    assert nondegenerate(sk_point(FLAT, [0.3 + 4j])) == (True, (1, 0))
    assert nondegenerate(sk_point(Prepotential.from_text("(-i/2)*z1^2", 1), [1j])) == (True, (0, 1))


def test_degenerate_point_refuses_connections():
    with pytest.raises(DegenerateError):
        christoffels("nabla", sk_point(CUBIC, [0.5]))


# --- Lagrangian condition --------------------------------------------------


def test_lagrangian_jet_is_exact():
    p = sk_point(get("cubic2").F, [0.3 + 0.2j, 0.8 - 0.5j])
    assert lagrangian_residual(p) == 0.0


def test_lagrangian_fd_route_cubic():
    assert lagrangian_residual(sk_point(CUBIC, [1 + 1j]), method="fd") <= 1e-8


def test_lagrangian_fd_route_m2():
    F = Prepotential.from_text("z1*z2^3", 2)
    assert lagrangian_residual(sk_point(F, [1 + 1j, 2 - 1j]), method="fd") <= 1e-8


# --- Christoffel symbols ---------------------------------------------------


@pytest.mark.parametrize("F", QUADRATICS)
@pytest.mark.parametrize("kind", KINDS)
def test_quadratic_christoffels_vanish(F, kind):
    z = np.full(F.m, 0.4 + 0.3j)
    assert np.array_equal(christoffels(kind, sk_point(F, z)), np.zeros((2 * F.m,) * 3))


def test_cubic_christoffels_nabla():
    g = christoffels("nabla", sk_point(CUBIC, [1 + 1j]))
    expected = np.zeros((2, 2, 2))
    expected[1, 0, 0] = -1  # Gamma^v_xx
    expected[1, 1, 1] = 1  # Gamma^v_vv
    assert np.max(np.abs(g - expected)) <= 1e-14
    assert np.max(np.abs(christoffels_oracle(CUBIC, [1 + 1j], "nabla") - expected)) <= 1e-8


def test_cubic_christoffels_nablaJ():
    g = christoffels("nablaJ", sk_point(CUBIC, [1 + 1j]))
    expected = np.zeros((2, 2, 2))
    expected[0, 0, 1] = expected[0, 1, 0] = 1
    assert np.max(np.abs(g - expected)) <= 1e-14
    assert np.max(np.abs(christoffels_oracle(CUBIC, [1 + 1j], "nablaJ") - expected)) <= 1e-8


@pytest.mark.parametrize("name", ["exp", "cubic2"])
@pytest.mark.parametrize("kind", KINDS)
def test_christoffels_match_chart_oracle(name, kind):
    b = get(name)
    for z in b.random_points(3, seed=5):
        got = christoffels(kind, sk_point(b.F, z))
        assert np.max(np.abs(got - christoffels_oracle(b.F, z, kind))) <= 1e-6


def test_christoffels_symmetric_exactly():
    g = christoffels("nabla", sk_point(get("cubic2").F, [0.5 + 0.3j, 0.2 - 0.4j]))
    assert np.array_equal(g, g.transpose(0, 2, 1))


@pytest.mark.parametrize("kind", KINDS)
def test_christoffel_derivative_exact_vs_fd(kind):
    b = get("exp")
    conn = connection(kind, b.F)
    for z in b.random_points(5, seed=2):
        xi = np.concatenate([z.real, z.imag])
        assert np.max(np.abs(conn.derivative(xi, "exact") - conn.derivative(xi, "fd"))) <= 1e-6


# --- conjugacy -------------------------------------------------------------


@pytest.mark.parametrize("F", QUADRATICS)
def test_conjugacy_quadratic(F):
    assert conjugacy_residual(sk_point(F, np.full(F.m, 0.1 + 0.7j))) <= 1e-14


def test_conjugacy_cubic():
    p = sk_point(CUBIC, [1 + 1j])
    assert np.allclose(chart_metric(p), np.eye(2), atol=1e-15)
    assert conjugacy_residual(p) <= 1e-8
    assert conjugacy_residual(p, method="exact") <= 1e-14


def test_conjugacy_negative_control():
    p = sk_point(CUBIC, [1 + 1j])
    wrong = connection("nabla", CUBIC)
    assert conjugacy_residual(p, conjugate=wrong) >= 0.5


# --- special conditions ----------------------------------------------------


@pytest.mark.parametrize("F", QUADRATICS)
def test_special_quadratic(F):
    r1, r2 = special_residuals(sk_point(F, np.full(F.m, -0.2 + 0.5j)))
    assert r1 <= 1e-14 and r2 <= 1e-14


def test_special_cubic_random():
    for z in cubic_points(50):
        r1, r2 = special_residuals(sk_point(CUBIC, [z]))
        assert r1 <= 1e-6 and r2 <= 1e-6


def test_special_negative_control():
    p = sk_point(CUBIC, [1 + 1j])
    conn = connection("nabla", CUBIC)

    def perturbed(xi):
        g = conn(xi).copy()
        g[0, 0, 1] += 0.1  # breaks the b <-> c symmetry of one entry
        return g

    _, r2 = special_residuals(p, connection_field=perturbed)
    assert r2 >= 0.05


# --- Nijenhuis -------------------------------------------------------------


@pytest.mark.parametrize("F", QUADRATICS)
def test_nijenhuis_quadratic(F):
    assert nijenhuis(sk_point(F, np.full(F.m, 0.3 + 0.3j))) <= 1e-14


def test_nijenhuis_cubic():
    for z in cubic_points(20, seed=4):
        assert nijenhuis(sk_point(CUBIC, [z])) <= 1e-6


def test_nijenhuis_exact_route():
    b = get("cubic2")
    for z in b.random_points(5, seed=8):
        assert nijenhuis(sk_point(b.F, z), method="exact") <= 1e-12


def rotated_J(xi):
    """A non-integrable almost complex structure on R^4 = (x1, x2, v1, v2)."""
    theta = xi[0] * xi[3]
    c, s = np.cos(theta), np.sin(theta)
    R = np.eye(4)
    R[0, 0], R[0, 1], R[1, 0], R[1, 1] = c, -s, s, c
    return R @ complex_structure_0(2) @ R.T


def test_nijenhuis_negative_control():
    xi = np.array([0.5, 0.2, 0.3, 0.7])
    J = rotated_J(xi)
    assert np.allclose(J @ J, -np.eye(4), atol=1e-14)
    assert nijenhuis_field(rotated_J, xi) >= 1e-2
    assert nijenhuis_field(lambda _: complex_structure_0(2), xi) == 0.0


# --- curvature, torsion, shape ---------------------------------------------


@pytest.mark.parametrize("F", QUADRATICS)
@pytest.mark.parametrize("kind", KINDS)
def test_flat_quadratic(F, kind):
    assert curvature_torsion(kind, sk_point(F, np.full(F.m, 0.5j))) == (0.0, 0.0)


@pytest.mark.parametrize("kind", KINDS)
def test_flat_cubic(kind):
    for z in cubic_points(20, seed=6):
        t, c = curvature_torsion(kind, sk_point(CUBIC, [z]))
        assert t <= 1e-5 and c <= 1e-5


def test_levi_civita_control_is_curved():
    lc = LeviCivitaField(CUBIC)
    xi = np.array([0.3, 1.0])
    R = riemann(lc(xi), fd_jacobian(lc, xi))
    assert np.max(np.abs(R)) > 1e-2


@pytest.mark.parametrize("F", QUADRATICS)
def test_shape_quadratic(F):
    S, lam = shape_tensor(sk_point(F, np.full(F.m, 0.1 + 0.9j)))
    assert np.array_equal(S, np.zeros_like(S)) and lam == 0.0


def test_shape_cubic():
    for z in cubic_points(20, seed=9):
        S, lam = shape_tensor(sk_point(CUBIC, [z]))
        assert np.max(np.abs(S)) <= 1e-5 and abs(lam) <= 1e-5


def test_shape_levi_civita_control():
    S, _ = shape_tensor(sk_point(CUBIC, [0.2 + 1j]), connection_field=LeviCivitaField(CUBIC))
    assert np.max(np.abs(S)) > 1e-2


# --- Levi-Civita curvature -------------------------------------------------


def gauss_curvature_oracle(F, z, h=1e-3):
    """K = -(1/2 lam) Laplacian(log lam) for the conformal metric lam (dx^2 + dv^2)."""
    def loglam(xi):
        return np.log(sk_point(F, xi_to_z(xi), order=2).B[0, 0])

    xi = np.array([z.real, z.imag])
    lap = np.trace(fd_hessian(loglam, xi, FDConfig(h, 2)))
    return -lap / (2 * np.exp(loglam(xi)))


@pytest.mark.parametrize("F", QUADRATICS)
def test_quadratic_is_flat(F):
    scalar, _ = levi_civita_curvature(sk_point(F, np.full(F.m, 0.5 + 0.5j)))
    assert abs(scalar) <= 1e-8


@pytest.mark.parametrize("v, K", [(1.0, 0.5), (2.0, 0.0625)])
def test_gauss_curvature_cubic(v, K):
    z = 0.3 + 1j * v
    _, gauss = levi_civita_curvature(sk_point(CUBIC, [z]))
    assert abs(gauss - K) <= 1e-4
    assert abs(gauss_curvature_oracle(CUBIC, z) - K) <= 1e-4


def test_m2_has_no_gauss_curvature():
    _, gauss = levi_civita_curvature(sk_point(get("cubic2").F, [0.5 + 0.5j, 0.5 + 0.5j]))
    assert gauss is None


# --- sweeps and invariants -------------------------------------------------


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_chart_metric_signature(name):
    b = get(name)
    for z in b.random_points(20, seed=3):
        p = sk_point(b.F, z)
        if not p.nondegenerate:
            continue
        P, Q = p.sigB
        assert signature(chart_metric(p)) == (2 * P, 2 * Q)


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_residual_sweep_bundled(name):
    b = get(name)
    rep = residual_sweep(b.F, b.random_points(8, seed=11))
    e = rep.entries
    assert rep.samples == 8
    for kind in KINDS:
        assert e[f"torsion_{kind}"] <= 1e-5 and e[f"curvature_{kind}"] <= 1e-5
    assert e["conjugacy"] <= 1e-6
    assert e["nabla_omega"] <= 1e-6 and e["d_nabla_J"] <= 1e-6
    assert e["nijenhuis"] <= 1e-6
    assert e["shape"] <= 1e-5


def test_sweep_is_order_independent_and_parallel_safe():
    b = get("exp")
    zs = b.random_points(6, seed=12)
    a = residual_sweep(b.F, zs)
    r = residual_sweep(b.F, zs[::-1], jobs=2)
    assert a.entries == r.entries


def test_exact_and_fd_agree():
    b = get("cubic2")
    for z in b.random_points(3, seed=13):
        fd = point_residuals(b.F, z)
        ex = point_residuals(b.F, z, method="exact")
        for k in FD_KEYS:
            assert abs(fd[k] - ex[k]) <= 1e-6


def test_richardson_levels_improve_fd_residuals():
    # residuals already at roundoff with one level cannot improve further
    b = get("exp")
    for z in b.random_points(3, seed=14):
        one = point_residuals(b.F, z, cfg=FDConfig(1e-3, 1))
        two = point_residuals(b.F, z, cfg=FDConfig(1e-3, 2))
        for k in FD_KEYS:
            assert one[k] >= 10 * two[k] or max(one[k], two[k]) <= 1e-12, k


def test_report_dict():
    b = get("flat")
    rep = residual_sweep(b.F, b.random_points(2), tolerances={"conjugacy": 1e-9})
    d = rep.to_dict()
    assert d["conjugacy"]["pass"] is True and d["conjugacy"]["tolerance"] == 1e-9
    assert rep.ok
