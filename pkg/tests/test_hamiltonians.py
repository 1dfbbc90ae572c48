import numpy as np
import pytest

from reebcut import (
    ConfigurationError,
    DiscPoint,
    PreconditionError,
    QuadraticHamiltonian,
    RigidRotationHamiltonian,
    SamplingGrid,
    SolidTorusPoint,
    contact_audit,
    contact_margin,
    cosine_defect_hamiltonian,
    hamiltonian_vector_field,
    liouville_pairing,
)
from reebcut.hamiltonians import CallableHamiltonian, PullbackHamiltonian, check_s_periodicity
from reebcut.geometry import TWO_PI

from conftest import SQRT2, random_disc_points


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


def test_disc_point_polar_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(200):
        r = rng.uniform(1e-8, 1.0)
        theta = rng.uniform(0.0, TWO_PI)
        p = DiscPoint.from_polar(r, theta)
        assert abs(p.r - r) <= 1e-12
        assert abs((p.theta - theta + np.pi) % TWO_PI - np.pi) <= 1e-12


def test_disc_point_rejects_exterior():
    with pytest.raises(PreconditionError):
        DiscPoint(1.2, 0.3)


def test_solid_torus_point_normalizes_s():
    pt = SolidTorusPoint(7.0, DiscPoint(0.1, 0.2))
    assert 0.0 <= pt.s < TWO_PI
    assert abs(pt.s - (7.0 - TWO_PI)) < 1e-15


def test_boundary_value_within_tolerance():
    H = QuadraticHamiltonian(SQRT2, 2 - SQRT2)
    theta = np.linspace(0, TWO_PI, 64, endpoint=False)
    ring = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    for s in (0.0, 1.0, 4.0):
        assert np.max(np.abs(H.value(s, ring) - H.boundary_value)) <= 1e-10


def test_s_periodicity_check():
    H = QuadraticHamiltonian(1.0, 1.0)
    assert check_s_periodicity(H) <= 1e-10
    bad = CallableHamiltonian(lambda s, xy: np.full(xy.shape[:-1], s), 0.0)
    with pytest.raises(PreconditionError):
        check_s_periodicity(bad)


# ---------------------------------------------------------------------------
# hamiltonian_vector_field
# ---------------------------------------------------------------------------


def test_vector_field_quadratic_is_rotation():
    H = QuadraticHamiltonian(0.7, 1.3)
    p = DiscPoint(0.3, -0.5)
    X = hamiltonian_vector_field(H, 0.0, p)
    # X = -a2 d/dtheta = (a2 y, -a2 x)
    assert np.allclose(X, [1.3 * p.y, -1.3 * p.x], atol=1e-14)


def test_vector_field_constant_vanishes():
    H = QuadraticHamiltonian(3.0, 0.0)
    X = hamiltonian_vector_field(H, 0.5, DiscPoint(0.2, 0.9))
    assert np.allclose(X, 0.0)


def test_vector_field_against_symbolic_oracle():
    # independent symbolic-differentiation oracle for
    # H = h + (1 - r^2)(c + d cos theta)
    sympy = pytest.importorskip("sympy")
    x, y = sympy.symbols("x y", real=True)
    h_, c_, d_ = 3, 0.4, 0.7
    r = sympy.sqrt(x**2 + y**2)
    expr = h_ + (1 - r**2) * (c_ + d_ * x / r)
    gx = sympy.lambdify((x, y), sympy.diff(expr, x))
    gy = sympy.lambdify((x, y), sympy.diff(expr, y))

    H = cosine_defect_hamiltonian(h_, c_, d_)
    p = DiscPoint(0.5, 0.0)
    X = hamiltonian_vector_field(H, 0.0, p)
    expected = np.array([0.5 * gy(p.x, p.y), -0.5 * gx(p.x, p.y)])
    assert np.max(np.abs(X - expected)) <= 1e-9


def test_vector_field_definition_on_random_points(rng):
    # omega(X, .) = dH componentwise within 1e-8, for every built-in
    hams = [
        QuadraticHamiltonian(SQRT2, 2 - SQRT2),
        RigidRotationHamiltonian(2, 1, 3),
        cosine_defect_hamiltonian(3, 0.4, 0.2),
    ]
    pts = random_disc_points(rng, 1000, r_max=0.95, r_min=0.05)
    for H in hams:
        g = H.grad(0.0, pts)
        X = H.velocity(0.0, pts)
        # omega = 2 dx ^ dy: omega(X, .) = (-2 X_y) dx + (2 X_x) dy
        defect = np.stack([-2 * X[..., 1] - g[..., 0],
                           2 * X[..., 0] - g[..., 1]], axis=-1)
        assert np.max(np.abs(defect)) <= 1e-8


# ---------------------------------------------------------------------------
# liouville_pairing
# ---------------------------------------------------------------------------


def test_pairing_quadratic_closed_form():
    H = QuadraticHamiltonian(0.9, 1.1)
    p = DiscPoint.from_polar(0.7, 1.23)
    assert abs(liouville_pairing(H, 0.0, p) + 1.1 * 0.49) <= 1e-12


def test_pairing_vanishes_at_origin():
    H = cosine_defect_hamiltonian(2, 0.3, 0.0)
    assert liouville_pairing(H, 0.0, DiscPoint(0.0, 0.0)) == 0.0


def test_pairing_rigid_rotation_boundary():
    H = RigidRotationHamiltonian(2, 1, 3)
    p = DiscPoint.from_polar(1.0, 0.77)
    assert abs(liouville_pairing(H, 0.0, p) - 1.0 / 3.0) <= 1e-12


def test_pairing_is_direct_lambda_of_field(rng):
    # lambda(X) computed via r^2 dtheta applied to X, away from the origin
    H = cosine_defect_hamiltonian(3, 0.5, 0.3)
    pts = random_disc_points(rng, 200, r_max=0.95, r_min=0.1)
    X = H.velocity(0.0, pts)
    lam = pts[..., 0] * X[..., 1] - pts[..., 1] * X[..., 0]
    assert np.max(np.abs(lam - liouville_pairing(H, 0.0, pts))) <= 1e-9


def test_pairing_equals_radial_derivative_identity(rng):
    # lambda(X) = -(r/2) dH/dr on analytic oracles
    H = QuadraticHamiltonian(1.3, 0.7)
    pts = random_disc_points(rng, 300)
    g = H.grad(0.0, pts)
    radial = pts[..., 0] * g[..., 0] + pts[..., 1] * g[..., 1]
    assert np.max(np.abs(liouville_pairing(H, 0.0, pts) + 0.5 * radial)) <= 1e-9


# ---------------------------------------------------------------------------
# contact_margin and contact_audit
# ---------------------------------------------------------------------------


def test_margin_quadratic_is_a0(rng):
    H = QuadraticHamiltonian(SQRT2, 2 - SQRT2)
    pts = random_disc_points(rng, 50)
    assert np.max(np.abs(contact_margin(H, 0.0, pts) - SQRT2)) <= 1e-12


def test_margin_constant_hamiltonian():
    H = QuadraticHamiltonian(4.0, 0.0)
    assert abs(contact_margin(H, 0.0, DiscPoint(0.3, 0.3)) - 4.0) <= 1e-14


def test_margin_rigid_rotation_boundary():
    # H + lambda(X) at r = 1 is h + p/q: the boundary value of H plus the
    # pairing p/q, exactly the orbit-slope margin of the collapsed action
    H = RigidRotationHamiltonian(2, 1, 3)
    p = DiscPoint.from_polar(1.0, 0.2)
    assert abs(contact_margin(H, 0.0, p) - (2.0 + 1.0 / 3.0)) <= 1e-12


def test_margin_additive_constant(rng):
    base = cosine_defect_hamiltonian(3, 0.5, 0.2)
    shifted = cosine_defect_hamiltonian(3 + 2.5, 0.5, 0.2)
    pts = random_disc_points(rng, 100)
    m0 = contact_margin(base, 0.0, pts)
    m1 = contact_margin(shifted, 0.0, pts)
    assert np.max(np.abs(m1 - m0 - 2.5)) <= 1e-9


def test_margin_agrees_with_radial_form(rng):
    H = cosine_defect_hamiltonian(3, 1.0, 0.1)
    pts = random_disc_points(rng, 64, r_max=0.99, r_min=0.05)
    g = H.grad(0.0, pts)
    r_dr = pts[..., 0] * g[..., 0] + pts[..., 1] * g[..., 1]
    alt = H.value(0.0, pts) - 0.5 * r_dr
    assert np.max(np.abs(contact_margin(H, 0.0, pts) - alt)) <= 1e-9


def test_contact_audit_constant_margin():
    rep = contact_audit(QuadraticHamiltonian(SQRT2, 2 - SQRT2))
    assert rep.passed
    assert abs(rep.min_margin - SQRT2) <= 1e-10
    assert rep.boundary_slope_max < 2 * rep.boundary_value


def test_contact_audit_detects_violation():
    h = 2
    rep = contact_audit(QuadraticHamiltonian(-0.1, h + 0.1),
                        SamplingGrid(8, 16, 16))
    assert not rep.passed
    assert abs(rep.min_margin + 0.1) <= 1e-10


def test_contact_audit_grid_minimization():
    rep = contact_audit(cosine_defect_hamiltonian(3, 1.0, 0.1),
                        SamplingGrid(8, 32, 32))
    # closed form: margin = 4 + 0.1 cos(theta) >= 3.9
    assert rep.passed
    assert abs(rep.min_margin - 3.9) <= 1e-6


def test_contact_audit_rejects_coarse_grid():
    with pytest.raises(ConfigurationError):
        SamplingGrid(4, 64, 64)


# ---------------------------------------------------------------------------
# pullbacks
# ---------------------------------------------------------------------------


def test_pullback_chain_rule(rng, stage_2_1_3):
    # for area-preserving phi: X_{H o phi} = Dphi^{-1} (X o phi)
    phi = stage_2_1_3.conjugator
    H = QuadraticHamiltonian(1.1, 0.9)
    HoPhi = PullbackHamiltonian(H, phi)
    pts = random_disc_points(rng, 60, r_max=0.85)
    X_pull = HoPhi.velocity(0.0, pts)
    X_base = H.velocity(0.0, phi(pts))
    inv_jac = phi.inverse_jacobian(phi(pts))
    expected = np.einsum("...ij,...j->...i", inv_jac, X_base)
    assert np.max(np.abs(X_pull - expected)) <= 1e-6


def test_oracle_failure_carries_location():
    from reebcut.errors import EvaluationError

    def broken(s, xy):
        raise RuntimeError("backend went away")

    H = CallableHamiltonian(broken, 1.0)
    with pytest.raises(EvaluationError) as err:
        H.value(0.7, np.array([0.1, 0.2]))
    assert err.value.s == 0.7
    assert err.value.point is not None
