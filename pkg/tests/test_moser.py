import numpy as np
import pytest

from reebcut import (
    BumpProfile,
    CanonicalRecoverySettings,
    GridFunction2D,
    HamiltonianIsotopyPath,
    MoserSettings,
    PreconditionError,
    canonical_hamiltonian,
    moser_flow,
    moser_pullback_residual,
    poincare_primitive,
    primitive_residual,
    zero_integral_fixture,
)
from reebcut.moser import g_function_values
from reebcut.geometry import polar_grid

from conftest import compact_disc_hamiltonian


# ---------------------------------------------------------------------------
# grid plumbing
# ---------------------------------------------------------------------------


def test_bump_profile_unit_integral():
    chi = BumpProfile.polynomial()
    y = np.linspace(0.0, 1.0, 20001)
    integral = np.trapezoid(chi(y), y)
    assert abs(integral - 1.0) <= 1e-10
    assert chi(0.29) == 0.0 and chi(0.71) == 0.0


def test_grid_function_compact_margin_enforced():
    vals = np.zeros((64, 64))
    vals[1, 1] = 1.0
    with pytest.raises(PreconditionError):
        GridFunction2D(vals)


def test_grid_function_csv_round_trip(tmp_path):
    eta = zero_integral_fixture(1, 64)
    path = tmp_path / "grid.csv"
    eta.to_csv(path)
    again = GridFunction2D.from_csv(path)
    assert np.max(np.abs(again.values - eta.values)) <= 1e-12
    header = path.read_text().splitlines()[0]
    assert "n=64" in header and "support_x" in header


# ---------------------------------------------------------------------------
# the compactly supported Poincare lemma
# ---------------------------------------------------------------------------


def test_primitive_of_zero_is_zero():
    eta = GridFunction2D(np.zeros((64, 64)))
    beta = poincare_primitive(eta)
    assert np.max(np.abs(beta.dx.values)) == 0.0
    assert np.max(np.abs(beta.dy.values)) == 0.0


@pytest.mark.parametrize("fixture", [1, 2, 3])
def test_primitive_residual_and_support(fixture):
    eta = zero_integral_fixture(fixture, 256)
    beta = poincare_primitive(eta)
    assert primitive_residual(eta, beta) <= 1e-6
    # compact support: exact zeros on the two-cell margins
    for arr in (beta.dx.values, beta.dy.values):
        assert np.max(np.abs(arr[:2])) == 0.0
        assert np.max(np.abs(arr[-2:])) == 0.0
        assert np.max(np.abs(arr[:, :2])) == 0.0
        assert np.max(np.abs(arr[:, -2:])) == 0.0


def test_primitive_rejects_nonzero_integral():
    vals = zero_integral_fixture(1, 64).values + 1e-4
    vals[:2] = vals[-2:] = 0.0
    vals[:, :2] = vals[:, -2:] = 0.0
    with pytest.raises(PreconditionError):
        poincare_primitive(GridFunction2D(vals, compact=False))


def test_primitive_linearity():
    n = 128
    e1 = zero_integral_fixture(1, n)
    e2 = zero_integral_fixture(3, n)
    b1 = poincare_primitive(e1)
    b2 = poincare_primitive(e2)
    bsum = poincare_primitive(GridFunction2D(e1.values + e2.values))
    assert np.max(np.abs(bsum.dx.values - b1.dx.values - b2.dx.values)) <= 1e-10
    assert np.max(np.abs(bsum.dy.values - b1.dy.values - b2.dy.values)) <= 1e-10


def test_primitive_residual_order_under_doubling():
    res = {}
    for n in (128, 256):
        eta = zero_integral_fixture(1, n)
        res[n] = primitive_residual(eta, poincare_primitive(eta))
    order = np.log2(res[128] / res[256])
    assert order >= 2.0


# ---------------------------------------------------------------------------
# Moser flow
# ---------------------------------------------------------------------------


def _density_pair(n=128, amplitude=0.2):
    base = zero_integral_fixture(2, n)
    scale = amplitude / float(np.abs(base.values).max())
    w0 = GridFunction2D(np.ones((n, n)), compact=False)
    w1 = GridFunction2D(1.0 + scale * base.values, compact=False)
    return w0, w1


def test_moser_identity_when_forms_equal():
    n = 64
    w = GridFunction2D(np.ones((n, n)), compact=False)
    psi = moser_flow(w, w, settings=MoserSettings(steps=16))
    assert np.max(np.abs(psi.displacement())) == 0.0


def test_moser_pullback_residual():
    w0, w1 = _density_pair(128, 0.2)
    psi = moser_flow(w0, w1, settings=MoserSettings(steps=48))
    assert moser_pullback_residual(psi, w0, w1) <= 1e-5
    d = psi.displacement()
    for sl in (d[:2], d[-2:], d[:, :2], d[:, -2:]):
        assert np.max(np.abs(sl)) == 0.0


def test_moser_iterative_refinement_reduces_residual():
    # a deliberately coarse first pass, then a corrective second pass
    w0, w1 = _density_pair(96, 0.45)
    rough = moser_flow(w0, w1, settings=MoserSettings(steps=2))
    res1 = moser_pullback_residual(rough, w0, w1)
    jac = rough.jacobian_grid()
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    img = rough.grid_images
    hi = (w1.n - 1) / w1.n
    achieved = rough._g1.ev(np.clip(img[..., 0], 0, hi),
                            np.clip(img[..., 1], 0, hi)) * det
    # mathematically the pullback is exactly 1 on the static margin; clear
    # the spectral dust so the precondition check sees that
    achieved[:2] = achieved[-2:] = 1.0
    achieved[:, :2] = achieved[:, -2:] = 1.0
    achieved = GridFunction2D(achieved, compact=False)
    correction = moser_flow(w0, achieved, settings=MoserSettings(steps=48))
    res2 = moser_pullback_residual(correction, w0, achieved)
    assert res2 < res1


def test_moser_rejects_nonpositive_density():
    n = 64
    w0 = GridFunction2D(np.ones((n, n)), compact=False)
    bad = GridFunction2D(np.full((n, n), -0.5), compact=False)
    with pytest.raises(PreconditionError):
        moser_flow(w0, bad)


def test_moser_rejects_unequal_integrals():
    n = 64
    w0 = GridFunction2D(np.ones((n, n)), compact=False)
    w1 = GridFunction2D(np.ones((n, n)) * 1.01, compact=False)
    with pytest.raises(PreconditionError):
        moser_flow(w0, w1)


# ---------------------------------------------------------------------------
# canonical Hamiltonian
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def autonomous_recovery():
    K = compact_disc_hamiltonian(amp=0.02)
    path = HamiltonianIsotopyPath(K, steps_per_period=1000)
    H = canonical_hamiltonian(path)
    return K, path, H


def test_canonical_round_trip_autonomous(autonomous_recovery):
    K, _, H = autonomous_recovery
    worst = 0.0
    for j in range(0, len(H.s_nodes), 24):
        s = H.s_nodes[j]
        err = np.max(np.abs(H.values_at_images[j] - K.value(s, H.image_points[j])))
        worst = max(worst, float(err))
    assert worst <= 1e-5


def test_canonical_identity_path_gives_zero():
    class IdentityPath:
        def evaluate_on_grid(self, s_values, pts):
            return np.broadcast_to(pts, (len(s_values),) + pts.shape).copy()

    H = canonical_hamiltonian(IdentityPath(),
                              CanonicalRecoverySettings(n_r=64, n_theta=16,
                                                        n_s=32))
    assert np.max(np.abs(H.values_at_images)) <= 1e-10


def test_canonical_round_trip_time_dependent():
    K = compact_disc_hamiltonian(amp=0.015, angular=0.0,
                                 time_factor=np.sin)
    path = HamiltonianIsotopyPath(K, steps_per_period=1000)
    H = canonical_hamiltonian(path)
    worst = 0.0
    for j in range(0, len(H.s_nodes), 16):
        s = H.s_nodes[j]
        err = np.max(np.abs(H.values_at_images[j] - K.value(s, H.image_points[j])))
        worst = max(worst, float(err))
    assert worst <= 1e-5


def test_canonical_oracle_and_support(autonomous_recovery):
    K, _, H = autonomous_recovery
    rng = np.random.default_rng(5)
    pts = rng.uniform(-0.7, 0.7, size=(200, 2))
    for s in (0.9, 4.1):
        assert np.max(np.abs(H.value(s, pts) - K.value(s, pts))) <= 1e-5
    # identical zero on the declared support margin
    theta = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    for r in (H.support_radius * (1 + 1e-9), 0.5 * (1 + H.support_radius), 0.999):
        ring = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)
        assert np.all(H.value(1.0, ring) == 0.0)


def test_canonical_rejects_non_area_preserving():
    class SqueezePath:
        def evaluate_on_grid(self, s_values, pts):
            out = np.empty((len(s_values),) + pts.shape)
            for i, s in enumerate(np.asarray(s_values)):
                factor = 1.0 + 0.05 * s
                out[i] = pts * [factor, 1.0]
            return out

    with pytest.raises(PreconditionError):
        canonical_hamiltonian(SqueezePath(),
                              CanonicalRecoverySettings(n_r=64, n_theta=16,
                                                        n_s=32))


def test_canonical_rejects_path_not_starting_at_identity():
    class ShiftedPath:
        def evaluate_on_grid(self, s_values, pts):
            return np.broadcast_to(pts + 0.01, (len(s_values),) + pts.shape).copy()

    with pytest.raises(PreconditionError):
        canonical_hamiltonian(ShiftedPath(),
                              CanonicalRecoverySettings(n_r=64, n_theta=16,
                                                        n_s=32))


def test_g_function_path_independence(autonomous_recovery):
    _, path, _ = autonomous_recovery
    targets = polar_grid(3, 5, r_max=0.7, include_center=False)
    g_rad = g_function_values(path, 1.3, targets, route="radial", n_quad=801)
    g_ax = g_function_values(path, 1.3, targets, route="axis", n_quad=801)
    assert np.max(np.abs(g_rad - g_ax)) <= 1e-6
