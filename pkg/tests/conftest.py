import numpy as np
import pytest

from reebcut import (
    CallableHamiltonian,
    ConjugatorSpec,
    FlowSettings,
    QuadraticHamiltonian,
    RigidRotationHamiltonian,
    conjugated_stage,
)
from reebcut.geometry import TWO_PI

SQRT2 = np.sqrt(2.0)


def smooth_bump_t(t, t0, t1, order=0):
    """C-infinity bump in t on [t0, t1], peak value 1."""
    u = (np.asarray(t, dtype=float) - t0) / (t1 - t0)
    inside = (u > 1e-9) & (u < 1 - 1e-9)
    uc = np.where(inside, u, 0.5)
    core = np.exp(-1.0 / (uc * (1.0 - uc)) + 4.0)
    if order == 0:
        return np.where(inside, core, 0.0)
    dcore = core * (1.0 - 2.0 * uc) / (uc * (1.0 - uc)) ** 2 / (t1 - t0)
    return np.where(inside, dcore, 0.0)


def compact_disc_hamiltonian(amp=0.02, t0=0.04, t1=0.7744, angular=0.4,
                             time_factor=None):
    """Compactly supported generator amp * w(r^2) (1 + angular x) [* f(s)]."""

    def value(s, xy):
        t = xy[..., 0] ** 2 + xy[..., 1] ** 2
        base = amp * smooth_bump_t(t, t0, t1) * (1.0 + angular * xy[..., 0])
        return base * (time_factor(s) if time_factor else 1.0)

    def grad(s, xy):
        x, y = xy[..., 0], xy[..., 1]
        t = x * x + y * y
        w = smooth_bump_t(t, t0, t1)
        wp = smooth_bump_t(t, t0, t1, 1)
        gx = amp * (wp * 2 * x * (1 + angular * x) + w * angular)
        gy = amp * (wp * 2 * y * (1 + angular * x))
        g = np.stack([gx, gy], axis=-1)
        if time_factor:
            g = g * time_factor(s)
        return g

    return CallableHamiltonian(
        value, 0.0, grad_fn=grad, time_dependent=time_factor is not None,
        autonomous_near_boundary=True, radial_near_boundary=True,
        collar_width=1.0 - np.sqrt(t1),
    )


def radial_collar_hamiltonian(h=3, amp=0.7):
    """Radial, autonomous H = h + amp (1 - r^2)^2: satisfies every collar
    assumption without being quadratic."""

    def value(s, xy):
        r2 = xy[..., 0] ** 2 + xy[..., 1] ** 2
        return h + amp * (1.0 - r2) ** 2

    def grad(s, xy):
        r2 = xy[..., 0] ** 2 + xy[..., 1] ** 2
        factor = -4.0 * amp * (1.0 - r2)
        return factor[..., None] * xy

    def hess(s, xy):
        x, y = xy[..., 0], xy[..., 1]
        r2 = x * x + y * y
        out = np.empty(xy.shape[:-1] + (2, 2))
        out[..., 0, 0] = -4 * amp * (1 - r2) + 8 * amp * x * x
        out[..., 1, 1] = -4 * amp * (1 - r2) + 8 * amp * y * y
        out[..., 0, 1] = 8 * amp * x * y
        out[..., 1, 0] = out[..., 0, 1]
        return out

    return CallableHamiltonian(
        value, h, grad_fn=grad, hessian_fn=hess,
        ds_fn=lambda s, xy: np.zeros(np.asarray(xy).shape[:-1]),
        autonomous_near_boundary=True, radial_near_boundary=True,
        collar_width=1.0, time_dependent=False,
    )


def polynomial_defect_hamiltonian(h, c, d):
    """H = h + (1 - r^2)(c + d x): like the cosine-defect family but a
    polynomial, hence smooth through the origin (flow-accuracy fixtures
    need that; the cosine version is only Lipschitz at r = 0)."""

    def value(s, xy):
        x, y = xy[..., 0], xy[..., 1]
        return h + (1.0 - x * x - y * y) * (c + d * x)

    def grad(s, xy):
        x, y = xy[..., 0], xy[..., 1]
        r2 = x * x + y * y
        gx = -2 * x * (c + d * x) + (1.0 - r2) * d
        gy = -2 * y * (c + d * x)
        return np.stack([gx, gy], axis=-1)

    def hess(s, xy):
        x, y = xy[..., 0], xy[..., 1]
        out = np.empty(xy.shape[:-1] + (2, 2))
        out[..., 0, 0] = -2 * c - 6 * d * x
        out[..., 0, 1] = -2 * y * d
        out[..., 1, 0] = out[..., 0, 1]
        out[..., 1, 1] = -2 * (c + d * x)
        return out

    return CallableHamiltonian(
        value, h, grad_fn=grad, hessian_fn=hess,
        ds_fn=lambda s, xy: np.zeros(np.asarray(xy).shape[:-1]),
        autonomous_near_boundary=True, radial_near_boundary=(d == 0),
        collar_width=1.0, time_dependent=False,
    )


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260808)


@pytest.fixture(scope="session")
def quadratic_sqrt2():
    return QuadraticHamiltonian(SQRT2, 2.0 - SQRT2)


@pytest.fixture(scope="session")
def rigid_2_1_3():
    return RigidRotationHamiltonian(2, 1, 3)


@pytest.fixture(scope="session")
def stage_2_1_3():
    """A conjugated rotation stage shared by the heavier tests."""
    spec = ConjugatorSpec(amplitude=0.12, delta=0.2, mode=2, r_inner=0.2)
    return conjugated_stage(2, 1, 3, spec, w_grid=704)


@pytest.fixture(scope="session")
def fast_flow():
    return FlowSettings(step=TWO_PI / 600)


def random_disc_points(rng, n, r_max=0.9, r_min=0.02):
    r = np.sqrt(rng.uniform(r_min**2, r_max**2, n))
    t = rng.uniform(0.0, TWO_PI, n)
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=-1)
