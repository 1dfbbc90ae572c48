"""Contact conditions and Poincare return maps on the disc.

The basic objects: a 2*pi-periodic Hamiltonian H_s on the unit disc, the
1-form H_s ds + r^2 dtheta on the solid torus, and the disc flow whose
time-2*pi map is the Poincare return map of the induced Reeb flow.
"""

import numpy as np

from reebcut import (
    DiscPoint,
    QuadraticHamiltonian,
    RigidRotationHamiltonian,
    SamplingGrid,
    contact_audit,
    contact_margin,
    hamiltonian_vector_field,
    integrate_isotopy,
    linearized_return,
    periodic_point_scan,
    reeb_period,
    return_map,
)
from reebcut.geometry import polar_grid

SQRT2 = np.sqrt(2.0)

# --- the quadratic (ellipsoid) Hamiltonian: H = a2 r^2 + a0 ----------------
H = QuadraticHamiltonian(SQRT2, 2.0 - SQRT2)
p = DiscPoint(0.5, 0.2)
print("ellipsoid model, a0 = sqrt(2), h = 2")
print("  X at (0.5, 0.2):         ", hamiltonian_vector_field(H, 0.0, p))
print("  contact margin (== a0):  ", contact_margin(H, 0.0, p))

audit = contact_audit(H, SamplingGrid(16, 32, 32))
print("  grid audit:               min margin %.6f, boundary slope %.6f, pass=%s"
      % (audit.min_margin, audit.boundary_slope_max, audit.passed))

# the central orbit is a genuine Reeb orbit; its Reeb period is 2 pi a0
path = integrate_isotopy(H, np.array([0.0, 0.0]))
print("  Reeb period of the center: %.12f (2 pi a0 = %.12f)"
      % (reeb_period(H, path), 2 * np.pi * SQRT2))

# --- a rigid rotation: return map = rotation by 2 pi p/q -------------------
R = RigidRotationHamiltonian(2, 1, 3)
start = np.array([0.5, 0.0])
image = return_map(R, start)
print("\nrigid rotation h=2, p/q=1/3")
print("  psi(0.5, 0):", image, " (angle 2 pi/3)")

mono = linearized_return(R, start)
print("  monodromy determinant:", np.linalg.det(mono))

records = periodic_point_scan(R, 3, polar_grid(3, 6, r_max=0.8), tol=1e-6)
periods = sorted({r.period for r in records})
print("  periodic scan finds periods:", periods,
      f"({len(records)} points, center is the fixed point)")
