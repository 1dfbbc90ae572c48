"""Approximation stages toward a pseudorotation.

Each stage conjugates a rational rotation by an explicit compactly
supported area-preserving map; the stage Hamiltonian H = R o phi^{-1}
equals the rigid-rotation tail identically near the boundary, so every
stage passes the cut construction's audits while its interior dynamics
converges along the continued-fraction convergents of the target angle.
"""

import numpy as np

from reebcut import (
    ConjugatorSchedule,
    ConjugatorSpec,
    FlowSettings,
    conjugated_stage,
    continued_fraction_convergents,
    golden_mean_inverse,
    orbit_statistics,
    return_map,
    stage_sequence,
)
from reebcut.geometry import TWO_PI

a = golden_mean_inverse()
print("target rotation number a = 1/golden =", a)
print("convergents:", continued_fraction_convergents(a, 5))

# --- one stage in detail -----------------------------------------------------
spec = ConjugatorSpec(amplitude=0.12, delta=0.2, mode=2, r_inner=0.2)
stage = conjugated_stage(2, 1, 3, spec)
phi = stage.conjugator
pts = np.array([[0.5, 0.0], [0.2, 0.4], [-0.3, -0.5]])
flow = return_map(stage.hamiltonian, pts, FlowSettings(step=TWO_PI / 600))
ang = TWO_PI / 3
rot = np.array([[np.cos(ang), -np.sin(ang)], [np.sin(ang), np.cos(ang)]])
oracle = phi(phi.inverse(pts) @ rot.T)
print("\nconjugated stage p/q = 1/3:")
print("  |flow - phi o R o phi^{-1}| =", float(np.max(np.abs(flow - oracle))))

# --- a short stage sequence --------------------------------------------------
seq = stage_sequence(a, 3, h=2,
                     schedule=ConjugatorSchedule(amplitude0=0.1),
                     settings=FlowSettings(step=TWO_PI / 500),
                     w_grid=384)
print("\nstage sequence (3 stages):")
for st, f0, fx in zip(seq.stages, seq.f0_values, seq.f0_expected):
    d = st.diagnostics
    print(f"  nu={st.nu} p/q={st.p}/{st.q}: contact={d['contact']['pass']} "
          f"extension={d['extension_pass']} f(0)={f0:.9f} "
          f"(expected {fx:.9f}) periods={d['periodic_periods']}")
print("  C^0 stage differences:", ["%.3e" % d[0] for d in seq.difference_norms])
print("  f(0) converges toward 2(h+a) =", 2 * (2 + a))

# --- orbit statistics of the last stage ---------------------------------------
stats = orbit_statistics(seq.stages[-1].hamiltonian,
                         np.array([0.45, 0.1]), iterations=120,
                         settings=FlowSettings(step=TWO_PI / 400))
counts = stats.theta_histogram[0]
print("\norbit statistics (last stage, 120 iterates):")
print("  occupied angular bins:", int(np.count_nonzero(counts)), "of", len(counts))
print("  Birkhoff average of r^2:", stats.birkhoff_r2[-1])
