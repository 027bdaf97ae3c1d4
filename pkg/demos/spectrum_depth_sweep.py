"""How fast the shape-Hessian spectrum collapses, as a function of depth.

At the data shape the Hessian of the matching criterion is compact: its
eigenvalues over normal Fourier perturbations fall off superalgebraically,
which is the quantitative face of ill-posedness here. Burying the
inclusion deeper makes the collapse faster. Shallow inclusions also show
mode hybridization: the k and k+2 perturbations couple through the data,
so the per-mode envelope staircases instead of falling smoothly.
"""

import numpy as np

from kvshape import (
    TransmissionSolver,
    build_curve,
    circle,
    hessian_at_critical,
    spectrum_report,
)

R, s1, s2, n, modes = 2.0, 1.0, 5.0, 128, 8
outer = build_curve(circle((0.0, 0.0), R), n)
f = np.cos(outer.theta)

print(f"{'rho':>5} | eigenvalue levels (cos/sin mean), modes k = 1..{modes}")
print("-" * 78)
for rho in (0.9, 0.75, 0.6, 0.5, 0.4):
    inner = build_curve(circle((0.0, 0.0), rho), n)
    g = s1 * TransmissionSolver(outer, inner, s1, s2).solve_dirichlet(f).dnu_outer
    labels, M = hessian_at_critical(outer, inner, s1, s2, (f, g), modes)
    report = spectrum_report(M, labels)
    levels = report.eigenvalues.reshape(modes, 2).mean(axis=1)
    row = " ".join(f"{lam:8.1e}" for lam in levels)
    print(f"{rho:>5.2f} | {row}")

print()
print("per-mode envelope k^4 * lambda_k at two depths (staircase vs smooth):")
for rho in (0.75, 0.5):
    inner = build_curve(circle((0.0, 0.0), rho), n)
    g = s1 * TransmissionSolver(outer, inner, s1, s2).solve_dirichlet(f).dnu_outer
    labels, M = hessian_at_critical(outer, inner, s1, s2, (f, g), modes)
    report = spectrum_report(M, labels)
    levels = report.eigenvalues.reshape(modes, 2).mean(axis=1)
    weighted = (np.arange(1, modes + 1) ** 4) * levels
    row = " ".join(f"{w:8.1e}" for w in weighted)
    print(f"rho = {rho:.2f}: {row}")

print()
print("decay slope of log lambda vs rank (steeper = worse posed):")
for rho in (0.75, 0.5):
    inner = build_curve(circle((0.0, 0.0), rho), n)
    g = s1 * TransmissionSolver(outer, inner, s1, s2).solve_dirichlet(f).dnu_outer
    labels, M = hessian_at_critical(outer, inner, s1, s2, (f, g), modes)
    print(f"rho = {rho:.2f}: slope {spectrum_report(M, labels).decay_slope:+.3f}")
