"""Shear and Muskat mixing zones as subsolutions.

The shear zone |x2 - 1/2| < ct carries a linear velocity profile and a
Reynolds-stress-like u; the energy density drops linearly in time.
"""
import numpy as np

from cilab.euler_subsol import (build_muskat_subsolution, build_shear_subsolution, constraint_margin,
                                dissipation_scan, energy_profile, muskat_residual, weak_residual, zone_width)
from cilab.fields import Grid

grid = Grid(128, time_samples=9, time_step=0.25 / 8)
t = build_shear_subsolution(0.5, grid)
print("weak residual      ", weak_residual(t))
print("min margin         ", constraint_margin(t).min())
E = energy_profile(t.v, grid, density=t.ebar)
print("E(t)               ", np.round(E, 5))
print("dE/dt (fit)        ", np.polyfit(grid.times(), E, 1)[0])

rows, opt = dissipation_scan(np.linspace(0.05, 1.5, 30), resolution=128)
print("fastest dissipation at c =", opt["c_star"], "rate", opt["rate"])
print("reference closed form c* =", opt["reference_c_star"], "rate", opt["reference_rate"])

m = build_muskat_subsolution(0.5, grid)
w = [zone_width(m.theta[j], grid) for j in range(1, 9)]
print("Muskat residual    ", muskat_residual(m))
print("zone widths        ", np.round(w, 6), "(2ct)")
