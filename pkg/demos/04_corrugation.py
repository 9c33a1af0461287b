"""Kuiper corrugations on a flat sheet and one Nash-Kuiper stage.

A single corrugation adds a² ν⊗ν to the metric up to O(1/λ); a stage
mollifies, decomposes the deficit into primitive metrics and adds them in turn.
"""
import numpy as np

from cilab import nash_kuiper as nk

slope, errs = nk.corrugation_slope(513, (12, 24, 48))
print("metric error vs λ:", np.round(errs, 6), "slope", round(slope, 3))

grid, g = nk.flat_square(257)
cur, rep = nk.stage(grid, g)
print("deficit  ", rep.deficit_before, "->", rep.deficit_after)
print("C1, C2   ", round(rep.c1_after, 3), round(rep.c2_after, 1))
print("λs       ", [round(x, 2) for x in rep.lambdas], "clamped", rep.clamped)
# a negative margin means the next stage cannot decompose the deficit
print("min eigenvalue of g - u#e:", rep.min_margin)
nk.export_obj(cur, "stage1.obj")
