"""Exact toy iteration u <- u + (1 - u²)/2 s(λx) from u = 0.

Every state is piecewise constant with rational data, so the defect
∫(1 - u²) is computed exactly and compared with (7/8)^k.
"""
from fractions import Fraction

from cilab.toy_ci import PiecewiseConstantFn, increment_norms, toy_run

traj = toy_run(PiecewiseConstantFn.constant(0), steps=10)
inc = increment_norms(traj)
print(" k  pieces  defect                 defect/(7/8)^k  |u_k+1 - u_k|_L1")
for k, d in enumerate(traj.defects):
    l1 = f"{float(inc[k][1]):.6f}" if k < len(inc) else ""
    print(f"{k:2d}  {len(traj.states[k]):6d}  {float(d):.15f}  {float(d / Fraction(7, 8) ** k):.6f}        {l1}")

# the increments shrink like the defect, so u_k converges in L¹ but not in
# BV: the jumps multiply while the total variation stays of order one
print("u_2 values:", [str(v) for v in traj.states[2].values])
