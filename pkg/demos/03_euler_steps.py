"""Convex integration steps for the Euler relaxation from the trivial subsolution.

Each step adds a modulated plane wave per class, corrects it spectrally so
the linear system holds to round-off, and checks the constraint margin.
"""
from cilab.euler_ci import ci_run, cross_term_decay, trivial_state

start = trivial_state(resolution=128)
state, recs, err = ci_run(start, steps=3)
print(" k   lambda     delta     |v|_L2    linres     margin    shell")
for r in recs:
    print(f"{r.k:2d}  {r.lambda_k:8.2f}  {r.delta_k:.5f}  {r.l2_v:.5f}  {r.linres:.1e}  {r.min_margin:+.2e}  {r.shell:.3f}")
if err is not None:
    # the grid runs out of resolvable frequencies before the deficit does
    print("stopped:", err)
    for d in err.diagnostics:
        print("   ", d)

first, _, _ = ci_run(start, steps=1)
cd = cross_term_decay(first, 2 * 3.141592653589793 * 16)
print("cross term H^-1/L2 ratio when λ doubles:", round(cd["ratio"], 3))
