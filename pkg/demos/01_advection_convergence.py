"""
Random-phase transport: accuracy and ranks
==========================================

u_t + u_x = 0 with u0 = sin(2 pi (x + 0.1 y)), y uniform on [0, 1].
The mean has a closed form, so the grid can be refined and the
observed order read off directly.
"""

import numpy as np

from ttsfv import scenarios
from ttsfv.stats import convergence_study, expectation, run_scenario, std

# physical and stochastic cells are refined together
rows = convergence_study(scenarios.advection, [32, 64, 128, 256], "L1", epsilon_tt=1e-6)

print(" cells      L1 error   order  rank")
for r in rows:
    order = "" if r.order is None else f"{r.order:5.2f}"
    print(f"{r.cells:6d}  {r.error:12.3e}  {order:>6}  {r.max_rank:4d}")

# the solution is a rank-2 function of (x, y) at every time
assert max(r.max_rank for r in rows) <= 4

# a single state, for a look at the numbers
sc = scenarios.advection(cells=64)
solver, s0, s1, rep = run_scenario(sc)
mean = expectation(s1.quantities[0], solver.measure)
dev = std(s1.quantities[0], solver.measure)
print("\nmax |E[u]| =", np.abs(mean).max().round(4), "  max std =", dev.max().round(4))
print("ranks per bond at t =", s1.t, ":", s1.quantities[0].ranks)
