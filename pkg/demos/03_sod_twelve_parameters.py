"""
A shock tube with twelve uncertain parameters
=============================================

The left and right states depend affinely on y1..y12.  The full grid
would have 64 * 8**12 cells; in TT format with rank 1 it is a few
kilobytes.  For two parameters the dense solver is still affordable,
which gives a check.
"""

import numpy as np

from ttsfv import scenarios
from ttsfv.dense import DenseSFV
from ttsfv.stats import expectation, run_scenario, std

sc = scenarios.sod12()
print("grid", sc.mesh.shape, "=", float(np.prod(sc.mesh.shape)), "cells")

solver, _, s1, rep = run_scenario(sc)          # rank 1, the default
rho = expectation(s1.quantities[0], solver.measure)
print(f"{rep.n_steps} steps in {rep.loop_seconds:.1f}s, storage {sum(c.size for c in s1.quantities[0].cores)} numbers")
print("E[rho] every 8th cell:", np.round(rho[::8], 3))
print("std(rho) max:", std(s1.quantities[0], solver.measure).max().round(4))

# open ends: momentum enters through the pressure difference, the rest is rounding
print("momentum change  :", rep.final_integral[1] - rep.initial_integral[1])
print("boundary inflow  :", rep.external_change[1])
print("rounding defects :", rep.rounding_drift[1])

# two active parameters against the full-grid solver
sc2 = scenarios.sod((1, 2))
solver2, _, t2, _ = run_scenario(sc2, max_rank="none")
dense = DenseSFV(sc2.model, sc2.mesh, sc2.measure, solver2.cfg.integrator, solver2.cfg.cfl)
D, _ = dense.run(dense.cell_average_init(sc2.u0), sc2.t_final)
gap = np.abs(expectation(t2.quantities[0], solver2.measure) - dense.expectation(D[0])).mean()
print("m = 2, L1 gap to dense:", f"{gap:.2e}")
