"""Which coefficient closes the pseudo-conformal balance when omega != 1?

The H-law reads
    ||H(t)u||^2 + 2 beta sin^2(wt)/(sigma+1) P(u) + K int_0^t sin(2ws) P(u(s)) ds = w^2 ||x u0||^2
with P(u) = ||u||_{2 sigma + 2}^{2 sigma + 2}.  Two candidate values of K are
compared along numerical solutions.

Run: python demos/history_term.py
"""
import math

import numpy as np

from rotgpe import EvolveConfig, GridSpec, SimulationParams, evolve, history_coefficient, pseudoconformal_residuals, sample_gaussian

print(f"{'omega':>6} {'sigma':>6} {'K stated':>9} {'K dim.':>9} {'resid stated':>13} {'resid dim.':>11}")
for omega, sigma in ((1.0, 2.0), (2.0, 1.0), (2.0, 2.0), (0.5, 3.0)):
    grid = GridSpec(128, 8.0 / math.sqrt(omega))
    params = SimulationParams(omega, 1.0, sigma)
    traj = evolve(sample_gaussian(grid, omega), params,
                  EvolveConfig(dt=1e-3, t_end=math.pi / (2 * omega), keep_snapshots=False))
    res = {form: max(np.max(np.abs(r)) for r in pseudoconformal_residuals(traj, form))
           for form in ("stated", "dimensional")}
    print(f"{omega:6.2f} {sigma:6.2f} {history_coefficient(params, 'stated'):9.3f} "
          f"{history_coefficient(params, 'dimensional'):9.3f} {res['stated']:13.2e} {res['dimensional']:11.2e}")

print("\nK = 2 beta w (sigma - 1)/(sigma + 1) balances the law at every omega;"
      "\nK = 2 beta (sigma w - 1)/(sigma + 1) only when w = 1.")
