"""Picard iteration for the Duhamel equation: contraction for small data, failure for large.

Run: python demos/picard_contraction.py
"""
from rotgpe import GridSpec, SimulationParams, sample_gaussian
from rotgpe.duhamel import NoContractionError, PicardConfig, evolve_on_nodes, picard_solve, triple_norm, workspace_distance

grid = GridSpec(128, 8.0)
params = SimulationParams(1.0, 1.0, 1.0)

cfg = PicardConfig(t_horizon=0.1, rho=4.0, quad_nodes=64)
u0 = sample_gaussian(grid, 1.0)
res = picard_solve(u0, params, cfg)
print("T = 0.1, unit Gaussian")
for k, d in enumerate(res.distances, 1):
    ratio = f"  ratio {d / res.distances[k - 2]:.3f}" if k > 1 and res.distances[k - 2] > 0 else ""
    print(f"  iteration {k}: distance {d:.3e}{ratio}")
ref = evolve_on_nodes(u0, params, cfg)
rel = workspace_distance(res.trajectory, ref, cfg.spec, params) / triple_norm(ref, cfg.spec, params)
print(f"  fixed point vs split-step solution: {rel:.2e} (relative, triple norm)")

print("\nT = 0.4, amplitude 6")
try:
    picard_solve(6 * u0, params, PicardConfig(t_horizon=0.4, rho=4.0, quad_nodes=64))
except NoContractionError as exc:
    print(f"  {exc}")
