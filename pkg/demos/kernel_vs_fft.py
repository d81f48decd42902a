"""Compare the integral kernel of the linear flow with the FFT propagator.

Run: python demos/kernel_vs_fft.py
"""
import math
import warnings

from rotgpe import SimulationParams
from rotgpe.field import BoundaryDecayWarning, lp_norm
from rotgpe.propagator import mehler_apply, mehler_quarter_period, propagate_linear
from rotgpe.verify import oracle_datum, oracle_grid

warnings.simplefilter("ignore", BoundaryDecayWarning)
lin = SimulationParams(1.0, 0.0, 1.0)

print(f"{'t':>6} {'n':>4} {'|kernel - fft|':>15} {'unitarity':>10} {'dispersive':>11}")
for t in (0.1, 0.3, 0.6, 1.0, math.pi / 2):
    for n in (64, 96):
        grid = oracle_grid(1.0, n, t)
        phi = oracle_datum(grid, 1.0)
        k = mehler_apply(phi, t, lin, method="quadrature")
        f = propagate_linear(phi, t, lin)
        disp = lp_norm(k, math.inf) / (lp_norm(phi, 1) / (4 * t))
        print(f"{t:6.3f} {n:4d} {lp_norm(k - f, 2):15.2e} {abs(lp_norm(k, 2) - 1):10.1e} {disp:11.4f}")
print("at t = 0.1 the chirp w cot(wt)|y| passes the grid Nyquist frequency: the rectangle rule aliases")

# At a quarter period the chirp disappears: the flow is a rotated, scaled
# Fourier transform, which factors into one-dimensional transforms.
phi = oracle_datum(oracle_grid(1.0, 96, math.pi / 2), 1.0)
q = mehler_quarter_period(phi, lin)
print(f"\nquarter period, separable transform vs fft: {lp_norm(q - propagate_linear(phi, math.pi / 2, lin), 2):.2e}")

# Small times alias the rectangle rule (the chirp outruns the grid); the
# Fresnel evaluation integrates the kernel exactly against the interpolant.
for t in (1e-3, 1e-2):
    k = mehler_apply(phi, t, lin, method="fresnel")
    print(f"fresnel route at t={t:g}: {lp_norm(k - propagate_linear(phi, t, lin), 2):.2e}")
