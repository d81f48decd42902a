"""The nine acceptance criteria, each at its stated tolerance.

Every test records a one-line PASS/FAIL summary (shown at the end of the
pytest run) before asserting.
"""
import math
import time

import numpy as np
import pytest

from conftest import compact_datum
from rotgpe import EvolveConfig, GridSpec, SimulationParams, evolve, sample_coherent, sample_gaussian, sample_vortex
from rotgpe.conservation import pseudoconformal_residuals
from rotgpe.duhamel import (
    PicardConfig,
    StrichartzSpec,
    evolve_on_nodes,
    nonlinear_identity_residual,
    picard_solve,
    strichartz_samples,
    triple_norm,
    workspace_distance,
)
from rotgpe.field import gradient_arrays, lp_norm
from rotgpe.operators import (
    OperatorFrame,
    apply_H,
    apply_H_factored,
    apply_J,
    apply_J_factored,
    commutation_residual,
    conjugation_residual,
    verify_e1_e2,
)
from rotgpe.propagator import mehler_apply, mehler_quarter_period, propagate_linear
from rotgpe.verify import oracle_datum, oracle_grid

pytestmark = pytest.mark.slow

UNIT = SimulationParams(1.0, 1.0, 1.0)
LINEAR = SimulationParams(1.0, 0.0, 1.0)
DTS = (4e-3, 2e-3, 1e-3)


def orders(errors):
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


@pytest.fixture(scope="module")
def long_runs():
    """Compact datum on [0, 2 pi] at the three step sizes, both splitting schemes."""
    g = GridSpec(128, 8.0)
    u0 = compact_datum(g)
    runs = {}
    for scheme in ("exact", "directional"):
        for dt in DTS:
            cfg = EvolveConfig(dt=dt, t_end=2 * math.pi, snapshot_stride=10, scheme=scheme, keep_snapshots=False)
            start = time.perf_counter()
            traj = evolve(u0, UNIT, cfg)
            runs[scheme, dt] = (traj.ledger, time.perf_counter() - start)
    return runs


def test_criterion_1_mass(long_runs, acceptance):
    led, seconds = long_runs["exact", 1e-3]
    m = np.asarray(led.mass)
    drift = float(np.max(np.abs(m - m[0])) / m[0])
    ok = drift <= 1e-12 and seconds <= 120
    acceptance(1, "mass conservation on [0, 2pi]", ok, f"relative drift {drift:.2e} (<= 1e-12), runtime {seconds:.1f}s (<= 120s)")
    assert ok


def test_criterion_2_energy_and_angular_momentum(long_runs, acceptance):
    e0 = [long_runs["exact", dt][0].drift("e0") for dt in DTS]
    lz = [long_runs["exact", dt][0].drift("lz") for dt in DTS]
    lz_dir = [long_runs["directional", dt][0].drift("lz") for dt in DTS]
    e0_order = min(orders(e0))
    lz_dir_order = min(orders(lz_dir))
    # The exact linear flow commutes with L_z and the nonlinear phase conserves <L_z>,
    # so the default scheme leaves no dt-dependent L_z error to measure an order from:
    # its drift sits at a roundoff floor.  The order is measured on the directional
    # scheme, whose kinetic/rotation splitting does break L_z at O(dt^2).
    ok = (e0[-1] <= 1e-6 and lz[-1] <= 1e-6 and e0_order >= 1.9
          and max(lz) <= 1e-9 and lz_dir[-1] <= 1e-6 and lz_dir_order >= 1.9)
    acceptance(2, "E0 and <L_z> conservation", ok,
               f"E0 drift {e0[-1]:.2e} order {e0_order:.2f}; <L_z> drift {lz[-1]:.2e} "
               f"(dt-independent floor, max {max(lz):.1e}); directional <L_z> drift {lz_dir[-1]:.2e} order {lz_dir_order:.2f}")
    assert ok


def test_criterion_3_linear_eigenstates(acceptance):
    g = GridSpec(128, 8.0)
    cfg = EvolveConfig(dt=1e-3, t_end=1.0, snapshot_stride=1000)
    errs = {}
    for name, u0 in (("gaussian", sample_gaussian(g, 1.0)), ("vortex m=1", sample_vortex(g, 1.0, 1))):
        final = evolve(u0, LINEAR, cfg).snapshots[-1]
        errs[name] = float(np.max(np.abs(final.values - np.exp(-1j) * u0.values)))
    ok = max(errs.values()) <= 1e-8
    acceptance(3, "linear eigenstates evolve as exp(-i w t) u0", ok,
               ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + " (<= 1e-8)")
    assert ok


def test_criterion_4_kernel_oracle(quiet_decay, acceptance):
    t = 0.3
    agree = {}
    for n in (64, 96):
        g = oracle_grid(1.0, n)
        phi = oracle_datum(g, 1.0)
        kernel = mehler_apply(phi, t, LINEAR, method="quadrature")
        agree[n] = lp_norm(kernel - propagate_linear(phi, t, LINEAR), 2)
        if n == 64:
            unitarity = abs(lp_norm(kernel, 2) / lp_norm(phi, 2) - 1)
    g = oracle_grid(1.0, 64)
    phi = oracle_datum(g, 1.0)
    l1 = lp_norm(phi, 1)
    ratios = []
    for k in range(1, 11):
        tk = k * math.pi / 20
        out = mehler_quarter_period(phi, LINEAR) if k == 10 else mehler_apply(phi, tk, LINEAR, method="quadrature")
        ratios.append(lp_norm(out, math.inf) / (l1 / (4 * tk)))
    worst = max(ratios)
    ok = unitarity <= 1e-6 and agree[64] <= 1e-4 and agree[96] < agree[64] and worst <= 1 + 1e-6
    acceptance(4, "kernel oracle", ok,
               f"unitarity {unitarity:.1e}; agreement n=64 {agree[64]:.1e} -> n=96 {agree[96]:.1e}; "
               f"dispersive max ratio {worst:.4f} (<= 1 + 1e-6)")
    assert ok


def test_criterion_5_operator_identities(quiet_decay, acceptance):
    phi = oracle_datum(oracle_grid(1.0, 64), 1.0)
    e1, e2 = verify_e1_e2(phi, 0.6, LINEAR)
    conj = max(conjugation_residual(phi, 0.3, LINEAR, w) for w in "JH")

    g = GridSpec(128, 8.0)
    u = sample_coherent(g, (0.8, -0.5), (2.0, 1.0), 0.6)
    frame = OperatorFrame(0.7, 1.0)
    fact = 0.0
    for direct, factored in ((apply_J, apply_J_factored), (apply_H, apply_H_factored)):
        a, b = direct(u, frame), factored(u, frame)
        num = math.sqrt(sum(lp_norm(x - y, 2) ** 2 for x, y in zip(a, b)))
        fact = max(fact, num / math.sqrt(sum(lp_norm(x, 2) ** 2 for x in a)))

    coarse = sample_coherent(GridSpec(64, 8.0), (0.8, -0.5), (2.0, 1.0), 0.6)
    comm = {w: (commutation_residual(coarse, 0.5, LINEAR, w), commutation_residual(u, 0.5, LINEAR, w)) for w in "JH"}

    omega = 1.3
    g1, g2 = gradient_arrays(u.values, g)
    x1, x2, _ = g.mesh()
    j0 = apply_J(u, OperatorFrame(0.0, omega))
    h0 = apply_H(u, OperatorFrame(0.0, omega))
    exact = (np.array_equal(j0[0].values, -1j * g1) and np.array_equal(j0[1].values, -1j * g2)
             and np.array_equal(h0[0].values, omega * (x1 * u.values))
             and np.array_equal(h0[1].values, omega * (x2 * u.values)))

    comm_ok = all(fine <= 1e-6 and fine < coarse_r for coarse_r, fine in comm.values())
    ok = max(e1, e2) <= 1e-4 and conj <= 1e-4 and fact <= 1e-10 and comm_ok and exact
    acceptance(5, "operator identities", ok,
               f"e1 {e1:.1e} e2 {e2:.1e}; conjugation {conj:.1e}; factored {fact:.1e}; commutation n=128 "
               + ", ".join(f"{w} {c[1]:.1e} (n=64 {c[0]:.1e})" for w, c in comm.items())
               + f"; J(0)/H(0) exact: {exact}")
    assert ok


def _pc_residual(params, dt, stride=10):
    g = GridSpec(128, 8.0)
    traj = evolve(sample_gaussian(g, 1.0), params, EvolveConfig(dt=dt, t_end=math.pi / 2, snapshot_stride=stride,
                                                                 keep_snapshots=False))
    rh, rj = pseudoconformal_residuals(traj)
    return max(float(np.max(np.abs(rh))), float(np.max(np.abs(rj))))


def test_criterion_6_pseudoconformal_laws(acceptance):
    cubic = _pc_residual(UNIT, 1e-3)
    quintic = [_pc_residual(SimulationParams(1.0, 0.5, 2.0), dt) for dt in DTS]
    order = min(orders(quintic))
    ok = cubic <= 1e-4 and quintic[-1] <= 5e-4 and order >= 1.9
    acceptance(6, "pseudo-conformal laws on [0, pi/2]", ok,
               f"sigma=1 residual {cubic:.1e} (<= 1e-4); sigma=2 residual {quintic[-1]:.1e} (<= 5e-4), order {order:.2f}")
    assert ok


def test_criterion_7_nonlinear_identity(acceptance):
    u = sample_coherent(GridSpec(128, 8.0), (0.8, -0.5), (2.0, 1.0), 0.6)
    r1 = nonlinear_identity_residual(u, 0.3, SimulationParams(1.0, 1.0, 1.0))
    r2 = nonlinear_identity_residual(u, 0.3, SimulationParams(1.0, 1.0, 2.0))
    ok = r1 <= 1e-8 and r2 <= 1e-7
    acceptance(7, "nonlinear-estimate identity", ok, f"sigma=1 {r1:.1e} (<= 1e-8), sigma=2 {r2:.1e} (<= 1e-7)")
    assert ok


def test_criterion_8_picard(acceptance):
    g = GridSpec(128, 8.0)
    u0 = sample_gaussian(g, 1.0)
    cfg = PicardConfig(t_horizon=0.1, rho=4.0, quad_nodes=64)
    start = time.perf_counter()
    res = picard_solve(u0, UNIT, cfg)
    ref = evolve_on_nodes(u0, UNIT, cfg)
    agree = workspace_distance(res.trajectory, ref, cfg.spec, UNIT) / triple_norm(ref, cfg.spec, UNIT)
    linear = picard_solve(u0, LINEAR, cfg)
    seconds = time.perf_counter() - start
    ratio = max(res.ratios[1:])
    ok = res.converged and ratio <= 0.5 and agree <= 1e-4 and len(linear.distances) == 1 and seconds <= 300
    acceptance(8, "Picard fixed point", ok,
               f"{len(res.distances)} iterations, max ratio from iteration 2 {ratio:.3f} (<= 0.5); "
               f"relative triple-norm agreement {agree:.1e} (<= 1e-4); beta=0 iterations {len(linear.distances)}; "
               f"runtime {seconds:.1f}s")
    assert ok


def test_criterion_9_strichartz(acceptance):
    unit = strichartz_samples(StrichartzSpec(2.0), LINEAR, 16, 0)
    small = strichartz_samples(StrichartzSpec(4.0), LINEAR, 16, 0)
    big = strichartz_samples(StrichartzSpec(4.0), LINEAR, 32, 0)
    defect = float(np.max(np.abs(unit - 1)))
    change = abs(big.max() / small.max() - 1)
    ok = defect <= 1e-12 and bool(np.isfinite(big).all()) and change <= 0.2
    acceptance(9, "Strichartz sanity", ok,
               f"rho=2 max |ratio-1| {defect:.1e}; rho=4 max ratio {small.max():.4f} (16) -> {big.max():.4f} (32), "
               f"change {change:.1%} (<= 20%)")
    assert ok
