import math
import warnings

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from rotgpe import GridSpec, SimulationParams, WaveField, sample_coherent, sample_gaussian, sample_random, sample_vortex
from rotgpe.field import (
    REGIME_NOTE,
    BoundaryDecayWarning,
    check_decay,
    inner_product,
    load_field,
    lp_norm,
    gradient_perp,
    multiply_x,
    multiply_x_perp,
    rotate_quarter,
    save_field,
    sigma_norm,
    spectral_gradient,
    vector_lp_norm,
)

G = GridSpec(128, 8.0)


def _sympy_moments(omega):
    """Continuum values for the ground state (omega/pi)^(1/2) e^{-omega r^2/2}."""
    r, th = sp.symbols("r theta", positive=True)
    w = sp.Rational(omega) if isinstance(omega, int) else sp.nsimplify(omega)
    dens = w / sp.pi * sp.exp(-w * r**2)
    polar = lambda f: sp.integrate(sp.integrate(f * r, (r, 0, sp.oo)), (th, 0, 2 * sp.pi))
    return {
        "mass": float(polar(dens)),
        "x_sq": float(polar(r**2 * dens)),
        "l4_4": float(polar(dens**2)),
        "grad_sq": float(polar(w**2 * r**2 * dens)),
    }


# values frozen from _sympy_moments at omega = 1 and omega = 2
MOMENTS = {
    1: {"mass": 1.0, "x_sq": 1.0, "l4_4": 0.15915494309189535, "grad_sq": 1.0},
    2: {"mass": 1.0, "x_sq": 0.5, "l4_4": 0.3183098861837907, "grad_sq": 2.0},
}


@pytest.mark.parametrize("omega", [1, 2])
def test_frozen_moments_match_symbolic_integrals(omega):
    got = _sympy_moments(omega)
    for key, value in MOMENTS[omega].items():
        assert got[key] == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("omega", [1, 2])
def test_gaussian_moments_on_grid(omega):
    u = sample_gaussian(G, omega)
    m = MOMENTS[omega]
    assert lp_norm(u, 2) ** 2 == pytest.approx(m["mass"], abs=1e-13)
    assert vector_lp_norm(multiply_x(u), 2) ** 2 == pytest.approx(m["x_sq"], abs=1e-12)
    assert lp_norm(u, 4) ** 4 == pytest.approx(m["l4_4"], abs=1e-13)
    assert vector_lp_norm(spectral_gradient(u), 2) ** 2 == pytest.approx(m["grad_sq"], abs=1e-12)


def test_gaussian_gradient_is_spectrally_exact():
    u = sample_gaussian(G, 1.0)
    g1, g2 = spectral_gradient(u)
    x1, x2, _ = G.mesh()
    assert np.max(np.abs(g1.values + x1 * u.values)) < 1e-13
    assert np.max(np.abs(g2.values + x2 * u.values)) < 1e-13


@pytest.mark.parametrize("m", [-2, -1, 1, 3])
def test_vortex_is_normalized(m):
    assert lp_norm(sample_vortex(G, 1.5, m), 2) == pytest.approx(1.0, abs=1e-12)


def test_coherent_packet_mass_and_sup():
    u = sample_coherent(G, (0.5, -1.0), (1.0, 0.3), 0.7)
    assert lp_norm(u, 2) == pytest.approx(1.0, abs=1e-12)
    assert lp_norm(u, math.inf) <= 1 / (math.sqrt(math.pi) * 0.7) + 1e-15


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_parseval_for_random_fields(seed):
    g = GridSpec(64, 8.0)
    u = sample_random(g, seed)
    physical = lp_norm(u, 2) ** 2
    spectral = float(np.sum(np.abs(np.fft.fft2(u.values)) ** 2)) * g.h**2 / g.n**2
    assert physical == pytest.approx(spectral, rel=1e-12)
    assert physical == pytest.approx(1.0, rel=1e-12)


def test_random_fields_are_reproducible():
    a, b = sample_random(G, 7), sample_random(G, 7)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, sample_random(G, 8).values)


def test_inner_product_is_hermitian():
    u, v = sample_random(G, 1), sample_random(G, 2)
    assert inner_product(u, v) == pytest.approx(np.conj(inner_product(v, u)), abs=1e-15)
    assert inner_product(u, u).real == pytest.approx(lp_norm(u, 2) ** 2, rel=1e-14)


def test_sigma_norm_of_ground_state():
    # sqrt(1 + ||grad u||^2) + ||x u|| = sqrt(2) + 1 at omega = 1
    assert sigma_norm(sample_gaussian(G, 1.0)) == pytest.approx(math.sqrt(2) + 1, abs=1e-12)


@pytest.mark.parametrize("m", [1, 2, -1])
def test_quarter_rotation_of_vortex_is_a_phase(m):
    # (x1 + i x2)^m evaluated at (x2, -x1) is (-i)^m (x1 + i x2)^m
    v = sample_vortex(G, 1.0, m)
    assert np.max(np.abs(rotate_quarter(v).values - (-1j) ** m * v.values)) < 1e-12


def test_four_quarter_rotations_are_identity():
    u = sample_random(G, 3)
    r = u
    for _ in range(4):
        r = rotate_quarter(r)
    assert np.array_equal(r.values, u.values)


@pytest.mark.parametrize("c", [2.0, 10.0, 0.1])
@pytest.mark.parametrize("p", [1.0, 2.0, 4.0, math.inf])
def test_norms_are_homogeneous(c, p):
    u = sample_random(G, 8)
    assert lp_norm(u * c, p) == pytest.approx(c * lp_norm(u, p), rel=1e-13)
    assert sigma_norm(u * c) == pytest.approx(c * sigma_norm(u), rel=1e-13)


def test_constant_field_norm():
    g = GridSpec(8, 4.0)
    assert lp_norm(WaveField(g, np.ones((8, 8), complex)), 2) == 8.0


def test_gradient_is_linear():
    u, v = sample_random(G, 1), sample_random(G, 2)
    lhs = spectral_gradient(u * 2.0 - v * 0.5j)
    gu, gv = spectral_gradient(u), spectral_gradient(v)
    for k in range(2):
        assert lp_norm(lhs[k] - (gu[k] * 2.0 - gv[k] * 0.5j), 2) < 1e-12


def test_perpendicular_coordinate_identities():
    u = sample_random(G, 5)
    X1, X2, _ = G.mesh()
    x, xp = multiply_x(u), multiply_x_perp(u)
    assert np.allclose(xp[0].values, -X2 * u.values, rtol=0, atol=1e-15)
    assert np.allclose(xp[1].values, X1 * u.values, rtol=0, atol=1e-15)
    # x . x_perp = 0, and a second quarter turn (V1, V2) -> (-V2, V1) gives -x
    assert np.max(np.abs(X1 * xp[0].values + X2 * xp[1].values)) < 1e-13
    assert np.array_equal(-xp[1].values, -x[0].values)
    assert np.array_equal(xp[0].values, -x[1].values)


def test_perpendicular_gradient_of_radial_field_is_tangential():
    X1, X2, _ = G.mesh()
    gp = gradient_perp(sample_gaussian(G, 1.0))
    assert np.max(np.abs(X1 * gp[0].values + X2 * gp[1].values)) < 1e-8


def test_grid_validation():
    with pytest.raises(ValueError, match="even"):
        GridSpec(101, 8.0)
    with pytest.raises(ValueError):
        GridSpec(64, 0.0)
    assert GridSpec(64, 8.0).h == 0.25
    assert GridSpec(8, 1.0).k[4] == pytest.approx(-math.pi / 0.25)
    assert GridSpec(8, 1.0).k_odd[4] == 0.0


def test_params_validation_and_regime():
    with pytest.raises(ValueError):
        SimulationParams(omega=0.0)
    with pytest.raises(ValueError):
        SimulationParams(beta=-1.0)
    assert SimulationParams(1.0, 1.0, 1.0).regime_warnings() == []
    assert SimulationParams(1.0, 1.0, 0.5).regime_warnings() == [REGIME_NOTE]


def test_field_rejects_bad_values():
    with pytest.raises(ValueError):
        WaveField(G, np.zeros(10))
    bad = np.zeros((128, 128), complex)
    bad[3, 3] = np.nan
    with pytest.raises(FloatingPointError):
        WaveField(G, bad)
    u = sample_gaussian(G, 1.0)
    with pytest.raises(ValueError):
        u.values[0, 0] = 1.0


def test_grid_mismatch_is_an_error():
    with pytest.raises(ValueError, match="grid mismatch"):
        sample_gaussian(G, 1.0) + sample_gaussian(GridSpec(64, 8.0), 1.0)


def test_decay_warning():
    wide = sample_gaussian(GridSpec(64, 3.0), 0.5)
    with pytest.warns(BoundaryDecayWarning):
        assert not check_decay(wide)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_decay(sample_gaussian(G, 1.0))


def test_snapshot_round_trip_is_bit_exact(tmp_path):
    u = sample_random(G, 5)
    save_field(u, tmp_path / "u.rgpe")
    back = load_field(tmp_path / "u.rgpe")
    assert back.grid == G
    assert np.array_equal(back.values, u.values)


def test_snapshot_rejects_garbage(tmp_path):
    (tmp_path / "x").write_bytes(b"nope" + bytes(40))
    with pytest.raises(ValueError):
        load_field(tmp_path / "x")
    (tmp_path / "y").write_bytes(b"RG")
    with pytest.raises(ValueError, match="truncated"):
        load_field(tmp_path / "y")
