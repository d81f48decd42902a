"""Complex wave functions sampled on a periodic square grid.

Fields live on ``[-l, l)^2`` with ``n`` points per axis.  Arrays are indexed
``values[i1, i2]`` so that flattening in C order makes ``x2`` vary fastest.
Derivatives are spectral; odd-order multipliers drop the Nyquist mode.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

BOUNDARY_TOL = 1e-10
REGIME_NOTE = "outside the global well-posedness regime: sigma*omega < 1"


class BoundaryDecayWarning(UserWarning):
    """Field is not negligible on the outermost ring of the grid."""


@dataclass(frozen=True)
class GridSpec:
    n: int
    l: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n % 2:
            raise ValueError("n must be even")
        if self.n < 8:
            raise ValueError("n must be at least 8")
        if not self.l > 0:
            raise ValueError("l must be positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "l", float(self.l))

    @property
    def h(self) -> float:
        return 2.0 * self.l / self.n

    @property
    def x(self) -> np.ndarray:
        return _axes(self)[0]

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT order, Nyquist included."""
        return _axes(self)[1]

    @property
    def k_odd(self) -> np.ndarray:
        """Wavenumbers for odd-order multipliers (Nyquist set to zero)."""
        return _axes(self)[2]

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return _mesh(self)

    def radius_sq(self) -> np.ndarray:
        return _mesh(self)[2]


@lru_cache(maxsize=64)
def _axes(grid: GridSpec):
    x = -grid.l + grid.h * np.arange(grid.n)
    k = 2.0 * np.pi * np.fft.fftfreq(grid.n, d=grid.h)
    k_odd = k.copy()
    k_odd[grid.n // 2] = 0.0
    for a in (x, k, k_odd):
        a.flags.writeable = False
    return x, k, k_odd


@lru_cache(maxsize=64)
def _mesh(grid: GridSpec):
    x = grid.x
    x1, x2 = np.meshgrid(x, x, indexing="ij")
    r2 = x1 * x1 + x2 * x2
    for a in (x1, x2, r2):
        a.flags.writeable = False
    return x1, x2, r2


def make_grid(n: int, l: float) -> GridSpec:
    return GridSpec(n, l)


@dataclass(frozen=True)
class SimulationParams:
    """Trap/rotation frequency, nonlinearity strength and power."""

    omega: float = 1.0
    beta: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not self.beta >= 0:
            raise ValueError("beta must be non-negative")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        for name in ("omega", "beta", "sigma"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def in_global_regime(self) -> bool:
        return self.sigma * self.omega >= 1.0

    def regime_warnings(self) -> list[str]:
        return [] if self.in_global_regime else [REGIME_NOTE]


@dataclass(frozen=True, eq=False)
class WaveField:
    grid: GridSpec
    values: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        n = self.grid.n
        if v.size != n * n:
            raise ValueError(f"expected {n * n} samples, got {v.size}")
        v = v.reshape(n, n)
        if not np.all(np.isfinite(v)):
            raise FloatingPointError("non-finite samples in field")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "time_tag", float(self.time_tag))

    def with_values(self, values, time_tag: float | None = None) -> WaveField:
        return WaveField(self.grid, values, self.time_tag if time_tag is None else time_tag)

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def _check(self, other: WaveField):
        if other.grid != self.grid:
            raise ValueError("grid mismatch")

    def __add__(self, other: WaveField) -> WaveField:
        self._check(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: WaveField) -> WaveField:
        self._check(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c) -> WaveField:
        return self.with_values(c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> WaveField:
        return self.with_values(-self.values)


def zeros(grid: GridSpec, time_tag: float = 0.0) -> WaveField:
    return WaveField(grid, np.zeros((grid.n, grid.n), complex), time_tag)


# -- initial data ----------------------------------------------------------


def sample_gaussian(grid: GridSpec, omega: float) -> WaveField:
    """Harmonic-oscillator ground state ``(omega/pi)^(1/2) exp(-omega |x|^2 / 2)``."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    r2 = grid.radius_sq()
    return WaveField(grid, np.sqrt(omega / np.pi) * np.exp(-0.5 * omega * r2))


def sample_vortex(grid: GridSpec, omega: float, m: int) -> WaveField:
    """Normalized ``(x1 + i sign(m) x2)^|m| exp(-omega |x|^2 / 2)``, an L_z eigenstate."""
    if not omega > 0:
        raise ValueError("omega must be positive")
    if abs(m) > 4 or int(m) != m:
        raise ValueError("m must be an integer with |m| <= 4")
    if m == 0:
        return sample_gaussian(grid, omega)
    x1, x2, r2 = grid.mesh()
    # continuum normalisation: int |x|^(2|m|) e^{-omega r^2} = pi |m|! / omega^(|m|+1)
    mm = abs(int(m))
    norm = np.sqrt(omega ** (mm + 1) / (np.pi * np.prod(np.arange(1, mm + 1))))
    z = x1 + 1j * np.sign(m) * x2
    return WaveField(grid, norm * z**mm * np.exp(-0.5 * omega * r2))


def sample_coherent(grid: GridSpec, center=(0.0, 0.0), momentum=(0.0, 0.0), width: float = 1.0) -> WaveField:
    """Unit-mass Gaussian packet ``exp(-|x-c|^2/(2 w^2) + i p.x)``."""
    x1, x2, _ = grid.mesh()
    c1, c2 = center
    p1, p2 = momentum
    g = np.exp(-((x1 - c1) ** 2 + (x2 - c2) ** 2) / (2 * width**2) + 1j * (p1 * x1 + p2 * x2))
    g /= np.sqrt(np.pi) * width
    return WaveField(grid, g)


def sample_random(grid: GridSpec, seed, components: int | None = None) -> WaveField:
    """Random unit-mass mixture of Gaussian packets with smooth decay.

    Centers lie in the unit disk, widths in [0.5, 1.0], momenta below 1.5 in
    magnitude.  Resolved for ``h <= 0.25`` and decayed inside ``l >= 7`` at
    ``t = 0``; under the trap with ``w = 1`` a width-``w`` packet breathes to
    width ``1/w``, so evolving it needs ``l >= 10`` for edge values below 1e-4.
    """
    rng = np.random.default_rng(seed)
    if components is None:
        components = int(rng.integers(1, 4))
    x1, x2, _ = grid.mesh()
    total = np.zeros_like(x1, dtype=complex)
    for _ in range(components):
        r, th = np.sqrt(rng.uniform()), rng.uniform(0, 2 * np.pi)
        c1, c2 = r * np.cos(th), r * np.sin(th)
        pr, pth = 1.5 * np.sqrt(rng.uniform()), rng.uniform(0, 2 * np.pi)
        p1, p2 = pr * np.cos(pth), pr * np.sin(pth)
        w = rng.uniform(0.5, 1.0)
        amp = rng.normal() + 1j * rng.normal()
        total += amp * np.exp(-((x1 - c1) ** 2 + (x2 - c2) ** 2) / (2 * w * w) + 1j * (p1 * x1 + p2 * x2))
    total /= np.sqrt(np.sum(np.abs(total) ** 2)) * grid.h
    return WaveField(grid, total)


# -- norms and products ----------------------------------------------------


def lp_norm(u: WaveField | np.ndarray, p: float, grid: GridSpec | None = None) -> float:
    """Discrete L^p norm with Riemann weight h^2; ``p = inf`` gives the max modulus."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    if isinstance(u, WaveField):
        grid, vals = u.grid, u.values
    else:
        vals = np.asarray(u)
    a = np.abs(vals)
    if np.isinf(p):
        return float(a.max())
    h2 = grid.h**2
    if p == 2:
        return float(np.sqrt(np.sum(a * a) * h2))
    return float((np.sum(a**p) * h2) ** (1.0 / p))


def vector_lp_norm(components, p: float, grid: GridSpec | None = None) -> float:
    """L^p norm of the pointwise Euclidean magnitude of a vector field."""
    arrs = [c.values if isinstance(c, WaveField) else np.asarray(c) for c in components]
    if grid is None:
        grid = components[0].grid
    mag = np.sqrt(sum(np.abs(a) ** 2 for a in arrs))
    return lp_norm(mag, p, grid)


def inner_product(u: WaveField, v: WaveField) -> complex:
    """``h^2 sum conj(u) v``."""
    if u.grid != v.grid:
        raise ValueError("grid mismatch")
    return complex(np.vdot(u.values, v.values) * u.grid.h**2)


def sigma_norm(u: WaveField) -> float:
    """``||u||_{H^1} + || |x| u ||_2`` with ``||u||_{H^1}^2 = ||u||^2 + ||grad u||^2``."""
    g1, g2 = spectral_gradient(u)
    l2 = lp_norm(u, 2)
    grad_sq = lp_norm(g1, 2) ** 2 + lp_norm(g2, 2) ** 2
    return float(np.sqrt(l2**2 + grad_sq) + lp_norm(multiply_radius(u), 2))


# -- spectral derivatives and coordinate multiplications --------------------


def boundary_max(values: np.ndarray) -> float:
    return float(max(np.abs(values[0]).max(), np.abs(values[-1]).max(),
                     np.abs(values[:, 0]).max(), np.abs(values[:, -1]).max()))


def check_decay(u: WaveField, tol: float = BOUNDARY_TOL) -> bool:
    b = boundary_max(u.values)
    if b >= tol:
        warnings.warn(f"field is {b:.2e} on the boundary ring (tolerance {tol:.0e})",
                      BoundaryDecayWarning, stacklevel=3)
        return False
    return True


def _d_axis(values: np.ndarray, grid: GridSpec, axis: int) -> np.ndarray:
    k = grid.k_odd
    shape = (-1, 1) if axis == 0 else (1, -1)
    return np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(values, axis=axis), axis=axis)


def gradient_arrays(values: np.ndarray, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    return _d_axis(values, grid, 0), _d_axis(values, grid, 1)


def spectral_gradient(u: WaveField) -> tuple[WaveField, WaveField]:
    check_decay(u)
    d1, d2 = gradient_arrays(u.values, u.grid)
    return u.with_values(d1), u.with_values(d2)


def multiply_x(u: WaveField) -> tuple[WaveField, WaveField]:
    x1, x2, _ = u.grid.mesh()
    return u.with_values(x1 * u.values), u.with_values(x2 * u.values)


def multiply_x_perp(u: WaveField) -> tuple[WaveField, WaveField]:
    """``x_perp u`` with ``x_perp = (-x2, x1)``."""
    x1, x2, _ = u.grid.mesh()
    return u.with_values(-x2 * u.values), u.with_values(x1 * u.values)


def gradient_perp(u: WaveField) -> tuple[WaveField, WaveField]:
    """``(-d2 u, d1 u)``."""
    g1, g2 = spectral_gradient(u)
    return -g2, g1


def multiply_radius(u: WaveField) -> WaveField:
    return u.with_values(np.sqrt(u.grid.radius_sq()) * u.values)


def rotate_quarter(u: WaveField) -> WaveField:
    """Rotate the field by +pi/2: ``v(x) = u(x2, -x1)``, an exact index permutation."""
    n = u.grid.n
    idx = (n - np.arange(n)) % n
    return u.with_values(u.values.T[idx, :])


# -- snapshot files --------------------------------------------------------

_MAGIC = b"RGPE"
_HEADER = struct.Struct("<4sId")


def save_field(u: WaveField, path) -> None:
    n = u.grid.n
    buf = np.empty((n * n, 2), dtype="<f8")
    flat = u.values.ravel()
    buf[:, 0] = flat.real
    buf[:, 1] = flat.imag
    with open(path, "wb") as f:
        f.write(_HEADER.pack(_MAGIC, n, u.grid.l))
        f.write(buf.tobytes())


def load_field(path, time_tag: float = 0.0) -> WaveField:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("truncated snapshot header")
    magic, n, l = _HEADER.unpack_from(data)
    if magic != _MAGIC:
        raise ValueError("not an RGPE snapshot")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * n * n:
        raise ValueError(f"snapshot holds {body.size // 2} samples, header says {n * n}")
    vals = body[0::2] + 1j * body[1::2]
    return WaveField(GridSpec(n, l), vals.reshape(n, n), time_tag)
