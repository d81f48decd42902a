"""Linear propagator, kernel oracle and the nonlinear time stepper.

The linear operator ``-1/2 Lap + w^2 |x|^2 / 2 - w L_z`` is quadratic, so its
flow ``S(t)`` factors exactly into pieces that are diagonal either in physical
space or along one Fourier axis::

    S(t) = e^{-i a V} e^{i b Lap / 2} e^{-i a V}  R(wt)
    a = tan(wt/2) / w,  b = sin(wt) / w,  R = shear_1 shear_2 shear_1

``R`` is the rotation generated by ``L_z`` written as three axis shears, each
applied exactly with a one-dimensional FFT.  The nonlinear step is a pointwise
phase, and ``strang_step`` composes the two symmetrically.

``mehler_apply`` evaluates the closed-form kernel by direct quadrature and is
kept independent of the FFT machinery used here.
"""
from __future__ import annotations

import contextlib
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .conservation import ConservationLedger
from .field import GridSpec, SimulationParams, WaveField, check_decay, load_field, save_field

ORACLE_MAX_N = 96
SINGULAR_TOL = 1e-12
FRESNEL_MAX_PHASE = math.pi / 8
_MAX_CHUNK = math.pi / 4

_fault = {"propagator": False}


class BlowUpError(FloatingPointError):
    pass


class OracleError(ValueError):
    pass


@contextlib.contextmanager
def injected_fault():
    """Test hook: flip the rotation sense inside ``linear_step``."""
    _fault["propagator"] = True
    try:
        yield
    finally:
        _fault["propagator"] = False


# -- exact linear flow -------------------------------------------------------


def _phase_m1(theta):
    """``exp(i theta) - 1`` without cancellation."""
    return np.expm1(1j * theta)


# Every multiplier below is stored as ``m - 1`` and applied in increment form,
# ``v + ifft((m - 1) fft(v))``.  The FFT pair then only touches the small
# correction, so its rounding no longer biases the norm step after step.


def _along(v, m1, axis):
    return v + np.fft.ifft(m1 * np.fft.fft(v, axis=axis), axis=axis)


@lru_cache(maxsize=32)
def _linear_factors(grid: GridSpec, omega: float, tau: float, corrupt: bool):
    th = omega * tau
    a = math.tan(th / 2)
    x1, x2, r2 = grid.mesh()
    k, ko = grid.k, grid.k_odd
    chirp = _phase_m1(-0.5 * a * omega * r2)
    ksq = k[:, None] ** 2 + k[None, :] ** 2
    kinetic = _phase_m1(-0.5 * math.sin(th) / omega * ksq)
    rot = -th if corrupt else th
    ta = math.tan(rot / 2)
    # f(x1 - ta x2, x2) then f(x1, x2 + sin x1) then f(x1 - ta x2, x2) = f(R x)
    shear1 = _phase_m1(-ta * ko[:, None] * x2)
    shear2 = _phase_m1(math.sin(rot) * ko[None, :] * x1)
    return chirp, kinetic, shear1, shear2


def _linear_array(values: np.ndarray, grid: GridSpec, omega: float, tau: float) -> np.ndarray:
    chirp, kinetic, shear1, shear2 = _linear_factors(grid, omega, float(tau), _fault["propagator"])
    v = values + chirp * values
    v = v + np.fft.ifft2(kinetic * np.fft.fft2(v))
    v = v + chirp * v
    v = _along(v, shear1, 0)
    v = _along(v, shear2, 1)
    return _along(v, shear1, 0)


def linear_array(values: np.ndarray, grid: GridSpec, omega: float, t: float) -> np.ndarray:
    """``S(t)`` on a raw array, split into chunks with ``|wt| <= pi/4``."""
    if t == 0:
        return np.array(values, dtype=complex)
    pieces = max(1, math.ceil(abs(omega * t) / _MAX_CHUNK - 1e-12))
    tau = t / pieces
    v = values
    for _ in range(pieces):
        v = _linear_array(v, grid, omega, tau)
    return v


def linear_step(u: WaveField, dt: float, params: SimulationParams) -> WaveField:
    """Advance the linear equation (kinetic, trap and rotation) by ``dt``; unitary."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    return u.with_values(linear_array(u.values, u.grid, params.omega, dt), u.time_tag + dt)


def propagate_linear(u: WaveField, t: float, params: SimulationParams) -> WaveField:
    """``S(t) u`` for any real ``t`` (negative times run the flow backwards)."""
    return u.with_values(linear_array(u.values, u.grid, params.omega, t), u.time_tag + t)


# -- direction-alternating kinetic/rotation split ---------------------------


@lru_cache(maxsize=16)
def _directional_factors(grid: GridSpec, omega: float, tau: float):
    x1, x2, _ = grid.mesh()
    k, ko = grid.k, grid.k_odd
    half = _phase_m1(-(0.5 * k[:, None] ** 2 + omega * x2 * ko[:, None]) * (tau / 2))
    full = _phase_m1(-(0.5 * k[None, :] ** 2 - omega * x1 * ko[None, :]) * tau)
    return half, full


def kinetic_rotation_step(u: WaveField, dt: float, params: SimulationParams) -> WaveField:
    """Half x1 sub-step, full x2 sub-step, half x1 sub-step; the trap is not included.

    Sub-step 1 solves ``i u_t = -1/2 d11 u - i w x2 d1 u`` exactly, sub-step 2
    solves ``i u_t = -1/2 d22 u + i w x1 d2 u`` exactly.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    half, full = _directional_factors(u.grid, params.omega, float(dt))
    v = _along(u.values, half, 0)
    v = _along(v, full, 1)
    return u.with_values(_along(v, half, 0), u.time_tag + dt)


# -- pointwise sub-flows -----------------------------------------------------


def _nonlinear_phase(values, params, dt):
    if params.beta == 0:
        return values
    return values + _phase_m1(-params.beta * dt * np.abs(values) ** (2 * params.sigma)) * values


def nonlinear_step(u: WaveField, dt: float, params: SimulationParams) -> WaveField:
    """Exact flow of ``i u_t = beta |u|^{2 sigma} u``."""
    return u.with_values(_nonlinear_phase(u.values, params, dt), u.time_tag + dt)


def nonlinear_potential_step(u: WaveField, dt: float, params: SimulationParams) -> WaveField:
    """Exact flow of ``i u_t = (w^2 |x|^2 / 2 + beta |u|^{2 sigma}) u``; moduli are unchanged."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    pot = 0.5 * params.omega**2 * u.grid.radius_sq()
    phase = pot + params.beta * np.abs(u.values) ** (2 * params.sigma)
    return u.with_values(u.values + _phase_m1(-phase * dt) * u.values, u.time_tag + dt)


SCHEMES = ("exact", "directional")


def _strang_array(values, grid, params, dt, scheme):
    if scheme == "exact":
        v = _nonlinear_phase(values, params, dt / 2)
        v = linear_array(v, grid, params.omega, dt)
        return _nonlinear_phase(v, params, dt / 2)
    if scheme == "directional":
        pot = 0.5 * params.omega**2 * grid.radius_sq()

        def kick(w):
            return w + _phase_m1(-0.5 * dt * (pot + params.beta * np.abs(w) ** (2 * params.sigma))) * w

        half, full = _directional_factors(grid, params.omega, float(dt))
        v = kick(values)
        v = _along(v, half, 0)
        v = _along(v, full, 1)
        return kick(_along(v, half, 0))
    raise ValueError(f"unknown scheme {scheme!r}")


def strang_step(u: WaveField, dt: float, params: SimulationParams, scheme: str = "exact") -> WaveField:
    """Second-order symmetric step.

    ``"exact"``: half nonlinear phase, exact linear flow, half nonlinear phase.
    ``"directional"``: half trap+nonlinear phase, ``kinetic_rotation_step``,
    half trap+nonlinear phase.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    return u.with_values(_strang_array(u.values, u.grid, params, dt, scheme), u.time_tag + dt)


# -- kernel oracle -----------------------------------------------------------


def _check_oracle(u0: WaveField, t: float, omega: float, allow_large: bool):
    th = omega * t
    if abs(math.sin(th)) < SINGULAR_TOL:
        raise OracleError(f"singular time: sin(omega t) = 0 at t={t}")
    if not 0 < abs(th) < math.pi:
        raise OracleError("kernel formula needs 0 < |omega t| < pi; compose for longer times")
    if u0.grid.n > ORACLE_MAX_N and not allow_large:
        raise OracleError(f"oracle too large: n={u0.grid.n} > {ORACLE_MAX_N} (pass allow_large=True)")


def mehler_apply(u0: WaveField, t: float, params: SimulationParams, allow_large: bool = False,
                 method: str = "auto") -> WaveField:
    """Apply ``S(t)`` through its integral kernel.

    ``method="quadrature"`` is the rectangle rule with weight ``h^2`` per
    source node::

        S(t)u(x) = w / (2 pi i sin wt) h^2 sum_y exp(i w (|x-y|^2 cot(wt) / 2 - x_perp . y)) u(y)

    The sum factors as ``chirp(x) * sum_y exp(-i xi(x) . y) [chirp(y) u(y)]``
    with ``xi = w (cot x + x_perp)``, evaluated as two matrix products.  It is
    reliable only while the chirp ``w cot(wt) |y|`` stays below the grid
    Nyquist frequency where ``u`` lives.

    ``method="fresnel"`` integrates the kernel exactly against the
    trigonometric interpolant of ``u`` (closed-form Fresnel integrals per
    Fourier mode).  The interpolant is periodic, so its images are propagated
    too; they stay outside the window only for small times, hence the guard
    ``|wt| <= pi/8``.  This is the tool for small times, where the quadrature
    aliases.

    ``method="auto"`` (default) takes the Fresnel route when the quadrature
    chirp ``w |cot(wt)| l`` exceeds the Nyquist wavenumber ``pi/h`` and the
    Fresnel guard allows it, and the quadrature otherwise.
    """
    omega = params.omega
    _check_oracle(u0, t, omega, allow_large)
    if method == "auto":
        th = abs(omega * t)
        chirp = omega * abs(math.cos(th) / math.sin(th)) * u0.grid.l
        method = "fresnel" if th <= FRESNEL_MAX_PHASE and chirp > math.pi / u0.grid.h else "quadrature"
    if method == "quadrature":
        vals = _mehler_quadrature(u0.values, u0.grid, omega, t)
    elif method == "fresnel":
        if abs(omega * t) > FRESNEL_MAX_PHASE:
            raise OracleError("fresnel evaluation needs |omega t| <= pi/8")
        vals = _mehler_fresnel(u0.values, u0.grid, omega, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    return u0.with_values(vals, u0.time_tag + t)


def _mehler_quadrature(vals, grid, omega, t):
    th = omega * t
    cot = math.cos(th) / math.sin(th)
    x = grid.x
    x1, x2, r2 = grid.mesh()
    chirp = np.exp(0.5j * omega * cot * r2)
    g = chirp * vals
    xi1 = (omega * (cot * x1 - x2)).ravel()
    xi2 = (omega * (cot * x2 + x1)).ravel()
    e1 = np.exp(-1j * np.outer(xi1, x))
    e2 = np.exp(-1j * np.outer(xi2, x))
    s = np.einsum("ti,ti->t", e1 @ g, e2).reshape(vals.shape)
    return omega / (2j * math.pi * math.sin(th)) * grid.h**2 * chirp * s


def _mehler_fresnel(vals, grid, omega, t):
    # S(t) e^{ik.y} = e^{ik.x} exp(-i |k - w x_perp|^2 tan(wt) / (2w)) / cos(wt)
    th = omega * t
    tan = math.tan(th)
    n, l = grid.n, grid.l
    m = np.arange(-n // 2, n // 2 + 1)
    kk = math.pi * m / l
    coef = np.fft.fftshift(np.fft.fft2(vals)) / n**2
    coef = np.pad(coef, ((0, 1), (0, 1)))
    # split the Nyquist row/column evenly between +k_N and -k_N
    coef[-1, :] = coef[0, :] / 2
    coef[0, :] /= 2
    coef[:, -1] = coef[:, 0] / 2
    coef[:, 0] /= 2
    phase_l = np.exp(1j * kk * l)
    coef *= phase_l[:, None] * phase_l[None, :]
    coef *= np.exp(-0.5j * tan / omega * (kk[:, None] ** 2 + kk[None, :] ** 2))
    x1, x2, r2 = grid.mesh()
    z1 = (x1 - tan * x2).ravel()
    z2 = (x2 + tan * x1).ravel()
    e1 = np.exp(1j * np.outer(z1, kk))
    e2 = np.exp(1j * np.outer(z2, kk))
    s = np.einsum("ta,ta->t", e1 @ coef, e2).reshape(vals.shape)
    return np.exp(-0.5j * omega * tan * r2) * s / math.cos(th)


def mehler_quarter_period(u0: WaveField, params: SimulationParams) -> WaveField:
    """``S(pi/(2w))``: a scaled rotated Fourier transform, evaluated separably.

    At a quarter period the chirp vanishes and the kernel reduces to
    ``w/(2 pi i) exp(i w x2 y1) exp(-i w x1 y2)``, a product of one-dimensional
    transforms along each axis.
    """
    omega = params.omega
    x = u0.grid.x
    em = np.exp(-1j * omega * np.outer(x, x))
    ep = np.conj(em)
    vals = omega / (2j * math.pi) * u0.grid.h**2 * (em @ u0.values.T @ ep.T)
    return u0.with_values(vals, u0.time_tag + math.pi / (2 * omega))


# -- time stepping driver ----------------------------------------------------


@dataclass(frozen=True)
class EvolveConfig:
    dt: float = 1e-3
    t_end: float = math.pi / 2
    snapshot_stride: int = 10
    segment_length: float | None = None
    scheme: str = "exact"
    keep_snapshots: bool = True

    def segment(self, omega: float) -> float:
        return self.segment_length if self.segment_length is not None else math.pi / (2 * omega)

    def validate(self, omega: float) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least dt")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be a positive integer")
        seg = self.segment(omega)
        if not 0 < self.dt <= seg:
            raise ValueError("dt must not exceed segment_length")
        if not self.dt * omega < 0.5:
            raise ValueError("dt * omega must be below 0.5")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


@dataclass
class Trajectory:
    params: SimulationParams
    times: np.ndarray
    snapshots: list = field(default_factory=list)
    config: EvolveConfig | None = None
    ledger: ConservationLedger | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size and (self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0)):
            raise ValueError("times must start at 0 and increase strictly")

    @property
    def grid(self) -> GridSpec:
        return self.snapshots[0].grid

    def stack(self) -> np.ndarray:
        return np.stack([s.values for s in self.snapshots])

    @classmethod
    def from_stack(cls, params, times, grid, stack, **kw) -> Trajectory:
        snaps = [WaveField(grid, v, t) for t, v in zip(times, stack)]
        return cls(params, np.asarray(times), snaps, **kw)

    def until(self, t: float) -> Trajectory:
        """Prefix of the trajectory with ``times <= t``."""
        keep = int(np.searchsorted(self.times, t * (1 + 1e-12), side="right"))
        return Trajectory(self.params, self.times[:keep], self.snapshots[:keep], self.config)

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        files = []
        for i, snap in enumerate(self.snapshots):
            name = f"snapshot_{i:05d}.rgpe"
            save_field(snap, d / name)
            files.append(name)
        manifest = {
            "params": asdict(self.params),
            "config": asdict(self.config) if self.config else None,
            "times": [float(t) for t in self.times],
            "snapshots": files,
        }
        (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        if self.ledger is not None:
            self.ledger.to_csv(d / "ledger.csv")

    @classmethod
    def load(cls, directory) -> Trajectory:
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text())
        params = SimulationParams(**manifest["params"])
        cfg = EvolveConfig(**manifest["config"]) if manifest["config"] else None
        times = manifest["times"]
        snaps = [load_field(d / f, t) for f, t in zip(manifest["snapshots"], times)]
        ledger = ConservationLedger.from_csv(d / "ledger.csv", params) if (d / "ledger.csv").exists() else None
        return cls(params, np.asarray(times), snaps, cfg, ledger)


def _segment_steps(span: float, dt: float) -> int:
    return max(1, math.ceil(span / dt - 1e-9))


def evolve(u0: WaveField, params: SimulationParams, config: EvolveConfig,
           ledger_form: str = "stated") -> Trajectory:
    """Integrate from ``u0`` to ``config.t_end`` with Strang steps.

    Time is advanced segment by segment (default length ``pi/(2w)``), each
    segment restarting from the state at its left end.  The last step of a
    segment is shortened to land on its boundary, so the run ends exactly at
    ``t_end``.  A ledger row and a snapshot are recorded every
    ``snapshot_stride`` steps and at the final time.
    """
    config.validate(params.omega)
    check_decay(u0)
    grid = u0.grid
    ledger = ConservationLedger(params, form=ledger_form)
    ledger.record(u0.values, 0.0, grid)
    times, snaps = [0.0], [u0.with_values(u0.values, 0.0)]
    seg = config.segment(params.omega)
    n_seg = max(1, math.ceil(config.t_end / seg - 1e-9))
    v = u0.values
    step = 0
    for k in range(n_seg):
        start = k * seg
        span = min(seg, config.t_end - start)
        m = _segment_steps(span, config.dt)
        for j in range(m):
            tau = config.dt if j < m - 1 else span - (m - 1) * config.dt
            v = _strang_array(v, grid, params, tau, config.scheme)
            step += 1
            t = config.t_end if (k == n_seg - 1 and j == m - 1) else start + (j + 1) * config.dt
            if j == m - 1:
                t = start + span
            if not np.isfinite(v).all():
                raise BlowUpError(f"blow-up suspected at t={t:.6g}")
            last = k == n_seg - 1 and j == m - 1
            if step % config.snapshot_stride == 0 or last:
                ledger.record(v, t, grid)
                times.append(t)
                if config.keep_snapshots:
                    snaps.append(WaveField(grid, v, t))
    if not config.keep_snapshots:
        snaps = [snaps[0]]
    return Trajectory(params, np.asarray(times), snaps, config, ledger)
