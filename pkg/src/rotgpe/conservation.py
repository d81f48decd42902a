"""Conserved quantities and the pseudo-conformal balance laws.

For a solution of the rotating equation the following hold::

    ||u(t)||_2                         constant
    E0 = 1/2 ||grad u||^2 + w^2/2 ||x u||^2 + beta/(sigma+1) P(u)   constant
    <L_z>                              constant

with ``P(u) = ||u||_{2 sigma + 2}^{2 sigma + 2}``.  In addition, with
``hist(t) = int_0^t sin(2ws) P(u(s)) ds``::

    ||H(t)u||^2 + 2 beta sin^2(wt)/(sigma+1) P + K hist = w^2 ||x u0||^2
    ||J(t)u||^2 + 2 beta cos^2(wt)/(sigma+1) P = ||grad u0||^2 + 2 beta/(sigma+1) P(u0) + K hist

Residuals are reported as ``lhs - rhs``.  The coefficient ``K`` comes in two
variants, see ``history_coefficient``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .field import GridSpec, SimulationParams, WaveField, check_decay, gradient_arrays, lp_norm
from .operators import jh_arrays, lz_array

MASS_RTOL = 1e-12
LZ_IMAG_RTOL = 1e-10
CSV_COLUMNS = ("t", "mass", "e0", "lz", "j_sq", "h_sq", "hist", "pc_h_residual", "pc_j_residual")
HISTORY_FORMS = ("stated", "dimensional")


class LedgerError(ValueError):
    pass


def _sq(a, grid):
    return float(np.sum(np.abs(a) ** 2) * grid.h**2)


def _power(values, grid, sigma):
    return float(np.sum(np.abs(values) ** (2 * sigma + 2)) * grid.h**2)


def _lz_real(values, grid, grads=None):
    z = complex(np.vdot(values, lz_array(values, grid, grads)) * grid.h**2)
    scale = max(_sq(values, grid), 1e-300)
    if abs(z.imag) > LZ_IMAG_RTOL * max(scale, abs(z.real)):
        raise LedgerError(f"non-real expectation: Im<L_z> = {z.imag:.3e}")
    return z.real


def mass(u: WaveField) -> float:
    return lp_norm(u, 2)


def energy_e0(u: WaveField, params: SimulationParams) -> float:
    check_decay(u)
    g1, g2 = gradient_arrays(u.values, u.grid)
    return _energy(u.values, u.grid, params, (g1, g2))


def _energy(values, grid, params, grads):
    g1, g2 = grads
    kin = 0.5 * (_sq(g1, grid) + _sq(g2, grid))
    pot = 0.5 * params.omega**2 * _sq(np.sqrt(grid.radius_sq()) * values, grid)
    return kin + pot + params.beta / (params.sigma + 1) * _power(values, grid, params.sigma)


def angular_momentum_expectation(u: WaveField) -> float:
    """``<L_z> = h^2 sum conj(u) L_z u``; raises if the imaginary part is not negligible."""
    check_decay(u)
    return _lz_real(u.values, u.grid)


def history_coefficient(params: SimulationParams, form: str = "stated") -> float:
    """Coefficient of the history integral in the pseudo-conformal laws.

    ``"stated"``: ``2 beta (sigma w - 1)/(sigma + 1)``, the form usually quoted.
    ``"dimensional"``: ``2 beta w (sigma - 1)/(sigma + 1)``, which is what
    differentiating ``||H(t)u||^2`` along the flow produces.  The two agree
    when ``w = 1``.
    """
    b, s, w = params.beta, params.sigma, params.omega
    if form == "stated":
        return 2 * b * (s * w - 1) / (s + 1)
    if form == "dimensional":
        return 2 * b * w * (s - 1) / (s + 1)
    raise ValueError(f"form must be one of {HISTORY_FORMS}")


@dataclass
class ConservationLedger:
    """Append-only time series of conserved and pseudo-conformal quantities."""

    params: SimulationParams
    form: str = "stated"
    times: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    e0: list = field(default_factory=list)
    lz: list = field(default_factory=list)
    j_sq: list = field(default_factory=list)
    h_sq: list = field(default_factory=list)
    nl: list = field(default_factory=list)
    _stored = None  # (hist, pc_h, pc_j) when read back from CSV

    def __post_init__(self):
        if self.form not in HISTORY_FORMS:
            raise ValueError(f"form must be one of {HISTORY_FORMS}")

    def __len__(self):
        return len(self.times)

    def record(self, values: np.ndarray, t: float, grid: GridSpec) -> None:
        if self._stored is not None:
            raise LedgerError("ledger read from CSV is closed")
        if self.times and t <= self.times[-1]:
            raise LedgerError("ledger times must increase")
        p = self.params
        grads = gradient_arrays(values, grid)
        j1, j2, h1, h2 = jh_arrays(values, grid, t, p.omega, grads)
        self.times.append(float(t))
        self.mass.append(math.sqrt(_sq(values, grid)))
        self.e0.append(_energy(values, grid, p, grads))
        self.lz.append(_lz_real(values, grid, grads))
        self.j_sq.append(_sq(j1, grid) + _sq(j2, grid))
        self.h_sq.append(_sq(h1, grid) + _sq(h2, grid))
        self.nl.append(_power(values, grid, p.sigma))

    def append(self, u: WaveField, t: float | None = None) -> None:
        self.record(u.values, u.time_tag if t is None else t, u.grid)

    @property
    def hist(self) -> np.ndarray:
        if self._stored is not None:
            return self._stored[0]
        t = np.asarray(self.times)
        f = np.sin(2 * self.params.omega * t) * np.asarray(self.nl)
        if t.size == 0:
            return t
        return np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))])

    def residuals(self) -> tuple[np.ndarray, np.ndarray]:
        """Absolute residuals ``lhs - rhs`` of the H-law and the J-law per row."""
        if self._stored is not None:
            return self._stored[1], self._stored[2]
        p = self.params
        t = np.asarray(self.times)
        nl = np.asarray(self.nl)
        k = history_coefficient(p, self.form)
        g = 2 * p.beta / (p.sigma + 1)
        hist = self.hist
        s2 = np.sin(p.omega * t) ** 2
        c2 = np.cos(p.omega * t) ** 2
        # at t = 0: J(0) = -i grad and H(0) = w x
        rh = np.asarray(self.h_sq) + g * s2 * nl + k * hist - self.h_sq[0]
        rj = np.asarray(self.j_sq) + g * c2 * nl - (self.j_sq[0] + g * nl[0] + k * hist)
        return rh, rj

    @property
    def pc_h_residual(self) -> np.ndarray:
        return self.residuals()[0]

    @property
    def pc_j_residual(self) -> np.ndarray:
        return self.residuals()[1]

    def scales(self) -> tuple[float, float]:
        """Right-hand sides at ``t = 0``, for forming relative residuals."""
        g = 2 * self.params.beta / (self.params.sigma + 1)
        return self.h_sq[0], self.j_sq[0] + g * self.nl[0]

    def drift(self, name: str) -> float:
        a = np.asarray(getattr(self, name))
        return float(np.max(np.abs(a - a[0])))

    def check(self) -> None:
        """Assert the mass column is constant to ``MASS_RTOL`` relative."""
        m = np.asarray(self.mass)
        if m.size and np.max(np.abs(m - m[0])) > MASS_RTOL * max(m[0], 1e-300):
            raise LedgerError(f"mass drift {np.max(np.abs(m - m[0])):.3e} exceeds {MASS_RTOL}")

    def rows(self):
        rh, rj = self.residuals() if self.times else ([], [])
        hist = self.hist
        for i in range(len(self.times)):
            yield (self.times[i], self.mass[i], self.e0[i], self.lz[i], self.j_sq[i],
                   self.h_sq[i], hist[i], rh[i], rj[i])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in self.rows():
                w.writerow(["%.17g" % float(v) for v in row])

    @classmethod
    def from_csv(cls, path, params: SimulationParams, form: str = "stated") -> ConservationLedger:
        """Read a ledger back; history and residual columns are taken as stored."""
        led = cls(params, form)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != CSV_COLUMNS:
                raise LedgerError(f"unexpected ledger header {header}")
            data = np.array([[float(v) for v in row] for row in reader]).reshape(-1, len(CSV_COLUMNS))
        t, m, e0, lz, j, h, hist, rh, rj = data.T
        led.times, led.mass, led.e0, led.lz = list(t), list(m), list(e0), list(lz)
        led.j_sq, led.h_sq = list(j), list(h)
        led._stored = (hist, rh, rj)
        return led


def pseudoconformal_residuals(traj, form: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-time absolute residuals of the H-law and J-law along a trajectory's ledger."""
    led = traj.ledger if hasattr(traj, "ledger") else traj
    if led is None or len(led) == 0:
        raise LedgerError("trajectory has no ledger rows")
    if form is not None and form != led.form:
        led = ConservationLedger(led.params, form, led.times, led.mass, led.e0, led.lz,
                                 led.j_sq, led.h_sq, led.nl)
    return led.residuals()
