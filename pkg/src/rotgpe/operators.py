"""Angular momentum and the Galilean operators J(t), H(t).

With ``c = cos(wt)``, ``s = sin(wt)``, ``A = c x + s x_perp`` and
``D = c grad + s grad_perp``::

    J(t) = w s A - i c D        H(t) = w c A + i s D

Both are conjugates of ``-i grad`` and ``w x`` through the linear flow, so
they commute with the linear part of the equation.  Vector results are pairs
of fields; their norms are taken on the pointwise Euclidean magnitude.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import (
    SimulationParams,
    WaveField,
    check_decay,
    gradient_arrays,
    multiply_x,
    spectral_gradient,
    vector_lp_norm,
)

SINGULAR_TOL = 1e-9


class SingularFrameError(ValueError):
    pass


@dataclass(frozen=True)
class OperatorFrame:
    t: float
    omega: float

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def phase(self) -> float:
        return self.omega * self.t

    @property
    def c(self) -> float:
        return math.cos(self.phase)

    @property
    def s(self) -> float:
        return math.sin(self.phase)


def _dist_to_lattice(theta: float, offset: float) -> float:
    r = (theta - offset) % math.pi
    return min(r, math.pi - r)


# -- array kernels, shared with the ledger and the Picard solver -------------


def lz_array(values, grid, grads=None):
    g1, g2 = gradient_arrays(values, grid) if grads is None else grads
    x1, x2, _ = grid.mesh()
    return 1j * (x2 * g1 - x1 * g2)


def jh_arrays(values, grid, t, omega, grads=None):
    """Components of ``J(t)u`` and ``H(t)u`` as arrays: ``(j1, j2, h1, h2)``."""
    g1, g2 = gradient_arrays(values, grid) if grads is None else grads
    x1, x2, _ = grid.mesh()
    c, s = math.cos(omega * t), math.sin(omega * t)
    a1 = (c * x1 - s * x2) * values
    a2 = (c * x2 + s * x1) * values
    d1 = c * g1 - s * g2
    d2 = c * g2 + s * g1
    return (omega * s * a1 - 1j * c * d1, omega * s * a2 - 1j * c * d2,
            omega * c * a1 + 1j * s * d1, omega * c * a2 + 1j * s * d2)


# -- public operators --------------------------------------------------------


def apply_Lz(u: WaveField) -> WaveField:
    """``L_z u = i (x2 d1 u - x1 d2 u)``."""
    check_decay(u)
    return u.with_values(lz_array(u.values, u.grid))


def apply_J(u: WaveField, frame: OperatorFrame) -> tuple[WaveField, WaveField]:
    check_decay(u)
    j1, j2, _, _ = jh_arrays(u.values, u.grid, frame.t, frame.omega)
    return u.with_values(j1), u.with_values(j2)


def apply_H(u: WaveField, frame: OperatorFrame) -> tuple[WaveField, WaveField]:
    check_decay(u)
    _, _, h1, h2 = jh_arrays(u.values, u.grid, frame.t, frame.omega)
    return u.with_values(h1), u.with_values(h2)


def _rotated_derivative(values, grid, c, s):
    g1, g2 = gradient_arrays(values, grid)
    return c * g1 - s * g2, c * g2 + s * g1


def apply_J_factored(u: WaveField, frame: OperatorFrame) -> tuple[WaveField, WaveField]:
    """``J = -i c M(t) D M(-t)`` with ``M(t) = exp(-i w |x|^2 tan(wt) / 2)``."""
    if _dist_to_lattice(frame.phase, math.pi / 2) < SINGULAR_TOL:
        raise SingularFrameError("singular frame: tan(omega t) is infinite")
    check_decay(u)
    c, s = frame.c, frame.s
    r2 = u.grid.radius_sq()
    m_plus = np.exp(-0.5j * frame.omega * r2 * math.tan(frame.phase))
    d1, d2 = _rotated_derivative(np.conj(m_plus) * u.values, u.grid, c, s)
    return u.with_values(-1j * c * m_plus * d1), u.with_values(-1j * c * m_plus * d2)


def apply_H_factored(u: WaveField, frame: OperatorFrame) -> tuple[WaveField, WaveField]:
    """``H = i s Q(t) D Q(-t)`` with ``Q(t) = exp(i w |x|^2 cot(wt) / 2)``."""
    if _dist_to_lattice(frame.phase, 0.0) < SINGULAR_TOL:
        raise SingularFrameError("singular frame: cot(omega t) is infinite")
    check_decay(u)
    c, s = frame.c, frame.s
    r2 = u.grid.radius_sq()
    q_plus = np.exp(0.5j * frame.omega * r2 * (c / s))
    d1, d2 = _rotated_derivative(np.conj(q_plus) * u.values, u.grid, c, s)
    return u.with_values(1j * s * q_plus * d1), u.with_values(1j * s * q_plus * d2)


def _vec_diff_norm(a, b):
    return vector_lp_norm([a[0] - b[0], a[1] - b[1]], 2)


def _identity(u, frame):
    return (u,)


_COMMUTING = {"J": apply_J, "H": apply_H, "identity": _identity}


def commutation_residual(u0: WaveField, t: float, params: SimulationParams, which: str = "J") -> float:
    """Relative mismatch ``||A(t) S(t) u0 - S(t) A(0) u0|| / ||A(0) u0||`` for the linear flow.

    ``which`` is ``"J"``, ``"H"`` or ``"identity"``.  A vanishing commutator
    leaves only discretisation error.
    """
    from .propagator import propagate_linear

    try:
        op = _COMMUTING[which]
    except KeyError:
        raise ValueError("which must be 'J', 'H' or 'identity'") from None
    a0 = op(u0, OperatorFrame(0.0, params.omega))
    lhs = op(propagate_linear(u0, t, params), OperatorFrame(t, params.omega))
    rhs = [propagate_linear(a, t, params) for a in a0]
    diff = [p - q for p, q in zip(lhs, rhs)]
    return vector_lp_norm(diff, 2) / vector_lp_norm(a0, 2)


def verify_e1_e2(phi: WaveField, t: float, params: SimulationParams, method: str = "auto",
                 allow_large: bool = False) -> tuple[float, float]:
    """Relative residuals of the two gradient/position transfer identities.

    Checks, with every ``S(t)`` evaluated by the kernel oracle::

        grad S phi = c S (c grad - s grad_perp) phi - i w s S (c x - s x_perp) phi
        x S phi    = c S (c x - s x_perp) phi - (i/w) s S (c grad - s grad_perp) phi
    """
    from .propagator import mehler_apply

    omega = params.omega
    c, s = math.cos(omega * t), math.sin(omega * t)
    grid = phi.grid
    x1, x2, _ = grid.mesh()
    g1, g2 = gradient_arrays(phi.values, grid)
    # (c grad - s grad_perp) = (c d1 + s d2, c d2 - s d1); (c x - s x_perp) = (c x1 + s x2, c x2 - s x1)
    dm = (c * g1 + s * g2, c * g2 - s * g1)
    am = ((c * x1 + s * x2) * phi.values, (c * x2 - s * x1) * phi.values)

    def S(arr):
        return mehler_apply(phi.with_values(arr), t, params, method=method, allow_large=allow_large)

    sphi = S(phi.values)
    lhs1 = spectral_gradient(sphi)
    rhs1 = tuple(S(c * dm[k] - 1j * omega * s * am[k]) for k in range(2))
    lhs2 = multiply_x(sphi)
    rhs2 = tuple(S(c * am[k] - (1j / omega) * s * dm[k]) for k in range(2))
    r1 = _vec_diff_norm(lhs1, rhs1) / vector_lp_norm(lhs1, 2)
    r2 = _vec_diff_norm(lhs2, rhs2) / vector_lp_norm(lhs2, 2)
    return float(r1), float(r2)


def conjugation_residual(phi: WaveField, t: float, params: SimulationParams, which: str = "J",
                         method: str = "auto", allow_large: bool = False) -> float:
    """Relative mismatch of ``J(t) S(t) phi = S(t)(-i grad phi)`` or ``H(t) S(t) phi = S(t)(w x phi)``.

    Every ``S(t)`` is evaluated by the kernel oracle, so this checks the
    operator formulas against the integral kernel rather than against the
    FFT propagator.
    """
    from .propagator import mehler_apply

    if which not in ("J", "H"):
        raise ValueError("which must be 'J' or 'H'")
    op = _COMMUTING[which]

    def S(f):
        return mehler_apply(f, t, params, method=method, allow_large=allow_large)

    lhs = op(S(phi), OperatorFrame(t, params.omega))
    rhs = [S(a) for a in op(phi, OperatorFrame(0.0, params.omega))]
    return vector_lp_norm([p - q for p, q in zip(lhs, rhs)], 2) / vector_lp_norm(rhs, 2)
