"""Integral form of the equation: Picard iteration, workspace norms, Strichartz ratios.

Trajectories here live on uniform nodes ``t_j = j T/(N-1)``.  The map

    (T u)(t) = S(t) u0 - i beta int_0^t S(t - s) |u|^{2 sigma} u(s) ds

is evaluated with the exact linear flow and the trapezoidal rule.  The
trapezoid sum is built by a recurrence so that each step costs one
application of ``S(dt)``::

    P_0 = 0,  P_{k+1} = S(dt) (P_k + c_k F_k),  c_0 = 1/2, c_k = 1
    int_0^{t_k} S(t_k - s) F(s) ds  ~  dt (P_k + F_k / 2)
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .field import GridSpec, SimulationParams, WaveField, check_decay, sample_random
from .operators import jh_arrays
from .propagator import EvolveConfig, Trajectory, evolve, linear_array


class HorizonError(ValueError):
    pass


class NoContractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class StrichartzSpec:
    rho: float = 4.0

    def __post_init__(self):
        if not self.rho >= 2:
            raise ValueError("rho must be >= 2")
        if math.isinf(self.rho):
            raise ValueError("rho = inf is not supported")

    @property
    def gamma(self) -> float:
        """Time exponent with ``1/gamma = 1/2 - 1/rho``; infinite at ``rho = 2``."""
        return math.inf if self.rho == 2 else 2 * self.rho / (self.rho - 2)


@dataclass(frozen=True)
class PicardConfig:
    t_horizon: float = 0.1
    rho: float = 4.0
    quad_nodes: int = 64
    max_iter: int = 30
    tol: float = 1e-12

    def validate(self, omega: float) -> None:
        if not self.t_horizon > 0:
            raise ValueError("t_horizon must be positive")
        if self.t_horizon > math.pi / (2 * omega) * (1 + 1e-12):
            raise HorizonError(f"horizon too long: {self.t_horizon} > pi/(2 omega)")
        if not self.rho >= 2:
            raise ValueError("rho must be >= 2")
        if self.quad_nodes < 8:
            raise ValueError("quad_nodes must be >= 8")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")

    @property
    def spec(self) -> StrichartzSpec:
        return StrichartzSpec(self.rho)

    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.t_horizon, self.quad_nodes)


# -- mixed norms -------------------------------------------------------------


def _time_norm(values: np.ndarray, times: np.ndarray, gamma: float) -> float:
    if math.isinf(gamma):
        return float(np.max(values))
    if len(times) == 1:
        # single sample: the spatial norm itself (the T -> 0 limit scaled by T^(-1/gamma))
        return float(values[0])
    return float(np.trapezoid(values**gamma, times) ** (1 / gamma))


def _slice_norms(stack: np.ndarray, grid: GridSpec, rho: float) -> np.ndarray:
    """``||u(t_j)||_rho`` for each slice of a ``(T, n, n)`` or ``(T, c, n, n)`` stack."""
    a = np.abs(stack)
    if stack.ndim == 4:
        a = np.sqrt(np.sum(a * a, axis=1))
    return (np.sum(a**rho, axis=(-2, -1)) * grid.h**2) ** (1 / rho)


def spacetime_norm(traj: Trajectory, spec: StrichartzSpec) -> float:
    """``(int_0^T ||u(t)||_rho^gamma dt)^(1/gamma)`` by the trapezoid rule; sup over samples if ``rho = 2``."""
    return _time_norm(_slice_norms(traj.stack(), traj.grid, spec.rho), traj.times, spec.gamma)


def _jh_stack(stack, times, grid, omega):
    out = np.empty((len(times), 4) + stack.shape[1:], dtype=complex)
    for i, (t, v) in enumerate(zip(times, stack)):
        out[i] = jh_arrays(v, grid, t, omega)
    return out


def _triple(stack, times, grid, omega, spec):
    jh = _jh_stack(stack, times, grid, omega)
    parts = [_slice_norms(stack, grid, spec.rho), _slice_norms(jh[:, :2], grid, spec.rho),
             _slice_norms(jh[:, 2:], grid, spec.rho)]
    return sum(_time_norm(p, times, spec.gamma) for p in parts)


def triple_norm(traj: Trajectory, spec: StrichartzSpec, params: SimulationParams) -> float:
    """``||u|| + ||J(t)u|| + ||H(t)u||``, each in the mixed norm of ``spec``."""
    return _triple(traj.stack(), traj.times, traj.grid, params.omega, spec)


def workspace_distance(a: Trajectory, b: Trajectory, spec: StrichartzSpec, params: SimulationParams) -> float:
    if a.grid != b.grid or not np.array_equal(a.times, b.times):
        raise ValueError("trajectories must share grid and time nodes")
    return _triple(a.stack() - b.stack(), a.times, a.grid, params.omega, spec)


# -- the Duhamel map ---------------------------------------------------------


def _uniform_step(times: np.ndarray) -> float:
    dt = np.diff(times)
    if dt.size == 0 or np.ptp(dt) > 1e-9 * dt[0]:
        raise ValueError("Duhamel nodes must be uniform")
    return float(dt[0])


def _homogeneous(u0: np.ndarray, grid, omega, times) -> np.ndarray:
    dt = _uniform_step(times)
    out = np.empty((len(times),) + u0.shape, dtype=complex)
    out[0] = u0
    for k in range(1, len(times)):
        out[k] = linear_array(out[k - 1], grid, omega, dt)
    return out


def _duhamel_stack(stack, hom, grid, params, times) -> np.ndarray:
    if params.beta == 0:
        return hom.copy()
    dt = _uniform_step(times)
    f = np.abs(stack) ** (2 * params.sigma) * stack
    out = np.empty_like(hom)
    out[0] = hom[0]
    acc = np.zeros_like(stack[0])
    for k in range(1, len(times)):
        acc = linear_array(acc + (0.5 if k == 1 else 1.0) * f[k - 1], grid, params.omega, dt)
        out[k] = hom[k] - 1j * params.beta * dt * (acc + 0.5 * f[k])
    return out


def duhamel_apply(traj: Trajectory, u0: WaveField, params: SimulationParams, config: PicardConfig) -> Trajectory:
    """Evaluate the Duhamel map on ``traj``'s nodes."""
    config.validate(params.omega)
    times = traj.times
    hom = _homogeneous(u0.values, u0.grid, params.omega, times)
    out = _duhamel_stack(traj.stack(), hom, u0.grid, params, times)
    return Trajectory.from_stack(params, times, u0.grid, out)


@dataclass
class PicardResult:
    trajectory: Trajectory
    distances: list
    converged: bool

    @property
    def ratios(self) -> list:
        d = self.distances
        return [d[i + 1] / d[i] for i in range(len(d) - 1) if d[i] > 0]


def picard_solve(u0: WaveField, params: SimulationParams, config: PicardConfig,
                 initial: str = "homogeneous") -> PicardResult:
    """Iterate the Duhamel map to its fixed point.

    Starts from ``S(t)u0`` (``initial="homogeneous"``) or from zero.  Stops
    once the workspace distance between successive iterates is at most
    ``tol``.  Raises ``NoContractionError`` when the distance fails to
    decrease three times in a row.
    """
    config.validate(params.omega)
    check_decay(u0)
    grid, times, spec = u0.grid, config.nodes(), config.spec
    hom = _homogeneous(u0.values, grid, params.omega, times)
    if initial == "homogeneous":
        cur = hom.copy()
    elif initial == "zero":
        cur = np.zeros_like(hom)
    else:
        raise ValueError("initial must be 'homogeneous' or 'zero'")
    distances, stalls, converged = [], 0, False
    for _ in range(config.max_iter):
        nxt = _duhamel_stack(cur, hom, grid, params, times)
        d = _triple(nxt - cur, times, grid, params.omega, spec)
        if distances and d >= distances[-1]:
            stalls += 1
            if stalls >= 3:
                raise NoContractionError(f"no contraction: distances {distances[-3:] + [d]}")
        else:
            stalls = 0
        distances.append(d)
        cur = nxt
        if d <= config.tol:
            converged = True
            break
    return PicardResult(Trajectory.from_stack(params, times, grid, cur), distances, converged)


def evolve_on_nodes(u0: WaveField, params: SimulationParams, config: PicardConfig, dt: float = 1e-3) -> Trajectory:
    """Split-step solution sampled on the Picard nodes, for cross-checks."""
    times = config.nodes()
    step = times[1] - times[0]
    sub = max(1, math.ceil(step / dt - 1e-9))
    cfg = EvolveConfig(dt=step / sub, t_end=config.t_horizon, snapshot_stride=sub,
                       segment_length=config.t_horizon)
    traj = evolve(u0, params, cfg)
    if len(traj.times) != len(times):
        raise RuntimeError("node sampling mismatch")
    return Trajectory.from_stack(params, times, u0.grid, traj.stack())


def picard_report(u0: WaveField, params: SimulationParams, config: PicardConfig, path=None) -> dict:
    res = picard_solve(u0, params, config)
    ref = evolve_on_nodes(u0, params, config)
    agreement = workspace_distance(res.trajectory, ref, config.spec, params)
    report = {
        "config": asdict(config),
        "params": asdict(params),
        "distances": res.distances,
        "ratios": res.ratios,
        "converged": res.converged,
        "agreement_vs_evolve": agreement,
    }
    if path is not None:
        with open(path, "w") as fh:
            json.dump(report, fh, indent=2)
    return report


# -- pointwise identity ------------------------------------------------------


def nonlinear_identity_residual(u: WaveField, t: float, params: SimulationParams) -> float:
    """Relative L^2 residual of the product rule for ``J(t)`` on the power nonlinearity.

    Compares ``J(|u|^{2s} u)`` with ``(s+1)|u|^{2s} J u - s |u|^{2s-2} u^2 conj(J u)``.
    Where ``u`` vanishes and ``s < 1`` the second term is set to zero.
    """
    check_decay(u)
    s, omega, grid = params.sigma, params.omega, u.grid
    v = u.values
    a = np.abs(v)
    f = a ** (2 * s) * v
    lhs = jh_arrays(f, grid, t, omega)[:2]
    ju = jh_arrays(v, grid, t, omega)[:2]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(a > 0, a ** (2 * s - 2) * v * v, 0.0)
    rhs = [(s + 1) * a ** (2 * s) * j - s * w * np.conj(j) for j in ju]
    num = math.sqrt(sum(np.sum(np.abs(x - y) ** 2) for x, y in zip(lhs, rhs)))
    den = math.sqrt(sum(np.sum(np.abs(x) ** 2) for x in lhs))
    return num / den


# -- Strichartz ratios -------------------------------------------------------


def _sample_seeds(seed, samples):
    return np.random.SeedSequence(seed).spawn(samples)


def strichartz_samples(spec: StrichartzSpec, params: SimulationParams, samples: int, seed,
                       grid: GridSpec | None = None, time_nodes: int = 65) -> np.ndarray:
    """Per-sample ratios ``||S(t) phi||_{L^gamma L^rho} / ||phi||_2`` over ``[0, pi/(2w)]``.

    Sample ``i`` is drawn from the ``i``-th child of ``SeedSequence(seed)``,
    so a larger sample set extends a smaller one.
    """
    if samples < 10:
        raise ValueError("samples must be >= 10")
    grid = grid or GridSpec(96, 10.0)
    times = np.linspace(0.0, math.pi / (2 * params.omega), time_nodes)
    ratios = np.empty(samples)
    for i, ss in enumerate(_sample_seeds(seed, samples)):
        phi = sample_random(grid, ss)
        traj = _homogeneous(phi.values, grid, params.omega, times)
        norms = _slice_norms(traj, grid, spec.rho)
        l2 = math.sqrt(float(np.sum(np.abs(phi.values) ** 2)) * grid.h**2)
        ratios[i] = _time_norm(norms, times, spec.gamma) / l2
    return ratios


def strichartz_ratio(spec: StrichartzSpec, params: SimulationParams, samples: int, seed, **kw) -> float:
    return float(np.max(strichartz_samples(spec, params, samples, seed, **kw)))


def strichartz_report(spec: StrichartzSpec, params: SimulationParams, samples: int, seed, path=None, **kw) -> dict:
    ratios = strichartz_samples(spec, params, samples, seed, **kw)
    report = {
        "spec": {"rho": spec.rho, "gamma": None if math.isinf(spec.gamma) else spec.gamma},
        "samples": samples,
        "seed": seed,
        "max_ratio": float(ratios.max()),
        "ratios": [float(r) for r in ratios],
    }
    if path is not None:
        with open(path, "w") as fh:
            json.dump(report, fh, indent=2)
    return report
