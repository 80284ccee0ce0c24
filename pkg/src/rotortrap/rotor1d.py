"""Planar rotor: parametric pendulum, regime classification and hysteresis.

The reduced equation of motion for the long-axis angle ``alpha`` is

    alpha'' + gamma0 alpha' + k cos(omega_d t) sin(2 alpha) = 0,

with ``k = V0 (a_x - a_y)(Q2 - Q3) / (3 ell0^2 I1)`` (``|k| = omega0^2``).
The sign of ``k`` is kept: a negative value simply exchanges the roles of
the ``alpha = 0`` and ``alpha = pi/2`` equilibria.
"""
from __future__ import annotations

import enum
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BoundaryNotFound, StepFailure, ValidityWarning, WindowOutOfRange
from .model import RigidBody, TrapDrive, pendulum_coupling, pendulum_omega0

RTOL = 1e-10
ATOL = 1e-12

# eta_rot window, in drive periods
TRANSIENT_PERIODS = 50
WINDOW_PERIODS = 100

ETA_BAND = 0.1
SWEEP_STEP = 0.01
REFINE_RTOL = 1e-3

UNBOUNDED = math.inf

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

STATUS_TEXT = {
    kernels.STEP_UNDERFLOW: "step size underflow",
    kernels.MAX_STEPS: "step budget exhausted",
    kernels.NOT_FINITE: "non-finite state",
}


@dataclass(frozen=True)
class PendulumState:
    alpha: float
    alpha_dot: float
    t: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.alpha, self.alpha_dot, self.t)):
            raise ValueError("pendulum state must be finite")


@dataclass
class Trajectory1D:
    """Uniformly sampled planar trajectory; ``alpha`` is unwrapped."""

    t: np.ndarray
    alpha: np.ndarray
    alpha_dot: np.ndarray

    def state(self, i=-1) -> PendulumState:
        return PendulumState(float(self.alpha[i]), float(self.alpha_dot[i]), float(self.t[i]))

    def at(self, t):
        """Cubic Hermite interpolation of ``alpha`` at time(s) ``t``."""
        return _hermite(self.t, self.alpha, self.alpha_dot, t)

    def rows(self):
        return zip(self.t, self.alpha, self.alpha_dot)

    CSV_HEADER = ("t_s", "alpha_rad", "alpha_dot_rad_s")


class Regime(enum.Enum):
    LIBRATING = "Librating"
    LOCKED_POSITIVE = "RotationLockedPositive"
    LOCKED_NEGATIVE = "RotationLockedNegative"
    UNCLASSIFIED = "Unclassified"

    @property
    def locked(self):
        return self in (Regime.LOCKED_POSITIVE, Regime.LOCKED_NEGATIVE)


@dataclass(frozen=True)
class RegimeLabel:
    regime: Regime
    eta: float
    final_state: PendulumState | None = None

    @classmethod
    def from_eta(cls, eta, final_state=None):
        if abs(eta) < ETA_BAND:
            regime = Regime.LIBRATING
        elif abs(eta - 1.0) < ETA_BAND:
            regime = Regime.LOCKED_POSITIVE
        elif abs(eta + 1.0) < ETA_BAND:
            regime = Regime.LOCKED_NEGATIVE
        else:
            regime = Regime.UNCLASSIFIED
        return cls(regime, float(eta), final_state)


@dataclass
class PhaseDiagram:
    """Hysteresis boundaries on a voltage grid; frequencies are angular."""

    v0_grid: np.ndarray
    omega_lr: np.ndarray
    omega_rl: np.ndarray
    instability_boundary: np.ndarray | None = None
    errors: list = field(default_factory=list)

    CSV_HEADER = ("v0_volts", "f_lr_hz", "f_rl_hz", "f_floquet_hz")

    def rows(self):
        two_pi = 2.0 * math.pi
        inst = self.instability_boundary
        for i, v0 in enumerate(self.v0_grid):
            f_inst = math.nan if inst is None else inst[i] / two_pi
            yield v0, self.omega_lr[i] / two_pi, self.omega_rl[i] / two_pi, f_inst


def _hermite(t_grid, x, v, t):
    t = np.asarray(t, dtype=float)
    i = np.clip(np.searchsorted(t_grid, t, side="right") - 1, 0, len(t_grid) - 2)
    h = t_grid[i + 1] - t_grid[i]
    s = (t - t_grid[i]) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * x[i] + h10 * h * v[i] + h01 * x[i + 1] + h11 * h * v[i + 1]


def _solve(c0, c1, omega, gamma, force, state0, t_out, h_max):
    a, b, status = kernels.pendulum_dp5(
        float(c0), float(c1), float(omega), float(gamma), float(force),
        float(state0.alpha), float(state0.alpha_dot), float(state0.t),
        np.ascontiguousarray(t_out, dtype=float), float(h_max), RTOL, ATOL,
    )
    if status != kernels.OK:
        raise StepFailure(f"pendulum integration failed: {STATUS_TEXT.get(status, status)}")
    return a, b


def _check_dt(trap, dt_max):
    limit = trap.period / 200.0
    if dt_max is None:
        return limit
    if not 0.0 < dt_max <= limit * (1 + 1e-12):
        raise ValueError(f"dt_max must lie in (0, T_drive/200 = {limit:.3e} s]")
    return dt_max


def _time_grid(t0, t_end, dt):
    n = int(math.ceil((t_end - t0) / dt - 1e-9))
    grid = t0 + dt * np.arange(n + 1)
    grid[-1] = t_end
    return grid


def integrate_pendulum(trap: TrapDrive, body: RigidBody, state0: PendulumState, t_end: float,
                       dt_max: float | None = None, sample_dt: float | None = None) -> Trajectory1D:
    """Integrate the parametric pendulum and sample it on a uniform grid.

    ``dt_max`` caps the internal step (at most ``T_drive/200``);
    ``sample_dt`` is the output spacing and defaults to ``dt_max``.
    """
    dt_max = _check_dt(trap, dt_max)
    if not t_end > state0.t:
        raise ValueError("t_end must exceed the initial time")
    grid = _time_grid(state0.t, t_end, sample_dt or dt_max)
    k = pendulum_coupling(trap, body)
    a, b = _solve(0.0, k, trap.omega_d, body.gamma0, 0.0, state0, grid, dt_max)
    return Trajectory1D(grid, a, b)


def eta_rot(traj: Trajectory1D, t0: float, T: float, omega_d: float) -> float:
    """Rotation order parameter ``2 (alpha(t0 + T) - alpha(t0)) / (T omega_d)``."""
    if not (T > 0.0 and omega_d > 0.0):
        raise WindowOutOfRange("T and omega_d must be positive")
    lo, hi = traj.t[0], traj.t[-1]
    tol = 1e-9 * max(abs(hi), 1.0)
    if t0 < lo - tol or t0 + T > hi + tol:
        raise WindowOutOfRange(f"window [{t0:.6g}, {t0 + T:.6g}] s outside trajectory [{lo:.6g}, {hi:.6g}] s")
    ends = traj.at(np.clip([t0, t0 + T], lo, hi))
    return float(2.0 * (ends[1] - ends[0]) / (T * omega_d))


def classify_regime(trap: TrapDrive, body: RigidBody, state0: PendulumState,
                    transient_periods=TRANSIENT_PERIODS, window_periods=WINDOW_PERIODS) -> RegimeLabel:
    """Integrate past the transient and threshold ``eta_rot`` over the window.

    The returned label carries the final state (at an integer number of drive
    periods after ``state0.t``) so sweeps can continue from it.
    """
    T = trap.period
    t0 = state0.t
    t_out = np.array([t0 + transient_periods * T, t0 + (transient_periods + window_periods) * T])
    k = pendulum_coupling(trap, body)
    a, b = _solve(0.0, k, trap.omega_d, body.gamma0, 0.0, state0, t_out, T / 200.0)
    eta = 2.0 * (a[1] - a[0]) / (window_periods * T * trap.omega_d)
    final = PendulumState(float(a[1]), float(b[1]), float(t_out[1]))
    return RegimeLabel.from_eta(eta, final)


def librating_state(omega_d: float) -> PendulumState:
    """Small-amplitude initial condition used for the librating branch."""
    return PendulumState(5e-3, 0.01 * omega_d / 2.0, 0.0)


def rotating_state(omega_d: float, sign: int = 1) -> PendulumState:
    """Initial condition just above the locked rate ``omega_d / 2``."""
    return PendulumState(0.0, sign * 1.01 * omega_d / 2.0, 0.0)


def _carry(state: PendulumState, omega_d: float) -> PendulumState:
    """Initial state for the next sweep step.

    ``classify_regime`` ends on a whole number of drive periods, so the drive
    phase restarts at zero and ``alpha`` is reduced modulo pi (a symmetry).
    A librating state that has relaxed below the seed amplitude of
    :func:`librating_state` is reset to it: without agitation the exact
    equilibrium is invariant and a parametric instability could never grow.
    """
    alpha = math.remainder(state.alpha, math.pi)
    seed = librating_state(omega_d)
    if abs(alpha) < seed.alpha and abs(state.alpha_dot) < seed.alpha_dot:
        return seed
    return PendulumState(alpha, state.alpha_dot, 0.0)


def _refine(trap, body, regime, state, w_in, w_out, rel_tol):
    """Bisect between ``w_in`` (start ``state`` keeps ``regime``) and ``w_out``."""
    while abs(w_in - w_out) > rel_tol * max(w_in, w_out):
        mid = math.sqrt(w_in * w_out)
        label = classify_regime(trap.replace(omega_d=mid), body, _carry(state, mid))
        if label.regime == regime:
            w_in = mid
        else:
            w_out = mid
    return math.sqrt(w_in * w_out)


def sweep_hysteresis(trap: TrapDrive, body: RigidBody, v0: float, omega_range, n_steps: int | None = None,
                     refine_rtol: float = REFINE_RTOL):
    """Quasi-adiabatic frequency sweep at fixed ``v0``; returns ``(omega_lr, omega_rl)``.

    Starting librating at the top of ``omega_range`` the drive frequency is
    lowered geometrically, each step starting from the final state of the
    previous one, until the particle locks (``omega_lr``).  From the locked
    state the frequency is raised again until it librates (``omega_rl``).
    Both boundaries are refined by bisection to ``refine_rtol``.
    """
    lo_range, hi_range = sorted(float(w) for w in omega_range)
    if not lo_range > 0.0:
        raise ValueError("omega_range must be positive")
    if n_steps is None:
        ratio = 1.0 + SWEEP_STEP
    else:
        if n_steps < 2:
            raise ValueError("n_steps must be at least 2")
        ratio = (hi_range / lo_range) ** (1.0 / (n_steps - 1))
    trap = trap.replace(V0=float(v0))

    omega = hi_range
    label = classify_regime(trap.replace(omega_d=omega), body, librating_state(omega))
    if label.regime != Regime.LIBRATING:
        raise BoundaryNotFound(f"V0={v0:g} V: not librating at the top of the range (eta={label.eta:.3f})")
    last_lib = (omega, label.final_state)
    omega_lr = None
    while omega > lo_range * (1 + 1e-12):
        omega = max(omega / ratio, lo_range)
        label = classify_regime(trap.replace(omega_d=omega), body, _carry(label.final_state, omega))
        if label.regime == Regime.LIBRATING:
            last_lib = (omega, label.final_state)
        elif label.regime.locked:
            omega_lr = _refine(trap, body, Regime.LIBRATING, last_lib[1], last_lib[0], omega, refine_rtol)
            break
    if omega_lr is None:
        raise BoundaryNotFound(f"V0={v0:g} V: librating branch never locked in range")

    locked_regime = label.regime
    last_locked = (omega, label.final_state)
    omega_rl = None
    while omega < hi_range * (1 - 1e-12):
        omega = min(omega * ratio, hi_range)
        label = classify_regime(trap.replace(omega_d=omega), body, _carry(label.final_state, omega))
        if label.regime == locked_regime:
            last_locked = (omega, label.final_state)
        elif label.regime == Regime.LIBRATING:
            omega_rl = _refine(trap, body, locked_regime, last_locked[1], last_locked[0], omega, refine_rtol)
            break
    if omega_rl is None:
        raise BoundaryNotFound(f"V0={v0:g} V: locked branch never released in range")
    return omega_lr, omega_rl


def _diagram_point(args):
    trap, body, v0, omega_range, n_steps, floquet = args
    rng = omega_range(v0) if callable(omega_range) else omega_range
    out = [math.nan, math.nan, math.nan, None]
    try:
        out[0], out[1] = sweep_hysteresis(trap, body, v0, rng, n_steps)
    except Exception as exc:  # recorded per point, the diagram is still returned
        out[3] = f"V0={v0:g}: {type(exc).__name__}: {exc}"
    if floquet:
        from .floquet import instability_boundary

        try:
            out[2] = instability_boundary(trap.replace(V0=float(v0)), body, rng)
        except Exception as exc:
            msg = f"V0={v0:g} floquet: {type(exc).__name__}: {exc}"
            out[3] = msg if out[3] is None else out[3] + "; " + msg
    return tuple(out)


def default_jobs():
    try:
        return max(1, int(os.environ.get("ROTORTRAP_JOBS", "1")))
    except ValueError:
        return 1


def phase_diagram(trap: TrapDrive, body: RigidBody, v0_grid, omega_range, n_steps=None,
                  jobs: int | None = None, floquet: bool = True) -> PhaseDiagram:
    """Map :func:`sweep_hysteresis` over ``v0_grid`` (results in grid order).

    ``omega_range`` is a pair or a callable ``v0 -> pair``.  Failed points
    are stored as NaN with a message in ``errors``.
    """
    v0_grid = np.asarray(list(v0_grid), dtype=float)
    tasks = [(trap, body, float(v), omega_range, n_steps, floquet) for v in v0_grid]
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    if jobs > 1 and len(tasks) > 1 and not callable(omega_range):
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_diagram_point, tasks))
    else:
        results = [_diagram_point(t) for t in tasks]
    n = len(results)
    diagram = PhaseDiagram(
        v0_grid=v0_grid,
        omega_lr=np.array([r[0] for r in results], dtype=float).reshape(n),
        omega_rl=np.array([r[1] for r in results], dtype=float).reshape(n),
        instability_boundary=np.array([r[2] for r in results], dtype=float).reshape(n) if floquet else None,
        errors=[r[3] for r in results if r[3] is not None],
    )
    return diagram


def integrate_corotating(trap: TrapDrive, body: RigidBody, state0: PendulumState, t_end: float,
                         dt_max: float | None = None, sample_dt: float | None = None) -> Trajectory1D:
    """Secular dynamics in the frame rotating at ``omega_d / 2``:

    ``alpha'' + gamma0 alpha' + (k/2) sin(2 alpha) = -gamma0 omega_d / 2``.
    """
    omega0 = pendulum_omega0(trap, body)
    if trap.omega_d < 5.0 * omega0:
        warnings.warn(
            f"co-rotating averaging assumes omega_d >> omega0 (ratio {trap.omega_d / max(omega0, 1e-300):.2f})",
            ValidityWarning,
            stacklevel=2,
        )
    if not t_end > state0.t:
        raise ValueError("t_end must exceed the initial time")
    if dt_max is None:
        scale = max(omega0, body.gamma0, 1e-300)
        dt_max = min(trap.period, 2.0 * math.pi / scale) / 50.0
    grid = _time_grid(state0.t, t_end, sample_dt or dt_max)
    k = pendulum_coupling(trap, body)
    force = body.gamma0 * trap.omega_d / 2.0
    a, b = _solve(0.5 * k, 0.0, 0.0, body.gamma0, force, state0, grid, dt_max)
    return Trajectory1D(grid, a, b)


def corotating_fixed_point(omega0: float, gamma0: float, omega_d: float):
    """Locked lag angle solving ``sin(2 alpha) = -gamma0 omega_d / omega0^2``, or None."""
    if omega0 == 0.0:
        return 0.0 if gamma0 * omega_d == 0.0 else None
    s = -gamma0 * omega_d / omega0**2
    if abs(s) > 1.0:
        return None
    return 0.5 * math.asin(s)


def to_corotating(traj: Trajectory1D, omega_d: float) -> Trajectory1D:
    """Express a lab-frame trajectory in the frame rotating at ``omega_d / 2``."""
    return Trajectory1D(traj.t.copy(), traj.alpha - 0.5 * omega_d * traj.t, traj.alpha_dot - 0.5 * omega_d)


def cycle_average(traj: Trajectory1D, period: float):
    """Average ``alpha`` over consecutive whole periods; returns ``(t_mid, mean)``."""
    t0 = traj.t[0]
    n = int(math.floor((traj.t[-1] - t0) / period + 1e-9))
    if n < 1:
        raise WindowOutOfRange("trajectory shorter than one period")
    t_mid = np.empty(n)
    mean = np.empty(n)
    for j in range(n):
        s = np.linspace(t0 + j * period, t0 + (j + 1) * period, 65)
        vals = traj.at(s)
        mean[j] = _trapezoid(vals, s) / period
        t_mid[j] = t0 + (j + 0.5) * period
    return t_mid, mean


def omega_max(omega0: float, gamma0: float) -> float:
    """Damping bound ``omega0^2 / gamma0`` on the locked drive frequency.

    Returns :data:`UNBOUNDED` (``inf``) for ``gamma0 == 0``.
    """
    if gamma0 < 0.0:
        raise ValueError("gamma0 must be non-negative")
    if gamma0 == 0.0:
        return UNBOUNDED
    return omega0 * omega0 / gamma0
