"""Fixed-step integration of the delayed SIS dynamics.

Both the nonlinear mean-field model and its linearization around the
disease-free state are integrated with classical RK4 in method-of-steps
form: the step size must divide the delay, so every delayed lookup at a
stage endpoint lands exactly on the stored grid, and the half-step
stage reads a cubic Hermite reconstruction of the delayed interval.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, ValidationError
from .network import EpidemicNetwork

__all__ = [
    "MIN_STEPS_PER_DELAY",
    "SimulationMode",
    "Trajectory",
    "TrajectoryConfig",
    "decay_rate_estimate",
    "random_initial_state",
    "simulate",
]

MIN_STEPS_PER_DELAY = 20

# relative slack when checking that dt divides tau
_STEP_RATIO_TOL = 1e-9
# clamp excursions smaller than this are roundoff, not events
_CLAMP_TOL = 1e-9
_BLOWUP_LO, _BLOWUP_HI = -0.5, 1.5


class SimulationMode(enum.Enum):
    NONLINEAR = "nonlinear"
    LINEARIZED = "linearized"

    @classmethod
    def parse(cls, text: str) -> "SimulationMode":
        lowered = str(text).lower()
        if lowered in ("linear", "linearised"):
            lowered = "linearized"
        for mode in cls:
            if lowered == mode.value:
                return mode
        choices = ", ".join(m.value for m in cls)
        raise ValidationError(f"unknown mode {text!r}, expected one of: {choices}")


@dataclass(frozen=True)
class TrajectoryConfig:
    """What to integrate: initial condition, horizon, step, mode.

    ``history`` is the state on [-tau, 0): either a constant vector or
    a callable of time. By default the initial state extends backwards.
    """

    initial_state: np.ndarray
    t_end: float
    dt: float
    mode: SimulationMode = SimulationMode.NONLINEAR
    history: object = None

    def __post_init__(self):
        state = np.array(self.initial_state, dtype=float).reshape(-1)
        if state.size == 0 or not np.all(np.isfinite(state)):
            raise ValidationError("initial state must be a non-empty finite vector")
        if np.any(state < 0) or np.any(state > 1):
            raise ValidationError("initial state must lie in [0, 1] per node")
        state.setflags(write=False)
        object.__setattr__(self, "initial_state", state)
        if not (np.isfinite(self.t_end) and self.t_end > 0):
            raise ValidationError(f"t_end must be positive, got {self.t_end}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if not isinstance(self.mode, SimulationMode):
            object.__setattr__(self, "mode", SimulationMode.parse(self.mode))
        if self.history is not None and not callable(self.history):
            hist = np.array(self.history, dtype=float).reshape(-1)
            if hist.shape != state.shape or not np.all(np.isfinite(hist)):
                raise ValidationError("history vector must match the initial state shape")
            hist.setflags(write=False)
            object.__setattr__(self, "history", hist)

    def history_function(self):
        """History as a callable of (negative) time."""
        if self.history is None:
            const = self.initial_state
        elif callable(self.history):
            return self.history
        else:
            const = self.history
        return lambda _t: const


@dataclass(frozen=True)
class Trajectory:
    """Integration output on the uniform grid."""

    times: np.ndarray
    states: np.ndarray
    average_infection: np.ndarray
    peak_height: float
    peak_time: float
    clamp_events: int = 0
    mode: SimulationMode = SimulationMode.NONLINEAR

    @classmethod
    def from_states(cls, times, states, clamp_events, mode) -> "Trajectory":
        avg = states.mean(axis=1)
        k = int(np.argmax(avg))
        for arr in (times, states, avg):
            arr.setflags(write=False)
        return cls(
            times=times, states=states, average_infection=avg,
            peak_height=float(avg[k]), peak_time=float(times[k]),
            clamp_events=int(clamp_events), mode=mode,
        )


def random_initial_state(n: int, seed: int) -> np.ndarray:
    """Small random infection levels, uniform on (0, 0.05)."""
    return np.random.default_rng(seed).uniform(0.0, 0.05, int(n))


def _delay_steps(tau: float, dt: float) -> int:
    """Number of grid steps per delay; 0 when there is no delay."""
    if tau == 0:
        return 0
    ratio = tau / dt
    m = int(round(ratio))
    if m < MIN_STEPS_PER_DELAY or abs(ratio - m) > _STEP_RATIO_TOL * max(1.0, ratio):
        raise ValidationError(
            f"dt={dt:.6g} must divide tau={tau:.6g} into at least "
            f"{MIN_STEPS_PER_DELAY} steps (got tau/dt={ratio:.6g})"
        )
    return m


def _make_rhs(net: EpidemicNetwork, mode: SimulationMode):
    """Right-hand side as a function of the delayed state only."""
    delta = net.delta
    if mode is SimulationMode.LINEARIZED:
        A = net.beta * net.adjacency()
        np.fill_diagonal(A, -delta)
        return lambda pd: A @ pd
    A = net.adjacency()
    beta = net.beta

    def rhs(pd):
        return beta * (1.0 - pd) * (A @ pd) - delta * pd

    return rhs


def simulate(net: EpidemicNetwork, cfg: TrajectoryConfig) -> Trajectory:
    """Integrate the delayed dynamics over [0, t_end].

    Raises ConvergenceError if the nonlinear state leaves [-0.5, 1.5]
    before clamping, which signals instability or an oversized step.
    """
    n = net.node_count
    if cfg.initial_state.shape[0] != n:
        raise ValidationError(
            f"initial state has {cfg.initial_state.shape[0]} entries "
            f"for a {n}-node network"
        )
    h = cfg.dt
    m = _delay_steps(net.tau, h)
    steps = max(1, int(np.ceil(cfg.t_end / h - 1e-9)))
    rhs = _make_rhs(net, cfg.mode)
    nonlinear = cfg.mode is SimulationMode.NONLINEAR
    history = cfg.history_function()

    times = np.arange(steps + 1) * h
    states = np.empty((steps + 1, n))
    states[0] = cfg.initial_state
    clamp_events = 0

    def settle(y, k):
        nonlocal clamp_events
        if not nonlinear:
            states[k] = y
            return
        if np.any(y < _BLOWUP_LO) or np.any(y > _BLOWUP_HI):
            raise ConvergenceError(
                f"state left [{_BLOWUP_LO}, {_BLOWUP_HI}] at t={times[k]:.6g}: "
                "unstable configuration or dt too large"
            )
        clamp_events += int(np.count_nonzero((y < -_CLAMP_TOL) | (y > 1.0 + _CLAMP_TOL)))
        states[k] = np.clip(y, 0.0, 1.0)

    if m == 0:
        # no delay: classical RK4 on the ODE
        for k in range(steps):
            y = states[k]
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * h * k1)
            k3 = rhs(y + 0.5 * h * k2)
            k4 = rhs(y + h * k3)
            settle(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), k + 1)
        return Trajectory.from_states(times, states, clamp_events, cfg.mode)

    # method of steps: the RHS reads only p(t - tau), so the two middle
    # RK4 stages coincide and the update needs the delayed state at the
    # interval endpoints (on the grid) and at its midpoint (Hermite).
    derivs = np.empty_like(states)
    for k in range(steps):
        j = k - m
        pd0 = states[j] if j >= 0 else history(times[k] - net.tau)
        f0 = rhs(pd0)
        derivs[k] = f0
        if j >= 0:
            ya, yb = states[j], states[j + 1]
            pd_mid = 0.5 * (ya + yb) + (h / 8.0) * (derivs[j] - derivs[j + 1])
        else:
            # midpoint still inside the history segment
            pd_mid = history(times[k] + 0.5 * h - net.tau)
        pd1 = states[j + 1] if j + 1 >= 0 else history(times[k + 1] - net.tau)
        f_mid = rhs(pd_mid)
        f1 = rhs(pd1)
        settle(states[k] + h / 6.0 * (f0 + 4.0 * f_mid + f1), k + 1)
    return Trajectory.from_states(times, states, clamp_events, cfg.mode)


def decay_rate_estimate(traj: Trajectory, window: float = 0.3) -> float:
    """Least-squares slope of log average infection over the tail.

    ``window`` is the fraction of the trajectory used, from the end.
    A tail touching zero or below has no log-slope; that case warns and
    returns -inf as the sentinel.
    """
    if not 0 < window <= 1:
        raise ValidationError(f"window must be in (0, 1], got {window}")
    count = max(2, int(np.ceil(window * traj.times.shape[0])))
    tail = traj.average_infection[-count:]
    if np.any(tail <= 0):
        warnings.warn(
            "trajectory tail reaches zero or below; decay rate undefined",
            stacklevel=2,
        )
        return float("-inf")
    slope = np.polyfit(traj.times[-count:], np.log(tail), 1)[0]
    return float(slope)
