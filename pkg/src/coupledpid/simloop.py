"""Closed-loop executor.

Each controller sample: take the measurement, run one controller step, then
hold the output over ``substeps_per_sample`` plant integration substeps.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import plant as pl
from .controller import PidConfig, PidState, pid_step, preload
from .errors import ConfigurationError, NumericFailure

Schedule = Tuple[Tuple[float, float], ...]


def _check_schedule(name, schedule):
    if not schedule:
        raise ConfigurationError(f"{name} must not be empty")
    times = [t for t, _ in schedule]
    if times[0] != 0.0:
        raise ConfigurationError(f"{name} must start at t=0")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigurationError(f"{name} times must be strictly increasing")
    if not all(math.isfinite(v) for pair in schedule for v in pair):
        raise ConfigurationError(f"{name} entries must be finite")


def schedule_value(schedule: Schedule, t: float) -> float:
    """Piecewise-constant lookup: value of the last entry with time <= t."""
    i = bisect.bisect_right([s[0] for s in schedule], t) - 1
    return schedule[max(i, 0)][1]


@dataclass(frozen=True)
class LoopScenario:
    plant: pl.PlantParams
    initial_state: pl.PlantState
    controller: PidConfig
    setpoint_profile: Schedule = ((0.0, 20.0), (1.0, 60.0))
    # percent of actuator span, see plant.disturbance_input
    disturbance_profile: Schedule = ((0.0, 0.0),)
    noise_std: float = 0.0
    duration: float = 120.0
    seed: int = 0
    substeps_per_sample: int = 10
    name: str = "scenario"
    # controller output at t=0; None starts from a zeroed controller
    initial_output: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "setpoint_profile", tuple(tuple(map(float, p)) for p in self.setpoint_profile))
        object.__setattr__(self, "disturbance_profile",
                           tuple(tuple(map(float, p)) for p in self.disturbance_profile))
        _check_schedule("setpoint_profile", self.setpoint_profile)
        _check_schedule("disturbance_profile", self.disturbance_profile)
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ConfigurationError(f"duration must be > 0, got {self.duration!r}")
        if not (math.isfinite(self.noise_std) and self.noise_std >= 0):
            raise ConfigurationError(f"noise_std must be >= 0, got {self.noise_std!r}")
        if not (isinstance(self.substeps_per_sample, int) and self.substeps_per_sample >= 1):
            raise ConfigurationError(f"substeps_per_sample must be an integer >= 1, got {self.substeps_per_sample!r}")
        if self.initial_output is not None and not (
                self.controller.u_min <= self.initial_output <= self.controller.u_max):
            raise ConfigurationError("initial_output must lie within the controller output limits")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2 ** 64):
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        expected = {pl.TankParams: pl.TankState, pl.FlowPlantParams: pl.FlowPlantState,
                    pl.LinearParams: pl.LinearState}.get(type(self.plant))
        if expected is None:
            raise ConfigurationError(f"unsupported plant {type(self.plant).__name__}")
        if not isinstance(self.initial_state, expected):
            raise ConfigurationError(f"initial_state must be a {expected.__name__}")

    @property
    def n_samples(self) -> int:
        return sample_count(self.duration, self.controller.ts)


def sample_count(duration, ts):
    # guard against ts * n landing a hair past duration
    return max(1, math.ceil(duration / ts - 1e-9))


@dataclass
class SimTrace:
    ts: float
    t: np.ndarray
    setpoint: np.ndarray
    pv: np.ndarray
    pv_clean: np.ndarray
    u: np.ndarray
    disturbance: np.ndarray
    clamped: np.ndarray = field(default=None)
    name: str = "trace"

    def __post_init__(self):
        if self.clamped is None:
            self.clamped = np.zeros(len(self.t), dtype=bool)

    def __len__(self):
        return len(self.t)

    COLUMNS = ("t", "setpoint", "pv", "pv_clean", "u", "disturbance")

    def columns(self):
        return {name: getattr(self, name) for name in self.COLUMNS}

    def identical(self, other: "SimTrace") -> bool:
        """Bit-for-bit equality of every column."""
        return self.ts == other.ts and all(
            np.array_equal(getattr(self, c), getattr(other, c)) for c in self.COLUMNS + ("clamped",))


def initial_controller_state(scenario: LoopScenario) -> PidState:
    sc = scenario
    if sc.initial_output is None:
        return PidState()
    w0 = sc.setpoint_profile[0][1]
    y0 = pl.clean_pv(sc.initial_state, sc.plant)
    return preload(sc.controller, w0, y0, sc.initial_output)


def run_closed_loop(scenario: LoopScenario) -> SimTrace:
    return simulate(scenario)[0]


def simulate(scenario: LoopScenario):
    """Like :func:`run_closed_loop` but also returns the final plant state."""
    sc = scenario
    ctrl = sc.controller
    n = sc.n_samples
    params = sc.plant
    dt = ctrl.ts / sc.substeps_per_sample
    rng = np.random.default_rng(sc.seed)

    t = np.arange(n) * ctrl.ts
    w_col = np.empty(n)
    pv_col = np.empty(n)
    clean_col = np.empty(n)
    u_col = np.empty(n)
    d_col = np.empty(n)
    clamp_col = np.zeros(n, dtype=bool)

    state = sc.initial_state
    cstate = initial_controller_state(sc)
    for k in range(n):
        tk = t[k]
        w = schedule_value(sc.setpoint_profile, tk)
        d = schedule_value(sc.disturbance_profile, tk)
        clean = pl.clean_value(state, params)
        pv = pl.measure(clean, params.span, sc.noise_std, rng)
        u, cstate = pid_step(ctrl, cstate, w, pv)
        w_col[k], pv_col[k], u_col[k], d_col[k] = w, pv, u, d
        clean_col[k] = 100.0 * clean / params.span
        try:
            state = pl.step_plant(state, params, u, pl.disturbance_input(params, d), dt,
                                  substeps=sc.substeps_per_sample)
        except NumericFailure as exc:
            raise NumericFailure(f"sample {k}: {exc}", state=exc.state, sample=k) from exc
        clamp_col[k] = state.clamped

    trace = SimTrace(ts=ctrl.ts, t=t, setpoint=w_col, pv=pv_col, pv_clean=clean_col, u=u_col,
                     disturbance=d_col, clamped=clamp_col, name=sc.name)
    return trace, state


def run_pair(scenario_a: LoopScenario, scenario_b: LoopScenario):
    """Run two scenarios for a paired comparison.

    Noise streams depend only on the seed, so equal seeds give the two runs
    the same noise realization sample by sample.
    """
    return run_closed_loop(scenario_a), run_closed_loop(scenario_b)

