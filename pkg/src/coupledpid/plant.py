"""Lumped-parameter process models.

Three plants are provided:

* ``TankParams`` / ``TankState`` - two coupled tanks, pump feeding tank 1,
  Torricelli coupling into tank 2 and Torricelli outflow from tank 2.  The
  controlled level is tank 1 (the pumped tank).
* ``FlowPlantParams`` / ``FlowPlantState`` - pump- or valve-driven flow line
  with a first-order actuator lag.
* ``LinearParams`` / ``LinearState`` - first-order or integrating linear
  test plants used for discretization and relay checks.

All plants work in SI units internally.  Controllers see the measured value
in percent of span, see :func:`clean_pv` and :func:`measure`.

Everything here is a pure function of explicit state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError, NumericFailure


def _require_positive(obj, *names):
    for name in names:
        value = getattr(obj, name)
        if not (math.isfinite(value) and value > 0):
            raise ConfigurationError(f"{type(obj).__name__}.{name} must be finite and > 0, got {value!r}")


# --------------------------------------------------------------------------
# coupled tanks


@dataclass(frozen=True)
class TankParams:
    area_1: float = 0.0154  # m^2
    area_2: float = 0.0154
    coeff_12: float = 1.5e-4  # m^(5/2)/s
    coeff_out: float = 1.5e-4
    h_max: float = 0.5  # m
    pump_gain: float = 1.2e-6  # m^3/s per % drive
    pump_tau: float = 1.0  # s
    span: float = 0.5  # m
    sensor_tau: float = 0.5  # level transmitter damping (s), 0 = none

    def __post_init__(self):
        _require_positive(self, "area_1", "area_2", "coeff_12", "coeff_out", "h_max",
                          "pump_gain", "pump_tau", "span")
        if not (math.isfinite(self.sensor_tau) and self.sensor_tau >= 0):
            raise ConfigurationError(f"TankParams.sensor_tau must be >= 0, got {self.sensor_tau!r}")


@dataclass(frozen=True)
class TankState:
    """Levels h1, h2 (m), pump flow (m^3/s).

    ``inflow_volume`` and ``outflow_volume`` accumulate the integrated pump +
    disturbance inflow and tank 2 outflow (m^3) so volume balance can be
    audited.  ``clamped`` is set when the last :func:`step_plant` call had to
    clamp a level or the pump flow.
    """

    h1: float = 0.0
    h2: float = 0.0
    q_pump: float = 0.0
    inflow_volume: float = 0.0
    outflow_volume: float = 0.0
    h_sensor: float = 0.0  # transmitter output (m), tracks h1 through sensor_tau
    clamped: bool = False


# Below this head (m) the square-root law is replaced by its secant line so
# the drain rate stays Lipschitz and RK4 cannot overshoot an emptying tank.
HEAD_EPS = 1e-4


def _torricelli(head, coeff):
    if head >= HEAD_EPS:
        return coeff * math.sqrt(head)
    return coeff * head / math.sqrt(HEAD_EPS)


def _head(q, coeff):
    """Inverse of :func:`_torricelli`."""
    if q >= coeff * math.sqrt(HEAD_EPS):
        return (q / coeff) ** 2
    return q * math.sqrt(HEAD_EPS) / coeff


def coupling_flow(h1, h2, coeff_12):
    """Signed Torricelli flow from tank 1 to tank 2."""
    diff = h1 - h2
    if diff >= 0.0:
        return _torricelli(diff, coeff_12)
    return -_torricelli(-diff, coeff_12)


def _tank_rhs(x, p: TankParams, u, d):
    h1, h2, q_pump = x[0], x[1], x[2]
    # intermediate RK stages may dip marginally below zero
    q12 = coupling_flow(max(h1, 0.0), max(h2, 0.0), p.coeff_12)
    q_out = _torricelli(h2, p.coeff_out) if h2 > 0.0 else 0.0
    q_in = q_pump + d
    dh1 = (q_in - q12) / p.area_1
    return (
        dh1,
        (q12 - q_out) / p.area_2,
        (p.pump_gain * u - q_pump) / p.pump_tau,
        q_in,
        q_out,
        (h1 - x[5]) / p.sensor_tau if p.sensor_tau > 0 else dh1,
    )


def tank_derivatives(state: TankState, params: TankParams, u: float, d: float = 0.0):
    """Return ``(dh1/dt, dh2/dt, dq_pump/dt)`` for drive ``u`` (%) and
    disturbance inflow ``d`` (m^3/s)."""
    x = (state.h1, state.h2, state.q_pump, state.inflow_volume, state.outflow_volume, state.h_sensor)
    if not all(math.isfinite(v) for v in x + (u, d)):
        raise NumericFailure("non-finite tank state or input", state=state)
    return _tank_rhs(x, params, u, d)[:3]


# --------------------------------------------------------------------------
# flow line


@dataclass(frozen=True)
class FlowPlantParams:
    kind: str = "pump"  # pump | valve
    q_max: float = 1.5e-4  # m^3/s
    actuator_tau: float = 1.0  # s
    valve_char: str = "linear"  # linear | equal-percentage
    rangeability: float = 30.0
    span: float = 1.5e-4  # m^3/s

    def __post_init__(self):
        if self.kind not in ("pump", "valve"):
            raise ConfigurationError(f"FlowPlantParams.kind must be 'pump' or 'valve', got {self.kind!r}")
        if self.valve_char not in ("linear", "equal-percentage"):
            raise ConfigurationError(
                f"FlowPlantParams.valve_char must be 'linear' or 'equal-percentage', got {self.valve_char!r}")
        _require_positive(self, "q_max", "actuator_tau", "span")
        if self.valve_char == "equal-percentage" and not self.rangeability > 1:
            raise ConfigurationError("FlowPlantParams.rangeability must be > 1 for equal-percentage valves")


@dataclass(frozen=True)
class FlowPlantState:
    actuator_pos: float = 0.0  # fraction 0..1
    q: float = 0.0  # m^3/s
    clamped: bool = False


def valve_characteristic(pos, params: FlowPlantParams):
    if params.valve_char == "linear":
        return pos
    if pos <= 0.0:
        return 0.0
    return params.rangeability ** (pos - 1.0)


def _delivered_flow(pos, params, d):
    return max(params.q_max * valve_characteristic(pos, params) * (1.0 + d), 0.0)


def flow_derivatives(state: FlowPlantState, params: FlowPlantParams, u: float, d: float = 0.0):
    """Return ``(dpos/dt, dq/dt)``.

    The delivered flow is algebraic in the actuator position, so ``dq/dt`` is
    the chain-rule rate ``q_max * phi'(pos) * (1 + d) * dpos/dt``.
    """
    if not all(math.isfinite(v) for v in (state.actuator_pos, state.q, u, d)):
        raise NumericFailure("non-finite flow state or input", state=state)
    dpos = (u / 100.0 - state.actuator_pos) / params.actuator_tau
    if params.valve_char == "linear":
        slope = 1.0
    elif state.actuator_pos <= 0.0:
        slope = 0.0
    else:
        slope = math.log(params.rangeability) * valve_characteristic(state.actuator_pos, params)
    return dpos, params.q_max * slope * (1.0 + d) * dpos


# --------------------------------------------------------------------------
# linear test plants


@dataclass(frozen=True)
class LinearParams:
    """``first-order``: tau*y' = gain*(u + d - u_bias) - y.
    ``integrator``: y' = gain*(u + d - u_bias).

    ``y`` is in engineering units with PV = 100*y/span.
    """

    kind: str = "first-order"
    gain: float = 1.0
    tau: float = 5.0
    u_bias: float = 0.0
    span: float = 100.0

    def __post_init__(self):
        if self.kind not in ("first-order", "integrator"):
            raise ConfigurationError(f"LinearParams.kind must be 'first-order' or 'integrator', got {self.kind!r}")
        _require_positive(self, "gain", "tau", "span")
        if not math.isfinite(self.u_bias):
            raise ConfigurationError("LinearParams.u_bias must be finite")


@dataclass(frozen=True)
class LinearState:
    y: float = 0.0
    clamped: bool = False


PlantParams = Union[TankParams, FlowPlantParams, LinearParams]
PlantState = Union[TankState, FlowPlantState, LinearState]


# --------------------------------------------------------------------------
# integration


def _rk4(f, x, dt):
    k1 = f(x)
    k2 = f(tuple(xi + 0.5 * dt * ki for xi, ki in zip(x, k1)))
    k3 = f(tuple(xi + 0.5 * dt * ki for xi, ki in zip(x, k2)))
    k4 = f(tuple(xi + dt * ki for xi, ki in zip(x, k3)))
    return tuple(xi + dt / 6.0 * (a + 2.0 * b + 2.0 * c + e)
                 for xi, a, b, c, e in zip(x, k1, k2, k3, k4))


def _check_finite(x, state):
    if not all(math.isfinite(v) for v in x):
        raise NumericFailure(f"plant integration produced non-finite values {x!r}", state=state)


def _step_tank(state: TankState, p: TankParams, u, d, dt, substeps):
    x = (state.h1, state.h2, state.q_pump, state.inflow_volume, state.outflow_volume, state.h_sensor)

    def f(s):
        return _tank_rhs(s, p, u, d)

    clamped = False
    for _ in range(substeps):
        x = _rk4(f, x, dt)
        _check_finite(x, state)
        h1, h2, q = x[0], x[1], x[2]
        c1 = min(max(h1, 0.0), p.h_max)
        c2 = min(max(h2, 0.0), p.h_max)
        cq = max(q, 0.0)
        if c1 != h1 or c2 != h2 or cq != q:
            clamped = True
            x = (c1, c2, cq, x[3], x[4], c1 if p.sensor_tau == 0 else x[5])
    return TankState(*x, clamped=clamped)


def _step_flow(state: FlowPlantState, p: FlowPlantParams, u, d, dt, substeps):
    # only the actuator position is a true state; flow follows algebraically
    target = u / 100.0
    tau = p.actuator_tau

    def f(s):
        return ((target - s[0]) / tau,)

    x = (state.actuator_pos,)
    clamped = False
    for _ in range(substeps):
        x = _rk4(f, x, dt)
        _check_finite(x, state)
        pos = min(max(x[0], 0.0), 1.0)
        if pos != x[0]:
            clamped = True
            x = (pos,)
    q = _delivered_flow(x[0], p, d)
    return FlowPlantState(actuator_pos=x[0], q=q, clamped=clamped)


def _step_linear(state: LinearState, p: LinearParams, u, d, dt, substeps):
    drive = p.gain * (u + d - p.u_bias)
    if p.kind == "integrator":
        def f(s):
            return (drive,)
    else:
        tau = p.tau

        def f(s):
            return ((drive - s[0]) / tau,)

    x = (state.y,)
    for _ in range(substeps):
        x = _rk4(f, x, dt)
        _check_finite(x, state)
    return LinearState(y=x[0])


def step_plant(state, params, u: float, d: float, dt: float, substeps: int = 1):
    """Advance ``state`` by ``substeps`` classical RK4 steps of length ``dt``
    with drive ``u`` (%) and disturbance ``d`` held constant.

    Levels, flows and actuator positions are clamped to their physical range
    after each substep.
    """
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt!r}")
    if isinstance(params, TankParams):
        return _step_tank(state, params, u, d, dt, substeps)
    if isinstance(params, FlowPlantParams):
        return _step_flow(state, params, u, d, dt, substeps)
    if isinstance(params, LinearParams):
        return _step_linear(state, params, u, d, dt, substeps)
    raise TypeError(f"unknown plant parameters {type(params).__name__}")


# --------------------------------------------------------------------------
# measurement and operating points


def clean_value(state, params):
    """Controlled variable in engineering units (m or m^3/s)."""
    if isinstance(params, TankParams):
        return state.h_sensor if params.sensor_tau > 0 else state.h1
    if isinstance(params, FlowPlantParams):
        return state.q
    return state.y


def clean_pv(state, params):
    """Noise-free PV in percent of span."""
    return 100.0 * clean_value(state, params) / params.span


def measure(clean: float, span: float, noise_std: float, rng: np.random.Generator) -> float:
    """Percent-scaled measurement with additive Gaussian noise, clamped to [0, 100].

    One standard normal is drawn per call whatever ``noise_std`` is, so paired
    runs consume identical streams.
    """
    z = rng.standard_normal()
    pv = 100.0 * clean / span + noise_std * z
    return min(max(pv, 0.0), 100.0)


def disturbance_input(params, percent: float) -> float:
    """Convert a disturbance given in percent of actuator span to plant units."""
    if isinstance(params, TankParams):
        return percent * params.pump_gain  # m^3/s into tank 1
    if isinstance(params, FlowPlantParams):
        return percent / 100.0  # fractional flow change
    return percent  # % of drive


def equilibrium(params, pv: float):
    """Steady state holding the controlled variable at ``pv`` percent.

    Returns ``(state, u)`` where ``u`` is the holding drive in percent.
    """
    value = pv * params.span / 100.0
    if isinstance(params, TankParams):
        if not 0.0 <= value <= params.h_max:
            raise ConfigurationError(f"level {value} m outside tank range")
        q = math.sqrt(value / (params.coeff_12 ** -2 + params.coeff_out ** -2))
        h2 = (q / params.coeff_out) ** 2
        if value > 0.0 and min(h2, value - h2) < HEAD_EPS:
            # a head sits in the linearized region; invert numerically
            q = brentq(lambda f: _head(f, params.coeff_12) + _head(f, params.coeff_out) - value,
                       0.0, params.coeff_12 * math.sqrt(params.h_max), xtol=1e-300, rtol=1e-15)
            h2 = _head(q, params.coeff_out)
        return TankState(h1=value, h2=h2, q_pump=q, h_sensor=value), q / params.pump_gain
    if isinstance(params, FlowPlantParams):
        frac = value / params.q_max
        if not 0.0 <= frac <= 1.0:
            raise ConfigurationError(f"flow {value} outside actuator range")
        if params.valve_char == "linear" or frac == 0.0:
            pos = frac
        else:
            pos = 1.0 + math.log(frac) / math.log(params.rangeability)
        pos = max(pos, 0.0)
        return FlowPlantState(actuator_pos=pos, q=_delivered_flow(pos, params, 0.0)), 100.0 * pos
    if params.kind == "integrator":
        return LinearState(y=value), params.u_bias
    return LinearState(y=value), value / params.gain + params.u_bias


def level_plant() -> TankParams:
    return TankParams()


def pump_plant() -> FlowPlantParams:
    return FlowPlantParams(kind="pump", actuator_tau=1.0, valve_char="linear")


def valve_plant() -> FlowPlantParams:
    return FlowPlantParams(kind="valve", actuator_tau=3.0, valve_char="linear")


def stored_volume(state: TankState, params: TankParams) -> float:
    return params.area_1 * state.h1 + params.area_2 * state.h2
