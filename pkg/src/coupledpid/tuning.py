"""Controller calibration: relay identification, Ziegler-Nichols rules and
simplex descent on the ITAE of the closed-loop step response."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from . import plant as pl
from .controller import PidConfig
from .errors import ConfigurationError, IdentificationError, NumericFailure, TuningError
from .metrics import error_integrals
from .simloop import LoopScenario, run_closed_loop, sample_count, schedule_value


@dataclass(frozen=True)
class UltimateParams:
    ku: float
    tu: float

    def __post_init__(self):
        if not (self.ku > 0 and self.tu > 0):
            raise ConfigurationError(f"ultimate gain and period must be > 0, got {self.ku!r}, {self.tu!r}")


@dataclass
class TuneResult:
    config: PidConfig
    objective_initial: float
    objective_final: float
    evaluations: int
    converged: bool
    history: list = field(default_factory=list)  # incumbent objective after each evaluation


# --------------------------------------------------------------------------
# relay experiment


def _crossing_times(t, y, level):
    """Interpolated upward crossings of ``level``."""
    below = y[:-1] < level
    above = y[1:] >= level
    idx = np.nonzero(below & above)[0]
    frac = (level - y[idx]) / (y[idx + 1] - y[idx])
    return idx + 1, t[idx] + frac * (t[idx + 1] - t[idx])


def relay_identify(scenario: LoopScenario, amplitude: float = 10.0, hysteresis: float = 0.0,
                   bias: Optional[float] = None, setpoint: Optional[float] = None,
                   duration: Optional[float] = None, cycles: int = 5) -> UltimateParams:
    """Estimate ultimate gain and period with an on/off relay around ``setpoint``.

    Only the plant, its limits, the sampling time and the noise settings of
    ``scenario`` are used; the controller gains are ignored.  The plant starts
    at its equilibrium for the setpoint when one exists, and ``bias`` defaults
    to the holding drive there.  ``ku = 4*amplitude / (pi*A)`` with ``A`` the
    half peak-to-peak oscillation of the clean PV over the last ``cycles``
    full periods.
    """
    sc = scenario
    ctrl = sc.controller
    params = sc.plant
    w = schedule_value(sc.setpoint_profile, math.inf) if setpoint is None else setpoint
    try:
        state, u_eq = pl.equilibrium(params, w)
    except ConfigurationError:
        state, u_eq = sc.initial_state, 0.5 * (ctrl.u_min + ctrl.u_max)
    u0 = u_eq if bias is None else bias
    hi = min(u0 + amplitude, ctrl.u_max)
    lo = max(u0 - amplitude, ctrl.u_min)
    d_amp = 0.5 * (hi - lo)
    if d_amp <= 0:
        raise IdentificationError("relay amplitude collapses against the output limits")

    n = sample_count(sc.duration if duration is None else duration, ctrl.ts)
    dt = ctrl.ts / sc.substeps_per_sample
    rng = np.random.default_rng(sc.seed)
    t = np.arange(n) * ctrl.ts
    y = np.empty(n)
    u = hi
    for k in range(n):
        clean = pl.clean_value(state, params)
        y[k] = 100.0 * clean / params.span
        e = w - pl.measure(clean, params.span, sc.noise_std, rng)
        if e > hysteresis:
            u = hi
        elif e < -hysteresis:
            u = lo
        d = pl.disturbance_input(params, schedule_value(sc.disturbance_profile, t[k]))
        state = pl.step_plant(state, params, u, d, dt, substeps=sc.substeps_per_sample)

    idx, tc = _crossing_times(t, y, w)
    # two cycles of transient are discarded
    if len(tc) < cycles + 3:
        raise IdentificationError(f"only {len(tc)} upward crossings; no sustained oscillation")
    idx, tc = idx[-(cycles + 1):], tc[-(cycles + 1):]
    periods = np.diff(tc)
    amps = np.array([0.5 * (y[a:b].max() - y[a:b].min()) for a, b in zip(idx[:-1], idx[1:])])
    if amps.min() <= 0 or periods.std() > 0.05 * periods.mean() or amps.std() > 0.1 * amps.mean():
        raise IdentificationError("relay oscillation is not steady")
    a_osc = 0.5 * (y[idx[0]:idx[-1]].max() - y[idx[0]:idx[-1]].min())
    return UltimateParams(ku=float(4.0 * d_amp / (math.pi * a_osc)), tu=float(periods.mean()))


def ziegler_nichols(up: UltimateParams, kind: str = "PID") -> PidConfig:
    """Classic ultimate-cycle rules, beta=1, alpha=0, filter factor 0.1, ts=0.1 s."""
    kind = kind.upper()
    if kind == "PI":
        return PidConfig(kp=0.45 * up.ku, ti=up.tu / 1.2, td=0.0, deriv_delay_coeff=0.1,
                         beta=1.0, alpha=0.0, ts=0.1)
    if kind == "PID":
        return PidConfig(kp=0.6 * up.ku, ti=up.tu / 2.0, td=up.tu / 8.0, deriv_delay_coeff=0.1,
                         beta=1.0, alpha=0.0, ts=0.1)
    raise ConfigurationError(f"kind must be 'PI' or 'PID', got {kind!r}")


# --------------------------------------------------------------------------
# simplex autotuning

BOUNDS = {"kp": (1e-2, 1e4), "ti": (1e-2, 1e3), "td": (0.0, 1e2), "beta": (0.0, 1.0)}
PENALTY = 1e12
TD_FLOOR = 1e-4


def step_onset(scenario: LoopScenario) -> float:
    """Time of the last setpoint change (0 when the setpoint is constant)."""
    return scenario.setpoint_profile[-1][0]


def itae_objective(scenario: LoopScenario) -> Callable[[PidConfig], float]:
    """ITAE of the noise-free closed-loop response from the last setpoint step.

    Diverging or non-finite runs score ``PENALTY`` instead of raising.
    """
    base = replace(scenario, noise_std=0.0)
    window = (step_onset(base), math.inf)

    def objective(config):
        try:
            trace = run_closed_loop(replace(base, controller=config))
        except NumericFailure:
            return PENALTY
        if not np.all(np.isfinite(trace.pv_clean)) or np.abs(trace.pv_clean).max() > 1000.0:
            return PENALTY
        itae = error_integrals(trace, window)[2]
        return itae if math.isfinite(itae) else PENALTY

    return objective


def _fold(v, lo, hi):
    """Reflect ``v`` back into ``[lo, hi]``; identity inside the box."""
    span = hi - lo
    r = (v - lo) % (2.0 * span)
    return lo + (r if r <= span else 2.0 * span - r)


def _codec(initial: PidConfig, vary: Sequence[str]):
    """Map between a config and the search vector (log scale for kp, ti and
    for td when it starts positive).

    The simplex moves freely; decoding folds each coordinate back into its
    box by reflection, so a bound never flattens the objective.
    """
    names = [n for n in ("kp", "ti", "td", "beta") if n in vary]
    if initial.ti is None and "ti" in names:
        names.remove("ti")
    log_td = initial.td > 0

    def is_log(name):
        return name in ("kp", "ti") or (name == "td" and log_td)

    bounds = []
    for n in names:
        lo, hi = BOUNDS[n]
        if is_log(n):
            lo, hi = math.log(TD_FLOOR if n == "td" else lo), math.log(hi)
        bounds.append((lo, hi))

    def encode(cfg):
        return np.array([math.log(getattr(cfg, n)) if is_log(n) else getattr(cfg, n) for n in names])

    def decode(x):
        values = {}
        for n, v, (lo, hi) in zip(names, x, bounds):
            v = _fold(float(v), lo, hi)
            values[n] = float(math.exp(v) if is_log(n) else v)
        return replace(initial, **values)

    steps = [0.3 if is_log(n) else (0.1 if n == "beta" else 0.1 * max(initial.ts, 1.0)) for n in names]
    return names, encode, decode, bounds, steps


def _simplex(x0, steps, bounds):
    pts = [x0]
    for i, s in enumerate(steps):
        x = x0.copy()
        # step inward when the start sits on the upper bound
        x[i] = x[i] + s if x[i] + s <= bounds[i][1] else x[i] - s
        pts.append(x)
    return np.array(pts)


def autotune(scenario: LoopScenario, initial: PidConfig, budget: int = 200,
             vary: Sequence[str] = ("kp", "ti", "td", "beta"),
             objective: Optional[Callable[[PidConfig], float]] = None,
             log: Optional[Callable[[str], None]] = None) -> TuneResult:
    """Nelder-Mead descent over the ``vary`` parameters of ``initial``.

    PI configurations (``td == 0``) never vary ``td``.  The best configuration
    seen is returned, so ``objective_final <= objective_initial`` always.  At
    most ``budget`` objective evaluations are made; one restart from the
    incumbent happens if the simplex collapses before the budget is spent.
    """
    if budget < 10:
        raise ConfigurationError("budget must be >= 10")
    if initial.td == 0.0:
        vary = [v for v in vary if v != "td"]
    names, encode, decode, bounds, steps = _codec(initial, vary)
    f = objective if objective is not None else itae_objective(scenario)

    try:
        f0 = float(f(initial))
    except NumericFailure as exc:
        raise TuningError(f"initial configuration failed to simulate: {exc}") from exc
    if not math.isfinite(f0) or f0 >= PENALTY:
        raise TuningError("initial configuration is not a valid starting point")

    best = {"f": f0, "config": initial}
    history = [f0]
    cache = {}

    class _Budget(Exception):
        pass

    def emit(i, cfg, value):
        if log is not None:
            parts = " ".join(f"{n}={getattr(cfg, n):.6g}" for n in names)
            log(f"eval {i} {parts} objective={value:.6g}")

    emit(1, initial, f0)

    def wrapped(x):
        cfg = decode(x)
        key = tuple(getattr(cfg, n) for n in names)
        if key == tuple(getattr(initial, n) for n in names):
            return f0
        if key in cache:
            return cache[key]
        if len(history) >= budget:
            raise _Budget
        try:
            value = float(f(cfg))
        except NumericFailure:
            value = PENALTY
        if not math.isfinite(value):
            value = PENALTY
        cache[key] = value
        if value < best["f"]:
            best["f"], best["config"] = value, cfg
        history.append(best["f"])
        emit(len(history), cfg, value)
        return value

    converged = False
    if names:
        for _attempt in range(2):
            x0 = encode(best["config"])
            try:
                res = minimize(wrapped, x0, method="Nelder-Mead",
                               options={"initial_simplex": _simplex(x0, steps, bounds),
                                        "maxfev": 10 * budget, "xatol": 1e-6, "fatol": 1e-12 * max(best["f"], 1.0)})
            except _Budget:
                converged = False
                break
            converged = bool(res.success)
            if len(history) >= budget:
                break

    return TuneResult(config=best["config"], objective_initial=f0, objective_final=best["f"],
                      evaluations=len(history), converged=converged, history=history)
