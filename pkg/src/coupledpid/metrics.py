"""Step-response and error-integral metrics computed from a SimTrace."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .simloop import SimTrace

SETTLING_BAND = 0.02  # fraction of the step magnitude
TAIL_FRACTION = 0.10  # share of the window used for steady-state error

# lower is better for every one of these
METRICS = ("overshoot", "rise_time", "settling_time", "steady_state_error",
           "iae", "ise", "itae", "control_variance")


@dataclass(frozen=True)
class StepMetrics:
    overshoot: float  # % of step magnitude
    rise_time: Optional[float]  # s, 10% -> 90%
    settling_time: Optional[float]  # s from window start, None when not settled
    steady_state_error: float  # % of span
    iae: float
    ise: float
    itae: float
    control_variance: float  # variance of the first differences of u
    settled: bool

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _window_mask(trace: SimTrace, window):
    t0, t1 = window
    eps = 1e-9 * max(1.0, abs(trace.ts))
    mask = (trace.t >= t0 - eps) & (trace.t <= t1 + eps)
    if not mask.any():
        raise ValueError(f"window {window!r} selects no samples")
    return mask


def error_integrals(trace: SimTrace, window):
    """Trapezoidal ``(IAE, ISE, ITAE)`` of the clean tracking error, with time
    in ITAE measured from the window start."""
    mask = _window_mask(trace, window)
    t = trace.t[mask]
    e = trace.setpoint[mask] - trace.pv_clean[mask]
    if len(t) < 2:
        return 0.0, 0.0, 0.0
    tau = t - window[0] if math.isfinite(window[0]) else t - t[0]
    ae = np.abs(e)
    return (float(np.trapezoid(ae, t)), float(np.trapezoid(e * e, t)), float(np.trapezoid(tau * ae, t)))


def _first_crossing(tr, z, level):
    idx = np.nonzero(z >= level)[0]
    if len(idx) == 0:
        return None
    i = idx[0]
    if i == 0:
        return float(tr[0])
    # linear interpolation between the bracketing samples
    return float(tr[i - 1] + (level - z[i - 1]) / (z[i] - z[i - 1]) * (tr[i] - tr[i - 1]))


def step_metrics(trace: SimTrace, window, step) -> StepMetrics:
    """Metrics of the step ``w_before -> w_after`` over ``window = (t_start, t_end)``.

    Times are relative to ``t_start``, which is taken as the step onset.
    """
    w_before, w_after = step
    delta = w_after - w_before
    if delta == 0 or not math.isfinite(delta):
        raise ValueError("degenerate step: w_after must differ from w_before")
    mask = _window_mask(trace, window)
    tr = trace.t[mask] - trace.t[mask][0]
    y = trace.pv_clean[mask]

    # progress toward the new setpoint, 0 at w_before and 1 at w_after
    z = (y - w_before) / delta
    overshoot = max(0.0, float(z.max()) - 1.0) * 100.0

    t10 = _first_crossing(tr, z, 0.1)
    t90 = _first_crossing(tr, z, 0.9)
    rise = t90 - t10 if t10 is not None and t90 is not None else None

    outside = np.nonzero(np.abs(y - w_after) > SETTLING_BAND * abs(delta))[0]
    if len(outside) == 0:
        settling, settled = 0.0, True
    elif outside[-1] == len(y) - 1:
        settling, settled = None, False
    else:
        settling, settled = float(tr[outside[-1] + 1]), True

    tail = max(1, int(round(TAIL_FRACTION * len(y))))
    sse = float(np.mean(np.abs(trace.setpoint[mask][-tail:] - y[-tail:])))

    iae, ise, itae = error_integrals(trace, window)
    du = np.diff(trace.u[mask])
    cvar = float(np.var(du)) if len(du) else 0.0
    return StepMetrics(overshoot=overshoot, rise_time=rise, settling_time=settling,
                       steady_state_error=sse, iae=iae, ise=ise, itae=itae,
                       control_variance=cvar, settled=settled)


@dataclass(frozen=True)
class MetricComparison:
    metric: str
    pi: Optional[float]
    pid: Optional[float]
    winner: str  # "PI", "PID" or "tie"
    advantage: float  # loser / winner, 1.0 on a tie
    ratio: float  # PID / PI


def _ratio(num, den):
    if num is None or den is None:
        return math.nan
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def compare(m_pi: StepMetrics, m_pid: StepMetrics):
    """Per-metric winner table for a paired PI/PID run; lower values win and
    an undefined value (never settled, never rose) loses to a defined one."""
    rows = []
    for name in METRICS:
        a, b = getattr(m_pi, name), getattr(m_pid, name)
        if a == b:
            winner, adv = "tie", 1.0
        elif b is None or (a is not None and a < b):
            winner, adv = "PI", _ratio(b, a)
        else:
            winner, adv = "PID", _ratio(a, b)
        rows.append(MetricComparison(metric=name, pi=a, pid=b, winner=winner, advantage=adv,
                                     ratio=_ratio(b, a)))
    return rows
