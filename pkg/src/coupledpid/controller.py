"""Discrete two-degree-of-freedom PID with derivative filter and anti-windup.

Backward-difference realization, all terms pre-gain::

    P   = beta*w - y
    I_k = I_{k-1} + (ts/ti) * (w - y)
    D_k = Tf/(Tf+ts) * D_{k-1} + td/(Tf+ts) * (d_in - d_in_prev),
          d_in = alpha*w - y,  Tf = deriv_delay_coeff * td
    u   = clamp(kp * (P + I_k + D_k), u_min, u_max)

PI is the ``td == 0`` special case (the derivative branch is skipped).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigurationError

ANTI_WINDUP_MODES = ("conditional-integration", "back-calculation", "none")


@dataclass(frozen=True)
class PidConfig:
    kp: float
    ti: Optional[float]  # None disables integral action
    td: float = 0.0
    deriv_delay_coeff: float = 0.1
    beta: float = 1.0
    alpha: float = 0.0
    ts: float = 0.1
    u_min: float = 0.0
    u_max: float = 100.0
    anti_windup: str = "conditional-integration"

    def __post_init__(self):
        def bad(name, why):
            raise ConfigurationError(f"PidConfig.{name} {why}, got {getattr(self, name)!r}")

        if not (math.isfinite(self.kp) and self.kp > 0):
            bad("kp", "must be > 0")
        if not (math.isfinite(self.ts) and self.ts > 0):
            bad("ts", "must be > 0")
        if not (math.isfinite(self.td) and self.td >= 0):
            bad("td", "must be >= 0")
        if self.ti is not None and not (math.isfinite(self.ti) and self.ti > 0):
            bad("ti", "must be > 0 (or None to disable integral action)")
        if not 0.0 <= self.beta <= 1.0:
            bad("beta", "must lie in [0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            bad("alpha", "must lie in [0, 1]")
        if self.td > 0 and not (math.isfinite(self.deriv_delay_coeff) and self.deriv_delay_coeff > 0):
            bad("deriv_delay_coeff", "must be > 0 when td > 0")
        if not self.u_min < self.u_max:
            bad("u_min", f"must be < u_max={self.u_max!r}")
        if self.anti_windup not in ANTI_WINDUP_MODES:
            bad("anti_windup", f"must be one of {ANTI_WINDUP_MODES}")

    @property
    def kind(self):
        return "PID" if self.td > 0 else "PI"


@dataclass(frozen=True)
class PidState:
    integral_sum: float = 0.0
    prev_deriv_input: float = 0.0
    deriv_state: float = 0.0
    last_saturated: bool = False
    # False until the first sample; the first sample seeds prev_deriv_input
    # so a fresh controller produces no derivative kick.
    primed: bool = False


def reset(state: Optional[PidState] = None) -> PidState:
    return PidState()


def make_pi(kp, ti, beta, ts, limits=(0.0, 100.0), deriv_delay_coeff=0.1,
            anti_windup="conditional-integration") -> PidConfig:
    u_min, u_max = limits
    return PidConfig(kp=kp, ti=ti, td=0.0, deriv_delay_coeff=deriv_delay_coeff, beta=beta,
                     alpha=0.0, ts=ts, u_min=u_min, u_max=u_max, anti_windup=anti_windup)


def pid_step(config: PidConfig, state: PidState, w: float, y: float):
    """One controller sample.  Returns ``(u, next_state)``."""
    c = config
    e = w - y
    p_term = c.beta * w - y

    d_in = c.alpha * w - y
    if c.td > 0.0:
        prev_in = state.prev_deriv_input if state.primed else d_in
        tf = c.deriv_delay_coeff * c.td
        deriv = (tf / (tf + c.ts)) * state.deriv_state + (c.td / (tf + c.ts)) * (d_in - prev_in)
    else:
        deriv = 0.0

    integral = state.integral_sum
    if c.ti is not None:
        step = (c.ts / c.ti) * e
        if c.anti_windup == "conditional-integration":
            # hold the integral while the output, before this sample's
            # accumulation, already sits beyond a limit the error pushes toward
            u_hold = c.kp * (p_term + integral + deriv)
            if not ((u_hold > c.u_max and e > 0) or (u_hold < c.u_min and e < 0)):
                integral += step
        else:
            integral += step

    u_raw = c.kp * (p_term + integral + deriv)
    u = min(max(u_raw, c.u_min), c.u_max)
    saturated = u != u_raw
    if saturated and c.ti is not None and c.anti_windup == "back-calculation":
        # tracking time Tt = ti
        integral += (c.ts / c.ti) * (u - u_raw) / c.kp

    return u, PidState(integral_sum=integral, prev_deriv_input=d_in, deriv_state=deriv,
                       last_saturated=saturated, primed=True)


def preload(config: PidConfig, w: float, y: float, u0: float) -> PidState:
    """Controller state whose first sample at ``(w, y)`` emits ``u0``.

    The integral is loaded with the offset the proportional term leaves;
    integral action is required unless ``u0`` is what P alone produces.
    """
    needed = u0 / config.kp - (config.beta * w - y) - (config.ts / config.ti) * (w - y) \
        if config.ti is not None else 0.0
    if config.ti is None and abs(config.kp * (config.beta * w - y) - u0) > 1e-9 * max(1.0, abs(u0)):
        raise ConfigurationError("cannot preload an initial output without integral action")
    return PidState(integral_sum=needed)
