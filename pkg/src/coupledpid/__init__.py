"""PI and PID loop simulation on coupled-tank level and flow plants."""

from .controller import PidConfig, PidState, make_pi, pid_step, preload, reset
from .errors import ConfigurationError, IdentificationError, NumericFailure, TuningError
from .metrics import StepMetrics, compare, error_integrals, step_metrics
from .scenarios import builtin_scenarios, parse_scenario, render_scenario
from .simloop import LoopScenario, SimTrace, run_closed_loop
from .tuning import UltimateParams, autotune, relay_identify, ziegler_nichols

__version__ = "0.1.0"
