"""Scenario files and the built-in PI/PID fixtures.

A scenario file is plain text with ``[plant]``, ``[controller]``,
``[profile]`` and ``[run]`` sections holding ``key = value`` lines; ``#``
starts a comment.  Example::

    [plant]
    type = level            # level | pump | valve | first-order | integrator
    initial_pv = 20         # or explicit init_* state keys

    [controller]
    kp = 124.468
    ti = 7.220              # "none" disables integral action
    beta = 0.8
    initial_output = auto   # holding drive at the initial state; or a number / none

    [profile]
    setpoint = 0:20, 1:60   # piecewise-constant time:value pairs
    disturbance = 0:0, 60:-10, 70:0
    noise_std = 0

    [run]
    name = my-run
    duration = 120
    seed = 0
    substeps_per_sample = 10

Omitted keys take the values of the dataclass defaults (plant defaults come
from :func:`plant.level_plant`, :func:`plant.pump_plant`,
:func:`plant.valve_plant`).  Only ``[plant] type``, ``[controller] kp`` and
``[controller] ti`` are required.
"""

from __future__ import annotations

import re
from dataclasses import fields, replace

from . import plant as pl
from .controller import PidConfig, make_pi
from .errors import ConfigurationError
from .simloop import LoopScenario

SECTIONS = ("plant", "controller", "profile", "run")

DEFAULT_SETPOINT = ((0.0, 20.0), (1.0, 60.0))
DEFAULT_DISTURBANCE = ((0.0, 0.0), (60.0, -10.0), (70.0, 0.0))
DEFAULT_DURATION = 120.0

_PLANT_TYPES = {
    "level": (pl.level_plant, pl.TankState),
    "pump": (pl.pump_plant, pl.FlowPlantState),
    "valve": (pl.valve_plant, pl.FlowPlantState),
    "first-order": (lambda: pl.LinearParams(kind="first-order"), pl.LinearState),
    "integrator": (lambda: pl.LinearParams(kind="integrator"), pl.LinearState),
}
_STRING_FIELDS = {"valve_char", "anti_windup", "name"}


class ScenarioFileError(ConfigurationError):
    def __init__(self, message, line=None, key=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line
        self.key = key


# --------------------------------------------------------------------------
# parsing


def _lex(text):
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_]+)\s*\]", line)
        if m:
            current = m.group(1).lower()
            if current not in SECTIONS:
                raise ScenarioFileError(f"unknown section [{current}]", lineno)
            if current in sections:
                raise ScenarioFileError(f"duplicate section [{current}]", lineno)
            sections[current] = {}
            continue
        if current is None:
            raise ScenarioFileError("key outside of any section", lineno)
        key, sep, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if not sep or not re.fullmatch(r"[a-z_][a-z0-9_]*", key) or not value:
            raise ScenarioFileError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key in sections[current]:
            raise ScenarioFileError(f"duplicate key {key!r}", lineno, key)
        sections[current][key] = (value, lineno)
    return sections


def _number(value, lineno, key, kind=float):
    try:
        if kind is int:
            return int(value)
        return float(value)
    except ValueError:
        raise ScenarioFileError(f"{key}: cannot parse {value!r} as {kind.__name__}", lineno, key) from None


def _schedule(value, lineno, key):
    pairs = []
    for item in value.split(","):
        t, sep, v = item.partition(":")
        if not sep:
            raise ScenarioFileError(f"{key}: expected 'time:value' pairs, got {item.strip()!r}", lineno, key)
        pairs.append((_number(t.strip(), lineno, key), _number(v.strip(), lineno, key)))
    return tuple(pairs)


def _check_keys(section, entries, allowed):
    for key, (_, lineno) in entries.items():
        if key not in allowed:
            raise ScenarioFileError(f"unknown key {key!r} in [{section}]", lineno, key)


def _invariant_error(section, entries, exc):
    # point at the offending key when the message names one
    for key, (_, lineno) in entries.items():
        if re.search(rf"\b{re.escape(key)}\b", str(exc)):
            return ScenarioFileError(f"[{section}] {exc}", lineno, key)
    return ScenarioFileError(f"[{section}] {exc}")


def _build_plant(entries):
    if "type" not in entries:
        raise ScenarioFileError("[plant] missing required key 'type'")
    ptype, type_line = entries["type"]
    if ptype not in _PLANT_TYPES:
        raise ScenarioFileError(f"unknown plant type {ptype!r}", type_line, "type")
    factory, state_cls = _PLANT_TYPES[ptype]
    defaults = factory()
    param_keys = [f.name for f in fields(defaults) if f.name != "kind"]
    state_keys = [f.name for f in fields(state_cls) if f.name != "clamped"]
    allowed = {"type", "initial_pv"} | set(param_keys) | {f"init_{k}" for k in state_keys}
    _check_keys("plant", entries, allowed)

    values = {}
    for key in param_keys:
        if key in entries:
            value, lineno = entries[key]
            values[key] = value if key in _STRING_FIELDS else _number(value, lineno, key)
    try:
        params = replace(defaults, **values)
    except ConfigurationError as exc:
        raise _invariant_error("plant", entries, exc) from None

    init = {k: _number(*entries[f"init_{k}"], f"init_{k}") for k in state_keys if f"init_{k}" in entries}
    initial_pv = None
    if "initial_pv" in entries:
        if init:
            raise ScenarioFileError("give either initial_pv or init_* keys, not both",
                                    entries["initial_pv"][1], "initial_pv")
        initial_pv = _number(*entries["initial_pv"], "initial_pv")
    return params, (state_cls(**init) if init else None), initial_pv


def _build_controller(entries):
    keys = [f.name for f in fields(PidConfig)]
    _check_keys("controller", entries, set(keys) | {"initial_output"})
    for required in ("kp", "ti"):
        if required not in entries:
            raise ScenarioFileError(f"[controller] missing required key {required!r}")
    values = {}
    for key in keys:
        if key not in entries:
            continue
        value, lineno = entries[key]
        if key in _STRING_FIELDS:
            values[key] = value
        elif key == "ti" and value.lower() == "none":
            values[key] = None
        else:
            values[key] = _number(value, lineno, key)
    try:
        config = PidConfig(**values)
    except ConfigurationError as exc:
        raise _invariant_error("controller", entries, exc) from None
    initial_output = entries.get("initial_output", ("auto", None))[0].lower()
    if initial_output not in ("auto", "none"):
        initial_output = _number(initial_output, entries["initial_output"][1], "initial_output")
    return config, initial_output


def parse_scenario(text: str, name: str = "scenario") -> LoopScenario:
    """Parse scenario-file text into a validated :class:`LoopScenario`."""
    sections = _lex(text)
    for required in ("plant", "controller"):
        if required not in sections:
            raise ScenarioFileError(f"missing section [{required}]")
    params, state, initial_pv = _build_plant(sections["plant"])
    config, initial_output = _build_controller(sections["controller"])

    prof = sections.get("profile", {})
    _check_keys("profile", prof, {"setpoint", "disturbance", "noise_std"})
    setpoint = _schedule(*prof["setpoint"], "setpoint") if "setpoint" in prof else DEFAULT_SETPOINT
    disturbance = _schedule(*prof["disturbance"], "disturbance") if "disturbance" in prof else ((0.0, 0.0),)
    noise_std = _number(*prof["noise_std"], "noise_std") if "noise_std" in prof else 0.0

    run = sections.get("run", {})
    _check_keys("run", run, {"name", "duration", "seed", "substeps_per_sample"})
    run_name = run["name"][0] if "name" in run else name
    duration = _number(*run["duration"], "duration") if "duration" in run else DEFAULT_DURATION
    seed = _number(*run["seed"], "seed", kind=int) if "seed" in run else 0
    substeps = _number(*run["substeps_per_sample"], "substeps_per_sample", kind=int) \
        if "substeps_per_sample" in run else 10

    try:
        if state is None:
            pv0 = setpoint[0][1] if initial_pv is None else initial_pv
            state, u_hold = pl.equilibrium(params, pv0)
        else:
            u_hold = None
        if initial_output == "auto":
            if u_hold is None:
                u_hold = pl.equilibrium(params, pl.clean_pv(state, params))[1]
            initial_output = min(max(u_hold, config.u_min), config.u_max)
        elif initial_output == "none":
            initial_output = None
        return LoopScenario(plant=params, initial_state=state, controller=config,
                            setpoint_profile=setpoint, disturbance_profile=disturbance,
                            noise_std=noise_std, duration=duration, seed=seed,
                            substeps_per_sample=substeps, name=run_name, initial_output=initial_output)
    except ConfigurationError as exc:
        if isinstance(exc, ScenarioFileError):
            raise
        raise ScenarioFileError(f"invalid scenario: {exc}") from None


def load_scenario(path) -> LoopScenario:
    from pathlib import Path

    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), name=path.stem)


# --------------------------------------------------------------------------
# rendering


def _plant_type(params):
    if isinstance(params, pl.TankParams):
        return "level"
    return params.kind


def _fmt(value):
    if value is None:
        return "none"
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not part of the file format")
    return repr(value)


def _fmt_schedule(schedule):
    return ", ".join(f"{t!r}:{v!r}" for t, v in schedule)


def render_scenario(scenario: LoopScenario) -> str:
    """Scenario-file text that parses back to an equal scenario."""
    sc = scenario
    lines = ["[plant]", f"type = {_plant_type(sc.plant)}"]
    for f in fields(sc.plant):
        if f.name != "kind":
            lines.append(f"{f.name} = {_fmt(getattr(sc.plant, f.name))}")
    for f in fields(sc.initial_state):
        if f.name != "clamped":
            lines.append(f"init_{f.name} = {_fmt(getattr(sc.initial_state, f.name))}")
    lines += ["", "[controller]"]
    for f in fields(sc.controller):
        lines.append(f"{f.name} = {_fmt(getattr(sc.controller, f.name))}")
    lines.append(f"initial_output = {_fmt(sc.initial_output)}")
    lines += ["", "[profile]",
              f"setpoint = {_fmt_schedule(sc.setpoint_profile)}",
              f"disturbance = {_fmt_schedule(sc.disturbance_profile)}",
              f"noise_std = {_fmt(sc.noise_std)}",
              "", "[run]",
              f"name = {sc.name}",
              f"duration = {_fmt(sc.duration)}",
              f"seed = {sc.seed}",
              f"substeps_per_sample = {sc.substeps_per_sample}"]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# built-in fixtures

# Published PI/PID parameter sets, verbatim.
FIXTURE_PARAMETERS = {
    "level-pi": dict(kp=124.468, ti=7.220, td=0.0, deriv_delay_coeff=0.1, beta=0.8, alpha=0.0, ts=0.0999998),
    "level-pid": dict(kp=516.209, ti=1.047, td=0.2661543, deriv_delay_coeff=0.1, beta=0.2514394, alpha=0.0,
                      ts=0.099998),
    "pump-pi": dict(kp=6.799, ti=3.174, td=0.0, deriv_delay_coeff=0.1, beta=0.8, alpha=0.0, ts=0.0999998),
    "pump-pid": dict(kp=1.049, ti=3.688, td=4.871, deriv_delay_coeff=0.1, beta=1.0, alpha=0.0, ts=0.1000025),
    "valve-pi": dict(kp=15.326, ti=2.489, td=0.0, deriv_delay_coeff=0.1, beta=0.8, alpha=0.0, ts=0.0999978),
    "valve-pid": dict(kp=6.647, ti=7.981, td=1.869, deriv_delay_coeff=0.1, beta=0.971, alpha=0.0, ts=0.0999998),
}

_FIXTURE_PLANTS = {"level": pl.level_plant, "pump": pl.pump_plant, "valve": pl.valve_plant}


def fixture_config(name: str) -> PidConfig:
    p = FIXTURE_PARAMETERS[name]
    if p["td"] == 0.0:
        return make_pi(p["kp"], p["ti"], p["beta"], p["ts"], deriv_delay_coeff=p["deriv_delay_coeff"])
    return PidConfig(**p)


def builtin_scenarios():
    """The six table fixtures on their default plants.

    Each starts at rest at 20 %, steps to 60 % at t = 1 s and sees a -10 %
    actuator-span disturbance on [60 s, 70 s] over a 120 s run.
    """
    out = {}
    for name in FIXTURE_PARAMETERS:
        params = _FIXTURE_PLANTS[name.split("-")[0]]()
        state, u_hold = pl.equilibrium(params, DEFAULT_SETPOINT[0][1])
        out[name] = LoopScenario(plant=params, initial_state=state, controller=fixture_config(name),
                                 setpoint_profile=DEFAULT_SETPOINT, disturbance_profile=DEFAULT_DISTURBANCE,
                                 noise_std=0.0, duration=DEFAULT_DURATION, seed=0, substeps_per_sample=10,
                                 name=name, initial_output=u_hold)
    return out


def resolve_scenario(name_or_path: str) -> LoopScenario:
    """A built-in fixture by name, otherwise a scenario file path."""
    builtins = builtin_scenarios()
    if name_or_path in builtins:
        return builtins[name_or_path]
    from pathlib import Path

    if not Path(name_or_path).is_file():
        raise ConfigurationError(
            f"{name_or_path!r} is neither a built-in scenario ({', '.join(builtins)}) nor a file")
    return load_scenario(name_or_path)


def step_window(scenario: LoopScenario):
    """``(window, step)`` for the last setpoint step of a scenario.

    The window runs from the step to the first disturbance change after it,
    or to the end of the run.
    """
    sp = scenario.setpoint_profile
    if len(sp) < 2:
        raise ConfigurationError(f"scenario {scenario.name!r} has no setpoint step")
    onset = sp[-1][0]
    end = scenario.duration
    for t, _ in scenario.disturbance_profile:
        if t > onset:
            end = t
            break
    return (onset, end), (sp[-2][1], sp[-1][1])
