import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupledpid import plant as pl
from coupledpid.errors import ConfigurationError, NumericFailure

levels = st.floats(min_value=0.0, max_value=0.5, allow_nan=False)


def test_quiescent_tank_has_zero_derivatives():
    assert pl.tank_derivatives(pl.TankState(), pl.level_plant(), 0.0, 0.0) == (0.0, 0.0, 0.0)


def test_equal_levels_give_no_coupling_flow():
    for coeff in (1e-5, 1e-4, 3e-3):
        assert pl.coupling_flow(0.2, 0.2, coeff) == 0.0


def test_coupling_flow_value():
    # 1e-4 * sqrt(0.1), evaluated independently
    assert pl.coupling_flow(0.2, 0.1, 1e-4) == pytest.approx(3.1622776601683795e-05, rel=1e-15)


@given(levels, levels, st.floats(min_value=1e-6, max_value=1e-2))
def test_coupling_antisymmetry(h1, h2, coeff):
    assert pl.coupling_flow(h1, h2, coeff) == -pl.coupling_flow(h2, h1, coeff)


def test_drain_law_is_continuous_at_low_head():
    eps = pl.HEAD_EPS
    assert pl.coupling_flow(eps, 0.0, 1e-4) == pytest.approx(pl.coupling_flow(eps * (1 - 1e-12), 0.0, 1e-4))
    assert pl.coupling_flow(eps / 4, 0.0, 1e-4) == pytest.approx(1e-4 * math.sqrt(eps) / 4)


def test_nearly_empty_tank_does_not_gain_volume():
    p = pl.level_plant()
    state = pl.TankState(h1=1.4861716884350316e-96, h2=0.0, h_sensor=1.4861716884350316e-96)
    nxt = pl.step_plant(state, p, 0.0, 0.0, 0.01, substeps=10)
    assert pl.stored_volume(nxt, p) <= pl.stored_volume(state, p)
    assert not nxt.clamped


def test_tank_params_reject_nonpositive():
    with pytest.raises(ConfigurationError, match="area_1"):
        pl.TankParams(area_1=0.0)
    with pytest.raises(ConfigurationError, match="pump_tau"):
        pl.TankParams(pump_tau=-1.0)


def test_tank_derivatives_reject_non_finite_state():
    with pytest.raises(NumericFailure):
        pl.tank_derivatives(pl.TankState(h1=math.nan), pl.level_plant(), 50.0)


def test_flow_equilibrium_derivative():
    state = pl.FlowPlantState(actuator_pos=0.5, q=0.5 * 1.5e-4)
    dpos, dq = pl.flow_derivatives(state, pl.pump_plant(), 50.0)
    assert dpos == 0.0 and dq == 0.0


def test_full_open_linear_flow():
    p = pl.pump_plant()
    state, _ = pl.equilibrium(p, 100.0)
    assert state.actuator_pos == 1.0
    assert state.q == p.q_max


def test_equal_percentage_characteristic():
    p = pl.FlowPlantParams(kind="valve", valve_char="equal-percentage", rangeability=30.0)
    assert pl.valve_characteristic(0.5, p) == pytest.approx(0.18257418583505536, rel=1e-15)
    assert pl.valve_characteristic(0.0, p) == 0.0
    assert pl.valve_characteristic(1.0, p) == 1.0


def test_equal_percentage_needs_rangeability_above_one():
    with pytest.raises(ConfigurationError, match="rangeability"):
        pl.FlowPlantParams(valve_char="equal-percentage", rangeability=1.0)


@given(st.floats(0.0, 1.0), st.floats(0.0, 100.0), st.floats(-0.5, 0.5))
def test_flow_stays_within_range(pos, u, d):
    p = pl.FlowPlantParams(kind="valve", valve_char="equal-percentage")
    state = pl.FlowPlantState(actuator_pos=pos, q=pl._delivered_flow(pos, p, d))
    nxt = pl.step_plant(state, p, u, d, 0.01, substeps=10)
    assert 0.0 <= nxt.actuator_pos <= 1.0
    assert 0.0 <= nxt.q <= p.q_max * (1.0 + d) + 1e-18


@pytest.mark.parametrize("params", [pl.level_plant(), pl.pump_plant(), pl.valve_plant(),
                                    pl.LinearParams(kind="first-order", gain=2.0, u_bias=10.0)])
@pytest.mark.parametrize("pv", [40.0, 0.01])
def test_equilibrium_is_fixed_point(params, pv):
    state, u = pl.equilibrium(params, pv)
    nxt = pl.step_plant(state, params, u, 0.0, 0.01, substeps=100)
    for name in ("h1", "h2", "q_pump", "actuator_pos", "q", "y"):
        if hasattr(state, name):
            a, b = getattr(state, name), getattr(nxt, name)
            assert abs(b - a) <= 1e-12 * abs(a), name
    assert pl.clean_pv(state, params) == pytest.approx(pv, rel=1e-12)


def test_pure_draining_lowers_h2():
    p = pl.level_plant()
    state = pl.TankState(h1=0.2, h2=0.3, h_sensor=0.2)
    for _ in range(200):
        nxt = pl.step_plant(state, p, 0.0, 0.0, 0.01)
        assert nxt.h2 <= state.h2
        state = nxt


@given(levels, levels, st.floats(0.0, 1e-4))
@settings(max_examples=200, deadline=None)
def test_stored_volume_never_rises_without_inflow(h1, h2, q):
    p = pl.level_plant()
    state = pl.TankState(h1=h1, h2=h2, q_pump=0.0, h_sensor=h1)
    for _ in range(20):
        nxt = pl.step_plant(state, p, 0.0, 0.0, 0.01, substeps=10)
        assert pl.stored_volume(nxt, p) <= pl.stored_volume(state, p) + 1e-15
        state = nxt


def test_rk4_matches_fine_reference():
    # DOP853 at rtol 1e-13 on the same equations, 10 s at u=50 from (0.2, 0.1, 0)
    p = pl.level_plant()
    state = pl.TankState(h1=0.2, h2=0.1, q_pump=0.0, h_sensor=0.2)
    for _ in range(1000):
        state = pl.step_plant(state, p, 50.0, 0.0, 0.01)
    assert abs(state.h1 - 0.20416791707971552) < 1e-4
    assert abs(state.h2 - 0.1001000220912103) < 1e-4
    assert state.q_pump == pytest.approx(5.9997276004205325e-05, rel=1e-6)


def test_integration_converges_at_fourth_order():
    p = pl.level_plant()
    start = pl.TankState(h1=0.3, h2=0.05, q_pump=0.0, h_sensor=0.3)

    def run(dt):
        s = start
        for _ in range(int(round(2.0 / dt))):
            s = pl.step_plant(s, p, 80.0, 0.0, dt)
        return np.array([s.h1, s.h2, s.q_pump])

    a, b, c = run(0.1), run(0.05), run(0.025)
    assert np.all(np.abs(c - b) < np.abs(b - a) / 4.0 + 1e-15)


def test_mass_balance_without_clamps():
    p = pl.level_plant()
    state, _ = pl.equilibrium(p, 30.0)
    v0 = pl.stored_volume(state, p)
    for k in range(2000):
        state = pl.step_plant(state, p, 40.0 + 20.0 * math.sin(0.01 * k), 5e-6, 0.01, substeps=10)
        assert not state.clamped
    balance = pl.stored_volume(state, p) - v0 - (state.inflow_volume - state.outflow_volume)
    assert abs(balance) <= 1e-6 * (state.inflow_volume + state.outflow_volume)


def test_overflow_is_clamped_and_flagged():
    p = pl.level_plant()
    state = pl.TankState(h1=0.499, h2=0.499, q_pump=1.2e-4, h_sensor=0.499)
    state = pl.step_plant(state, p, 100.0, 0.0, 0.1, substeps=10)
    assert state.clamped
    assert state.h1 == p.h_max


def test_step_plant_is_deterministic():
    p = pl.level_plant()
    s = pl.TankState(h1=0.1, h2=0.2, q_pump=1e-5, h_sensor=0.05)
    assert pl.step_plant(s, p, 33.0, 1e-6, 0.01, 7) == pl.step_plant(s, p, 33.0, 1e-6, 0.01, 7)


def test_non_finite_integration_raises_with_state():
    p = pl.level_plant()
    state = pl.TankState(h1=0.1, h2=0.1, q_pump=0.0, h_sensor=0.1)
    with pytest.raises(NumericFailure) as info:
        pl.step_plant(state, p, math.inf, 0.0, 0.01)
    assert info.value.state == state


def test_measure_noise_free():
    rng = np.random.default_rng(0)
    assert pl.measure(0.25, 0.5, 0.0, rng) == 50.0
    assert pl.measure(0.0, 0.5, 0.0, rng) == 0.0


def test_measure_clamps_to_span():
    rng = np.random.default_rng(1)
    values = [pl.measure(0.0, 0.5, 5.0, rng) for _ in range(1000)]
    assert min(values) == 0.0 and max(values) <= 100.0


def test_measure_noise_mean():
    rng = np.random.default_rng(1234)
    values = np.array([pl.measure(0.25, 0.5, 1.0, rng) for _ in range(100_000)])
    assert abs(values.mean() - 50.0) < 0.02


def test_measure_reproducible_per_seed():
    a = [pl.measure(0.1, 0.5, 1.0, np.random.default_rng(9)) for _ in range(3)]
    assert a[0] == a[1] == a[2]


def test_sensor_lag_tracks_level():
    p = pl.level_plant()
    state = pl.TankState(h1=0.2, h2=0.1, q_pump=0.0, h_sensor=0.0)
    state = pl.step_plant(state, p, 0.0, 0.0, 0.01, substeps=500)
    assert abs(state.h_sensor - state.h1) < 0.01 * state.h1


def test_disturbance_units():
    assert pl.disturbance_input(pl.level_plant(), -10.0) == pytest.approx(-1.2e-5)
    assert pl.disturbance_input(pl.pump_plant(), -10.0) == pytest.approx(-0.1)
    assert pl.disturbance_input(pl.LinearParams(), 3.0) == 3.0


def test_equilibrium_outside_range_rejected():
    with pytest.raises(ConfigurationError):
        pl.equilibrium(pl.level_plant(), 150.0)
    with pytest.raises(ConfigurationError):
        pl.equilibrium(replace(pl.pump_plant()), 120.0)
