import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hvac_incentives.dynamics import (
    BuildingModel,
    DisturbanceTrace,
    HvacConfiguration,
    control_law,
    energy_step,
    satisfaction,
    simulate_batch,
    simulate_period,
    step,
)
from hvac_incentives.errors import ModelError, SimulationDiverged
from hvac_incentives.serialization import load_configuration, load_disturbance

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def model_of(A, B, C, t_s=(12.0, 14.0, 16.0), a=1.0, b=1.0, c=1.0, band=0.0, K=1):
    A, B, C = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (A, B, C))
    n = A.shape[0]
    return BuildingModel(A=np.stack([A] * 3), B=np.stack([B] * 3), C=np.stack([C] * 3), t_s=t_s,
                         a=a, b=b, c=c, comfort_band=np.full(n, band), dt_steps=K)


def cfg_of(n, F_min=0.0, F_max=1.0, T_d=22.0, mode=1, K_F=1.0, K_R=1.0, R_max=1.0):
    return HvacConfiguration(F_min=np.full(n, F_min), F_max=np.full(n, F_max), T_d=np.full(n, T_d),
                             mode=mode, K_F=K_F, K_R=K_R, R_max=np.full(n, R_max))


def loop_simulation(model, cfg, dist, T0):
    """Plain-Python re-implementation used as an independent oracle."""
    n, m = model.n, cfg.mode - 1
    T = [float(x) for x in T0]
    energy, excess = 0.0, 0.0
    for k in range(dist.K):
        F = [min(max(cfg.F_min[i] + cfg.K_F * (T[i] - cfg.T_d[i]), cfg.F_min[i]), cfg.F_max[i]) for i in range(n)]
        R = [min(max(cfg.K_R * (cfg.T_d[i] - T[i]), 0.0), cfg.R_max[i]) for i in range(n)]
        sF, sR = sum(F), sum(R)
        energy += model.a * sF**3 + model.b * (model.t_s[m] - dist.o[k]) * sF + model.c * sR
        T = [sum(model.A[m][i][j] * T[j] for j in range(n)) + sum(model.B[m][i][j] * F[j] for j in range(n))
             + sum(model.C[m][i][j] * R[j] for j in range(n)) + dist.Q[k][i] for i in range(n)]
        excess += sum(max(abs(T[i] - cfg.T_d[i]) - model.comfort_band[i], 0.0) for i in range(n))
    return 1.0 - excess / (n * dist.K), energy


# --- control law ----------------------------------------------------------

def test_control_at_setpoint_gives_minimum_flow_and_no_reheat():
    cfg = cfg_of(3, F_min=0.4, F_max=2.0)
    F, R = control_law(cfg.T_d, cfg)
    assert np.array_equal(F, cfg.F_min) and np.array_equal(R, np.zeros(3))


@pytest.mark.parametrize("K_F", [0.1, 1.0, 7.5])
def test_control_saturates_high(K_F):
    cfg = cfg_of(2, F_min=0.5, F_max=1.5, K_F=K_F)
    F, _ = control_law(cfg.T_d + 10 * (cfg.F_max - cfg.F_min) / K_F, cfg)
    assert np.array_equal(F, cfg.F_max)


def test_control_hand_example():
    cfg = HvacConfiguration(F_min=[1, 1], F_max=[3, 3], T_d=[20, 20], mode=1, K_F=1, K_R=0, R_max=[0, 0])
    F, _ = control_law([21, 25], cfg)
    assert F.tolist() == [2.0, 3.0]


def test_control_dimension_mismatch():
    with pytest.raises(ModelError):
        control_law([1.0, 2.0, 3.0], cfg_of(2))


@given(st.lists(finite, min_size=3, max_size=3), st.floats(0, 50), st.floats(0, 50))
def test_control_box_constraints_hold_for_any_temperature(T, K_F, K_R):
    cfg = HvacConfiguration(F_min=[0.2, 0.0, 1.0], F_max=[0.9, 3.0, 1.0], T_d=[21, 22, 23], mode=2,
                            K_F=K_F, K_R=K_R, R_max=[0.0, 1.0, 5.0])
    F, R = control_law(T, cfg)
    assert np.all(cfg.F_min <= F) and np.all(F <= cfg.F_max)
    assert np.all(R >= 0) and np.all(R <= cfg.R_max)


# --- step -----------------------------------------------------------------

def test_step_identity_dynamics():
    model = model_of(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)))
    T = np.array([19.5, 23.25])
    assert np.array_equal(step(T, cfg_of(2), model, [0, 0]), T)


def test_step_pure_load():
    model = model_of(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))
    assert step([30.0, 10.0], cfg_of(2), model, [1.5, -2.0]).tolist() == [1.5, -2.0]


def test_step_one_zone_hand_arithmetic():
    model = model_of([[0.9]], [[-0.1]], [[0.05]])
    # clamps pin F = 2; with T_d = 23 and K_R = 1 the reheat is exactly 1
    cfg = HvacConfiguration(F_min=[2], F_max=[2], T_d=[22], mode=1, K_F=0, K_R=0, R_max=[1])
    cfg_r = HvacConfiguration(F_min=[2], F_max=[2], T_d=[23], mode=1, K_F=0, K_R=1, R_max=[1])
    assert control_law([22.0], cfg_r)[1].tolist() == [1.0]
    assert step([22.0], cfg_r, model, [2.0])[0] == pytest.approx(21.65, abs=1e-12)
    assert step([22.0], cfg, model, [2.0])[0] == pytest.approx(21.6, abs=1e-12)


# --- energy ---------------------------------------------------------------

def test_energy_zero_without_flow_or_reheat():
    model = model_of([[0.5]], [[0.0]], [[0.0]])
    assert energy_step([0.0], [0.0], 1, 30.0, model) == 0.0


def test_energy_fan_term_alone():
    model = model_of([[0.5]], [[0.0]], [[0.0]], a=1.0, b=1e-300, c=1e-300, t_s=(5.0, 5.0, 5.0))
    assert energy_step([1.0, 1.0], [0.0, 0.0], 1, 5.0, model) == 8.0


def test_energy_chiller_sign_as_written():
    model = model_of([[0.5]], [[0.0]], [[0.0]], a=1.0, b=2.0, c=3.0, t_s=(12.0, 12.0, 12.0))
    assert energy_step([1.0], [1.0], 2, 20.0, model) == -12.0


@given(st.floats(0, 10), st.floats(0, 10), st.floats(0.01, 5), st.floats(-20, 20))
def test_energy_increasing_in_reheat_and_flow(sF, sR, d, o):
    model = model_of([[0.5]], [[0.0]], [[0.0]], a=0.3, b=0.7, c=1.1, t_s=(20.0, 20.0, 20.0))
    base = energy_step([sF], [sR], 1, o, model)
    assert energy_step([sF], [sR + d], 1, o, model) > base
    if o <= 20.0:
        assert energy_step([sF + d], [sR], 1, o, model) > base


def test_energy_nonnegative_when_supply_not_colder_than_outdoors():
    rng = np.random.default_rng(1)
    model = model_of([[0.5]], [[0.0]], [[0.0]], a=0.2, b=0.9, c=0.4, t_s=(15.0, 18.0, 21.0))
    for _ in range(500):
        mode = int(rng.integers(1, 4))
        o = model.t_s[mode - 1] - rng.uniform(0, 20)
        assert energy_step(rng.uniform(0, 3, 4), rng.uniform(0, 3, 4), mode, o, model) >= 0


# --- satisfaction ---------------------------------------------------------

def test_satisfaction_inside_band_is_one():
    trace = np.array([[22.25, 21.875], [21.75, 22.375]])
    assert satisfaction(trace, [22, 22], [0.3, 0.4]) == 1.0


def test_satisfaction_single_term():
    assert satisfaction([[22.0 + 0.25 + 0.5]], [22.0], [0.25]) == 0.5


def test_satisfaction_hand_sum():
    trace = np.array([[20.0, 21.0], [21.0, 20.0]])
    assert satisfaction(trace, [20.0, 20.0], [0.0, 0.0]) == 0.5


def test_satisfaction_empty_trace():
    with pytest.raises(ValueError):
        satisfaction(np.empty((0, 2)), [20, 20], [0, 0])


@given(st.integers(0, 3), st.integers(0, 2), st.floats(0, 5), st.floats(1e-3, 5))
def test_satisfaction_nonincreasing_in_deviation(k, i, dev, extra):
    rng = np.random.default_rng(k * 7 + i)
    trace = 22 + rng.normal(0, 1, (4, 3))
    T_d, band = np.full(3, 22.0), np.full(3, 0.2)
    a, b = trace.copy(), trace.copy()
    sign = 1 if rng.random() < 0.5 else -1
    a[k, i] = 22 + sign * dev
    b[k, i] = 22 + sign * (dev + extra)
    assert satisfaction(b, T_d, band) <= satisfaction(a, T_d, band)


def test_satisfaction_bounded_above_by_one():
    rng = np.random.default_rng(5)
    for _ in range(50):
        assert satisfaction(rng.normal(22, 3, (6, 4)), np.full(4, 22.0), rng.uniform(0, 1, 4)) <= 1.0


# --- simulate_period ------------------------------------------------------

def test_equilibrium_at_setpoint():
    K, n = 6, 2
    model = model_of(np.eye(n), np.zeros((n, n)), np.zeros((n, n)), K=K)
    cfg = cfg_of(n, F_min=0.3, F_max=1.0, mode=3)
    o = np.linspace(10, 30, K)
    out = simulate_period(model, cfg, DisturbanceTrace(o=o, Q=np.zeros((K, n))))
    assert out.S == 1.0
    expected = sum(energy_step(cfg.F_min, np.zeros(n), 3, ok, model) for ok in o)
    assert out.E == pytest.approx(expected, rel=1e-14)


def test_hvac_off_uses_no_energy():
    K, n = 5, 3
    rng = np.random.default_rng(3)
    model = model_of(0.3 * np.eye(n), rng.normal(size=(n, n)), rng.normal(size=(n, n)), K=K)
    cfg = cfg_of(n, F_min=0.0, F_max=0.0, R_max=0.0)
    out = simulate_period(model, cfg, DisturbanceTrace(o=rng.uniform(0, 30, K), Q=rng.uniform(5, 10, (K, n))))
    assert out.E == 0.0


def _two_zone_instance(seed=11, K=24):
    rng = np.random.default_rng(seed)
    A = 0.6 * np.eye(2) + 0.05
    model = BuildingModel(A=np.stack([A] * 3), B=np.stack([-0.2 * np.eye(2)] * 3),
                          C=np.stack([0.15 * np.eye(2)] * 3), t_s=[13, 15, 17], a=0.01, b=0.05, c=0.2,
                          comfort_band=[0.5, 0.5], dt_steps=K)
    cfg = HvacConfiguration(F_min=[0.5, 0.4], F_max=[2.0, 2.5], T_d=[22, 22], mode=2, K_F=0.8, K_R=0.6,
                            R_max=[1.5, 1.5])
    dist = DisturbanceTrace(o=rng.uniform(5, 30, K), Q=rng.uniform(7, 9, (K, 2)))
    return model, cfg, dist


def test_two_zone_matches_independent_loop():
    model, cfg, dist = _two_zone_instance()
    out = simulate_period(model, cfg, dist)
    S, E = loop_simulation(model, cfg, dist, cfg.T_d)
    assert out.S == pytest.approx(S, rel=1e-12, abs=1e-12)
    assert out.E == pytest.approx(E, rel=1e-12, abs=1e-12)


def test_two_zone_golden_value():
    model, cfg, dist = _two_zone_instance()
    out = simulate_period(model, cfg, dist)
    assert (out.S, out.E) == (GOLDEN_TWO_ZONE_S, GOLDEN_TWO_ZONE_E)


# Frozen from the first run, after the loop-oracle comparison above passed.
GOLDEN_TWO_ZONE_S = -0.9984749646950342
GOLDEN_TWO_ZONE_E = 5.048750142529294


def test_shipped_example_golden_value(building, data_dir):
    cfg = load_configuration(data_dir / "configuration.json")
    dist = load_disturbance(data_dir / "disturbance.json")
    out = simulate_period(building, cfg, dist)
    assert (out.S, out.E) == (0.5543403179893949, 61.132738080763986)
    S, E = loop_simulation(building, cfg, dist, cfg.T_d)
    assert out.S == pytest.approx(S, abs=1e-12) and out.E == pytest.approx(E, rel=1e-12)


def test_simulation_is_deterministic():
    model, cfg, dist = _two_zone_instance(seed=4)
    a, b = simulate_period(model, cfg, dist), simulate_period(model, cfg, dist)
    assert (a.S, a.E) == (b.S, b.E) and np.array_equal(a.trace, b.trace)


def test_batch_equals_single_runs_bitwise():
    runs = [_two_zone_instance(seed=s) for s in range(5)]
    model, cfg, _ = runs[0]
    o = np.stack([r[2].o for r in runs])
    Q = np.stack([r[2].Q for r in runs])
    rep = lambda v: np.tile(v, (5, 1))
    S, E, div, _ = simulate_batch(model, rep(cfg.F_min), rep(cfg.F_max), rep(cfg.T_d), np.full(5, cfg.mode),
                                  cfg.K_F, cfg.K_R, rep(cfg.R_max), o, Q, rep(cfg.T_d))
    for k, (_, _, dist) in enumerate(runs):
        single = simulate_period(model, cfg, dist)
        assert (S[k], E[k]) == (single.S, single.E)
    assert np.all(div == -1)


def test_divergence_names_the_step():
    K = 2000
    model = model_of(2.0 * np.eye(1), [[0.0]], [[0.0]], K=K)
    with pytest.raises(SimulationDiverged) as err:
        simulate_period(model, cfg_of(1), DisturbanceTrace(o=np.zeros(K), Q=np.ones((K, 1))))
    assert err.value.step > 0 and str(err.value.step) in str(err.value)


def test_initial_state_override():
    model, cfg, dist = _two_zone_instance()
    T0 = [25.0, 19.0]
    out = simulate_period(model, cfg, dist, T_0=T0)
    S, E = loop_simulation(model, cfg, dist, T0)
    assert out.E == pytest.approx(E, rel=1e-12)


@pytest.mark.parametrize("kwargs, msg", [
    (dict(a=0.0), "positive"),
    (dict(band=-1.0), "nonnegative"),
])
def test_model_validation(kwargs, msg):
    with pytest.raises(ModelError, match=msg):
        model_of(np.eye(2), np.eye(2), np.eye(2), **kwargs)


def test_model_rejects_ragged_matrices():
    with pytest.raises(ModelError):
        BuildingModel(A=np.zeros((3, 2, 2)), B=np.zeros((3, 3, 3)), C=np.zeros((3, 2, 2)), t_s=[1, 2, 3],
                      a=1, b=1, c=1, comfort_band=[0, 0], dt_steps=1)


def test_configuration_validation():
    with pytest.raises(ModelError):
        cfg_of(2, F_min=2.0, F_max=1.0)
    with pytest.raises(ModelError):
        cfg_of(2, R_max=-1.0)
    with pytest.raises(ModelError):
        cfg_of(2, mode=4)


def test_disturbance_validation():
    with pytest.raises(ModelError):
        DisturbanceTrace(o=np.zeros(3), Q=np.zeros((4, 2)))


def test_shipped_model_is_stable(building):
    for m in (1, 2, 3):
        assert building.spectral_radius(m) < 1
    assert math.isclose(building.spectral_radius(1), 0.632, abs_tol=1e-3)
