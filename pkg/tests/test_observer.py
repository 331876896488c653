import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from active_handover.observer import (
    MomentumObserver,
    ObserverState,
    RigidBodyModel,
    extract_interaction_force,
    observer_step,
)

BODY = RigidBodyModel.desk_scale()
STEP = np.array([0.0, 0.0, 2.0, 0.0, 0.0, 0.0])


def simulate(f_ext, twist, accel, body=BODY, dt=1e-3, duration=0.2, gain=100.0):
    """Drive the observer with sensor readings consistent with exact dynamics.

    ``f_ext``, ``twist`` and ``accel`` are functions of time returning
    6-vectors; the sensor reads ``I V' + C V + g - F_ext``.
    """
    def sensor(t):
        v = twist(t)
        return body.inertia @ accel(t) + body.coriolis @ v + body.gravity - f_ext(t)

    state = ObserverState.initial(body, sensor(0.0), twist(0.0), gain)
    n = int(round(duration / dt))
    times = dt * np.arange(1, n + 1)
    out = np.empty((n, 6))
    for i, t in enumerate(times):
        state = observer_step(state, sensor(t), twist(t), body, dt)
        out[i] = state.residual
    return times, out


def at_rest(t):
    return np.zeros(6)


class TestStep:
    def test_zero_load_stays_zero(self):
        _, r = simulate(lambda t: np.zeros(6), at_rest, at_rest)
        assert np.max(np.abs(r)) == 0.0

    def test_step_convergence(self):
        dt = 1e-3
        t, r = simulate(lambda t: STEP, at_rest, at_rest, dt=dt)
        err = np.linalg.norm(r - STEP, axis=1) / np.linalg.norm(STEP)
        first = t[np.argmax(err < 0.01)]
        assert abs(first - math.log(100.0) / 100.0) <= dt + 1e-12
        slope = np.polyfit(t[:80], np.log(err[:80]), 1)[0]
        assert slope == pytest.approx(-100.0, rel=0.05)

    def test_fine_step_matches_analytic(self):
        t, r = simulate(lambda t: STEP, at_rest, at_rest, dt=1e-4, duration=0.05)
        np.testing.assert_allclose(r[:, 2], 2.0 * (1 - np.exp(-100.0 * t)), atol=1e-5)

    def test_sinusoid_frequency_response(self):
        omega, dt = 10.0, 1e-4
        f = lambda t: np.array([0, 0, math.sin(omega * t), 0, 0, 0])
        t, r = simulate(f, at_rest, at_rest, dt=dt, duration=3.0)
        keep = t > 1.0
        basis = np.column_stack([np.sin(omega * t[keep]), np.cos(omega * t[keep])])
        (a, b), *_ = np.linalg.lstsq(basis, r[keep, 2], rcond=None)
        assert math.hypot(a, b) == pytest.approx(100 / math.hypot(100, omega), abs=1e-4)
        assert math.atan2(-b, a) == pytest.approx(math.atan(omega / 100), abs=1e-4)


class TestMovingBody:
    def test_tracks_load_during_motion(self):
        twist = lambda t: np.array([0.0, 0.0, 0.05 * math.sin(3 * t), 0.0, 0.1 * math.cos(2 * t), 0.0])
        accel = lambda t: np.array([0.0, 0.0, 0.15 * math.cos(3 * t), 0.0, -0.2 * math.sin(2 * t), 0.0])
        load = np.array([0.3, -0.2, 1.5, 0.01, 0.0, -0.02])
        _, r = simulate(lambda t: load, twist, accel, dt=1e-4, duration=0.5)
        np.testing.assert_allclose(r[-1], load, atol=1e-4)

    def test_coriolis_path(self):
        a = np.random.default_rng(3).normal(size=(6, 6))
        body = RigidBodyModel(BODY.inertia, BODY.gravity, a - a.T)
        twist = lambda t: 0.1 * np.array([math.sin(t), math.cos(t), 1.0, 0.5, -0.5, math.sin(2 * t)])
        accel = lambda t: 0.1 * np.array([math.cos(t), -math.sin(t), 0.0, 0.0, 0.0, 2 * math.cos(2 * t)])
        load = np.array([0.0, 0.0, 2.0, 0.0, 0.0, 0.0])
        _, r = simulate(lambda t: load, twist, accel, body=body, dt=1e-4, duration=0.3)
        np.testing.assert_allclose(r[-1], load, atol=1e-4)


class TestProperties:
    def test_zero_bias_at_rest(self):
        state = ObserverState.initial(BODY, BODY.gravity)
        for _ in range(1000):
            state = observer_step(state, BODY.gravity, np.zeros(6), BODY, 1e-3)
        assert np.max(np.abs(state.residual)) < 1e-9

    @given(st.lists(st.floats(-5, 5), min_size=6, max_size=6),
           st.lists(st.floats(-5, 5), min_size=6, max_size=6))
    def test_superposition(self, a, b):
        a, b = np.array(a), np.array(b)
        ra = simulate(lambda t: a, at_rest, at_rest, duration=0.02)[1]
        rb = simulate(lambda t: b, at_rest, at_rest, duration=0.02)[1]
        rab = simulate(lambda t: a + b, at_rest, at_rest, duration=0.02)[1]
        np.testing.assert_allclose(rab, ra + rb, atol=1e-9)

    def test_log_error_is_linear(self):
        gain = np.array([100.0, 150.0, 100.0, 200.0, 100.0, 100.0])
        load = np.array([1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
        t, r = simulate(lambda t: load, at_rest, at_rest, dt=1e-4, duration=0.1, gain=gain)
        err = np.log(np.linalg.norm(r - load, axis=1))
        slope = np.diff(err) / 1e-4
        assert np.all(slope <= -100.0 * (1 - 1e-3))


class TestExtraction:
    def test_projection(self):
        state = ObserverState.initial(BODY, BODY.gravity)
        state = ObserverState(np.arange(1.0, 7.0), state.integral, state.gain, state.integrand,
                              state.momentum0)
        np.testing.assert_array_equal(extract_interaction_force(state), [1, 2, 3])

    def test_zero(self):
        assert not np.any(extract_interaction_force(ObserverState.initial(BODY, BODY.gravity)))

    def test_converged_pure_force(self):
        load = np.array([0.5, -1.0, 3.0, 0, 0, 0])
        _, r = simulate(lambda t: load, at_rest, at_rest, duration=0.3)
        np.testing.assert_allclose(r[-1, :3], load[:3], rtol=0.01)


class TestWrapper:
    def test_matches_functional_step(self, rng):
        wrenches = rng.normal(size=(50, 6)) + BODY.gravity
        twists = rng.normal(scale=0.05, size=(50, 6))
        obs = MomentumObserver(BODY, wrenches[0], twists[0])
        state = ObserverState.initial(BODY, wrenches[0], twists[0])
        for w, v in zip(wrenches[1:], twists[1:]):
            obs.step(w, v, 1e-3)
            state = observer_step(state, w, v, BODY, 1e-3)
        np.testing.assert_allclose(obs.residual, state.residual, atol=1e-12)
        np.testing.assert_allclose(obs.force, state.residual[:3], atol=1e-12)


class TestValidation:
    def test_gain_must_be_spd(self):
        with pytest.raises(ValueError):
            ObserverState.initial(BODY, BODY.gravity, gain=-1.0)
        with pytest.raises(ValueError):
            ObserverState.initial(BODY, BODY.gravity, gain=np.ones(5))

    def test_inertia_must_be_spd(self):
        with pytest.raises(ValueError):
            RigidBodyModel(-np.eye(6), np.zeros(6))

    def test_dt_positive(self):
        with pytest.raises(ValueError):
            observer_step(ObserverState.initial(BODY, BODY.gravity), BODY.gravity, np.zeros(6),
                          BODY, 0.0)
