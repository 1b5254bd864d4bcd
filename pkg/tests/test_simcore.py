import math

import numpy as np
import pytest

from passiguard.linsys import RationalTF, tf_to_ss
from passiguard.plants import FaultKind, FaultSchedule, NO_FAULT, plant_ex1, plant_from_tf
from passiguard.simcore import (DelayLine, DivergenceSignal, LoopStepper,
                                Method, SolverConfig, StepRecord,
                                WellPosednessError, delayed_read, step_ode,
                                wire_nominal, wire_wrapped)

G1 = RationalTF([1, 3, 2], [1, 1, 2])
LEAD = RationalTF([1.37, 1.37 * 0.91], [1, 1.08])
UNIT_STEP = lambda t: 1.0


class TestStepOde:
    def test_rk4_exponential_decay(self):
        x = step_ode(lambda x, u: -x, np.array([1.0]), 0.0, 0.01)
        assert abs(x[0] - math.exp(-0.01)) <= 1e-9

    def test_zero_field_identity(self):
        x0 = np.array([3.0, -4.0])
        x = step_ode(lambda x, u: np.zeros_like(x), x0, 0.0, 0.5)
        assert np.array_equal(x, x0)

    def test_euler_forced_integrator(self):
        x = step_ode(lambda x, u: np.array([u]), np.array([0.0]), 1.0, 0.01,
                     Method.EULER)
        assert x[0] == 0.01

    def test_divergence_signal(self):
        with pytest.raises(DivergenceSignal):
            step_ode(lambda x, u: x * 1e308, np.array([1e308]), 0.0, 1.0)

    def test_rk4_order(self):
        # halving dt shrinks the global error at t=1 by roughly 2^4
        def err(dt):
            x = np.array([1.0])
            for _ in range(int(round(1.0 / dt))):
                x = step_ode(lambda x, u: -x, x, 0.0, dt)
            return abs(x[0] - math.exp(-1.0))

        ratio = err(0.1) / err(0.05)
        assert 12.0 <= ratio <= 20.0


class TestDelayLine:
    def test_constant_signal(self):
        line = DelayLine(capacity=2.0)
        for k in range(200):
            line.push(k * 0.01, 5.0)
        assert delayed_read(line, 1.99, 0.7) == 5.0

    def test_linear_interpolation_exact_on_ramp(self):
        line = DelayLine(capacity=2.0)
        for k in range(101):
            line.push(k * 0.01, k * 0.01)
        assert delayed_read(line, 1.0, 0.25) == pytest.approx(0.75, abs=1e-12)

    def test_prehistory_returns_zero(self):
        line = DelayLine(capacity=2.0)
        for k in range(20):
            line.push(k * 0.01, 1.0 + k)
        assert delayed_read(line, 0.1, 0.5) == 0.0

    def test_capacity_guard(self):
        line = DelayLine(capacity=0.5)
        line.push(0.0, 1.0)
        with pytest.raises(ValueError, match="capacity"):
            delayed_read(line, 1.0, 0.7)

    def test_monotonic_timestamps(self):
        line = DelayLine(capacity=1.0)
        line.push(0.1, 1.0)
        with pytest.raises(ValueError):
            line.push(0.1, 2.0)


class TestNominalLoop:
    def test_dc_tracking_value(self):
        # with the compensator in the feedback path, y/r -> G(0)/(1+G(0)C(0));
        # G(0)=1 and C(0)=1.37*0.91/1.08 give y_ss = 1/2.1544 = 0.46423
        loop = wire_nominal(plant_ex1(NO_FAULT), tf_to_ss(LEAD), UNIT_STEP,
                            SolverConfig(dt=1e-3, t_end=40.0))
        records = loop.run()
        y_ss = 1.0 / (1.0 + 1.37 * 0.91 / 1.08)
        tail = [r.y for r in records if r.t > 30.0]
        assert max(abs(y - y_ss) for y in tail) < 0.01

    def test_zero_reference_rest(self):
        loop = wire_nominal(plant_ex1(NO_FAULT), tf_to_ss(LEAD), lambda t: 0.0,
                            SolverConfig(dt=1e-3, t_end=1.0))
        for r in loop.run():
            assert r.e == 0.0 and r.y == 0.0 and r.u == 0.0

    def test_static_unity_loop(self):
        plant = plant_from_tf(RationalTF([1], [1]))
        ctrl = tf_to_ss(RationalTF([1], [1]))
        rec = wire_nominal(plant, ctrl, UNIT_STEP,
                           SolverConfig(dt=0.01, t_end=0.1)).step()
        assert rec.y == pytest.approx(0.5)  # algebraic loop y = r/2

    def test_ill_posed_loop_rejected(self):
        plant = plant_from_tf(RationalTF([1], [1]))      # Dp = 1
        ctrl = tf_to_ss(RationalTF([-1], [1]))           # Dc = -1
        with pytest.raises(WellPosednessError):
            wire_nominal(plant, ctrl, UNIT_STEP, SolverConfig(dt=0.01, t_end=1))


class TestWrappedLoop:
    def test_identity_matches_nominal_bitwise(self):
        solver = SolverConfig(dt=1e-3, t_end=5.0)
        ref = lambda t: 1.0 if (t % 2.0) < 1.0 else -1.0
        a = wire_nominal(plant_ex1(NO_FAULT), tf_to_ss(LEAD), ref, solver)
        b = wire_wrapped(plant_ex1(NO_FAULT), tf_to_ss(LEAD),
                         (1.0, 0.0, 0.0, 1.0), ref, solver)
        for ra, rb in zip(a.run(), b.run()):
            assert ra == rb  # dataclass equality -> float-exact fields

    def test_static_controller_port_algebra(self):
        # wrapper maps [loop_in; loop_out] = M [ctrl_in; ctrl_out]; for a
        # static controller w = k v the wrapped map is
        # u = (m21 + k m22) / (m11 + k m12) * y
        k = 2.0
        m = (1.0, 0.0, 0.1, 1.0)
        plant = plant_from_tf(RationalTF([1], [1, 1]))   # strictly proper
        ctrl = tf_to_ss(RationalTF([k], [1]))
        loop = wire_wrapped(plant, ctrl, m, UNIT_STEP,
                            SolverConfig(dt=0.01, t_end=1.0))
        gain = (m[2] + k * m[3]) / (m[0] + k * m[1])
        assert gain == pytest.approx(2.1)
        for r in loop.run(20):
            assert r.u == pytest.approx(gain * r.y, abs=1e-12)

    def test_well_posedness_guard(self):
        plant = plant_from_tf(RationalTF([1], [1, 1]))
        ctrl = tf_to_ss(RationalTF([1], [1]))  # Dc = 1
        # m11 + m12*Dc = 0  -> ill-posed
        with pytest.raises(WellPosednessError, match="m11"):
            wire_wrapped(plant, ctrl, (0.0, 0.0, 1.0, 1.0), UNIT_STEP,
                         SolverConfig(dt=0.01, t_end=1))

    def test_install_between_steps_preserves_state(self):
        solver = SolverConfig(dt=1e-3, t_end=2.0)
        loop = wire_nominal(plant_ex1(NO_FAULT), tf_to_ss(LEAD), UNIT_STEP, solver)
        loop.run(500)
        xc_before = loop.xc.copy()
        loop.install((1.0, 0.0, 0.0, 1.0))  # identity: trajectories unchanged
        assert np.array_equal(loop.xc, xc_before)
        ref = wire_nominal(plant_ex1(NO_FAULT), tf_to_ss(LEAD), UNIT_STEP, solver)
        ref.run(500)
        for ra, rb in zip(loop.run(100), ref.run(100)):
            assert ra == rb

    def test_install_refuses_ill_posed(self):
        loop = wire_nominal(plant_ex1(NO_FAULT), tf_to_ss(LEAD), UNIT_STEP,
                            SolverConfig(dt=1e-3, t_end=1.0))
        with pytest.raises(WellPosednessError):
            loop.install((0.0, 0.0, 0.0, 1.0))


class TestDivergenceHandling:
    def test_unstable_loop_raises_signal_with_time(self):
        # positive-feedback static loop diverges geometrically: plant 2/(s+1)
        # with controller gain -3 makes 1 + L < 0 feedback
        plant = plant_from_tf(RationalTF([40], [1, 0.1]))
        ctrl = tf_to_ss(RationalTF([-5], [1]))
        loop = wire_nominal(plant, ctrl, UNIT_STEP,
                            SolverConfig(dt=0.01, t_end=100.0))
        with pytest.raises(DivergenceSignal) as exc:
            loop.run()
        assert exc.value.norm > 1e6 or not math.isfinite(exc.value.norm)


class TestSolverConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(dt=0.0)
        with pytest.raises(ValueError):
            SolverConfig(dt=1.0, t_end=0.5)

    def test_partial_step_truncated(self):
        assert SolverConfig(dt=0.3, t_end=1.0).n_steps == 3
