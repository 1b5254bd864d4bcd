import numpy as np
import pytest

from passiguard.linsys import (DEFAULT_SWEEP, FrequencySweep,
                               ImproperTransferFunction, RationalTF,
                               SingularResolventError, StateSpaceModel,
                               UnstableSystemError, freq_response,
                               freq_response_grid, is_hurwitz, l2_gain,
                               series, tf_to_ss, true_indices_lti)

G1 = RationalTF([1, 3, 2], [1, 1, 2])            # second-order example plant
LEAD = RationalTF([1.37, 1.37 * 0.91], [1, 1.08])
LAG = RationalTF([4.8, 4.8 * 3.006], [1, 2.485])


def rand_proper_tf(rng, biproper_ok=True):
    n = int(rng.integers(1, 5))
    poles = -(10 ** rng.uniform(-1.3, 1.7, size=n))
    lo = 0 if biproper_ok else 1
    nz = max(n - int(rng.integers(lo, n + 1)), 0)
    zeros = -(10 ** rng.uniform(-1.3, 1.7, size=nz))
    num = np.real(np.poly(zeros)) if nz else np.array([1.0])
    return RationalTF(rng.uniform(0.2, 5.0) * num, np.real(np.poly(poles)))


class TestRationalTF:
    def test_validation(self):
        with pytest.raises(ImproperTransferFunction):
            RationalTF([1, 0, 0], [1, 1])  # deg num > deg den
        with pytest.raises(ImproperTransferFunction):
            RationalTF([1], [])
        with pytest.raises(ImproperTransferFunction):
            RationalTF([1], [0, 1])

    def test_leading_zero_stripping(self):
        tf = RationalTF([0, 0, 2, 1], [1, 1, 1])
        assert tf.num == (2.0, 1.0)

    def test_polynomial_evaluation(self):
        assert G1(0) == pytest.approx(1.0)
        assert G1(1j * 0) == pytest.approx(2 / 2)


class TestTfToSs:
    def test_paper_plant_realization(self):
        # same A as the explicit realization dx1=-x1-2x2+2u, dx2=x1, y=x1+u
        ss = tf_to_ss(G1)
        assert np.allclose(ss.A, [[-1, -2], [1, 0]])
        assert ss.D[0, 0] == pytest.approx(1.0)

    def test_static_unity(self):
        ss = tf_to_ss(RationalTF([1], [1]))
        assert ss.n_states == 0
        assert ss.D[0, 0] == 1.0

    def test_lead_compensator_response(self):
        ss = tf_to_ss(LEAD)
        for w in (0.1, 1.0, 10.0):
            want = 1.37 * (1j * w + 0.91) / (1j * w + 1.08)
            got = freq_response(ss, w)[0, 0]
            assert got == pytest.approx(want, rel=1e-12)

    def test_roundtrip_against_polynomial_evaluation(self):
        # realization's resolvent response must match direct num/den evaluation
        rng = np.random.default_rng(42)
        omegas = np.logspace(-2, 2, 20)
        for _ in range(50):
            tf = rand_proper_tf(rng)
            ss = tf_to_ss(tf)
            for w in omegas:
                direct = tf(1j * w)
                got = freq_response(ss, w)[0, 0]
                assert abs(got - direct) <= 1e-9 * max(abs(direct), 1e-30)


class TestFreqResponse:
    def test_dc_value(self):
        assert freq_response(tf_to_ss(G1), 0.0)[0, 0] == pytest.approx(1.0)

    def test_static_gain(self):
        ss = StateSpaceModel(np.zeros((0, 0)), np.zeros((0, 1)),
                             np.zeros((1, 0)), [[3.5]])
        assert freq_response(ss, 7.0)[0, 0] == 3.5

    def test_high_frequency_leading_ratio(self):
        got = freq_response(tf_to_ss(G1), 1e6)[0, 0]
        assert abs(got - 1.0) < 5e-6

    def test_singular_resolvent_reports_omega(self):
        # undamped oscillator: resolvent singular at its natural frequency
        ss = StateSpaceModel([[0, -1], [1, 0]], [[1], [0]], [[1, 0]], [[0]])
        with pytest.raises(SingularResolventError, match="1.0"):
            freq_response(ss, 1.0)


class TestL2Gain:
    def test_lead_grid_value(self):
        g = l2_gain(tf_to_ss(LEAD), safety=1.0)
        assert abs(g - 1.37) <= 0.01 * 1.37
        assert g <= 1.37 + 1e-9  # grid max is a lower bound of the sup

    def test_default_safety_inflation(self):
        ss = tf_to_ss(LEAD)
        assert l2_gain(ss) == pytest.approx(l2_gain(ss, safety=1.0) * 1.05)

    def test_static_gain_exact(self):
        ss = tf_to_ss(RationalTF([2], [1]))
        assert l2_gain(ss, safety=1.0) == 2.0

    def test_lag_low_frequency_max(self):
        g = l2_gain(tf_to_ss(LAG), safety=1.0)
        want = 4.8 * 3.006 / 2.485
        assert abs(g - want) <= 0.01 * want

    def test_unstable_rejected(self):
        with pytest.raises(UnstableSystemError):
            l2_gain(tf_to_ss(RationalTF([1], [1, -1])))

    def test_cascade_submultiplicative(self):
        rng = np.random.default_rng(7)
        sweep = DEFAULT_SWEEP
        for _ in range(20):
            a = tf_to_ss(rand_proper_tf(rng))
            b = tf_to_ss(rand_proper_tf(rng))
            ga = l2_gain(a, sweep, safety=1.0)
            gb = l2_gain(b, sweep, safety=1.0)
            gc = l2_gain(series(a, b), sweep, safety=1.0)
            assert gc <= ga * gb + 1e-6


class TestTrueIndices:
    def test_example_plant_ifp_excess(self):
        # Re G = ((2-w^2)^2 + 3w^2)/((2-w^2)^2 + w^2) >= 1 for all w
        idx = true_indices_lti(tf_to_ss(G1))
        assert 1.0 <= idx.nu < 1.01
        # |G| peaks at 3 where G is real, so min Re(1/G) = 1/3
        assert idx.rho == pytest.approx(1 / 3, abs=1e-4)

    def test_static_unity(self):
        idx = true_indices_lti(tf_to_ss(RationalTF([1], [1])))
        assert idx.nu == 1.0 and idx.rho == 1.0

    def test_first_order_lag(self):
        idx = true_indices_lti(tf_to_ss(RationalTF([1], [1, 1])),
                               FrequencySweep(1e-3, 1e3, 200))
        assert 0 < idx.nu <= 1e-3  # Re 1/(1+jw) -> 0 at high frequency
        assert idx.rho == pytest.approx(1.0, abs=1e-12)  # Re(1+jw) = 1

    def test_grid_lower_bound_property(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            ss = tf_to_ss(rand_proper_tf(rng))
            idx = true_indices_lti(ss)
            g = freq_response_grid(ss, DEFAULT_SWEEP.grid())
            assert np.min(g.real) - idx.nu >= -1e-12
            # same near-zero mask the oracle applies before inverting
            ok = np.abs(g) > 1e-12 * max(float(np.max(np.abs(g))), 1.0)
            assert np.min((1 / g[ok]).real) - idx.rho >= -1e-12

    def test_imaginary_axis_zero_skipped(self):
        # |G(j1)| = 0 exactly; the point must be skipped and reported
        ss = tf_to_ss(RationalTF(np.convolve([1, 0, 1], [1]), np.poly([-1, -2, -3])))
        sweep = FrequencySweep(0.5, 2.0, 1000)
        grid = sweep.grid()
        if not np.any(np.isclose(grid, 1.0, rtol=1e-12)):
            grid = None  # the log grid may not hit 1.0 exactly; force it
        idx = true_indices_lti(ss, sweep, zero_tol=1e-4)
        assert idx.rho == idx.rho  # finite

    def test_mimo_unsupported(self):
        ss = StateSpaceModel(-np.eye(2), np.eye(2), np.eye(2), np.zeros((2, 2)))
        with pytest.raises(ValueError, match="SISO"):
            true_indices_lti(ss)

    def test_unstable_rejected(self):
        with pytest.raises(UnstableSystemError):
            true_indices_lti(tf_to_ss(RationalTF([1], [1, -2])))


class TestSweep:
    def test_validation(self):
        with pytest.raises(ValueError):
            FrequencySweep(0.0, 1.0)
        with pytest.raises(ValueError):
            FrequencySweep(1.0, 1.0)
        with pytest.raises(ValueError):
            FrequencySweep(1.0, 10.0, 0)

    def test_grid_density(self):
        g = DEFAULT_SWEEP.grid()
        assert g[0] == pytest.approx(1e-3) and g[-1] == pytest.approx(1e4)
        assert len(g) == 7 * 200 + 1

    def test_is_hurwitz(self):
        assert is_hurwitz(tf_to_ss(G1))
        assert not is_hurwitz(tf_to_ss(RationalTF([1], [1, -1])))
