import math

import numpy as np
import pytest

from passiguard import _kernels as K
from passiguard.linsys import RationalTF, tf_to_ss, true_indices_lti
from passiguard.passivity import (DetectionVerdict, PassivityEstimate,
                                  Thresholds, detect, verify_dissipativity)


def drive(est, e, y, n, dt):
    for _ in range(n):
        est.update(e, y, dt)
    return est


class TestEstimator:
    def test_constant_unit_signals(self):
        est = drive(PassivityEstimate(), 1.0, 1.0, 1001, 0.01)
        assert est.rho_bar == pytest.approx(1.0, abs=1e-12)
        assert est.nu_bar == pytest.approx(1.0, abs=1e-12)
        assert est.I_ey == pytest.approx(10.0, abs=1e-12)

    def test_ratio_arithmetic(self):
        est = drive(PassivityEstimate(), 1.0, 2.0, 1001, 0.01)
        assert est.rho_bar == pytest.approx(0.5, abs=1e-12)   # int(2)/int(4)
        assert est.nu_bar == pytest.approx(2.0, abs=1e-12)    # int(2)/int(1)

    def test_antiphase_sine_full_period(self):
        est = PassivityEstimate(warmup=0.1)
        for tk in np.arange(0, 2 * np.pi, 1e-3):
            est.update(math.sin(tk), -math.sin(tk), 1e-3)
        assert est.rho_bar == pytest.approx(-1.0, abs=1e-12)
        assert est.nu_bar == pytest.approx(-1.0, abs=1e-12)

    def test_undefined_until_energy(self):
        est = PassivityEstimate()
        assert est.rho_bar is None and est.nu_bar is None
        est.update(0.0, 0.0, 1e-3)
        est.update(0.0, 0.0, 1e-3)
        assert est.rho_bar is None  # zero signals carry no energy

    def test_scale_covariance_on_constants(self):
        base = drive(PassivityEstimate(), 1.0, 1.0, 500, 0.01)
        lam = 3.0
        scaled_y = drive(PassivityEstimate(), 1.0, lam, 500, 0.01)
        assert scaled_y.rho_bar == pytest.approx(base.rho_bar / lam)
        assert scaled_y.nu_bar == pytest.approx(base.nu_bar * lam)

    def test_signal_fault_freezes(self):
        est = drive(PassivityEstimate(), 1.0, 1.0, 100, 0.01)
        before = est.I_ey
        est.update(float("nan"), 1.0, 0.01)
        assert est.signal_fault
        est.update(1.0, 1.0, 0.01)
        assert est.I_ey == before  # frozen

    def test_kahan_long_run_drift(self):
        # one million tiny increments stay exact to ~1 ulp of the total
        est = PassivityEstimate()
        for _ in range(1_000_000):
            est.update(1.0, 1.0, 1e-3)
        assert est.I_ey == pytest.approx(999.999, rel=1e-12)


class TestWindow:
    def test_window_at_least_horizon_matches_cumulative(self):
        a = PassivityEstimate()
        b = PassivityEstimate(window=60.0, dt_hint=0.01)
        rng = np.random.default_rng(1)
        for _ in range(2000):  # 20 s < 60 s window
            e, y = rng.standard_normal(2)
            a.update(e, y, 0.01)
            b.update(e, y, 0.01)
        assert a.I_ey == b.I_ey and a.I_yy == b.I_yy and a.I_ee == b.I_ee

    def test_window_forgets_old_data(self):
        est = PassivityEstimate(window=1.0, dt_hint=0.01)
        drive(est, 1.0, -1.0, 200, 0.01)   # 2 s of anti-phase data
        drive(est, 1.0, 1.0, 300, 0.01)    # 3 s of healthy data
        assert est.rho_bar == pytest.approx(1.0, abs=1e-9)

    def test_reset_rearms_warmup(self):
        est = drive(PassivityEstimate(warmup=0.5), 1.0, -1.0, 2000, 1e-3)
        th = Thresholds(rho0=-0.15, nu0=-0.15)
        assert detect(est, th) == DetectionVerdict.BOTH_LOW
        est.reset_integrals()
        assert est.rho_bar is None
        assert detect(est, th) == DetectionVerdict.INDETERMINATE
        drive(est, 1.0, -1.0, 400, 1e-3)  # 0.4 s < warmup
        assert detect(est, th) == DetectionVerdict.INDETERMINATE
        drive(est, 1.0, -1.0, 200, 1e-3)
        assert detect(est, th) == DetectionVerdict.BOTH_LOW


class TestDetect:
    # the verdict is a pure function of (rho_bar, nu_bar, thresholds);
    # all five regions, including pairs only reachable with other threshold
    # placements (the two ratios share a numerator, so their signs agree)
    @pytest.mark.parametrize("rho,nu,want", [
        (0.9, 0.9, DetectionVerdict.NOMINAL),
        (-0.2, 0.5, DetectionVerdict.RHO_LOW),
        (0.5, -0.2, DetectionVerdict.NU_LOW),
        (-0.2, -0.3, DetectionVerdict.BOTH_LOW),
        (-0.15, -0.15, DetectionVerdict.NOMINAL),  # strict inequality
        (float("nan"), 0.5, DetectionVerdict.INDETERMINATE),
    ])
    def test_verdict_table(self, rho, nu, want):
        code = K.detect_code(rho, nu, -0.15, -0.15, t=10.0, warmup=1.0)
        assert DetectionVerdict(code) == want

    def test_estimator_driven_rho_low(self):
        th = Thresholds(rho0=-0.15, nu0=-0.15)
        est = PassivityEstimate(warmup=0.0)
        est._state[0] = -0.2   # I_ey
        est._state[2] = 1.0    # I_yy  -> rho_bar = -0.2 < rho0
        est._state[4] = 2.0    # I_ee  -> nu_bar = -0.1 >= nu0
        est._state[9] = 5.0
        assert detect(est, th) == DetectionVerdict.RHO_LOW

    def test_indeterminate_before_warmup(self):
        est = drive(PassivityEstimate(warmup=5.0), 1.0, 1.0, 100, 1e-3)
        assert detect(est, Thresholds()) == DetectionVerdict.INDETERMINATE


class TestVerifyDissipativity:
    def test_identity_passthrough(self):
        u = np.sin(np.arange(10_000) * 1e-3)
        assert verify_dissipativity(u, u, 1e-3, 0.0, 0.0) >= 0.0

    def test_constant_arithmetic(self):
        u = np.ones(1001)
        r = verify_dissipativity(u, u, 0.01, 0.5, 0.5)
        assert r == pytest.approx((1.25 - 0.5 - 0.5) * 10.0, abs=1e-9)

    def test_reduces_to_passivity_integral(self):
        rng = np.random.default_rng(5)
        u = rng.standard_normal(500)
        y = rng.standard_normal(500)
        est = PassivityEstimate()
        for ek, yk in zip(u, y):
            est.update(ek, yk, 0.01)
        assert verify_dissipativity(u, y, 0.01, 0.0, 0.0) == pytest.approx(
            est.I_ey, abs=1e-12)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            verify_dissipativity([], [], 0.01, 0, 0)
        with pytest.raises(ValueError):
            verify_dissipativity([1, 2], [1], 0.01, 0, 0)


class TestUpperBoundProperty:
    def test_estimates_upper_bound_indices(self):
        # small-scale version of the acceptance-gate property: for stable
        # plants driven from rest, the ratio estimates sit above the grid
        # index oracles (output-side bound needs nonnegative rho; the
        # truncated inequality genuinely fails otherwise)
        rng = np.random.default_rng(11)
        dt, nsteps = 1e-4, 100_000
        t = np.arange(nsteps) * dt
        signals = [np.ones(nsteps), np.sin(1.3 * t), np.sin(3.0 * t)]
        tested = 0
        while tested < 8:
            poles = -(10 ** rng.uniform(-0.5, 0.8, size=2))
            zeros = -(10 ** rng.uniform(-0.5, 0.8, size=rng.integers(1, 3)))
            tf = RationalTF(rng.uniform(0.5, 2.0) * np.real(np.poly(zeros)),
                            np.real(np.poly(poles)))
            ss = tf_to_ss(tf)
            idx = true_indices_lti(ss)
            if idx.rho < 0:
                continue
            tested += 1
            n = ss.n_states
            I = np.eye(n)
            M = ss.A * dt
            Phi = I + M + M @ M / 2 + M @ M @ M / 6 + M @ M @ M @ M / 24
            Gam = (dt * (I + M / 2 + M @ M / 6 + M @ M @ M / 24) @ ss.B)[:, 0]
            C = ss.C[0, :].copy()
            D = float(ss.D[0, 0])
            for u in signals:
                u = np.ascontiguousarray(u)
                x = np.zeros(n)
                xt = np.zeros(n)
                y = np.empty(nsteps)
                K.lti_rollout(Phi, Gam, C, D, u, x, xt, y)
                rho, nu = PassivityEstimate().update_batch(u, y, dt)
                ok = ~np.isnan(rho) & (t >= 1.0)
                assert np.min(rho[ok] - idx.rho) >= -1e-3
                ok = ~np.isnan(nu) & (t >= 1.0)
                assert np.min(nu[ok] - idx.nu) >= -1e-3
