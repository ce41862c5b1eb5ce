import numpy as np
import pytest
from hypothesis import given, strategies as st

from spinctrl.meanfield import (
    MeanFieldConfig,
    PhaseState,
    analytic_optimal_q,
    integrate_optimal,
    logistic_oracle,
    mf_derivatives,
    rk4_step,
)

CFG = MeanFieldConfig()


class TestPhaseState:
    def test_wraps_theta(self):
        s = PhaseState(0.5, 2.0 * np.pi + 0.3)
        assert s.theta_s == pytest.approx(0.3)
        assert 0.0 <= PhaseState(0.5, -0.1).theta_s < 2.0 * np.pi

    def test_clamps_tiny_overshoot(self):
        assert PhaseState(1.0 + 1e-13, 0.0).rho0 == 1.0
        assert PhaseState(-1e-13, 0.0).rho0 == 0.0

    def test_rejects_large_overshoot(self):
        with pytest.raises(ValueError):
            PhaseState(1.1, 0.0)

    @given(st.floats(0.0, 1.0), st.floats(-50.0, 50.0))
    def test_invariants_hold(self, rho0, theta):
        s = PhaseState(rho0, theta)
        assert 0.0 <= s.rho0 <= 1.0
        assert 0.0 <= s.theta_s < 2.0 * np.pi


class TestConfig:
    def test_defaults(self):
        assert (CFG.c2, CFG.q_min, CFG.q_max) == (-1.0, -6.0, 6.0)
        assert (CFG.dt, CFG.steps) == (0.05, 100)

    @pytest.mark.parametrize("kwargs", [
        {"c2": 1.0}, {"q_min": 6.0, "q_max": -6.0}, {"dt": 0.0}, {"steps": 0},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            MeanFieldConfig(**kwargs)


class TestDerivatives:
    def test_direct_substitution(self):
        dr, dth = mf_derivatives(PhaseState(0.5, np.pi / 2), q=0.0, c2=-1.0)
        assert dr == pytest.approx(-0.5, abs=1e-14)
        assert dth == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("rho0", [0.0, 1.0])
    def test_population_fixed_points(self, rho0):
        for theta in (0.0, 1.0, 3.7):
            for q in (-6.0, 0.0, 2.5):
                dr, _ = mf_derivatives(PhaseState(rho0, theta), q, -1.0)
                assert dr == 0.0


class TestRk4:
    def test_fixed_point_is_exact(self):
        s = PhaseState(0.0, 1.3)
        for _ in range(50):
            s = rk4_step(s, q=2.0, dt=0.05, c2=-1.0)
        assert s.rho0 == 0.0

    def test_piecewise_feedback_falls_off_the_unstable_geodesic(self):
        # theta_s = pi/2 is dynamically unstable once rho0 < 1/2, so holding
        # the feedback q constant over each control interval lets the phase
        # escape; only stage-level feedback (integrate_optimal) reproduces
        # the logistic decay.
        s = PhaseState(0.9, np.pi / 2)
        h = CFG.dt / CFG.substeps
        for _ in range(CFG.steps):
            q = analytic_optimal_q(s, CFG)
            for _ in range(CFG.substeps):
                s = rk4_step(s, q, h, CFG.c2)
        assert abs(s.theta_s - np.pi / 2) > 0.1
        assert s.rho0 > 10.0 * logistic_oracle(0.9, 5.0, CFG.c2)

    def test_halving_dt_converged(self):
        s0 = PhaseState(0.7, 1.1)

        def endpoint(n, h):
            s = s0
            for _ in range(n):
                s = rk4_step(s, 1.3, h, -1.0)
            return s

        # episode-standard substep size and half of it
        a = endpoint(500, 0.01)
        b = endpoint(1000, 0.005)
        assert abs(a.rho0 - b.rho0) < 1e-8
        assert abs(a.theta_s - b.theta_s) < 1e-8

    def test_order_four_convergence(self):
        s0 = PhaseState(0.7, 1.1)

        def endpoint(h):
            s = s0
            n = int(round(1.0 / h))
            for _ in range(n):
                s = rk4_step(s, 1.3, h, -1.0)
            return np.array([s.rho0, s.theta_s])

        ref = endpoint(1.0 / 640)
        e1 = np.linalg.norm(endpoint(0.1) - ref)
        e2 = np.linalg.norm(endpoint(0.05) - ref)
        order = np.log2(e1 / e2)
        assert 3.5 < order < 4.5

    def test_time_reversal(self):
        s0 = PhaseState(0.63, 2.2)
        fwd = rk4_step(s0, 0.8, 0.01, -1.0)
        back = rk4_step(fwd, 0.8, -0.01, -1.0)
        assert abs(back.rho0 - s0.rho0) < 1e-10
        assert abs(back.theta_s - s0.theta_s) < 1e-10


class TestOptimalProtocol:
    def test_feedback_law_values(self):
        # stationarity of the phase equation at theta_s = pi/2: c2*(1-2*rho0)
        assert analytic_optimal_q(PhaseState(0.0, 0.0), CFG) == pytest.approx(-1.0)
        assert analytic_optimal_q(PhaseState(0.5, 0.0), CFG) == pytest.approx(0.0)
        assert analytic_optimal_q(PhaseState(1.0, 0.0), CFG) == pytest.approx(1.0)

    def test_clipped_to_bounds(self):
        cfg = MeanFieldConfig(q_min=-0.5, q_max=0.5)
        assert analytic_optimal_q(PhaseState(0.0, 0.0), cfg) == -0.5

    def test_phase_pinned_over_episode(self):
        _, _, rho, theta = integrate_optimal(PhaseState(0.9, np.pi / 2), CFG)
        assert np.max(np.abs(theta - np.pi / 2)) < 1e-6

    def test_tracks_logistic_oracle_everywhere(self):
        ts, _, rho, _ = integrate_optimal(PhaseState(0.9, np.pi / 2), CFG)
        oracle = np.array([logistic_oracle(0.9, t, CFG.c2) for t in ts])
        assert np.max(np.abs(rho - oracle)) < 1e-7


class TestLogisticOracle:
    def test_t_zero_identity(self):
        assert logistic_oracle(0.9, 0.0, -1.0) == pytest.approx(0.9, abs=1e-15)

    def test_decays_to_zero(self):
        assert logistic_oracle(0.5, 1e3, -1.0) == pytest.approx(0.0, abs=1e-200)

    def test_reference_value(self):
        assert logistic_oracle(0.9, 5.0, -1.0) == pytest.approx(4.086e-4, abs=1e-6)
        # brute-force check: dense RK4 of the 1-D logistic ODE
        r, h = 0.9, 1e-4
        f = lambda x: 2.0 * (-1.0) * x * (1.0 - x)
        for _ in range(50000):
            k1 = f(r); k2 = f(r + h / 2 * k1); k3 = f(r + h / 2 * k2); k4 = f(r + h * k3)
            r += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        assert logistic_oracle(0.9, 5.0, -1.0) == pytest.approx(r, abs=1e-12)
