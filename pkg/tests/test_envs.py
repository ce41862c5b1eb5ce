import numpy as np
import pytest
from hypothesis import given, strategies as st

from spinctrl.envs import (
    INFIDELITY_FLOOR,
    MeanFieldEnv,
    QuantumConfig,
    QuantumEnv,
    make_env,
    meanfield_progress,
    reward_delta,
    reward_log,
)
from spinctrl.meanfield import MeanFieldConfig, PhaseState
from spinctrl.quantum import FockVector, haar_random_state

fids = st.floats(0.0, 1.0 - 1e-9)


class TestRewards:
    def test_delta_examples(self):
        assert reward_delta(0.2, 0.5) == pytest.approx(0.3)
        assert reward_delta(0.7, 0.7) == 0.0

    @given(st.lists(fids, min_size=2, max_size=30))
    def test_delta_telescopes(self, seq):
        total = sum(reward_delta(a, b) for a, b in zip(seq, seq[1:]))
        assert total == pytest.approx(seq[-1] - seq[0], abs=1e-12)

    def test_log_examples(self):
        assert reward_log(0.0, 0.9) == pytest.approx(-np.log(0.1), abs=1e-12)
        assert reward_log(0.42, 0.42) == 0.0
        # one decade of infidelity gives the same reward anywhere
        assert reward_log(0.9, 0.99) == pytest.approx(np.log(10.0), abs=1e-12)
        assert reward_log(0.9, 0.99) == pytest.approx(reward_log(0.0, 0.9), abs=1e-12)

    def test_log_floor_absorbs_exact_arrival(self):
        r = reward_log(0.5, 1.0)
        assert np.isfinite(r)
        assert r == pytest.approx(np.log(0.5 / INFIDELITY_FLOOR), abs=1e-9)

    @given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=30))
    def test_log_telescopes_with_floor(self, seq):
        total = sum(reward_log(a, b) for a, b in zip(seq, seq[1:]))
        expected = np.log(max(1.0 - seq[0], INFIDELITY_FLOOR)) - \
            np.log(max(1.0 - seq[-1], INFIDELITY_FLOOR))
        assert total == pytest.approx(expected, abs=1e-9)

    def test_meanfield_progress(self):
        assert meanfield_progress(0.9, 0.8, "delta") == pytest.approx(0.1)
        assert meanfield_progress(0.4, 0.4, "delta") == 0.0
        assert meanfield_progress(0.5, 0.25, "log") == pytest.approx(np.log(2.0))


class TestMeanFieldEnv:
    def test_fixed_reset_observation(self):
        env = MeanFieldEnv()
        obs = env.reset()
        assert np.allclose(obs, [0.9, 1.0, 0.0])

    def test_random_reset_ranges_and_determinism(self):
        obs1 = MeanFieldEnv(init="random", seed=3).reset()
        obs2 = MeanFieldEnv(init="random", seed=3).reset()
        assert np.array_equal(obs1, obs2)
        rng = np.random.default_rng(0)
        env = MeanFieldEnv(init="random")
        for _ in range(200):
            env.reset(rng=rng)
            assert 0.05 <= env.state.rho0 <= 0.95

    def test_explicit_state(self):
        env = MeanFieldEnv()
        obs = env.reset(state=PhaseState(0.3, np.pi))
        assert obs[0] == pytest.approx(0.3)
        with pytest.raises(ValueError):
            env.reset(state="nope")

    def test_done_exactly_at_horizon(self):
        env = MeanFieldEnv()
        env.reset()
        for i in range(100):
            res = env.step(0.0)
            assert res.done == (i == 99)
        with pytest.raises(RuntimeError):
            env.step(0.0)

    def test_step_before_reset_rejected(self):
        with pytest.raises(RuntimeError):
            MeanFieldEnv().step(0.0)

    def test_fixed_point_reward_zero(self):
        env = MeanFieldEnv()
        env.reset(state=PhaseState(0.0, 1.0))
        res = env.step(2.0)
        assert res.reward == 0.0
        assert res.info["rho0"] == 0.0

    def test_action_clipped_and_recorded(self):
        env = MeanFieldEnv()
        env.reset()
        res = env.step(99.0)
        assert res.info["q"] == 6.0
        with pytest.raises(ValueError):
            env.step(np.nan)

    def test_observation_continuity(self):
        env = MeanFieldEnv()
        obs = env.reset(state=PhaseState(0.5, 6.2))  # crosses the 2*pi seam
        for _ in range(30):
            nxt, *_ = env.step(-2.0)
            # max |d obs/dt| is bounded by the dynamics; no wrap jumps
            assert np.linalg.norm(nxt - obs) < 30.0 * env.dt
            obs = nxt

    def test_episode_determinism(self):
        def run():
            env = MeanFieldEnv(init="random", seed=5)
            obs = env.reset()
            out = [obs]
            for i in range(100):
                out.append(env.step(np.sin(i))[:2])
            return out

        a, b = run(), run()
        assert repr(a) == repr(b)

    def test_telescoping_delta_reward(self):
        env = MeanFieldEnv(reward="delta")
        env.reset()
        f0 = env.metric()
        total = 0.0
        rng = np.random.default_rng(8)
        for _ in range(100):
            total += env.step(rng.uniform(-6, 6)).reward
        assert total == pytest.approx(env.metric() - f0, abs=1e-12)


class TestQuantumEnv:
    def test_fixed_reset_observation(self):
        env = QuantumEnv(QuantumConfig(n_atoms=10))
        obs = env.reset()
        assert np.allclose(obs, [1.0, 1.0, 0.0])

    def test_defaults_per_table(self):
        env = QuantumEnv()
        assert env.dt == 0.1 and env.steps == 200
        assert env.q_min == -6.0 and env.q_max == 6.0

    def test_frozen_dynamics_zero_reward_both_forms(self):
        for form in ("log", "delta"):
            env = QuantumEnv(QuantumConfig(n_atoms=6, c2=0.0), reward=form)
            env.reset()
            for _ in range(5):
                assert env.step(1.3).reward == 0.0

    def test_random_init_is_haar_stream(self):
        env = QuantumEnv(QuantumConfig(n_atoms=6), init="random")
        obs = env.reset(rng=np.random.default_rng(12))
        expected = haar_random_state(6, np.random.default_rng(12))
        assert np.allclose(env.state.amps, expected.amps)

    def test_explicit_state_validated(self):
        env = QuantumEnv(QuantumConfig(n_atoms=6))
        with pytest.raises(ValueError):
            env.reset(state=haar_random_state(8, np.random.default_rng(0)))
        bad = [0.6, 0.0, 0.0, 0.0]
        with pytest.raises(ValueError):
            env.reset(state=FockVector(6, bad))

    def test_reward_telescopes_to_final_fidelity(self):
        env = QuantumEnv(QuantumConfig(n_atoms=4, steps=50), reward="delta")
        env.reset()
        total = 0.0
        rng = np.random.default_rng(3)
        done = False
        while not done:
            _, r, done, info = env.step(rng.uniform(-6, 6))
            total += r
        assert total == pytest.approx(info["fidelity"] - 0.0, abs=1e-12)

    def test_obs_trig_identity(self):
        env = QuantumEnv(QuantumConfig(n_atoms=8), init="random")
        obs = env.reset(rng=np.random.default_rng(1))
        for _ in range(20):
            assert obs[1] ** 2 + obs[2] ** 2 == pytest.approx(1.0, abs=1e-9)
            assert 0.0 <= obs[0] <= 1.0
            obs = env.step(np.random.default_rng(2).uniform(-6, 6)).obs


class TestMakeEnv:
    def test_meanfield_spec(self):
        env = make_env({"system": "meanfield", "c2": -1.0, "dt": 0.05,
                        "steps": 100, "substeps": 5, "q_min": -6.0, "q_max": 6.0,
                        "reward": "log", "init": "fixed", "seed": 0})
        assert isinstance(env, MeanFieldEnv)
        assert isinstance(env.cfg, MeanFieldConfig)

    def test_quantum_spec(self):
        env = make_env({"system": "quantum", "n_atoms": 4})
        assert isinstance(env, QuantumEnv)
        assert env.cfg.n_atoms == 4

    def test_unknown_system_rejected(self):
        with pytest.raises(ValueError):
            make_env({"system": "spins"})
        with pytest.raises(ValueError):
            make_env({})

    def test_bad_reward_rejected(self):
        with pytest.raises(ValueError):
            make_env({"system": "quantum", "reward": "sparse"})
