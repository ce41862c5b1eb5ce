"""Episodic control environments over the mean-field and quantum dynamics.

Both systems expose the same interface: observations are the trig-encoded
observables (rho0, cos(theta_s), sin(theta_s)), actions are the quadratic
Zeeman value held constant over one control interval (clipped to bounds on
entry), and rewards are shaped from the per-step change of a fidelity-like
progress metric.  The mean-field target rho0 = 0 uses 1 - rho0 as its
fidelity analog.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import meanfield as mf
from . import quantum as qm

REWARD_FORMS = ("log", "delta")
INIT_MODES = ("fixed", "random")

# Infidelities are floored here so the log-form reward stays finite as the
# state reaches the target exactly.
INFIDELITY_FLOOR = 1e-10


class StepResult(NamedTuple):
    obs: np.ndarray
    reward: float
    done: bool
    info: dict


def reward_delta(f_prev: float, f_cur: float) -> float:
    """Instantaneous fidelity change; episode sums telescope to F_end - F_0."""
    return f_cur - f_prev


def reward_log(f_prev: float, f_cur: float, floor: float = INFIDELITY_FLOOR) -> float:
    """-log of the infidelity ratio: equal reward per decade of infidelity.

    Keeps the learning signal strong near the target; infidelities are
    floored to keep the value finite at exact arrival.
    """
    return float(np.log(max(1.0 - f_prev, floor)) - np.log(max(1.0 - f_cur, floor)))


def meanfield_progress(rho_prev: float, rho_cur: float, form: str = "delta") -> float:
    """Reward on the mean-field fidelity analog 1 - rho0."""
    if form == "delta":
        return reward_delta(1.0 - rho_prev, 1.0 - rho_cur)
    if form == "log":
        return reward_log(1.0 - rho_prev, 1.0 - rho_cur)
    raise ValueError(f"unknown reward form {form!r}")


def _encode(rho0: float, theta_s: float) -> np.ndarray:
    return np.array([rho0, np.cos(theta_s), np.sin(theta_s)])


class _ControlEnv:
    """Shared episode lifecycle; subclasses provide the dynamics."""

    obs_dim = 3

    def __init__(self, q_min, q_max, dt, steps, reward, init, seed):
        if reward not in REWARD_FORMS:
            raise ValueError(f"reward must be one of {REWARD_FORMS}, got {reward!r}")
        if init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}, got {init!r}")
        self.q_min = float(q_min)
        self.q_max = float(q_max)
        self.dt = float(dt)
        self.steps = int(steps)
        self.reward_form = reward
        self.init_mode = init
        self._rng = np.random.default_rng(np.random.SeedSequence(seed))
        self._state = None
        self._i = 0

    @property
    def state(self):
        return self._state

    @property
    def step_index(self) -> int:
        return self._i

    @property
    def done(self) -> bool:
        return self._i >= self.steps

    def reset(self, state=None, rng=None) -> np.ndarray:
        rng = self._rng if rng is None else rng
        if state is not None:
            self._state = self._check_state(state)
        elif self.init_mode == "fixed":
            self._state = self._fixed_state()
        else:
            self._state = self._random_state(rng)
        self._i = 0
        return self.observe()

    def step(self, action) -> StepResult:
        if self._state is None:
            raise RuntimeError("step() before reset()")
        if self.done:
            raise RuntimeError("episode finished; call reset()")
        if not np.isfinite(action):
            raise ValueError(f"action must be finite, got {action}")
        q = float(np.clip(action, self.q_min, self.q_max))
        prev = self.state_metric(self._state)
        self._state = self.dynamics_step(self._state, q)
        cur = self.state_metric(self._state)
        if self.reward_form == "delta":
            reward = reward_delta(prev, cur)
        else:
            reward = reward_log(prev, cur)
        self._i += 1
        info = self._info(cur)
        info["q"] = q
        return StepResult(self.observe(), reward, self.done, info)

    def metric(self) -> float:
        """Current value of the fidelity-like progress metric."""
        return self.state_metric(self._state)

    def preview_metric(self, q) -> float:
        """Metric after one hypothetical step at q; does not mutate the env."""
        q = float(np.clip(q, self.q_min, self.q_max))
        return self.state_metric(self.dynamics_step(self._state, q))

    # Subclass hooks.

    def _fixed_state(self):
        raise NotImplementedError

    def _random_state(self, rng):
        raise NotImplementedError

    def _check_state(self, state):
        raise NotImplementedError

    def dynamics_step(self, state, q):
        raise NotImplementedError

    def state_metric(self, state) -> float:
        raise NotImplementedError

    def observe(self) -> np.ndarray:
        raise NotImplementedError

    def _info(self, metric) -> dict:
        raise NotImplementedError


class MeanFieldEnv(_ControlEnv):
    """Mean-field pendulum steered toward rho0 = 0.

    Fixed episodes start from (theta_s, rho0) = (0.0, 0.9); random episodes
    draw theta_s uniform on [0, 2*pi) and rho0 uniform on (0.05, 0.95),
    keeping clear of the rho0 in {0, 1} fixed points where the control has
    no effect.
    """

    def __init__(self, cfg: mf.MeanFieldConfig | None = None, reward="log",
                 init="fixed", seed=0):
        self.cfg = cfg if cfg is not None else mf.MeanFieldConfig()
        super().__init__(self.cfg.q_min, self.cfg.q_max, self.cfg.dt,
                         self.cfg.steps, reward, init, seed)

    def _fixed_state(self):
        return mf.PhaseState(rho0=0.9, theta_s=0.0)

    def _random_state(self, rng):
        theta = rng.uniform(0.0, mf.TWO_PI)
        rho0 = rng.uniform(0.05, 0.95)
        return mf.PhaseState(rho0, theta)

    def _check_state(self, state):
        if not isinstance(state, mf.PhaseState):
            raise ValueError("explicit state must be a PhaseState")
        return state

    def dynamics_step(self, state, q):
        return mf.advance(state, q, self.cfg)

    def state_metric(self, state) -> float:
        return 1.0 - state.rho0

    def observe(self) -> np.ndarray:
        return _encode(self._state.rho0, self._state.theta_s)

    def record_state(self):
        return self._state.rho0, self._state.theta_s

    def _info(self, metric) -> dict:
        return {"rho0": self._state.rho0, "fidelity": metric}


@dataclass(frozen=True)
class QuantumConfig:
    """Many-body system size, interaction and episode discretization."""

    n_atoms: int = 10
    c2: float = -1.0
    q_min: float = -6.0
    q_max: float = 6.0
    dt: float = 0.1
    steps: int = 200

    def __post_init__(self):
        n = int(self.n_atoms)
        if n <= 0 or n % 2 != 0:
            raise ValueError(f"n_atoms must be a positive even integer, got {self.n_atoms}")
        if self.q_min >= self.q_max:
            raise ValueError(f"q_min must be < q_max, got [{self.q_min}, {self.q_max}]")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.steps <= 0:
            raise ValueError(f"steps must be positive, got {self.steps}")


class QuantumEnv(_ControlEnv):
    """Exact many-body spin dynamics steered toward the twin-Fock state.

    Fixed episodes start from |0, N, 0>; random episodes draw a Haar-random
    state in the F_z=0 subspace.  The reward metric is the fidelity with
    |N/2, 0, N/2>.
    """

    def __init__(self, cfg: QuantumConfig | None = None, reward="log",
                 init="fixed", seed=0):
        self.cfg = cfg if cfg is not None else QuantumConfig()
        super().__init__(self.cfg.q_min, self.cfg.q_max, self.cfg.dt,
                         self.cfg.steps, reward, init, seed)
        self.target = qm.twin_fock(self.cfg.n_atoms)

    def _fixed_state(self):
        return qm.polar_state(self.cfg.n_atoms)

    def _random_state(self, rng):
        return qm.haar_random_state(self.cfg.n_atoms, rng)

    def _check_state(self, state):
        if not isinstance(state, qm.FockVector):
            raise ValueError("explicit state must be a FockVector")
        if state.n_atoms != self.cfg.n_atoms:
            raise ValueError(
                f"state has N={state.n_atoms}, env expects N={self.cfg.n_atoms}"
            )
        return state

    def dynamics_step(self, state, q):
        return qm.propagate(state, q, self.cfg.c2, self.cfg.dt)

    def state_metric(self, state) -> float:
        return qm.fidelity(state, self.target)

    def observe(self) -> np.ndarray:
        obs = qm.observables(self._state)
        return _encode(obs.rho0, obs.theta_s)

    def record_state(self):
        obs = qm.observables(self._state)
        return obs.rho0, obs.theta_s

    def _info(self, metric) -> dict:
        return {"fidelity": metric}


def make_env(spec: dict):
    """Build an environment from a flat spec dict (the config-file block)."""
    spec = dict(spec)
    try:
        system = spec.pop("system")
    except KeyError:
        raise ValueError("env spec needs a 'system' field") from None
    reward = spec.pop("reward", "log")
    init = spec.pop("init", "fixed")
    seed = spec.pop("seed", 0)
    if system == "meanfield":
        return MeanFieldEnv(mf.MeanFieldConfig(**spec), reward, init, seed)
    if system == "quantum":
        return QuantumEnv(QuantumConfig(**spec), reward, init, seed)
    raise ValueError(f"unknown system {system!r}")
