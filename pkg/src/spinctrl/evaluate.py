"""Rollout drivers, phase-space policy maps, noise statistics, N-transfer.

All exports are plot-ready arrays/CSV; no figure rendering here.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .envs import make_env
from .ppo import ActorCritic

_FMT = "%.17g"  # full double precision, so identical runs give identical files


def _write_csv(path, header: str, columns) -> None:
    data = np.column_stack(columns)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in data:
            fh.write(",".join(_FMT % x for x in row) + "\n")


@dataclass
class RunRecord:
    """Time series of one episode: control applied and resulting observables.

    Row i holds the state at t[i]; q[i] is the control applied over
    [t[i], t[i+1]) (the final row repeats the last control so staircase
    plots close).  fidelity holds 1 - rho0 for the mean-field system.
    """

    t: np.ndarray
    q: np.ndarray
    rho0: np.ndarray
    theta_s: np.ndarray
    fidelity: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        for name in ("q", "rho0", "theta_s", "fidelity"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has wrong length")
        if n >= 2 and np.any(np.diff(self.t) <= 0):
            raise ValueError("t must be strictly increasing")

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelity[-1])

    def write_csv(self, path) -> None:
        _write_csv(path, "t,q,rho0,theta_s,fidelity",
                   (self.t, self.q, self.rho0, self.theta_s, self.fidelity))


def _as_controller(policy, deterministic, rng):
    if isinstance(policy, ActorCritic):
        if deterministic:
            return policy.mean_action
        if rng is None:
            raise ValueError("stochastic rollout needs an rng")
        return lambda obs: policy.sample(obs, rng)[0]
    if callable(policy):
        return policy
    raise TypeError(f"policy must be an ActorCritic or a callable, got {type(policy)}")


def rollout(env, policy, deterministic=True, rng=None, state=None,
            noise_sigma=0.0, noise_rng=None) -> RunRecord:
    """Run one episode and record (t, q, rho0, theta_s, fidelity).

    policy is an ActorCritic (mean action when deterministic, sampled
    otherwise) or any callable obs -> q.  noise_sigma > 0 adds independent
    Gaussian perturbations to each applied control (clipped to bounds).
    """
    controller = _as_controller(policy, deterministic, rng)
    if noise_sigma > 0.0 and noise_rng is None:
        if rng is None:
            raise ValueError("noisy rollout needs noise_rng (or rng)")
        noise_rng = rng
    obs = env.reset(state=state, rng=rng)
    n = env.steps
    t = np.arange(n + 1) * env.dt
    qs = np.empty(n + 1)
    rho0 = np.empty(n + 1)
    theta = np.empty(n + 1)
    fid = np.empty(n + 1)
    rho0[0], theta[0] = env.record_state()
    fid[0] = env.metric()
    for i in range(n):
        q = float(controller(obs))
        if noise_sigma > 0.0:
            q += noise_sigma * noise_rng.standard_normal()
        obs, _, _, info = env.step(q)
        qs[i] = info["q"]
        rho0[i + 1], theta[i + 1] = env.record_state()
        fid[i + 1] = info["fidelity"]
    qs[n] = qs[n - 1]
    return RunRecord(t, qs, rho0, theta, fid)


@dataclass
class PolicyMap:
    """Actor mean on a (theta_s, rho0) grid; values lie in [q_min, q_max]."""

    theta_s: np.ndarray
    rho0: np.ndarray
    q_mean: np.ndarray  # shape (len(rho0), len(theta_s))

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("rho0," + ",".join(_FMT % x for x in self.theta_s) + "\n")
            for r, row in zip(self.rho0, self.q_mean):
                fh.write(_FMT % r + "," + ",".join(_FMT % x for x in row) + "\n")


def policy_map(ac: ActorCritic, n_theta: int = 101, n_rho: int = 101) -> PolicyMap:
    """Evaluate the deterministic policy on a phase-space grid."""
    if n_theta < 2 or n_rho < 2:
        raise ValueError("grid sizes must be >= 2")
    theta = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    rho = np.linspace(0.0, 1.0, n_rho)
    tt, rr = np.meshgrid(theta, rho)
    obs = np.column_stack([rr.ravel(), np.cos(tt).ravel(), np.sin(tt).ravel()])
    q = ac.mean_action(obs).reshape(n_rho, n_theta)
    return PolicyMap(theta, rho, q)


@dataclass
class NoiseReport:
    """Fidelity statistics under control noise q_t = clip(mu_t + sigma*eta_t)."""

    t: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    sigma: float
    n_samples: int
    fidelities: np.ndarray  # (n_samples, steps+1)

    def write_csv(self, path) -> None:
        _write_csv(path, "t,mean_fidelity,std_fidelity", (self.t, self.mean, self.std))


def _noise_rng(seed: int, sample: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2, sample)))


def _noise_task(args):
    env, ac, sigma, seed, sample = args
    rng = _noise_rng(seed, sample)
    rec = rollout(env, ac, deterministic=True, rng=rng,
                  noise_sigma=sigma, noise_rng=rng)
    return rec.t, rec.fidelity


def noise_eval(env, ac: ActorCritic, sigma: float, n_samples: int = 100,
               seed: int = 0, workers: int = 1) -> NoiseReport:
    """Per-time fidelity mean/std over trajectories with perturbed controls.

    Each step applies the policy mean plus an independent Gaussian draw of
    width sigma (clipped to the control bounds).  std uses the unbiased
    (n-1) estimator; it is identically zero for a single sample.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    tasks = [(env, ac, sigma, seed, s) for s in range(n_samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_noise_task, tasks))
    else:
        results = [_noise_task(t) for t in tasks]
    t = results[0][0]
    fids = np.stack([f for _, f in results])
    mean = fids.mean(axis=0)
    if n_samples > 1:
        std = fids.std(axis=0, ddof=1)
        # identical samples have exactly zero spread; don't let the one-ulp
        # rounding of the column mean leak into the estimate
        std[fids.max(axis=0) == fids.min(axis=0)] = 0.0
    else:
        std = np.zeros_like(mean)
    return NoiseReport(t, mean, std, sigma, n_samples, fids)


def generalize(ac: ActorCritic, env_spec: dict, n_list) -> list[tuple[int, float]]:
    """Final fidelity of a fixed policy on systems rebuilt at each atom number.

    Works because the observation features (rho0, cos, sin of theta_s) have
    the same dimension for every N.
    """
    if env_spec.get("system") != "quantum":
        raise ValueError("generalization runs need a quantum env spec")
    results = []
    for n in n_list:
        n = int(n)
        if n <= 0 or n % 2 != 0:
            raise ValueError(f"n_atoms must be positive and even, got {n}")
        env = make_env({**env_spec, "n_atoms": n})
        rec = rollout(env, ac, deterministic=True)
        results.append((n, rec.final_fidelity))
    return results
