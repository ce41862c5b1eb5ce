"""Proximal policy optimization with a tanh-squashed Gaussian actor.

The actor MLP ends in a tanh whose output is affinely mapped onto the
control range [q_min, q_max]; a state-independent learnable log-std sets
the exploration width.  Updates maximize the clipped surrogate objective
with approximate-KL early stopping, advantages come from GAE(lambda), and
both networks are trained with Adam.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

import numpy as np

from .nets import Adam, Mlp

LOG_TWO_PI = float(np.log(2.0 * np.pi))
LOG_STD_BOUNDS = (-5.0, 2.0)


def gaussian_logp(x, mean, log_std):
    """Log density of Normal(mean, exp(log_std)^2) at x (elementwise)."""
    z = (x - mean) * np.exp(-log_std)
    return -0.5 * z * z - log_std - 0.5 * LOG_TWO_PI


@dataclass
class TrainConfig:
    """PPO hyperparameters; defaults fit the mean-field system."""

    hidden: tuple = (32, 16)
    gamma: float = 0.999
    lr_actor: float = 3e-4
    lr_critic: float = 1e-3
    target_kl: float = 0.01
    clip_ratio: float = 0.2
    gae_lambda: float = 0.97
    epochs_per_update: int = 80
    episodes_per_epoch: int = 4
    total_epochs: int = 200
    seed: int = 0
    workers: int = 1
    log_std_init: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError(f"gae_lambda must be in [0, 1], got {self.gae_lambda}")
        if self.lr_actor <= 0 or self.lr_critic <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 < self.clip_ratio < 1.0:
            raise ValueError(f"clip_ratio must be in (0, 1), got {self.clip_ratio}")
        if self.target_kl < 0:
            raise ValueError(f"target_kl must be >= 0, got {self.target_kl}")
        for name in ("epochs_per_update", "episodes_per_epoch", "total_epochs",
                     "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        self.hidden = tuple(int(h) for h in self.hidden)
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValueError(f"hidden sizes must be positive, got {self.hidden}")


class ActorCritic:
    """Gaussian policy over a bounded scalar control, plus a value net."""

    def __init__(self, obs_dim: int, hidden, q_min: float, q_max: float,
                 rng: np.random.Generator, log_std_init: float = 0.0):
        if q_min >= q_max:
            raise ValueError(f"q_min must be < q_max, got [{q_min}, {q_max}]")
        self.obs_dim = obs_dim
        self.q_min = float(q_min)
        self.q_max = float(q_max)
        sizes = [obs_dim, *hidden, 1]
        # Small final gain keeps the initial mean near the center of the
        # control range.
        self.actor = Mlp(sizes, rng, out_activation="tanh", final_gain=0.01)
        self.critic = Mlp(sizes, rng, out_activation="linear")
        self.log_std = np.array([float(log_std_init)])
        self._actor_opt = None
        self._critic_opt = None

    @property
    def _center(self):
        return 0.5 * (self.q_max + self.q_min)

    @property
    def _half(self):
        return 0.5 * (self.q_max - self.q_min)

    def mean_action(self, obs):
        """Deterministic action: tanh actor output mapped onto [q_min, q_max]."""
        single = np.ndim(obs) == 1
        out = self.actor(obs)[:, 0]
        mu = self._center + self._half * out
        return float(mu[0]) if single else mu

    def sample(self, obs, rng: np.random.Generator):
        """Draw an action; returns (clipped action, logp of the raw draw, raw draw)."""
        mu = self.mean_action(obs)
        std = float(np.exp(self.log_std[0]))
        raw = rng.normal(mu, std)
        logp = float(gaussian_logp(raw, mu, self.log_std[0]))
        return float(np.clip(raw, self.q_min, self.q_max)), logp, float(raw)

    def value(self, obs):
        single = np.ndim(obs) == 1
        v = self.critic(obs)[:, 0]
        return float(v[0]) if single else v

    def logp_of(self, obs, actions):
        """Batch log-likelihood of actions; also returns the forward cache."""
        out, cache = self.actor.forward(obs)
        mu = self._center + self._half * out[:, 0]
        return gaussian_logp(np.asarray(actions), mu, self.log_std[0]), mu, cache

    # Checkpoint plumbing.

    def state_arrays(self) -> dict:
        arrays = {"log_std": self.log_std}
        for i, (w, b) in enumerate(zip(self.actor.weights, self.actor.biases)):
            arrays[f"actor_w{i}"] = w
            arrays[f"actor_b{i}"] = b
        for i, (w, b) in enumerate(zip(self.critic.weights, self.critic.biases)):
            arrays[f"critic_w{i}"] = w
            arrays[f"critic_b{i}"] = b
        return arrays

    def load_state_arrays(self, arrays) -> None:
        self.log_std = np.array(arrays["log_std"], dtype=np.float64)
        for i in range(self.actor.n_layers):
            self.actor.weights[i] = np.array(arrays[f"actor_w{i}"], dtype=np.float64)
            self.actor.biases[i] = np.array(arrays[f"actor_b{i}"], dtype=np.float64)
        for i in range(self.critic.n_layers):
            self.critic.weights[i] = np.array(arrays[f"critic_w{i}"], dtype=np.float64)
            self.critic.biases[i] = np.array(arrays[f"critic_b{i}"], dtype=np.float64)


def compute_gae(rewards, values, gamma: float, lam: float):
    """Generalized advantage estimation.

    values must hold one more entry than rewards (the bootstrap value of
    the state after the last transition).  Returns raw (unnormalized)
    advantages and the value-regression targets advantages + values[:-1].
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != rewards.shape[0] + 1:
        raise ValueError(
            f"values must have len(rewards)+1 entries, got {values.shape[0]} "
            f"for {rewards.shape[0]} rewards"
        )
    deltas = rewards + gamma * values[1:] - values[:-1]
    advantages = np.empty_like(deltas)
    acc = 0.0
    for t in range(len(deltas) - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        advantages[t] = acc
    return advantages, advantages + values[:-1]


@dataclass
class Episode:
    """One episode of experience; actions are the raw pre-clip draws."""

    obs: np.ndarray
    actions: np.ndarray
    logps: np.ndarray
    rewards: np.ndarray
    values: np.ndarray  # len(rewards)+1, terminal bootstrap included
    final_info: dict = field(default_factory=dict)


class TransitionBuffer:
    """Episodes collected under one policy snapshot, consumed by ppo_update."""

    def __init__(self):
        self.episodes: list[Episode] = []

    def add(self, episode: Episode) -> None:
        self.episodes.append(episode)

    def __len__(self) -> int:
        return len(self.episodes)

    def assemble(self, gamma: float, lam: float):
        """Stack episodes; GAE is computed per episode before concatenation."""
        if not self.episodes:
            raise ValueError("buffer is empty")
        advs, rets = [], []
        for ep in self.episodes:
            a, r = compute_gae(ep.rewards, ep.values, gamma, lam)
            advs.append(a)
            rets.append(r)
        return {
            "obs": np.concatenate([ep.obs for ep in self.episodes]),
            "actions": np.concatenate([ep.actions for ep in self.episodes]),
            "logps": np.concatenate([ep.logps for ep in self.episodes]),
            "advantages": np.concatenate(advs),
            "returns": np.concatenate(rets),
        }


class UpdateStats(NamedTuple):
    policy_loss: float
    value_loss: float
    approx_kl: float
    stop_epoch: int


def ppo_update(buffer: TransitionBuffer, ac: ActorCritic,
               cfg: TrainConfig) -> UpdateStats:
    """One PPO update over the buffer.

    The policy loop stops before the epoch whose measured approximate KL
    (mean of logp_old - logp_new) exceeds target_kl; the critic always runs
    the full epochs_per_update regression iterations.  Reported losses are
    the pre-update values.
    """
    data = buffer.assemble(cfg.gamma, cfg.gae_lambda)
    obs = data["obs"]
    actions = data["actions"]
    logp_old = data["logps"]
    adv = data["advantages"]
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    returns = data["returns"]
    n = len(actions)

    if ac._actor_opt is None:
        ac._actor_opt = Adam(ac.actor.params() + [ac.log_std], cfg.lr_actor)
        ac._critic_opt = Adam(ac.critic.params(), cfg.lr_critic)

    lo, hi = 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio
    policy_loss0 = 0.0
    approx_kl = 0.0
    stop_epoch = cfg.epochs_per_update
    for epoch in range(cfg.epochs_per_update):
        logp_new, mu, cache = ac.logp_of(obs, actions)
        approx_kl = float(np.mean(logp_old - logp_new))
        if approx_kl > cfg.target_kl:
            stop_epoch = epoch
            break
        ratio = np.exp(logp_new - logp_old)
        surr1 = ratio * adv
        surr2 = np.clip(ratio, lo, hi) * adv
        if epoch == 0:
            policy_loss0 = float(-np.mean(np.minimum(surr1, surr2)))
        # d(loss)/d(logp): gradient only flows where the unclipped branch
        # is the active minimum.
        active = surr1 <= surr2
        dlogp = np.where(active, -ratio * adv / n, 0.0)
        std = np.exp(ac.log_std[0])
        z = (actions - mu) / std
        dmu = dlogp * z / std
        dlog_std = float(np.sum(dlogp * (z * z - 1.0)))
        grads_net, _ = ac.actor.backward(cache, (dmu * ac._half)[:, None])
        grads = ac.actor.flat_grads(grads_net) + [np.array([dlog_std])]
        ac._actor_opt.step(ac.actor.params() + [ac.log_std], grads)
        np.clip(ac.log_std, *LOG_STD_BOUNDS, out=ac.log_std)

    value_loss0 = 0.0
    for epoch in range(cfg.epochs_per_update):
        v, cache = ac.critic.forward(obs)
        err = v[:, 0] - returns
        if epoch == 0:
            value_loss0 = float(np.mean(err * err))
        grads_net, _ = ac.critic.backward(cache, (2.0 * err / n)[:, None])
        ac._critic_opt.step(ac.critic.params(), ac.critic.flat_grads(grads_net))

    return UpdateStats(policy_loss0, value_loss0, approx_kl, stop_epoch)


def _episode_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(1, epoch, index))
    )


def init_rng(seed: int) -> np.random.Generator:
    """Network-initialization stream of the root seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))


def collect_episode(env, ac: ActorCritic, rng: np.random.Generator) -> Episode:
    """Run one episode, sampling from the policy; values are filled in batch."""
    obs = env.reset(rng=rng)
    obs_list = [obs]
    actions, logps, rewards = [], [], []
    info = {}
    done = False
    while not done:
        _, logp, raw = ac.sample(obs, rng)
        obs, reward, done, info = env.step(raw)
        obs_list.append(obs)
        actions.append(raw)
        logps.append(logp)
        rewards.append(reward)
    obs_arr = np.asarray(obs_list[:-1], dtype=np.float64)
    values = np.append(ac.value(obs_arr), 0.0)  # true terminal: no reward after
    return Episode(obs_arr, np.asarray(actions), np.asarray(logps),
                   np.asarray(rewards), values, dict(info))


def _episode_task(args):
    env, ac, seed, epoch, index = args
    return collect_episode(env, ac, _episode_rng(seed, epoch, index))


CURVE_COLUMNS = ("epoch", "mean_return", "mean_final_fidelity", "approx_kl")


@dataclass
class TrainResult:
    ac: ActorCritic
    curve: np.ndarray  # (total_epochs, 4) per CURVE_COLUMNS


def train(env_factory, cfg: TrainConfig, progress=None) -> TrainResult:
    """Train PPO on episodes from env_factory().

    Episode randomness derives from (cfg.seed, epoch, episode index), so a
    run is reproducible for a fixed config regardless of worker count.
    Curve rows hold the undiscounted mean episode return, the mean final
    fidelity of the sampled episodes, and the last measured approximate KL.
    """
    env = env_factory()
    ac = ActorCritic(env.obs_dim, cfg.hidden, env.q_min, env.q_max,
                     init_rng(cfg.seed), cfg.log_std_init)
    curve = np.zeros((cfg.total_epochs, len(CURVE_COLUMNS)))
    pool = None
    try:
        if cfg.workers > 1:
            pool = ProcessPoolExecutor(max_workers=cfg.workers)
        for epoch in range(cfg.total_epochs):
            buffer = TransitionBuffer()
            if pool is None:
                for i in range(cfg.episodes_per_epoch):
                    buffer.add(collect_episode(env, ac, _episode_rng(cfg.seed, epoch, i)))
            else:
                tasks = [(env, ac, cfg.seed, epoch, i)
                         for i in range(cfg.episodes_per_epoch)]
                for ep in pool.map(_episode_task, tasks):
                    buffer.add(ep)
            mean_return = float(np.mean([ep.rewards.sum() for ep in buffer.episodes]))
            mean_fid = float(np.mean([ep.final_info.get("fidelity", np.nan)
                                      for ep in buffer.episodes]))
            stats = ppo_update(buffer, ac, cfg)
            curve[epoch] = (epoch, mean_return, mean_fid, stats.approx_kl)
            if progress is not None:
                progress(epoch, mean_return, mean_fid, stats)
    finally:
        if pool is not None:
            pool.shutdown()
    return TrainResult(ac, curve)


CHECKPOINT_VERSION = 1


def save_checkpoint(path, ac: ActorCritic, cfg: TrainConfig, env_spec: dict) -> None:
    """Versioned npz dump of policy weights, train config and env spec."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "train": asdict(cfg),
        "env": dict(env_spec),
        "obs_dim": ac.obs_dim,
        "q_min": ac.q_min,
        "q_max": ac.q_max,
    }
    np.savez(path, meta=np.array(json.dumps(meta)), **ac.state_arrays())


def load_checkpoint(path):
    """Returns (ac, cfg, env_spec) from a save_checkpoint file."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        cfg = TrainConfig(**{**meta["train"], "hidden": tuple(meta["train"]["hidden"])})
        ac = ActorCritic(meta["obs_dim"], cfg.hidden, meta["q_min"], meta["q_max"],
                         np.random.default_rng(0), cfg.log_std_init)
        ac.load_state_arrays(data)
    return ac, cfg, meta["env"]
