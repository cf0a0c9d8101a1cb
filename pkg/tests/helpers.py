"""Shared shortcuts for exercising the trainer at test scale."""

import numpy as np

import oracles
from rpolab.envs import make_env
from rpolab.rollout import Collector, GaeConfig, RolloutBuffer, compute_gae
from rpolab.trainer import ActorCritic, RngStreams, TrainConfig


def gae_max_abs_err(num_steps=200, num_envs=50, seed=123,
                    gamma=0.97, lam=0.9, done_prob=0.05) -> float:
    """Worst advantage deviation from the definition-level double sum."""
    rng = np.random.default_rng(seed)
    buf = RolloutBuffer.empty(num_steps, num_envs, obs_dim=1, act_dim=1)
    buf.rewards = rng.standard_normal((num_steps, num_envs))
    buf.values = rng.standard_normal((num_steps, num_envs))
    buf.dones = (rng.uniform(size=(num_steps, num_envs)) < done_prob).astype(float)
    bootstrap = rng.standard_normal(num_envs)
    compute_gae(buf, GaeConfig(gamma, lam), bootstrap)
    expected = oracles.gae_direct(buf.rewards, buf.values, buf.dones,
                                  bootstrap, gamma, lam)
    return float(np.abs(buf.advantages - expected).max())


def tiny_cfg(**overrides) -> TrainConfig:
    """A config small enough for sub-second training runs."""
    base = dict(
        total_timesteps=128,
        num_steps=64,
        num_envs=1,
        num_minibatches=4,
        update_epochs=2,
        rpo_alpha=0.0,
        seed=7,
    )
    base.update(overrides)
    return TrainConfig(**base)


def collected_batch(cfg: TrainConfig, env_name: str = "pointmass"):
    """Agent, one finalized rollout buffer, and the streams that built them."""
    streams = RngStreams.from_seed(cfg.seed, cfg.num_envs)
    envs = [make_env(env_name) for _ in range(cfg.num_envs)]
    spaces = envs[0].spaces()
    agent = ActorCritic(spaces.obs_dim, spaces.action_dim, cfg.dist_family,
                        streams.init)
    collector = Collector(envs, streams.envs)
    buf, next_obs, _ = collector.collect(agent, cfg.num_steps, streams.action)
    compute_gae(buf, GaeConfig(cfg.gamma, cfg.lam),
                agent.value_forward(next_obs)[0])
    return agent, buf, streams
