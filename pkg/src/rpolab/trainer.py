"""Clipped-surrogate policy optimization with optional mean perturbation.

One update pass recomputes the action distribution for every stored state
and, when the perturbation half-width alpha is positive, shifts each
recomputed mean by a fresh z ~ U(-alpha, alpha) before evaluating the new
log-probabilities. Old log-probabilities were recorded at collection time
from the unperturbed distribution and are never revisited, so alpha = 0
collapses the whole procedure onto plain PPO, bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import distributions as dists
from .augmentation import AugConfig, drac_regularizer, rad_update_hook
from .envs import make_env
from .errors import ConfigError, TrainingDiverged
from .metrics import MetricRow
from .nn import Adam, Mlp, ParameterStore, clip_grad_norm
from .rollout import Collector, GaeConfig, RolloutBuffer, compute_gae, normalize_advantages

Array = np.ndarray

HIDDEN_WIDTH = 64
ENT_COEF_PRESETS = (0.0, 0.01, 0.05, 0.5, 1.0, 10.0)


@dataclass
class TrainConfig:
    total_timesteps: int
    num_steps: int = 2048
    num_envs: int = 1
    learning_rate: float = 3e-4
    gamma: float = 0.99
    lam: float = 0.95
    num_minibatches: int = 32
    update_epochs: int = 10
    clip_coef: float = 0.2
    clip_value_loss: bool = True
    value_coef: float = 0.5
    ent_coef: float = 0.0
    rpo_alpha: float = 0.5
    dist_family: str = "gaussian"
    aug_mode: str = "none"
    aug: AugConfig | None = None
    max_grad_norm: float = 0.5
    seed: int = 1
    rpo_cache_z: bool = False
    # Linear decay to ~0 over the step budget, as in the reference recipe
    # these defaults come from; disable for a fixed learning rate.
    anneal_lr: bool = True

    def __post_init__(self):
        dists.get_family(self.dist_family)
        if self.clip_coef <= 0.0:
            raise ConfigError("clip_coef must be positive")
        if self.rpo_alpha < 0.0:
            raise ConfigError("rpo_alpha must be >= 0")
        if self.num_steps < 1 or self.num_envs < 1:
            raise ConfigError("num_steps and num_envs must be >= 1")
        if self.update_epochs < 1:
            raise ConfigError("update_epochs must be >= 1")
        batch = self.num_steps * self.num_envs
        if self.num_minibatches < 1 or batch % self.num_minibatches != 0:
            raise ConfigError(
                f"num_minibatches={self.num_minibatches} must divide "
                f"num_steps*num_envs={batch}"
            )
        if self.total_timesteps < batch:
            raise ConfigError("total_timesteps must cover at least one rollout batch")
        if self.aug_mode != "none" and self.aug is None:
            self.aug = AugConfig(mode=self.aug_mode)
        if self.aug is not None and self.aug.mode != self.aug_mode:
            raise ConfigError("aug.mode disagrees with aug_mode")
        if self.aug_mode == "drac":
            # Fail now, not mid-run: drac needs a closed-form policy KL.
            from .augmentation import kl_closed_form

            kl_closed_form(self.dist_family, 1.0, 1.0, 1.0, 1.0)

    @property
    def batch_size(self) -> int:
        return self.num_steps * self.num_envs

    @property
    def minibatch_size(self) -> int:
        return self.batch_size // self.num_minibatches


@dataclass
class LossReport:
    policy_loss: float
    value_loss: float
    entropy_bonus: float
    approx_kl: float
    clip_fraction: float
    degenerate_minibatches: int = 0


@dataclass
class RngStreams:
    """Independent deterministic streams derived from one run seed.

    Keeping augmentation and perturbation draws off the main streams means
    a disabled feature consumes nothing, which is what makes the various
    bitwise-equivalence guarantees hold.
    """

    init: np.random.Generator
    action: np.random.Generator
    update: np.random.Generator
    rpo: np.random.Generator
    aug: np.random.Generator
    envs: list[np.random.Generator] = field(default_factory=list)

    @classmethod
    def from_seed(cls, seed: int, num_envs: int) -> "RngStreams":
        root = np.random.SeedSequence(seed)
        named = [np.random.default_rng(s) for s in root.spawn(5)]
        env_rngs = [np.random.default_rng(s) for s in root.spawn(num_envs)]
        return cls(*named, env_rngs)


class ActorCritic:
    """Policy mean net, global log-scale vector, and value net in one store."""

    log_std_name = "actor/log_std"

    def __init__(self, obs_dim: int, act_dim: int, family: str,
                 rng: np.random.Generator, init_log_std: float = 0.0):
        self.family = family
        self.fam = dists.get_family(family)
        root2 = float(np.sqrt(2.0))
        self.actor = Mlp([obs_dim, HIDDEN_WIDTH, HIDDEN_WIDTH, act_dim],
                         [root2, root2, 0.01], rng)
        self.critic = Mlp([obs_dim, HIDDEN_WIDTH, HIDDEN_WIDTH, 1],
                          [root2, root2, 1.0], rng)
        self.log_std = np.full(act_dim, float(init_log_std))
        self.store = ParameterStore()
        self.actor.register(self.store, "actor")
        self.store.register(self.log_std_name, self.log_std)
        self.critic.register(self.store, "critic")

    def sigma(self) -> Array:
        return np.exp(self.log_std)

    def mean_forward(self, states: Array):
        return self.actor.forward(states)

    def value_forward(self, states: Array):
        out, cache = self.critic.forward(states)
        return out[:, 0], cache

    def accumulate_mean_grads(self, grads: dict, cache, dmu: Array) -> None:
        layer_grads, _ = self.actor.backward(cache, dmu)
        self.actor.accumulate(grads, "actor", layer_grads)

    def accumulate_value_grads(self, grads: dict, cache, dv: Array) -> None:
        layer_grads, _ = self.critic.backward(cache, dv[:, None])
        self.critic.accumulate(grads, "critic", layer_grads)

    def dist_params(self, states: Array) -> dists.DistParams:
        mu, _ = self.actor.forward(states)
        return dists.DistParams(self.family, mu, self.sigma())

    def act(self, obs: Array, rng: np.random.Generator):
        """Rollout-time sampling from the unperturbed distribution."""
        mu, _ = self.actor.forward(obs)
        sigma = self.sigma()
        actions = self.fam.sample(mu, sigma, rng)
        log_probs = self.fam.log_prob(mu, sigma, actions).sum(axis=-1)
        values = self.critic.forward(obs)[0][:, 0]
        return actions, log_probs, values


def policy_loss(new_logp: Array, old_logp: Array, advantages: Array,
                clip_coef: float) -> tuple[float, Array, dict]:
    """Clipped surrogate loss, its gradient w.r.t. new_logp, and diagnostics.

    loss = -mean(min(ratio * A, clip(ratio, 1-eps, 1+eps) * A)). Whenever
    the clipped branch is the strict minimum the ratio sits outside the
    clip window, so the per-sample gradient is A * ratio on the unclipped
    branch and exactly zero otherwise.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.exp(new_logp - old_logp)
    if not np.isfinite(ratio).all():
        raise TrainingDiverged(
            "non-finite probability ratio in policy update",
            {"max_new_logp": float(np.max(new_logp)), "max_old_logp": float(np.max(old_logp))},
        )
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - clip_coef, 1.0 + clip_coef) * advantages
    loss = -float(np.minimum(surr1, surr2).mean())
    take_unclipped = surr1 <= surr2
    grad = -(take_unclipped * advantages * ratio) / ratio.size
    # ratio can legitimately underflow to 0 under a huge mean perturbation;
    # the resulting infinite KL estimate is reported as-is.
    with np.errstate(divide="ignore"):
        aux = {
            "approx_kl": float(np.mean((ratio - 1.0) - np.log(ratio))),
            "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > clip_coef)),
        }
    return loss, grad, aux


def value_loss(new_values: Array, old_values: Array, returns: Array,
               clip_coef: float, clipped: bool) -> tuple[float, Array]:
    """Half mean squared error against returns, optionally update-clipped.

    Clipped form takes the elementwise max of the raw squared error and
    the squared error of a value constrained to move at most clip_coef
    from its collection-time estimate.
    """
    err = new_values - returns
    if not clipped:
        loss = 0.5 * float(np.mean(err * err))
        return loss, err / err.size
    v_clipped = old_values + np.clip(new_values - old_values, -clip_coef, clip_coef)
    err_clipped = v_clipped - returns
    unclipped_sq = err * err
    clipped_sq = err_clipped * err_clipped
    loss = 0.5 * float(np.mean(np.maximum(unclipped_sq, clipped_sq)))
    # Strictly larger clipped branch implies the value moved outside the
    # window, where d(clipped)/d(new_values) vanishes.
    grad = np.where(unclipped_sq >= clipped_sq, err, 0.0) / err.size
    return loss, grad


def logged_entropy(params: dists.DistParams) -> float:
    """Mean over states of the summed closed-form conditional entropy.

    Uses the unperturbed scale only; the uniform perturbation never
    touches it, so this is the quantity whose trajectory distinguishes
    the perturbed and plain runs.
    """
    per_dim = np.broadcast_to(
        dists.get_family(params.family).entropy(params.scale), params.loc.shape
    )
    return float(per_dim.sum(axis=-1).mean())


def update(agent: ActorCritic, optimizer: Adam, buffer: RolloutBuffer,
           cfg: TrainConfig, streams: RngStreams, lr: float | None = None) -> LossReport:
    """Epochs of shuffled minibatch updates over one finalized rollout."""
    data = buffer.flat()
    batch = data["states"].shape[0]
    mb_size = cfg.minibatch_size
    alpha = cfg.rpo_alpha
    z_cached = None
    if alpha > 0.0 and cfg.rpo_cache_z:
        z_cached = streams.rpo.uniform(-alpha, alpha, size=data["actions"].shape)

    sums = np.zeros(5)  # policy, value, entropy, kl, clipfrac
    degenerate = 0
    passes = 0
    for _ in range(cfg.update_epochs):
        perm = streams.update.permutation(batch)
        for start in range(0, batch, mb_size):
            idx = perm[start:start + mb_size]
            states = data["states"][idx]
            actions = data["actions"][idx]
            adv, degen = normalize_advantages(data["advantages"][idx])
            degenerate += degen

            mu, actor_cache = agent.mean_forward(states)
            # On a diverging run these lines produce inf/nan en route to the
            # typed abort below; keep that path free of numpy warnings.
            with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
                sigma = agent.sigma()
                if alpha > 0.0:
                    z = z_cached[idx] if z_cached is not None else \
                        streams.rpo.uniform(-alpha, alpha, size=mu.shape)
                    loc = mu + z
                else:
                    loc = mu
                new_logp = agent.fam.log_prob(loc, sigma, actions).sum(axis=-1)

            p_loss, d_logp, aux = policy_loss(new_logp, data["log_probs"][idx], adv,
                                              cfg.clip_coef)
            values, critic_cache = agent.value_forward(states)
            v_loss, d_v = value_loss(values, data["values"][idx], data["returns"][idx],
                                     cfg.clip_coef, cfg.clip_value_loss)
            ent = float(agent.fam.entropy(sigma).sum())
            total = p_loss + cfg.value_coef * v_loss - cfg.ent_coef * ent
            if not np.isfinite(total):
                raise TrainingDiverged(
                    "non-finite loss",
                    {"policy_loss": p_loss, "value_loss": v_loss, "entropy": ent},
                )

            grads = agent.store.zeros_like()
            d_loc, d_scale = agent.fam.log_prob_grad(loc, sigma, actions)
            agent.accumulate_mean_grads(grads, actor_cache, d_logp[:, None] * d_loc)
            # Scale reaches the loss through log sigma: chain by sigma, then
            # add the entropy bonus (d entropy / d log sigma = 1 per dim).
            grads[agent.log_std_name] += (d_logp[:, None] * d_scale * sigma).sum(axis=0)
            grads[agent.log_std_name] -= cfg.ent_coef
            agent.accumulate_value_grads(grads, critic_cache, cfg.value_coef * d_v)

            if cfg.aug is not None and cfg.aug.mode == "drac" and cfg.aug.drac_coef > 0.0:
                drac_loss, drac_grads = drac_regularizer(agent, states, cfg.aug, streams.aug)
                total += drac_loss
                for name in grads:
                    grads[name] += drac_grads[name]

            clip_grad_norm(grads, cfg.max_grad_norm)
            optimizer.step(grads, lr)

            sums += (p_loss, v_loss, ent, aux["approx_kl"], aux["clip_fraction"])
            passes += 1

    means = sums / passes
    return LossReport(*(float(m) for m in means),
                      degenerate_minibatches=degenerate)


@dataclass
class TrainResult:
    store: ParameterStore
    history: list[MetricRow]
    agent: ActorCritic


def train(cfg: TrainConfig, env_factory=None, metric_sink=None,
          clock=time.perf_counter, env_name: str | None = None) -> TrainResult:
    """Alternate collect / estimate / update until the step budget is spent.

    ``env_factory`` builds one environment instance per slot; passing
    ``env_name`` instead uses the built-in registry. One MetricRow is
    emitted per iteration to ``metric_sink`` (if given) and to the
    returned history.
    """
    if env_factory is None:
        if env_name is None:
            raise ConfigError("need env_factory or env_name")
        env_factory = lambda: make_env(env_name)  # noqa: E731

    streams = RngStreams.from_seed(cfg.seed, cfg.num_envs)
    envs = [env_factory() for _ in range(cfg.num_envs)]
    spaces = envs[0].spaces()
    agent = ActorCritic(spaces.obs_dim, spaces.action_dim, cfg.dist_family, streams.init)
    optimizer = Adam(agent.store, cfg.learning_rate)
    collector = Collector(envs, streams.envs)
    gae_cfg = GaeConfig(cfg.gamma, cfg.lam)

    iterations = cfg.total_timesteps // cfg.batch_size
    history: list[MetricRow] = []
    last_return = float("nan")
    t0 = clock()
    for it in range(1, iterations + 1):
        lr = cfg.learning_rate
        if cfg.anneal_lr:
            lr = cfg.learning_rate * (1.0 - (it - 1) / iterations)
        buffer, next_obs, episode_returns = collector.collect(
            agent, cfg.num_steps, streams.action)
        bootstrap = agent.value_forward(next_obs)[0]
        compute_gae(buffer, gae_cfg, bootstrap)
        # Entropy of the policy that produced this rollout; the scale is
        # global, so no per-state averaging is needed.
        entropy_now = float(agent.fam.entropy(agent.sigma()).sum())
        if cfg.aug is not None and cfg.aug.mode == "rad":
            rad_update_hook(buffer, cfg.aug, streams.aug)
        report = update(agent, optimizer, buffer, cfg, streams, lr)
        if episode_returns:
            last_return = float(np.mean(episode_returns))
        row = MetricRow(
            global_step=it * cfg.batch_size,
            episodic_return_mean=last_return,
            policy_entropy=entropy_now,
            policy_loss=report.policy_loss,
            value_loss=report.value_loss,
            approx_kl=report.approx_kl,
            clip_fraction=report.clip_fraction,
            wall_time_s=clock() - t0,
        )
        history.append(row)
        if metric_sink is not None:
            metric_sink(row)
    return TrainResult(agent.store, history, agent)
