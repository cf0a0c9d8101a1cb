from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

Array = np.ndarray


@dataclass
class GaeConfig:
    gamma: float
    lam: float

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if not (0.0 <= self.lam <= 1.0):
            raise ConfigError(f"lam must be in [0, 1], got {self.lam}")


@dataclass
class RolloutBuffer:
    """(num_steps, num_envs) trajectory storage plus derived targets.

    Log-probs are recorded at collection time from the unperturbed action
    distribution; advantages and returns stay None until compute_gae runs.
    """

    states: Array
    actions: Array
    rewards: Array
    dones: Array
    log_probs: Array
    values: Array
    advantages: Array | None = None
    returns: Array | None = None

    @classmethod
    def empty(cls, num_steps: int, num_envs: int, obs_dim: int, act_dim: int) -> "RolloutBuffer":
        return cls(
            states=np.zeros((num_steps, num_envs, obs_dim)),
            actions=np.zeros((num_steps, num_envs, act_dim)),
            rewards=np.zeros((num_steps, num_envs)),
            dones=np.zeros((num_steps, num_envs)),
            log_probs=np.zeros((num_steps, num_envs)),
            values=np.zeros((num_steps, num_envs)),
        )

    @property
    def num_steps(self) -> int:
        return self.states.shape[0]

    @property
    def num_envs(self) -> int:
        return self.states.shape[1]

    @property
    def capacity(self) -> int:
        return self.num_steps * self.num_envs

    def flat(self) -> dict[str, Array]:
        """Flatten (T, N, ...) to (T*N, ...) views for minibatching."""
        if self.advantages is None or self.returns is None:
            raise ConfigError("finalize the buffer with compute_gae before flattening")
        return {
            "states": self.states.reshape(self.capacity, -1),
            "actions": self.actions.reshape(self.capacity, -1),
            "log_probs": self.log_probs.reshape(self.capacity),
            "values": self.values.reshape(self.capacity),
            "advantages": self.advantages.reshape(self.capacity),
            "returns": self.returns.reshape(self.capacity),
        }


class Collector:
    """Owns env instances and per-slot rng streams across iterations.

    Episodes continue across collect() calls; on done the slot is reset
    here (the environments themselves never auto-reset).
    """

    def __init__(self, envs: list, rngs: list[np.random.Generator]):
        if len(envs) != len(rngs):
            raise ConfigError("need one rng stream per env slot")
        self.envs = envs
        self.rngs = rngs
        self.obs = np.stack([env.reset(rng) for env, rng in zip(envs, rngs)])
        self._ep_return = np.zeros(len(envs))

    def collect(self, agent, num_steps: int, action_rng: np.random.Generator
                ) -> tuple[RolloutBuffer, Array, list[float]]:
        """Fill a fresh buffer; returns (buffer, next_obs, completed episode returns)."""
        n = len(self.envs)
        spaces = self.envs[0].spaces()
        buf = RolloutBuffer.empty(num_steps, n, spaces.obs_dim, spaces.action_dim)
        completed: list[float] = []
        for t in range(num_steps):
            actions, log_probs, values = agent.act(self.obs, action_rng)
            buf.states[t] = self.obs
            buf.actions[t] = actions
            buf.log_probs[t] = log_probs
            buf.values[t] = values
            for i, env in enumerate(self.envs):
                res = env.step(actions[i])
                buf.rewards[t, i] = res.reward
                buf.dones[t, i] = 1.0 if res.done else 0.0
                self._ep_return[i] += res.reward
                if res.done:
                    completed.append(float(self._ep_return[i]))
                    self._ep_return[i] = 0.0
                    self.obs[i] = env.reset(self.rngs[i])
                else:
                    self.obs[i] = res.observation
        return buf, self.obs.copy(), completed


def compute_gae(buffer: RolloutBuffer, cfg: GaeConfig, bootstrap_value: Array) -> RolloutBuffer:
    """Reverse-recursion advantage estimates and returns.

    delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
    A_t     = delta_t + gamma * lam * (1 - done_t) * A_{t+1}
    with V after the final stored step given by bootstrap_value. A done
    flag cuts both terms, so truncated and terminated episodes alike
    receive no credit from beyond the boundary.
    """
    T = buffer.num_steps
    adv = np.zeros_like(buffer.rewards)
    next_value = np.broadcast_to(np.asarray(bootstrap_value, dtype=np.float64),
                                 (buffer.num_envs,)).copy()
    carry = np.zeros(buffer.num_envs)
    for t in range(T - 1, -1, -1):
        live = 1.0 - buffer.dones[t]
        delta = buffer.rewards[t] + cfg.gamma * next_value * live - buffer.values[t]
        carry = delta + cfg.gamma * cfg.lam * live * carry
        adv[t] = carry
        next_value = buffer.values[t]
    buffer.advantages = adv
    buffer.returns = adv + buffer.values
    return buffer


def normalize_advantages(advantages: Array, eps: float = 1e-12) -> tuple[Array, bool]:
    """Shift/scale to mean 0, std 1; flags the degenerate constant case.

    The stabilizer only matters when the spread collapses, so ordinary
    minibatches come out with unit standard deviation to near machine
    precision.
    """
    if advantages.size < 2:
        raise ConfigError("need at least 2 advantages to normalize")
    mean = advantages.mean()
    std = advantages.std()
    return (advantages - mean) / (std + eps), bool(std == 0.0)
