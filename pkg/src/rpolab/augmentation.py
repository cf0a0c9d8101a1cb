"""Observation augmentation baselines layered on the PPO trainer.

RAD-style preprocessing multiplies each stored state vector by one scalar
u ~ U(scale_low, scale_high) before the update epochs. The DRAC-style
regularizer instead penalizes policy-KL and value mismatch between clean
and augmented states, with gradients blocked on the clean branch so the
networks are pulled toward consistency on the augmented inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .rollout import RolloutBuffer

Array = np.ndarray

AUG_MODES = ("none", "rad", "drac")


@dataclass
class AugConfig:
    mode: str
    scale_low: float = 0.6
    scale_high: float = 1.2
    drac_coef: float = 0.1

    def __post_init__(self):
        if self.mode not in AUG_MODES:
            raise ConfigError(f"unknown augmentation mode {self.mode!r}")
        if not (0.0 < self.scale_low <= self.scale_high):
            raise ConfigError(
                f"need 0 < scale_low <= scale_high, got ({self.scale_low}, {self.scale_high})"
            )
        if self.drac_coef < 0.0:
            raise ConfigError("drac_coef must be >= 0")


def random_amplitude_scale(state: Array, cfg: AugConfig, rng: np.random.Generator) -> Array:
    """Scale each state vector by a single uniform draw.

    Works on one state (D,) or a batch (..., D); the draw is shared across
    the components of a state but independent across states.
    """
    u = rng.uniform(cfg.scale_low, cfg.scale_high, size=state.shape[:-1] + (1,))
    return state * u


def rad_update_hook(buffer: RolloutBuffer, cfg: AugConfig, rng: np.random.Generator) -> RolloutBuffer:
    """Replace every stored state with its augmentation, in place.

    Collection already happened on raw states; old log-probs are left
    untouched by design.
    """
    buffer.states = random_amplitude_scale(buffer.states, cfg, rng)
    return buffer


def _kl_gaussian(mu1, sigma1, mu2, sigma2):
    d = mu1 - mu2
    var2 = sigma2 * sigma2
    kl = np.log(sigma2 / sigma1) + (sigma1 * sigma1 + d * d) / (2.0 * var2) - 0.5
    dmu2 = (mu2 - mu1) / var2
    dsigma2 = 1.0 / sigma2 - (sigma1 * sigma1 + d * d) / (var2 * sigma2)
    return kl, dmu2, dsigma2


def _kl_laplace(mu1, b1, mu2, b2):
    d = np.abs(mu1 - mu2)
    decay = b1 * np.exp(-d / b1)
    kl = np.log(b2 / b1) + (d + decay) / b2 - 1.0
    dmu2 = np.sign(mu2 - mu1) * (1.0 - np.exp(-d / b1)) / b2
    db2 = 1.0 / b2 - (d + decay) / (b2 * b2)
    return kl, dmu2, db2


_KL = {"gaussian": _kl_gaussian, "laplace": _kl_laplace}


def kl_closed_form(family: str, mu1, sigma1, mu2, sigma2):
    """Per-dimension KL(p1 || p2) and its partials w.r.t. the p2 parameters."""
    try:
        fn = _KL[family]
    except KeyError:
        raise ConfigError(
            f"no closed-form KL for family {family!r}; drac supports {sorted(_KL)}"
        ) from None
    return fn(mu1, sigma1, mu2, sigma2)


def drac_regularizer(agent, states: Array, cfg: AugConfig,
                     rng: np.random.Generator) -> tuple[float, dict[str, Array]]:
    """Consistency loss kappa * [mean KL(pi(s) || pi(aug s)) + mean (V(s) - V(aug s))^2].

    Returns the scalar loss and a gradient dict (same keys as the agent's
    parameter store) holding contributions through the augmented branch
    only; the clean branch is treated as constant.
    """
    aug = random_amplitude_scale(states, cfg, rng)
    batch = states.shape[0]

    mu1, _ = agent.mean_forward(states)
    mu2, actor_cache = agent.mean_forward(aug)
    sigma = agent.sigma()
    kl, dmu2, dsigma2 = kl_closed_form(agent.family, mu1, sigma, mu2, sigma)

    v1, _ = agent.value_forward(states)
    v2, critic_cache = agent.value_forward(aug)
    dv = v2 - v1

    loss = float(cfg.drac_coef * (kl.sum(axis=-1).mean() + (dv * dv).mean()))

    grads = agent.store.zeros_like()
    scale = cfg.drac_coef / batch
    agent.accumulate_mean_grads(grads, actor_cache, scale * dmu2)
    grads[agent.log_std_name] += scale * (dsigma2 * sigma).sum(axis=0)
    agent.accumulate_value_grads(grads, critic_cache, scale * 2.0 * dv)
    return loss, grads
