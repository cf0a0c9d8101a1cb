"""Continuous action distributions and the uniform mean perturbation.

Three location-scale families (Gaussian, Laplace, Gumbel) share one
(loc, scale) interface. Each exposes closed-form log-density, entropy,
sampling, and the analytic partials of the log-density with respect to
loc and scale that the trainer backpropagates through.

The mean perturbation adds z ~ U(-alpha, alpha), drawn independently per
state and per action dimension, to loc while leaving scale untouched.
`effective_density_gaussian_uniform` is the exact marginal of that
construction for the Gaussian family (a Gaussian-uniform convolution),
kept as a diagnostic and test oracle: the trainer itself only ever
evaluates the conditional density at a fixed draw of z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr  # standard normal CDF, vectorized erf

from .errors import ConfigError

Array = np.ndarray

_LOG_2PI = float(np.log(2.0 * np.pi))
_EULER_GAMMA = float(np.euler_gamma)


class _Gaussian:
    name = "gaussian"

    @staticmethod
    def sample(loc: Array, scale: Array, rng: np.random.Generator) -> Array:
        return rng.normal(loc, np.broadcast_to(scale, loc.shape))

    @staticmethod
    def log_prob(loc: Array, scale: Array, x: Array) -> Array:
        z = (x - loc) / scale
        return -0.5 * z * z - np.log(scale) - 0.5 * _LOG_2PI

    @staticmethod
    def entropy(scale: Array) -> Array:
        return 0.5 * (_LOG_2PI + 1.0) + np.log(scale)

    @staticmethod
    def log_prob_grad(loc: Array, scale: Array, x: Array) -> tuple[Array, Array]:
        d = x - loc
        var = scale * scale
        dloc = d / var
        dscale = (d * d - var) / (var * scale)
        return dloc, dscale


class _Laplace:
    name = "laplace"

    @staticmethod
    def sample(loc: Array, scale: Array, rng: np.random.Generator) -> Array:
        return rng.laplace(loc, np.broadcast_to(scale, loc.shape))

    @staticmethod
    def log_prob(loc: Array, scale: Array, x: Array) -> Array:
        return -np.abs(x - loc) / scale - np.log(2.0 * scale)

    @staticmethod
    def entropy(scale: Array) -> Array:
        return 1.0 + np.log(2.0 * scale)

    @staticmethod
    def log_prob_grad(loc: Array, scale: Array, x: Array) -> tuple[Array, Array]:
        d = x - loc
        dloc = np.sign(d) / scale
        dscale = (np.abs(d) - scale) / (scale * scale)
        return dloc, dscale


class _Gumbel:
    name = "gumbel"

    @staticmethod
    def sample(loc: Array, scale: Array, rng: np.random.Generator) -> Array:
        return rng.gumbel(loc, np.broadcast_to(scale, loc.shape))

    @staticmethod
    def log_prob(loc: Array, scale: Array, x: Array) -> Array:
        z = (x - loc) / scale
        return -z - np.exp(-z) - np.log(scale)

    @staticmethod
    def entropy(scale: Array) -> Array:
        return np.log(scale) + _EULER_GAMMA + 1.0

    @staticmethod
    def log_prob_grad(loc: Array, scale: Array, x: Array) -> tuple[Array, Array]:
        z = (x - loc) / scale
        emz = np.exp(-z)
        dloc = (1.0 - emz) / scale
        dscale = (z * (1.0 - emz) - 1.0) / scale
        return dloc, dscale


FAMILIES = {f.name: f for f in (_Gaussian, _Laplace, _Gumbel)}


def get_family(name: str):
    try:
        return FAMILIES[name]
    except KeyError:
        raise ConfigError(
            f"unknown distribution family {name!r}; choose from {sorted(FAMILIES)}"
        ) from None


@dataclass
class DistParams:
    """Per-dimension location and scale of one of the supported families.

    ``loc`` may be a single parameter vector (act_dim,) or a batch
    (batch, act_dim); ``scale`` must broadcast against it.
    """

    family: str
    loc: Array
    scale: Array

    def __post_init__(self):
        self.loc = np.asarray(self.loc, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        get_family(self.family)
        if not np.all(np.isfinite(self.loc)):
            raise ConfigError("loc must be finite")
        if not np.all(np.isfinite(self.scale)) or np.any(self.scale <= 0.0):
            raise ConfigError("scale must be finite and strictly positive")
        if self.loc.shape[-1] != self.scale.shape[-1]:
            raise ConfigError("loc and scale must agree on the action dimension")


@dataclass
class PerturbSpec:
    """Half-width of the uniform location perturbation U(-alpha, alpha)."""

    alpha: float

    def __post_init__(self):
        if not (self.alpha >= 0.0 and np.isfinite(self.alpha)):
            raise ConfigError(f"alpha must be finite and >= 0, got {self.alpha}")


def sample(params: DistParams, rng: np.random.Generator) -> Array:
    """Independent per-dimension draws from the parameterized family."""
    return get_family(params.family).sample(params.loc, params.scale, rng)


def log_prob(params: DistParams, action: Array) -> tuple[Array, Array]:
    """Per-dimension log-densities and their sum over the action dimension."""
    per_dim = get_family(params.family).log_prob(params.loc, params.scale, action)
    return per_dim, per_dim.sum(axis=-1)


def entropy(params: DistParams) -> float:
    """Closed-form differential entropy summed over action dimensions.

    Location-free for every supported family, so perturbing loc never
    changes this value.
    """
    fam = get_family(params.family)
    per_dim = np.broadcast_to(fam.entropy(params.scale), params.scale.shape[-1:])
    return float(per_dim.sum())


def log_prob_grad(params: DistParams, action: Array) -> tuple[Array, Array]:
    """Analytic partials of the summed log-density w.r.t. loc and scale.

    Returned arrays are elementwise (same shape as broadcast inputs); the
    summed log-density makes each dimension's partial independent.
    """
    fam = get_family(params.family)
    scale = np.broadcast_to(params.scale, params.loc.shape)
    return fam.log_prob_grad(params.loc, scale, action)


def perturb_loc(params: DistParams, spec: PerturbSpec, rng: np.random.Generator) -> DistParams:
    """Shift loc by z ~ U(-alpha, alpha), fresh per state and per dimension.

    alpha = 0 returns the input params unchanged and consumes no random
    numbers, so a zero-alpha run is bit-identical to never perturbing.
    """
    if spec.alpha == 0.0:
        return params
    z = rng.uniform(-spec.alpha, spec.alpha, size=params.loc.shape)
    return DistParams(params.family, params.loc + z, params.scale)


def effective_density_gaussian_uniform(mu, sigma: float, alpha: float, a) -> Array:
    """Exact marginal density of (z ~ U(-alpha, alpha); a ~ N(mu + z, sigma)).

    The convolution of N(mu, sigma^2) with U(-alpha, alpha):
    (1 / 2 alpha) * [Phi((a - mu + alpha) / sigma) - Phi((a - mu - alpha) / sigma)].
    """
    if sigma <= 0.0:
        raise ConfigError("sigma must be positive")
    if alpha <= 0.0:
        raise ConfigError("alpha must be positive (alpha=0 is the base Gaussian)")
    a = np.asarray(a, dtype=np.float64)
    hi = ndtr((a - mu + alpha) / sigma)
    lo = ndtr((a - mu - alpha) / sigma)
    return (hi - lo) / (2.0 * alpha)
