"""Lightweight, seedable continuous-control environments.

Dynamics are pinned to the public classic-control definitions (see README
for the constants). Episodes end either by termination or by hitting the
horizon; both set done=True and the caller is responsible for resetting.
State math runs in plain Python floats: these environments sit inside the
rollout hot loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import UsageError

Array = np.ndarray


class Spaces(NamedTuple):
    obs_dim: int
    action_dim: int
    action_low: float
    action_high: float


@dataclass
class StepResult:
    observation: Array
    reward: float
    done: bool


def _wrap_pi(x: float) -> float:
    """Wrap an angle into [-pi, pi]."""
    return ((x + math.pi) % (2.0 * math.pi)) - math.pi


class PendulumEnv:
    """Torque-limited pendulum swing-up, 200-step horizon.

    Cost is angle^2 + 0.1*speed^2 + 0.001*torque^2 evaluated at the
    pre-step state; reward is its negative, so the upright fixed point
    scores 0 per step.
    """

    g = 10.0
    m = 1.0
    l = 1.0
    dt = 0.05
    max_speed = 8.0
    max_torque = 2.0
    horizon = 200

    def __init__(self):
        self.th = 0.0
        self.thdot = 0.0
        self._steps = 0
        self._terminal = True

    def spaces(self) -> Spaces:
        return Spaces(3, 1, -2.0, 2.0)

    def _obs(self) -> Array:
        return np.array([math.cos(self.th), math.sin(self.th), self.thdot])

    def reset(self, rng: np.random.Generator) -> Array:
        self.th = rng.uniform(-math.pi, math.pi)
        self.thdot = rng.uniform(-1.0, 1.0)
        self._steps = 0
        self._terminal = False
        return self._obs()

    def step(self, action: Array) -> StepResult:
        if self._terminal:
            raise UsageError("step() called on a finished episode; reset first")
        u = min(max(float(action[0]), -self.max_torque), self.max_torque)
        th, thdot = self.th, self.thdot
        cost = _wrap_pi(th) ** 2 + 0.1 * thdot * thdot + 0.001 * u * u
        # Semi-implicit Euler: new velocity drives the position update.
        thdot = thdot + (1.5 * self.g / self.l * math.sin(th)
                         + 3.0 / (self.m * self.l * self.l) * u) * self.dt
        thdot = min(max(thdot, -self.max_speed), self.max_speed)
        self.th = th + thdot * self.dt
        self.thdot = thdot
        self._steps += 1
        self._terminal = self._steps >= self.horizon
        return StepResult(self._obs(), -cost, self._terminal)


class CartPoleContinuousEnv:
    """Cart-pole balance with a continuous force input.

    Force is 10 * clip(a, -1, 1); episode terminates when the cart leaves
    [-2.4, 2.4] or the pole tilts past 12 degrees, reward 1 per surviving
    step, horizon 500.
    """

    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    total_mass = masscart + masspole
    length = 0.5  # half the pole
    polemass_length = masspole * length
    force_mag = 10.0
    dt = 0.02
    x_threshold = 2.4
    theta_threshold = 12.0 * math.pi / 180.0
    horizon = 500

    def __init__(self):
        self.state = np.zeros(4)  # x, x_dot, theta, theta_dot
        self._steps = 0
        self._terminal = True

    def spaces(self) -> Spaces:
        return Spaces(4, 1, -1.0, 1.0)

    def reset(self, rng: np.random.Generator) -> Array:
        self.state = rng.uniform(-0.05, 0.05, size=4)
        self._steps = 0
        self._terminal = False
        return self.state.copy()

    def step(self, action: Array) -> StepResult:
        if self._terminal:
            raise UsageError("step() called on a finished episode; reset first")
        force = self.force_mag * min(max(float(action[0]), -1.0), 1.0)
        x, x_dot, theta, theta_dot = self.state
        costheta = math.cos(theta)
        sintheta = math.sin(theta)
        temp = (force + self.polemass_length * theta_dot * theta_dot * sintheta) / self.total_mass
        thetaacc = (self.gravity * sintheta - costheta * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * costheta * costheta / self.total_mass)
        )
        xacc = temp - self.polemass_length * thetaacc * costheta / self.total_mass
        x += self.dt * x_dot
        x_dot += self.dt * xacc
        theta += self.dt * theta_dot
        theta_dot += self.dt * thetaacc
        self.state = np.array([x, x_dot, theta, theta_dot])
        self._steps += 1
        fell = abs(x) > self.x_threshold or abs(theta) > self.theta_threshold
        self._terminal = fell or self._steps >= self.horizon
        return StepResult(self.state.copy(), 1.0, self._terminal)


class PointMass2DEnv:
    """Double-integrator point mass chasing a fixed goal; smoke-test task.

    Not drawn from any benchmark: a near-trivial environment kept around
    so regressions show up on something that must always learn. Reward is
    the negative Euclidean distance to the goal.
    """

    dt = 0.1
    horizon = 100

    def __init__(self):
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)
        self.goal = np.zeros(2)
        self._steps = 0
        self._terminal = True

    def spaces(self) -> Spaces:
        return Spaces(6, 2, -1.0, 1.0)

    def _obs(self) -> Array:
        return np.concatenate([self.pos, self.vel, self.goal])

    def reset(self, rng: np.random.Generator) -> Array:
        self.pos = rng.uniform(-1.0, 1.0, size=2)
        self.vel = np.zeros(2)
        self.goal = rng.uniform(-1.0, 1.0, size=2)
        self._steps = 0
        self._terminal = False
        return self._obs()

    def step(self, action: Array) -> StepResult:
        if self._terminal:
            raise UsageError("step() called on a finished episode; reset first")
        acc = np.clip(np.asarray(action, dtype=np.float64), -1.0, 1.0)
        self.vel = self.vel + acc * self.dt
        self.pos = self.pos + self.vel * self.dt
        self._steps += 1
        self._terminal = self._steps >= self.horizon
        reward = -float(np.linalg.norm(self.pos - self.goal))
        return StepResult(self._obs(), reward, self._terminal)


ENV_REGISTRY = {
    "pendulum": PendulumEnv,
    "cartpole": CartPoleContinuousEnv,
    "pointmass": PointMass2DEnv,
}


def make_env(name: str):
    try:
        return ENV_REGISTRY[name]()
    except KeyError:
        raise UsageError(
            f"unknown environment {name!r}; choose from {sorted(ENV_REGISTRY)}"
        ) from None
