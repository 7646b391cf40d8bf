"""Constrained Van der Pol Tag: intercept a target circling a Van der Pol limit cycle.

The agent moves a fixed distance per step along a chosen heading and may pay
one unit of cost to "look", which sharpens its bearing measurement of the
target. The state is ``(agent_x, agent_y, target_x, target_y)``.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from cpomdp.model import CPOMDP, CPOMDPSpec, GenerativeOutcome

TWO_PI = 2.0 * math.pi
_SQRT_2PI = math.sqrt(TWO_PI)


def vdp_field(x: float, y: float, mu: float) -> tuple[float, float]:
    return mu * (x - x * x * x / 3.0 - y), x / mu


def rk4_step(x: float, y: float, dt: float, mu: float) -> tuple[float, float]:
    k1x, k1y = vdp_field(x, y, mu)
    k2x, k2y = vdp_field(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y, mu)
    k3x, k3y = vdp_field(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y, mu)
    k4x, k4y = vdp_field(x + dt * k3x, y + dt * k3y, mu)
    return (x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
            y + dt / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y))


def wrap_angle(a: float) -> float:
    """Map an angle onto [-pi, pi)."""
    return (a + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True, eq=False)
class CVDPTag(CPOMDP):
    mu: float = 2.0
    dt: float = 0.1
    agent_speed: float = 1.0
    target_noise: float = 0.05
    tag_radius: float = 0.1
    tag_reward: float = 100.0
    step_reward: float = -1.0
    look_cost: float = 1.0
    look_std: float = 0.05
    no_look_std: float = 1.0
    budget: float = 2.5
    discount_factor: float = 0.95
    target_init_halfwidth: float = 4.0
    name: str = "vdptag"
    spec: CPOMDPSpec = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "spec", CPOMDPSpec(self.discount_factor, (self.budget,)))

    def initial_state(self, rng: random.Random):
        w = self.target_init_halfwidth
        return (0.0, 0.0, rng.uniform(-w, w), rng.uniform(-w, w))

    def sample_action(self, rng: random.Random):
        return (rng.random() * TWO_PI, 1 if rng.random() < 0.5 else 0)

    def target_step(self, tx: float, ty: float, rng: random.Random) -> tuple[float, float]:
        tx, ty = rk4_step(tx, ty, self.dt, self.mu)
        if self.target_noise:
            tx += rng.gauss(0.0, self.target_noise)
            ty += rng.gauss(0.0, self.target_noise)
        return tx, ty

    def _move(self, s, a, rng):
        ax, ay, tx, ty = s
        heading = a[0]
        ax += self.agent_speed * math.cos(heading)
        ay += self.agent_speed * math.sin(heading)
        tx, ty = self.target_step(tx, ty, rng)
        if math.hypot(tx - ax, ty - ay) < self.tag_radius:
            return None
        return (ax, ay, tx, ty)

    def _step(self, s, a, rng):
        sp = self._move(s, a, rng)
        c = (self.look_cost if a[1] else 0.0,)
        if sp is None:
            return GenerativeOutcome(None, None, self.tag_reward, c)
        ax, ay, tx, ty = sp
        sd = self.look_std if a[1] else self.no_look_std
        o = wrap_angle(math.atan2(ty - ay, tx - ax) + sd * rng.gauss(0.0, 1.0))
        return GenerativeOutcome(sp, o, self.step_reward, c)

    def transition(self, s, a, rng):
        return self._move(s, a, rng)

    def rollout_step(self, s, a, rng):
        sp = self._move(s, a, rng)
        return sp, (self.tag_reward if sp is None else self.step_reward), (self.look_cost if a[1] else 0.0,)

    def reward(self, s, a, sp):
        if s is None:
            return 0.0
        return self.tag_reward if sp is None else self.step_reward

    def cost(self, s, a, sp):
        if s is None:
            return (0.0,)
        return (self.look_cost if a[1] else 0.0,)

    def _obs_density(self, o, s, a, sp):
        ax, ay, tx, ty = sp
        sd = self.look_std if a[1] else self.no_look_std
        d = wrap_angle(o - math.atan2(ty - ay, tx - ax))
        # wrapped normal; terms beyond one wrap are below 1e-19 for sd <= 1
        total = 0.0
        for shift in (-TWO_PI, 0.0, TWO_PI):
            z = (d + shift) / sd
            total += math.exp(-0.5 * z * z)
        return total / (sd * _SQRT_2PI)

    def rollout_policy(self, name):
        if name == "intercept":
            return self.intercept_action
        return super().rollout_policy(name)

    def intercept_action(self, s, rng):
        """State-based interception heuristic for rollouts.

        Heads straight for the target's predicted position when that lands
        within the tag radius or the target is far away; otherwise moves to a
        point one step away from the target's position two steps ahead.
        """
        ax, ay, tx, ty = s
        step = self.agent_speed
        p1x, p1y = rk4_step(tx, ty, self.dt, self.mu)
        d1 = math.hypot(p1x - ax, p1y - ay)
        bearing1 = math.atan2(p1y - ay, p1x - ax)
        if abs(d1 - step) < self.tag_radius:
            return (bearing1, 0)
        p2x, p2y = rk4_step(p1x, p1y, self.dt, self.mu)
        d2 = math.hypot(p2x - ax, p2y - ay)
        if d2 > 2.0 * step or d2 == 0.0:
            return (bearing1, 0)
        offset = math.acos(d2 / (2.0 * step))
        bearing2 = math.atan2(p2y - ay, p2x - ax)
        return (bearing2 + (offset if rng.random() < 0.5 else -offset), 0)
