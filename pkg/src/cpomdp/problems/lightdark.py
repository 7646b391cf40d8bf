"""Constrained LightDark: a 1-D localize-then-stop problem with a cliff."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from cpomdp.model import CPOMDP, CPOMDPSpec, GenerativeOutcome

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class CLightDark(CPOMDP):
    """Move in steps of ``actions`` toward the goal interval and stop with action 0.

    Observations are Gaussian around the true position with a standard
    deviation that grows with the distance from the light. Every step that
    lands above the cliff costs ``cliff_cost``.
    """

    actions: tuple = (0, 1, -1, 5, -5, 10, -10)
    goal_low: float = -1.0
    goal_high: float = 1.0
    light: float = 10.0
    cliff: float = 12.0
    step_reward: float = -1.0
    goal_reward: float = 100.0
    wrong_stop_reward: float = -100.0
    cliff_cost: float = 1.0
    budget: float = 0.1
    discount_factor: float = 0.95
    init_mean: float = 2.0
    init_std: float = 2.0
    sigma_min: float = 0.5
    name: str = "lightdark"
    spec: CPOMDPSpec = field(init=False)

    def __post_init__(self) -> None:
        if 0 not in self.actions:
            raise ValueError("LightDark needs the stopping action 0")
        object.__setattr__(self, "spec", CPOMDPSpec(self.discount_factor, (self.budget,)))

    def sigma(self, s: float) -> float:
        return abs(s - self.light) + self.sigma_min

    def initial_state(self, rng: random.Random) -> float:
        return rng.gauss(self.init_mean, self.init_std)

    def _step(self, s, a, rng):
        if a == 0:
            r = self.goal_reward if self.goal_low <= s <= self.goal_high else self.wrong_stop_reward
            return GenerativeOutcome(None, None, r, (self.cliff_cost if s > self.cliff else 0.0,))
        sp = s + a
        o = sp + self.sigma(sp) * rng.gauss(0.0, 1.0)
        return GenerativeOutcome(sp, o, self.step_reward, (self.cliff_cost if sp > self.cliff else 0.0,))

    def transition(self, s, a, rng):
        return None if a == 0 else s + a

    def rollout_step(self, s, a, rng):
        if a == 0:
            r = self.goal_reward if self.goal_low <= s <= self.goal_high else self.wrong_stop_reward
            return None, r, (self.cliff_cost if s > self.cliff else 0.0,)
        sp = s + a
        return sp, self.step_reward, (self.cliff_cost if sp > self.cliff else 0.0,)

    def reward(self, s, a, sp):
        if s is None:
            return 0.0
        if a == 0:
            return self.goal_reward if self.goal_low <= s <= self.goal_high else self.wrong_stop_reward
        return self.step_reward

    def cost(self, s, a, sp):
        if s is None:
            return (0.0,)
        ref = s if a == 0 else sp
        return (self.cliff_cost if ref > self.cliff else 0.0,)

    def _obs_density(self, o, s, a, sp):
        sd = self.sigma(sp)
        z = (o - sp) / sd
        return math.exp(-0.5 * z * z) / (sd * _SQRT_2PI)

    def rollout_policy(self, name):
        if name == "stop-at-goal":
            return self._stop_at_goal
        if name == "light-first":
            return _LightFirst(self)
        if name == "move":
            moves = tuple(a for a in self.actions if a != 0)
            return lambda s, rng: moves[int(rng.random() * len(moves))]
        return super().rollout_policy(name)

    def _stop_at_goal(self, s, rng):
        # state-based heuristic: head for the goal interval and stop inside it
        if self.goal_low <= s <= self.goal_high:
            return 0
        target = 0.5 * (self.goal_low + self.goal_high)
        moves = [a for a in self.actions if a != 0]
        return min(moves, key=lambda a: (abs(s + a - target), abs(a)))


class _LightFirst:
    """Localize-then-stop rollout: walk to the light, then head home and stop.

    Stateful, so rollouts call ``begin()`` for a fresh copy.
    """

    def __init__(self, model: CLightDark):
        self.model = model
        self.moves = [a for a in model.actions if a != 0]

    def begin(self):
        m = self.model
        home = 0.5 * (m.goal_low + m.goal_high)
        moves = self.moves
        seen_light = False

        def act(s, rng):
            nonlocal seen_light
            if not seen_light and abs(s - m.light) <= 1.0:
                seen_light = True
            if seen_light and m.goal_low <= s <= m.goal_high:
                return 0
            target = home if seen_light else m.light
            return min(moves, key=lambda a: (abs(s + a - target), abs(a)))

        return act

    def __call__(self, s, rng):
        return self.begin()(s, rng)
