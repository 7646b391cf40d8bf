"""CPOMDP problem interface, generative outcomes and discounted returns.

States, actions and observations are opaque to the planners. A model only
has to provide a generative step, an observation density, the per-transition
reward and cost functions and a sampler for the initial state.

Terminal states are represented by ``None``; every transition into a terminal
state emits the terminal observation (also ``None``), and terminal states
yield zero reward and cost forever.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Optional, Sequence

State = Any
Action = Any
Observation = Any
CostVector = tuple  # tuple[float, ...] of length K

TERMINAL = None
TERMINAL_OBS = None

RolloutPolicy = Callable[[State, random.Random], Action]


class TerminalStateError(ValueError):
    """A generative step was requested from a terminal state."""


@dataclass(frozen=True)
class CPOMDPSpec:
    """Discount and cost budget shared by a model and its planners."""

    discount: float
    cost_budget: tuple[float, ...]

    def __post_init__(self) -> None:
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {self.discount}")
        object.__setattr__(self, "cost_budget", tuple(float(c) for c in self.cost_budget))
        if any(c < 0 or math.isnan(c) for c in self.cost_budget):
            raise ValueError(f"cost budget entries must be >= 0, got {self.cost_budget}")

    @property
    def n_costs(self) -> int:
        return len(self.cost_budget)


class GenerativeOutcome(NamedTuple):
    next_state: State
    observation: Observation
    reward: float
    costs: CostVector


class Returns(NamedTuple):
    reward: float
    costs: CostVector


def zero_returns(n_costs: int) -> Returns:
    return Returns(0.0, (0.0,) * n_costs)


class CPOMDP:
    """Base class for constrained POMDPs with a generative interface.

    Subclasses implement ``_step``, ``reward``, ``cost``, ``_obs_density`` and
    ``initial_state``. Finite action spaces set ``actions``; continuous ones
    leave it ``None`` and override ``sample_action``.
    """

    spec: CPOMDPSpec
    actions: Optional[tuple] = None
    name: str = "cpomdp"

    @property
    def discount(self) -> float:
        return self.spec.discount

    @property
    def cost_budget(self) -> tuple[float, ...]:
        return self.spec.cost_budget

    @property
    def n_costs(self) -> int:
        return self.spec.n_costs

    def is_terminal(self, state: State) -> bool:
        return state is None

    def initial_state(self, rng: random.Random) -> State:
        raise NotImplementedError

    def generative_step(self, state: State, action: Action, rng: random.Random) -> GenerativeOutcome:
        """Sample ``(s', o, r, c)`` from the joint transition/observation model."""
        if state is None:
            raise TerminalStateError("generative_step called on a terminal state")
        return self._step(state, action, rng)

    def _step(self, state: State, action: Action, rng: random.Random) -> GenerativeOutcome:
        raise NotImplementedError

    def transition(self, state: State, action: Action, rng: random.Random) -> State:
        """Next-state sample only; override when observations are costly to draw."""
        return self.generative_step(state, action, rng).next_state

    def rollout_step(self, state: State, action: Action, rng: random.Random) -> tuple[State, float, CostVector]:
        out = self.generative_step(state, action, rng)
        return out.next_state, out.reward, out.costs

    def reward(self, state: State, action: Action, next_state: State) -> float:
        raise NotImplementedError

    def cost(self, state: State, action: Action, next_state: State) -> CostVector:
        raise NotImplementedError

    def obs_density(self, obs: Observation, state: State, action: Action, next_state: State) -> float:
        """Density (or mass) of ``obs`` given the transition ``(s, a, s')``."""
        if next_state is None:
            return 1.0 if obs is None else 0.0
        if obs is None:
            return 0.0
        return self._obs_density(obs, state, action, next_state)

    def _obs_density(self, obs: Observation, state: State, action: Action, next_state: State) -> float:
        raise NotImplementedError

    def sample_action(self, rng: random.Random) -> Action:
        if self.actions is None:
            raise NotImplementedError("continuous action spaces must override sample_action")
        return self.actions[int(rng.random() * len(self.actions))]

    def rollout_policy(self, name: str) -> RolloutPolicy:
        """Return the named rollout policy; ``"random"`` is always available."""
        if name == "random":
            sample = self.sample_action
            return lambda state, rng: sample(rng)
        raise KeyError(f"{type(self).__name__} has no rollout policy {name!r}")


def discounted_return(rewards: Sequence[float], costs: Sequence[Sequence[float]], discount: float) -> Returns:
    """Sum of ``discount**t * r_t`` and the matching cost vectors."""
    n_costs = len(costs[0]) if costs else 0
    total_r = 0.0
    total_c = [0.0] * n_costs
    weight = 1.0
    for r, c in zip(rewards, costs):
        total_r += weight * r
        for k in range(n_costs):
            total_c[k] += weight * c[k]
        weight *= discount
    return Returns(total_r, tuple(total_c))
