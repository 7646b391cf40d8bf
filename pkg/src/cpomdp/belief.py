"""Weighted particle beliefs and the generative particle-filter step."""
from __future__ import annotations

import logging
import random
from bisect import bisect_right
from itertools import accumulate
from typing import Optional, Sequence

from cpomdp.model import CPOMDP, Action, CostVector, Observation, State

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-9


class ParticleDepletion(RuntimeError):
    """Every propagated particle received zero posterior weight."""

    def __init__(self, propagated: list, reward: float = 0.0, costs: tuple = ()):
        super().__init__("all posterior particle weights are zero")
        self.propagated = propagated
        self.reward = reward
        self.costs = costs


class ParticleBelief:
    """A weighted set of state particles.

    Weights are stored normalized unless ``normalize=False`` is passed; the
    ``normalized`` flag records which.
    """

    __slots__ = ("particles", "weights", "normalized", "_cumulative")

    def __init__(self, particles: Sequence[State], weights: Optional[Sequence[float]] = None, normalize: bool = True):
        particles = list(particles)
        if not particles:
            raise ValueError("a particle belief needs at least one particle")
        if weights is None:
            n = len(particles)
            weights = [1.0 / n] * n
        else:
            weights = [float(w) for w in weights]
            if len(weights) != len(particles):
                raise ValueError("particles and weights differ in length")
            if any(w < 0.0 for w in weights):
                raise ValueError("particle weights must be nonnegative")
            if normalize:
                total = sum(weights)
                if total <= 0.0:
                    raise ValueError("particle weights sum to zero")
                weights = [w / total for w in weights]
        self.particles = particles
        self.weights = weights
        self.normalized = normalize
        self._cumulative: Optional[list[float]] = None

    def __len__(self) -> int:
        return len(self.particles)

    def sample(self, rng: random.Random) -> State:
        """Draw one particle with probability proportional to its weight."""
        if self._cumulative is None:
            self._cumulative = list(accumulate(self.weights))
        cum = self._cumulative
        i = bisect_right(cum, rng.random() * cum[-1])
        return self.particles[min(i, len(cum) - 1)]

    def effective_sample_size(self) -> float:
        total = sum(self.weights)
        return total * total / sum(w * w for w in self.weights)

    def all_terminal(self, model: CPOMDP) -> bool:
        is_terminal = model.is_terminal
        return all(is_terminal(s) for s in self.particles)

    def mean(self) -> float:
        """Weighted mean for scalar-valued (non-terminal) particles."""
        total = sum(self.weights)
        return sum(w * s for w, s in zip(self.weights, self.particles)) / total


def systematic_indices(weights: Sequence[float], n: int, rng: random.Random) -> list[int]:
    """Systematic resampling: ``n`` indices drawn proportional to ``weights``."""
    cum = list(accumulate(weights))
    total = cum[-1]
    step = total / n
    u = rng.random() * step
    out = []
    j = 0
    last = len(cum) - 1
    for i in range(n):
        target = u + i * step
        while j < last and cum[j] <= target:
            j += 1
        out.append(j)
    return out


def systematic_resample(belief: ParticleBelief, n: int, rng: random.Random) -> ParticleBelief:
    idx = systematic_indices(belief.weights, n, rng)
    particles = belief.particles
    return ParticleBelief([particles[i] for i in idx])


def initial_belief(model: CPOMDP, n_particles: int, rng: random.Random) -> ParticleBelief:
    """``n_particles`` i.i.d. draws from the model's initial distribution, uniform weights."""
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    draw = model.initial_state
    return ParticleBelief([draw(rng) for _ in range(n_particles)])


def propagate(model: CPOMDP, sources: Sequence[State], action: Action, rng: random.Random,
              obs: Observation = None, generate_obs: bool = True):
    """Push ``sources`` through the generative model and weight by ``Z(o|s,a,s')``.

    When ``generate_obs`` is set the observation is taken from the first
    propagated particle; otherwise ``obs`` is used. Terminal sources stay
    terminal with zero reward and cost.

    Returns ``(next_states, rewards, costs, observation, weights)``.
    """
    n_costs = model.n_costs
    zero_c = (0.0,) * n_costs
    step = model.generative_step
    density = model.obs_density
    next_states, rewards, costs = [], [], []
    for i, s in enumerate(sources):
        if s is None:
            sp, o, r, c = None, None, 0.0, zero_c
        else:
            sp, o, r, c = step(s, action, rng)
        if i == 0 and generate_obs:
            obs = o
        next_states.append(sp)
        rewards.append(r)
        costs.append(c)
    weights = [density(obs, s, action, sp) for s, sp in zip(sources, next_states)]
    return next_states, rewards, costs, obs, weights


def pf_step(model: CPOMDP, belief: ParticleBelief, action: Action, m: int, rng: random.Random
            ) -> tuple[ParticleBelief, float, CostVector]:
    """Generative particle-filter update of width ``m``.

    Returns the posterior belief together with the belief-expected reward and
    cost of the transition, i.e. the mean over the ``m`` propagated particles
    (which were drawn in proportion to the prior weights).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    sources = [belief.sample(rng) for _ in range(m)]
    next_states, rewards, costs, _, weights = propagate(model, sources, action, rng)
    reward = sum(rewards) / m
    n_costs = model.n_costs
    cost = tuple(sum(c[k] for c in costs) / m for k in range(n_costs))
    if sum(weights) <= 0.0:
        raise ParticleDepletion(next_states, reward, cost)
    posterior = ParticleBelief(next_states, weights)
    if posterior.effective_sample_size() < m / 10:
        posterior = systematic_resample(posterior, m, rng)
    return posterior, reward, cost


def bootstrap_update(model: CPOMDP, belief: ParticleBelief, action: Action, obs: Observation,
                     n_particles: int, rng: random.Random) -> tuple[ParticleBelief, bool]:
    """Bootstrap particle filter update against a real observation.

    Returns ``(posterior, depleted)``. On depletion the propagated particles
    are kept with uniform weights, i.e. the belief falls back to the
    transition prior.
    """
    idx = systematic_indices(belief.weights, n_particles, rng)
    particles = belief.particles
    sources = [particles[i] for i in idx]
    transition = model.transition
    next_states = [None if s is None else transition(s, action, rng) for s in sources]
    density = model.obs_density
    weights = [density(obs, s, action, sp) for s, sp in zip(sources, next_states)]
    if sum(weights) <= 0.0:
        logger.info("belief depletion after action %r; reverting to transition prior", action)
        return ParticleBelief(next_states), True
    return ParticleBelief(next_states, weights), False
