import math
import random
from dataclasses import dataclass, field

import pytest

from cpomdp.model import CPOMDP, CPOMDPSpec, GenerativeOutcome


@dataclass(frozen=True, eq=False)
class SwitchToy(CPOMDP):
    """Two states, two actions, noiseless observations.

    The action picks the next state; landing in state 1 pays 1 and the
    action 1 costs 1.
    """

    actions: tuple = (0, 1)
    name: str = "switch"
    spec: CPOMDPSpec = field(default=CPOMDPSpec(0.9, (0.5,)))

    def initial_state(self, rng):
        return 0

    def _step(self, s, a, rng):
        return GenerativeOutcome(a, a, self.reward(s, a, a), self.cost(s, a, a))

    def reward(self, s, a, sp):
        return 1.0 if sp == 1 else 0.0

    def cost(self, s, a, sp):
        return (1.0 if a == 1 else 0.0,)

    def _obs_density(self, o, s, a, sp):
        return 1.0 if o == sp else 0.0


@dataclass(frozen=True, eq=False)
class Chain(CPOMDP):
    """One action, deterministic counter state; cost 1 on every third step."""

    actions: tuple = ("go",)
    name: str = "chain"
    spec: CPOMDPSpec = field(default=CPOMDPSpec(0.9, (1.0,)))

    def initial_state(self, rng):
        return 0

    def _step(self, s, a, rng):
        sp = s + 1
        return GenerativeOutcome(sp, 0, self.reward(s, a, sp), self.cost(s, a, sp))

    def reward(self, s, a, sp):
        return float(sp)

    def cost(self, s, a, sp):
        return (1.0 if sp % 3 == 0 else 0.0,)

    def _obs_density(self, o, s, a, sp):
        return 1.0


@dataclass(frozen=True, eq=False)
class TwoCost(CPOMDP):
    """Continuous actions in [0, 1) with two nonnegative costs and noisy observations."""

    name: str = "twocost"
    spec: CPOMDPSpec = field(default=CPOMDPSpec(0.9, (0.3, 0.6)))

    def initial_state(self, rng):
        return rng.random()

    def sample_action(self, rng):
        return rng.random()

    def _step(self, s, a, rng):
        sp = 0.5 * s + a + rng.gauss(0.0, 0.1)
        return GenerativeOutcome(sp, sp + rng.gauss(0.0, 0.3), self.reward(s, a, sp), self.cost(s, a, sp))

    def reward(self, s, a, sp):
        return -abs(sp - 1.0)

    def cost(self, s, a, sp):
        return (a * a, 1.0 if sp > 1.2 else 0.0)

    def _obs_density(self, o, s, a, sp):
        z = (o - sp) / 0.3
        return math.exp(-0.5 * z * z)


@pytest.fixture
def rng():
    return random.Random(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
