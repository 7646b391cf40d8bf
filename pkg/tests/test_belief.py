import math
import random
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpomdp.belief import (ParticleBelief, ParticleDepletion, bootstrap_update, initial_belief, pf_step, propagate,
                           systematic_indices)
from cpomdp.model import CPOMDP, CPOMDPSpec, GenerativeOutcome
from cpomdp.problems import CLightDark, CVDPTag


class Noiseless(CPOMDP):
    """Deterministic drift with an exact position sensor."""

    actions = (1,)
    name = "noiseless"
    spec = CPOMDPSpec(0.9, (0.0,))

    def initial_state(self, rng):
        return 0.0

    def _step(self, s, a, rng):
        return GenerativeOutcome(s + a, s + a, 0.0, (0.0,))

    def reward(self, s, a, sp):
        return 0.0

    def cost(self, s, a, sp):
        return (0.0,)

    def _obs_density(self, o, s, a, sp):
        return 1.0 if o == sp else 0.0


def test_belief_validates_inputs():
    with pytest.raises(ValueError):
        ParticleBelief([])
    with pytest.raises(ValueError):
        ParticleBelief([1, 2], [0.5])
    with pytest.raises(ValueError):
        ParticleBelief([1, 2], [0.5, -0.1])
    b = ParticleBelief([1, 2], [1.0, 3.0])
    assert b.weights == [0.25, 0.75]
    assert b.normalized


def test_pf_step_noiseless_keeps_true_state(rng):
    belief = ParticleBelief([4.0])
    post, r, c = pf_step(Noiseless(), belief, 1, 10, rng)
    assert post.particles == [5.0] * 10
    assert post.weights == pytest.approx([0.1] * 10, abs=1e-15)


def test_pf_step_cost_over_cliff_region(rng):
    m = CLightDark()
    belief = ParticleBelief([rng.uniform(23.0, 30.0) for _ in range(200)])
    for a in m.actions:
        _, _, c = pf_step(m, belief, a, 30, rng)
        assert c == (1.0,)


def test_pf_step_mean_matches_monte_carlo_oracle():
    m = CLightDark()
    # oracle: predictive mean of s' = s + 1 under N(2, 2) from 1e6 draws
    oracle = float(np.mean(np.random.default_rng(0).normal(2.0, 2.0, 1_000_000) + 1.0))
    belief = ParticleBelief(list(np.random.default_rng(1).normal(2.0, 2.0, 1000)))
    rng = random.Random(3)
    means = [pf_step(m, belief, 1, 1000, rng)[0].mean() for _ in range(40)]
    assert abs(statistics.fmean(means) - oracle) <= 0.2
    assert abs(oracle - 3.0) < 0.01


def test_pf_step_rejects_zero_width(rng):
    with pytest.raises(ValueError):
        pf_step(CLightDark(), ParticleBelief([1.0]), 1, 0, rng)


def test_pf_step_signals_depletion():
    class Blind(Noiseless):
        def _obs_density(self, o, s, a, sp):
            return 0.0

    with pytest.raises(ParticleDepletion) as err:
        pf_step(Blind(), ParticleBelief([1.0, 2.0]), 1, 5, random.Random(0))
    assert len(err.value.propagated) == 5


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 60), st.sampled_from([0, 1, -1, 5, -5, 10, -10]))
def test_pf_step_weights_normalized_and_reward_is_particle_mean(seed, m, action):
    model = CLightDark()
    rng = random.Random(seed)
    belief = ParticleBelief([rng.gauss(6.0, 4.0) for _ in range(50)], [rng.random() + 1e-3 for _ in range(50)])
    # replay the propagation with the same stream to get per-particle rewards
    replay = random.Random(seed + 1)
    sources = [belief.sample(replay) for _ in range(m)]
    _, rewards, costs, _, _ = propagate(model, sources, action, replay)
    post, r, c = pf_step(model, belief, action, m, random.Random(seed + 1))
    assert all(w >= 0 for w in post.weights)
    assert math.fsum(post.weights) == pytest.approx(1.0, abs=1e-9)
    assert len(post) == m
    assert r == pytest.approx(math.fsum(rewards) / m, abs=1e-12)
    assert c[0] == pytest.approx(math.fsum(x[0] for x in costs) / m, abs=1e-12)


def test_initial_belief_lightdark_moments():
    b = initial_belief(CLightDark(), 100_000, random.Random(11))
    xs = b.particles
    assert 1.95 <= statistics.fmean(xs) <= 2.05
    assert 1.96 <= statistics.stdev(xs) <= 2.04
    assert b.weights[0] == pytest.approx(1e-5)


def test_initial_belief_single_particle():
    b = initial_belief(CLightDark(), 1, random.Random(0))
    assert len(b) == 1 and b.weights == [1.0]
    with pytest.raises(ValueError):
        initial_belief(CLightDark(), 0, random.Random(0))


def test_initial_belief_vdptag_agent_at_origin():
    m = CVDPTag()
    b = initial_belief(m, 500, random.Random(0))
    assert all(s[0] == 0.0 and s[1] == 0.0 for s in b.particles)
    targets = [(s[2], s[3]) for s in b.particles]
    assert all(-4.0 <= x <= 4.0 and -4.0 <= y <= 4.0 for x, y in targets)
    assert len(set(targets)) == 500


def test_systematic_indices_counts():
    idx = systematic_indices([0.1, 0.0, 0.6, 0.3], 10, random.Random(2))
    assert sorted(idx) == idx
    assert idx.count(1) == 0
    assert idx.count(2) == 6
    assert abs(idx.count(0) - 1) <= 1 and abs(idx.count(3) - 3) <= 1


def test_bootstrap_update_concentrates_near_light(rng):
    m = CLightDark()
    belief = initial_belief(m, 5000, rng)
    post, depleted = bootstrap_update(m, belief, 5, 7.0, 5000, rng)
    assert not depleted
    assert math.fsum(post.weights) == pytest.approx(1.0, abs=1e-9)
    assert abs(post.mean() - 7.0) < 1.5


def test_bootstrap_update_depletion_falls_back_to_prior(rng):
    belief = ParticleBelief([1.0, 2.0])
    post, depleted = bootstrap_update(Noiseless(), belief, 1, 100.0, 10, rng)
    assert depleted
    assert set(post.particles) <= {2.0, 3.0}
    assert post.weights == pytest.approx([0.1] * 10)
