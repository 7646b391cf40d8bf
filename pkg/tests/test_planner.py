import random
from dataclasses import replace

import pytest

from cpomdp.belief import ParticleBelief, initial_belief
from cpomdp.planner import PLANNER_IDS, Planner, plan
from cpomdp.policy import DualAscentConfig
from cpomdp.problems import CLightDark, CTiger
from cpomdp.tree import SearchConfig

SMALL = SearchConfig(n_iterations=300, max_depth=10, exploration=30.0, rollout_policy="light-first")


def test_zero_iterations_rejected():
    # construction already refuses n = 0; plan() guards configs built around validation
    with pytest.raises(ValueError):
        SearchConfig(n_iterations=0)
    cfg = SearchConfig(n_iterations=1)
    object.__setattr__(cfg, "n_iterations", 0)
    with pytest.raises(ValueError):
        plan(ParticleBelief([2.0]), CLightDark(), cfg, random.Random(0))


def test_budget_length_checked():
    with pytest.raises(ValueError):
        plan(ParticleBelief([2.0]), CLightDark(), SMALL, random.Random(0), budget=(0.1, 0.2))


def test_huge_budget_keeps_lambda_zero():
    model = CLightDark(budget=1e9)
    belief = initial_belief(model, 500, random.Random(1))
    for variant in ("cpomcpow", "cpft-dpw", "cpomcp-dpw"):
        _, _, diag = plan(belief, model, SMALL, random.Random(2), variant)
        assert diag.lam == [0.0]


def test_tight_budget_raises_lambda():
    model = CLightDark(budget=0.0)
    belief = ParticleBelief([11.0] * 50)  # any move up crosses the cliff
    cfg = replace(SMALL, rollout_policy="random")
    _, _, diag = plan(belief, model, cfg, random.Random(0), "cpomcpow", DualAscentConfig(a_step=50.0))
    assert diag.lam[0] > 0.0


def test_diagnostics_shape():
    model = CLightDark()
    belief = initial_belief(model, 500, random.Random(1))
    action, policy, diag = plan(belief, model, SMALL, random.Random(3), "cpomcpow")
    assert action in model.actions
    assert diag.iterations == 300 and diag.root_visits == 300
    assert sum(r["N"] for r in diag.root) == 300
    assert {"action", "N", "Q", "Q_C", "Q_lambda"} <= set(diag.root[0])
    assert action in diag.policy.support
    assert len(diag.tree_dump.splitlines()) == len(diag.root)


def test_plan_is_deterministic_given_seed():
    model = CLightDark()
    belief = initial_belief(model, 500, random.Random(1))
    for variant in ("cpomcpow", "cpft-dpw", "cpomcp-dpw"):
        a = plan(belief, model, SMALL, random.Random(9), variant)
        b = plan(belief, model, SMALL, random.Random(9), variant)
        assert a[0] == b[0]
        assert a[2].root == b[2].root and a[2].lam == b[2].lam


@pytest.mark.parametrize("constrained,unconstrained", [("cpomcpow", "pomcpow"), ("cpft-dpw", "pft-dpw")])
def test_unconstrained_reduction_root_identity(constrained, unconstrained):
    model = CLightDark(budget=1e9)
    belief = initial_belief(model, 500, random.Random(4))
    c_planner = Planner(constrained, SMALL)
    u_planner = Planner(unconstrained, SMALL)
    ca, _, cd = c_planner.plan(belief, c_planner.planning_model(model), random.Random(11))
    ua, _, ud = u_planner.plan(belief, u_planner.planning_model(model), random.Random(11))
    assert ca == ua
    strip = lambda rows: [(r["action"], r["N"], r["Q"]) for r in rows]
    assert strip(cd.root) == strip(ud.root)
    assert ud.lam == [] and cd.lam == [0.0]


def test_planner_ids_and_baselines():
    assert set(PLANNER_IDS) == {"cpomcp-dpw", "cpomcpow", "cpft-dpw", "pomcpow", "pft-dpw"}
    with pytest.raises(ValueError):
        Planner("pomcp")
    assert Planner("pomcpow").variant == "cpomcpow" and not Planner("pomcpow").constrained
    wrapped = Planner("pft-dpw").planning_model(CLightDark())
    assert wrapped.n_costs == 0


def test_tiger_plan_respects_zero_budget():
    model = CTiger()
    cfg = SearchConfig(n_iterations=1000, max_depth=3, exploration=10.0, rollout_policy="open")
    belief = initial_belief(model, 1000, random.Random(0))
    dual = DualAscentConfig(a_step=50.0)
    chosen = [plan(belief, model, cfg, random.Random(s), "cpomcpow", dual)[0] for s in range(20)]
    assert chosen.count(1) >= 19
