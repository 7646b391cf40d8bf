"""Benchmark CPOMDPs."""
from cpomdp.problems.lightdark import CLightDark
from cpomdp.problems.scalarized import ScalarizedCPOMDP, scalarize
from cpomdp.problems.tiger import CTiger
from cpomdp.problems.vdptag import CVDPTag

PROBLEMS = {"lightdark": CLightDark, "vdptag": CVDPTag, "tiger": CTiger}


def make_problem(name: str, **params):
    try:
        cls = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; expected one of {sorted(PROBLEMS)}") from None
    return cls(**params)


__all__ = ["CLightDark", "CTiger", "CVDPTag", "PROBLEMS", "ScalarizedCPOMDP", "make_problem", "scalarize"]
