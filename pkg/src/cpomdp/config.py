"""Run configuration: INI-style ``key = value`` files with section headers.

Sections
--------
``[problem]``     ``name`` plus any problem constant (e.g. ``cliff = 12``)
``[planner]``     planner ids and search hyperparameters
``[planner.ID]``  per-planner overrides of ``[planner]`` keys
``[dual]``        dual-ascent schedule and the rolling-budget switch
``[harness]``     episode counts, belief size, seeds, workers
``[output]``      output directory and timing column
``[pareto]``      scalarization sweep
``[ablation]``    cost-propagation ablation
"""
from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

from cpomdp.planner import PLANNER_IDS, Planner
from cpomdp.policy import DualAscentConfig
from cpomdp.problems import PROBLEMS, make_problem
from cpomdp.tree import SearchConfig


class ConfigError(ValueError):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.line = line


SEARCH_KEYS = {
    "n_iterations": int, "max_depth": int, "k_action": float, "alpha_action": float, "k_obs": float,
    "alpha_obs": float, "exploration": float, "nu": float, "pf_width": int, "return_minimal_cost": "bool",
    "rollout_policy": str,
}

SEARCH_DEFAULTS = {
    "lightdark": dict(n_iterations=2_000, max_depth=20, k_action=10.0, alpha_action=1.0, k_obs=5.0,
                      alpha_obs=0.1, exploration=30.0, nu=5.0, pf_width=30, return_minimal_cost=True,
                      rollout_policy="light-first"),
    "vdptag": dict(n_iterations=1_000, max_depth=10, k_action=8.0, alpha_action=0.25, k_obs=5.0,
                   alpha_obs=0.1, exploration=110.0, nu=0.01, pf_width=30, return_minimal_cost=True,
                   rollout_policy="random"),
    "tiger": dict(n_iterations=2_000, max_depth=3, k_action=10.0, alpha_action=1.0, k_obs=5.0,
                  alpha_obs=0.1, exploration=10.0, nu=0.01, pf_width=30, return_minimal_cost=True,
                  rollout_policy="open"),
}

DUAL_DEFAULTS = {
    "lightdark": dict(lambda0="", a_step=200.0, b_step=100.0, rolling_budget=True),
    "vdptag": dict(lambda0="", a_step=200.0, b_step=100.0, rolling_budget=True),
    "tiger": dict(lambda0="", a_step=50.0, b_step=100.0, rolling_budget=True),
}

HARNESS_DEFAULTS = {
    "lightdark": dict(n_episodes=100, max_steps=100, belief_particles=10_000, base_seed=0, jobs=1),
    "vdptag": dict(n_episodes=50, max_steps=50, belief_particles=5_000, base_seed=0, jobs=1),
    "tiger": dict(n_episodes=200, max_steps=10, belief_particles=1_000, base_seed=0, jobs=1),
}

PLANNER_DEFAULT = "cpomcpow, cpft-dpw, cpomcp-dpw"
OUTPUT_DEFAULTS = dict(out_dir="", record_wall_time=False)
PARETO_DEFAULTS = dict(lambda_grid="0, 1, 5, 10, 50, 100, 500, 10000", n_episodes=0,
                       sweep_planner="pomcpow", constrained_planner="cpomcpow")
ABLATION_DEFAULTS = dict(n_searches=50, planner="cpomcpow", actions="1, 5, 10")

_TYPES = {
    "dual": {"lambda0": "floats", "a_step": float, "b_step": float, "rolling_budget": "bool"},
    "harness": {"n_episodes": int, "max_steps": int, "belief_particles": int, "base_seed": int, "jobs": int},
    "output": {"out_dir": str, "record_wall_time": "bool"},
    "pareto": {"lambda_grid": "floats", "n_episodes": int, "sweep_planner": str, "constrained_planner": str},
    "ablation": {"n_searches": int, "planner": str, "actions": "floats"},
}


@dataclass
class RunConfig:
    problem: str
    problem_params: dict[str, Any]
    planners: list[Planner]
    rolling_budget: bool
    n_episodes: int
    max_steps: int
    belief_particles: int
    base_seed: int
    jobs: int
    out_dir: str
    record_wall_time: bool
    lambda_grid: list[float]
    pareto_episodes: int
    sweep_planner: str
    constrained_planner: str
    n_searches: int
    ablation_planner: str
    ablation_actions: list[float]
    search_by_planner: dict[str, SearchConfig] = field(default_factory=dict)
    dual: DualAscentConfig = DualAscentConfig()

    def model(self):
        return make_problem(self.problem, **self.problem_params)

    def planner(self, planner_id: str) -> Planner:
        for p in self.planners:
            if p.planner_id == planner_id:
                return p
        search = self.search_by_planner.get(planner_id) or self.planners[0].search
        return Planner(planner_id, search, self.dual)


def _key_lines(text: str) -> dict[tuple[str, Optional[str]], int]:
    lines: dict[tuple[str, Optional[str]], int] = {}
    section = None
    for no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", stripped)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), no)
            continue
        m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", stripped)
        if m and section is not None:
            lines.setdefault((section, m.group(1).strip().lower()), no)
    return lines


def _parse_value(kind, raw: str):
    raw = raw.strip()
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected on/off, got {raw!r}")
    if kind == "floats":
        return [float(x) for x in raw.replace(",", " ").split()]
    return kind(raw)


def _problem_field_types(problem: str) -> dict[str, Any]:
    cls = PROBLEMS[problem]
    out = {}
    for f in dataclasses.fields(cls):
        if not f.init or f.name == "name":
            continue
        if f.name == "actions":
            out[f.name] = "floats"
        elif isinstance(f.default, bool):
            out[f.name] = "bool"
        else:
            out[f.name] = type(f.default)
    return out


def load_config(path: Optional[str] = None, text: Optional[str] = None,
                overrides: Optional[dict[str, dict[str, Any]]] = None) -> RunConfig:
    """Parse and validate a run configuration.

    ``overrides`` maps section -> key -> already-typed value and wins over the
    file (used for command-line flags).
    """
    if text is None:
        if path is None:
            raise ConfigError("no configuration given")
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config: {err}", path) from err
    label = path or "<config>"
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=label)
    except configparser.Error as err:
        line = getattr(err, "lineno", None)
        raise ConfigError(str(err).splitlines()[0], label, line) from err
    lines = _key_lines(text)

    def fail(message, section, key=None):
        raise ConfigError(message, label, lines.get((section, key)) or lines.get((section, None)))

    if not parser.has_section("problem") or not parser.has_option("problem", "name"):
        fail("missing [problem] name", "problem")
    problem = parser.get("problem", "name").strip()
    if problem not in PROBLEMS:
        fail(f"unknown problem {problem!r}; expected one of {sorted(PROBLEMS)}", "problem", "name")

    overrides = overrides or {}
    known_sections = {"problem", "planner", "dual", "harness", "output", "pareto", "ablation"}
    for section in parser.sections():
        if section in known_sections:
            continue
        if section.startswith("planner.") and section.split(".", 1)[1] in PLANNER_IDS:
            continue
        fail(f"unknown section [{section}]", section)

    # problem constants
    ptypes = _problem_field_types(problem)
    problem_params: dict[str, Any] = {}
    for key, raw in parser.items("problem"):
        if key == "name":
            continue
        if key not in ptypes:
            fail(f"unknown key {key!r} for problem {problem}", "problem", key)
        try:
            value = _parse_value(ptypes[key], raw)
        except ValueError as err:
            fail(f"bad value for {key}: {err}", "problem", key)
        problem_params[key] = tuple(value) if isinstance(value, list) else value
    for key, value in overrides.get("problem", {}).items():
        problem_params[key] = value

    def section_values(section: str, defaults: dict, types: dict) -> dict:
        values = dict(defaults)
        if parser.has_section(section):
            for key, raw in parser.items(section):
                if key not in types:
                    fail(f"unknown key {key!r} in [{section}]", section, key)
                try:
                    values[key] = _parse_value(types[key], raw)
                except ValueError as err:
                    fail(f"bad value for {key}: {err}", section, key)
        for key, value in overrides.get(section, {}).items():
            values[key] = value
        for key, value in list(values.items()):
            if isinstance(value, str) and types.get(key) not in (str, None):
                values[key] = _parse_value(types[key], value)
        return values

    search_types = dict(SEARCH_KEYS, ids=str)
    base = section_values("planner", dict(SEARCH_DEFAULTS[problem], ids=PLANNER_DEFAULT), search_types)
    ids = [x.strip() for x in str(base.pop("ids")).split(",") if x.strip()]
    if not ids:
        fail("[planner] ids is empty", "planner", "ids")
    for pid in ids:
        if pid not in PLANNER_IDS:
            fail(f"unknown planner {pid!r}; expected one of {list(PLANNER_IDS)}", "planner", "ids")

    dual_values = section_values("dual", DUAL_DEFAULTS[problem], _TYPES["dual"])
    try:
        dual = DualAscentConfig(tuple(dual_values["lambda0"]), dual_values["a_step"], dual_values["b_step"])
    except ValueError as err:
        fail(str(err), "dual")

    search_by_planner = {}
    planners = []
    for pid in PLANNER_IDS:
        per = section_values(f"planner.{pid}", base, SEARCH_KEYS)
        try:
            search_by_planner[pid] = SearchConfig(**per)
        except ValueError as err:
            fail(str(err), f"planner.{pid}" if parser.has_section(f"planner.{pid}") else "planner")
    for pid in ids:
        planners.append(Planner(pid, search_by_planner[pid], dual))

    harness = section_values("harness", HARNESS_DEFAULTS[problem], _TYPES["harness"])
    for key in ("n_episodes", "max_steps", "belief_particles", "jobs"):
        if harness[key] < 1:
            fail(f"{key} must be >= 1", "harness", key)
    output = section_values("output", OUTPUT_DEFAULTS, _TYPES["output"])
    pareto = section_values("pareto", PARETO_DEFAULTS, _TYPES["pareto"])
    if not pareto["lambda_grid"]:
        fail("lambda_grid is empty", "pareto", "lambda_grid")
    if any(x < 0 for x in pareto["lambda_grid"]):
        fail("lambda_grid entries must be >= 0", "pareto", "lambda_grid")
    for key in ("sweep_planner", "constrained_planner"):
        if pareto[key] not in PLANNER_IDS:
            fail(f"unknown planner {pareto[key]!r}", "pareto", key)
    ablation = section_values("ablation", ABLATION_DEFAULTS, _TYPES["ablation"])
    if ablation["n_searches"] < 1:
        fail("n_searches must be >= 1", "ablation", "n_searches")

    try:
        make_problem(problem, **problem_params)
    except (TypeError, ValueError) as err:
        fail(str(err), "problem")

    return RunConfig(
        problem=problem,
        problem_params=problem_params,
        planners=planners,
        rolling_budget=dual_values["rolling_budget"],
        n_episodes=harness["n_episodes"],
        max_steps=harness["max_steps"],
        belief_particles=harness["belief_particles"],
        base_seed=harness["base_seed"],
        jobs=harness["jobs"],
        out_dir=output["out_dir"],
        record_wall_time=output["record_wall_time"],
        lambda_grid=list(pareto["lambda_grid"]),
        pareto_episodes=pareto["n_episodes"] or harness["n_episodes"],
        sweep_planner=pareto["sweep_planner"],
        constrained_planner=pareto["constrained_planner"],
        n_searches=ablation["n_searches"],
        ablation_planner=ablation["planner"],
        ablation_actions=[int(a) if float(a).is_integer() else a for a in ablation["actions"]],
        search_by_planner=search_by_planner,
        dual=dual,
    )


def describe_keys() -> str:
    """Every config key with its default, per problem where defaults differ."""
    out = ["configuration keys (defaults per problem: lightdark / vdptag / tiger):", "", "[problem]",
           "  name = lightdark | vdptag | tiger"]
    for problem, cls in PROBLEMS.items():
        out.append(f"  # {problem} constants")
        for f in dataclasses.fields(cls):
            if f.init and f.name != "name":
                out.append(f"  {f.name} = {f.default!r}")
    out += ["", "[planner]", f"  ids = {PLANNER_DEFAULT}"]
    for key in SEARCH_KEYS:
        vals = " / ".join(str(SEARCH_DEFAULTS[p][key]) for p in SEARCH_DEFAULTS)
        out.append(f"  {key} = {vals}")
    out += ["", "[planner.ID]  (ID in " + ", ".join(PLANNER_IDS) + "; overrides any [planner] key)"]
    for section, defaults in (("dual", DUAL_DEFAULTS), ("harness", HARNESS_DEFAULTS)):
        out += ["", f"[{section}]"]
        for key in defaults["lightdark"]:
            vals = " / ".join(str(defaults[p][key]) for p in defaults)
            out.append(f"  {key} = {vals}")
    for section, defaults in (("output", OUTPUT_DEFAULTS), ("pareto", PARETO_DEFAULTS),
                              ("ablation", ABLATION_DEFAULTS)):
        out += ["", f"[{section}]"]
        out += [f"  {key} = {value}" for key, value in defaults.items()]
    return "\n".join(out)
