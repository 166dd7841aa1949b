"""
Planning tasks and model loading for the planning commands.

A task is an initial observation plus a goal. It comes either from a dataset
episode (its first state and goal) or from a grid-world layout drawn from a
seed. Grid tasks keep their simulator state so a plan can be checked against
the ground-truth dynamics.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

from . import autodiff as ad
from .domain_model import check_complete
from .exceptions import ConfigError, SchemaError, UnboundSlot, Unsolvable
from .gridworld import (
    GridGoal, bind_oracle_slots, grid_config, make_task, parse_goal, raw_tables, rollout, shortest_plan,
)
from .neural_slots import arch_for, load_into
from .pds_validation import load_domain_file, validate_goal
from .relaxed import compile_opt, load_json
from .search import make_heuristic
from .state_eval import make_state

logger = logging.getLogger(__name__)


@dataclass
class Task:
    """
    Attributes:
        task_id (str): Identifier within a suite.
        universe (Universe): Objects.
        tables (dict): Raw input tables of the initial state.
        goal_text (str): Goal in the domain language.
        grid_state (GridState | None): Simulator state for grid tasks.
        grid_goal (GridGoal | None): Ground-truth goal for grid tasks.
    """

    task_id: str
    universe: object
    tables: dict
    goal_text: str
    grid_state: object = None
    grid_goal: GridGoal = None

    def initial_state(self, domain, params=None):
        encoder = getattr(params, "encoder", None)
        with ad.no_grad():
            return make_state(domain, self.universe, self.tables, encoder)

    def goal(self, domain):
        return validate_goal(domain, self.goal_text)

    def plan_succeeds(self, actions):
        """Ground-truth check of a plan; None for tasks without a simulator."""
        if self.grid_goal is None:
            return None
        names = [a.name for a in actions]
        _, succ = rollout(self.grid_state, names, self.grid_goal)
        return bool(succ[-1])


def load_model(domain_path, params_path=None, arch_path=None, grid_size=None):
    """
    Load a domain and bind its slots.

    With a parameter file the slots are the trained networks. Without one,
    ground-truth slots are bound where available, and every slot must end up
    bound.

    Returns:
        tuple[Domain, SlotParams | None]

    Raises:
        UnboundSlot: No parameters given and some slot has no ground truth.
    """
    domain = load_domain_file(domain_path)
    if params_path:
        return domain, load_into(domain, params_path, arch_for(params_path, arch_path))
    size = grid_size or grid_config().size
    bound = bind_oracle_slots(domain, size)
    logger.info("bound %d ground-truth slots for %s", len(bound), domain.name)
    missing = check_complete(domain)
    if missing:
        raise UnboundSlot(f"no parameters given and no ground truth for: {', '.join(missing)}")
    return domain, None


def grid_task(seed, grid=None, goal=None, task_id=None):
    """
    Task on a seeded grid layout.

    `goal` overrides the sampled goal, either as "verb color shape" or as a
    formula in the domain language. A formula goal has no ground-truth check.
    """
    config = grid_config(grid, seed)
    state, sampled = make_task(config, seed)
    task_id = task_id or f"grid-{seed}"
    if goal and goal.lstrip().startswith("("):
        return Task(task_id, state.universe(), raw_tables(state), goal, state, None)
    target = parse_goal(goal) if goal else sampled
    return Task(task_id, state.universe(), raw_tables(state), target.to_expression(), state, target)


def dataset_task(episode, goal=None):
    """Task from the first state of a dataset episode."""
    return Task(episode.id, episode.universe, episode.states[0], goal or episode.goal_text)


def grid_suite(n_tasks, seed=0, grid=None):
    """
    `n_tasks` solvable grid tasks on seeds seed, seed+1, ...

    Tasks whose goal already holds or cannot be reached are skipped.
    """
    tasks = []
    k = 0
    while len(tasks) < n_tasks:
        task = grid_task(seed + k, grid, task_id=f"t{len(tasks):03d}")
        k += 1
        try:
            if not shortest_plan(task.grid_state, task.grid_goal):
                continue
        except Unsolvable:
            continue
        tasks.append(task)
    return tasks


def load_suite(path, grid=None):
    """
    Suite file: {"tasks": [{"id": "t000", "seed": 3, "goal": "pickup red ball"}, ...]}.
    The goal is optional.
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read suite {path}: {exc}") from exc
    try:
        return [grid_task(int(t["seed"]), grid, t.get("goal"), t.get("id")) for t in data["tasks"]]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"suite {path}: every task needs a seed ({exc})") from exc


def load_heuristic(name, domain, relaxed_path=None):
    """
    Heuristic callable by name, reloading a compilation when one is given.

    hff-opt compiles on the fly without a file; hff-ao needs the JSON
    companion written by `compile --mode ao`.
    """
    if name == "blind":
        return make_heuristic(name, domain)
    if relaxed_path:
        compiled = load_json(relaxed_path, domain)
    elif name == "hff-opt":
        compiled = compile_opt(domain)
    else:
        raise ConfigError(f"{name} needs a compiled domain (compile --mode ao)")
    return make_heuristic(name, domain, compiled)
