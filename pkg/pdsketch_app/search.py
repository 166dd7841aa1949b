"""
Forward search over latent states.

A* expands nodes in order of f = g + w * h with unit action costs, breaking
ties on lower h, then insertion order. Successors are produced by
`apply_action` in latent space; the relaxed domains only supply guidance.
The goal test runs on expansion (score > 0.5).

Duplicate detection hashes each state's quantized tables when codebooks are
given, otherwise its values rounded to `round_decimals`.
"""

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .conf import get_section
from .discretize import quantize_state
from .domain_model import ground_actions
from .exceptions import ConfigError, LimitExceeded, Unsolvable
from .relaxed import hff
from .state_eval import apply_action, eval_expr, eval_goal, evaluate_derived, satisfied

logger = logging.getLogger(__name__)

HEURISTICS = ("blind", "hff-opt", "hff-ao")


@dataclass
class SearchStats:
    expanded: int = 0
    generated: int = 0
    wall_ms: float = 0.0

    def to_dict(self):
        return {"expanded": self.expanded, "generated": self.generated, "wall_ms": round(self.wall_ms, 3)}


@dataclass
class SearchNode:
    state: object
    g: int
    h: float
    parent: "SearchNode" = None
    action: object = None

    def path(self):
        node, out = self, []
        while node.parent is not None:
            out.append(node.action)
            node = node.parent
        return out[::-1]


@dataclass
class Plan:
    actions: list
    stats: SearchStats = field(default_factory=SearchStats)

    def __len__(self):
        return len(self.actions)

    @property
    def labels(self):
        return [a.label for a in self.actions]

    def format(self):
        return "".join(f"{label}\n" for label in self.labels)


# ------------------------------------------------------------------------------
# STATE KEYS
# ------------------------------------------------------------------------------

def state_key(domain, state, codebooks=None, decimals=4):
    """Hashable identity of a latent state for duplicate detection."""
    if codebooks:
        return quantize_state(domain, state, codebooks, include_derived=False)
    items = []
    for name in sorted(state.tables):
        info = domain.predicates[name]
        for args, node in sorted(state.tables[name].items()):
            if info.is_bool:
                items.append((name, args, node.item() > 0.5))
            else:
                items.append((name, args, tuple(np.round(np.atleast_1d(node.numpy()), decimals).tolist())))
    return tuple(items)


# ------------------------------------------------------------------------------
# HEURISTICS
# ------------------------------------------------------------------------------

def blind(domain, state, goal):
    """0 when the goal holds, 1 otherwise."""
    with ad.no_grad():
        return 0 if satisfied(eval_goal(domain, state, goal)) else 1


def heuristic_for(state, compiled, goal, codebooks=None):
    """
    hFF of a latent state on a relaxed compilation.

    AO compilations quantize the state with their codebooks (derived
    predicates included); OPT compilations keep the Boolean propositions only
    and evaluate optimistic tests on the latent state itself.

    Raises:
        MissingCodebook: A non-Boolean predicate has no codebook (AO).
    """
    domain = compiled.domain
    with ad.no_grad():
        if compiled.mode == "ao":
            discrete = quantize_state(domain, state, codebooks or compiled.codebooks)
        else:
            discrete = _boolean_props(domain, state)
        formula = compiled.compile_goal(goal)

        def oracle(expr, binding):
            return eval_expr(domain, state, expr, binding).item() > 0.5

        return hff(compiled, discrete, formula, state.universe, oracle)


def _boolean_props(domain, state):
    props = []
    for name, table in state.tables.items():
        if domain.predicates[name].is_bool:
            props.extend((name, args, node.item() > 0.5) for args, node in table.items())
    bool_derived = [n for n in domain.derived if domain.predicates[n].is_bool]
    for name, table in evaluate_derived(domain, state, bool_derived).items():
        props.extend((name, args, node.item() > 0.5) for args, node in table.items())
    return props


def make_heuristic(name, domain, compiled=None):
    """
    Heuristic callable (state, goal) -> number by name.

    Raises:
        ConfigError: Unknown name, or an hFF heuristic without a compilation
            of the matching mode.
    """
    if name == "blind":
        return lambda state, goal: blind(domain, state, goal)
    if name not in HEURISTICS:
        raise ConfigError(f"unknown heuristic {name!r}, expected one of {', '.join(HEURISTICS)}")
    mode = name.split("-", 1)[1]
    if compiled is None or compiled.mode != mode:
        raise ConfigError(f"heuristic {name} needs a {mode} compilation")
    return lambda state, goal: heuristic_for(state, compiled, goal)


# ------------------------------------------------------------------------------
# SEARCH
# ------------------------------------------------------------------------------

class _Limits:
    def __init__(self, cfg, stats):
        self.max_nodes = int(cfg["max_nodes"])
        self.max_seconds = float(cfg["max_seconds"])
        self.start = time.perf_counter()
        self.stats = stats

    def check(self):
        self.stats.wall_ms = (time.perf_counter() - self.start) * 1000.0
        if self.stats.expanded >= self.max_nodes:
            raise LimitExceeded(f"node limit {self.max_nodes} reached", self.stats)
        if self.stats.wall_ms > self.max_seconds * 1000.0:
            raise LimitExceeded(f"time limit {self.max_seconds}s reached", self.stats)


def _successors(domain, state, actions):
    with ad.no_grad():
        for action in actions:
            if eval_expr(domain, state, action.precondition).item() > 0.5:
                yield action, apply_action(domain, state, action)


def astar(domain, s0, goal, heuristic=None, limits=None, codebooks=None):
    """
    A* from `s0` to `goal`.

    Args:
        domain (Domain): Domain with bound slots.
        s0 (FactoredState): Initial latent state.
        goal (Expr): Checked Boolean goal.
        heuristic (callable, optional): (state, goal) -> number; blind by default.
        limits (dict, optional): Overrides of the SEARCH section
            (max_nodes, max_seconds, weight, round_decimals).
        codebooks (dict, optional): Quantize states for duplicate detection.

    Returns:
        Plan: Actions and statistics.

    Raises:
        LimitExceeded: Node or time limit hit.
        Unsolvable: Open list exhausted.
    """
    cfg = get_section("SEARCH", limits)
    weight = float(cfg["weight"])
    heuristic = heuristic or (lambda state, g: blind(domain, state, g))
    stats = SearchStats()
    guard = _Limits(cfg, stats)
    actions = ground_actions(domain, s0.universe)
    counter = itertools.count()

    def key_of(state):
        return state_key(domain, state, codebooks, int(cfg["round_decimals"]))

    def push(node):
        if weight == 0:
            f = node.g
        elif math.isinf(node.h):
            return
        else:
            f = node.g + weight * node.h
        heapq.heappush(open_list, (f, node.h, next(counter), node))

    open_list = []
    root = SearchNode(s0, 0, heuristic(s0, goal))
    best_g = {key_of(s0): 0}
    push(root)
    stats.generated = 1

    while open_list:
        guard.check()
        _, _, _, node = heapq.heappop(open_list)
        key = key_of(node.state)
        if best_g.get(key, math.inf) < node.g:
            continue
        stats.expanded += 1
        with ad.no_grad():
            done = satisfied(eval_goal(domain, node.state, goal))
        if done:
            stats.wall_ms = (time.perf_counter() - guard.start) * 1000.0
            plan = Plan(node.path(), stats)
            logger.info("plan of length %d: %d expanded, %d generated", len(plan), stats.expanded, stats.generated)
            return plan
        for action, succ in _successors(domain, node.state, actions):
            g = node.g + 1
            k = key_of(succ)
            if best_g.get(k, math.inf) <= g:
                continue
            best_g[k] = g
            stats.generated += 1
            push(SearchNode(succ, g, heuristic(succ, goal), node, action))

    stats.wall_ms = (time.perf_counter() - guard.start) * 1000.0
    raise Unsolvable("open list exhausted", stats)


def breadth_first_search(domain, s0, goal, limits=None, codebooks=None):
    """Breadth-first search; returns a shortest Plan."""
    cfg = get_section("SEARCH", limits)
    stats = SearchStats()
    guard = _Limits(cfg, stats)
    actions = ground_actions(domain, s0.universe)
    decimals = int(cfg["round_decimals"])
    frontier = [SearchNode(s0, 0, 0)]
    seen = {state_key(domain, s0, codebooks, decimals)}
    stats.generated = 1
    while frontier:
        layer = []
        for node in frontier:
            guard.check()
            stats.expanded += 1
            with ad.no_grad():
                if satisfied(eval_goal(domain, node.state, goal)):
                    return Plan(node.path(), stats)
            for action, succ in _successors(domain, node.state, actions):
                k = state_key(domain, succ, codebooks, decimals)
                if k in seen:
                    continue
                seen.add(k)
                stats.generated += 1
                layer.append(SearchNode(succ, node.g + 1, 0, node, action))
        frontier = layer
    raise Unsolvable("state space exhausted", stats)


def execute(domain, s0, actions):
    """Replay grounded actions from `s0`; returns the final state."""
    state = s0
    with ad.no_grad():
        for action in actions:
            state = apply_action(domain, state, action)
    return state
