"""
ActionObjDoor-style grid world.

A square grid whose outer ring is wall, with doors set into the ring (never
on corners) and keys, balls and boxes on interior cells. The agent starts at
the centre. Five primitives: lturn, rturn, forward, pickup, toggle. Every
primitive can always be executed; one that does not apply is a no-op.

Blocking: walls, closed doors and every non-door item block `forward`; open
doors do not. A held item has pose (-1, -1).

Observations follow the dataset format of `trainer`:

    robot-pose       [x, y]
    robot-direction  one-hot over N, E, S, W
    item-pose        [x, y]
    item-image       one-hot color (6) | one-hot shape (4) | open flag

Glyphs of `render`: '#' wall, '^ > v <' agent, door 'D' (closed) or '_'
(open), 'k' key, 'b' ball, 'x' box, '.' floor; a held item is listed below the
grid.
"""

import logging
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .conf import get_section
from .domain_model import Universe, bind_slot
from .exceptions import GridConfigError, Unsolvable
from .neural_slots import FunctionSlot
from .trainer import episode_record

logger = logging.getLogger(__name__)

COLORS = ("red", "green", "blue", "purple", "yellow", "grey")
SHAPES = ("key", "ball", "box", "door")
PICKABLE = ("key", "ball", "box")
DIRECTIONS = ("N", "E", "S", "W")
DELTAS = ((0, -1), (1, 0), (0, 1), (-1, 0))
ACTIONS = ("lturn", "rturn", "forward", "pickup", "toggle")
VERBS = ("goto", "pickup", "open")
HELD = (-1, -1)
IMAGE_DIM = len(COLORS) + len(SHAPES) + 1
AGENT = "agent"
RANDOM_WALK_STEPS = 5


# ------------------------------------------------------------------------------
# TYPES
# ------------------------------------------------------------------------------

@dataclass(frozen=True)
class GridConfig:
    size: int = 7
    n_doors: int = 4
    n_objects: int = 4
    seed: int = 0

    def check(self):
        if self.size < 4:
            raise GridConfigError(f"grid size must be at least 4, got {self.size}")
        if self.n_doors < 0 or self.n_objects < 0:
            raise GridConfigError("door and object counts must be non-negative")
        ring = 4 * (self.size - 2)
        interior = (self.size - 2) ** 2 - 1
        if self.n_doors > ring:
            raise GridConfigError(f"{self.n_doors} doors do not fit on a {self.size}x{self.size} wall")
        if self.n_objects > interior:
            raise GridConfigError(f"{self.n_objects} objects do not fit in a {self.size}x{self.size} grid")
        return self


def grid_config(overrides=None, seed=0):
    """GridConfig from settings.PDSKETCH["GRID"] plus overrides."""
    cfg = get_section("GRID", overrides)
    return GridConfig(int(cfg["size"]), int(cfg["n_doors"]), int(cfg["n_objects"]), int(seed)).check()


@dataclass(frozen=True)
class Item:
    name: str
    color: str
    shape: str
    pose: tuple
    is_open: bool = False

    @property
    def held(self):
        return self.pose == HELD

    @property
    def blocks(self):
        return not (self.shape == "door" and self.is_open)

    def image(self):
        img = np.zeros(IMAGE_DIM, dtype=np.float32)
        img[COLORS.index(self.color)] = 1.0
        img[len(COLORS) + SHAPES.index(self.shape)] = 1.0
        img[-1] = 1.0 if self.is_open else 0.0
        return img


@dataclass(frozen=True)
class GridState:
    size: int
    agent: tuple
    direction: int
    items: tuple

    def item_at(self, cell):
        for item in self.items:
            if item.pose == cell:
                return item
        return None

    def facing_cell(self):
        dx, dy = DELTAS[self.direction]
        return (self.agent[0] + dx, self.agent[1] + dy)

    def facing(self):
        return self.item_at(self.facing_cell())

    def holding(self):
        for item in self.items:
            if item.held:
                return item
        return None

    def interior(self, cell):
        x, y = cell
        return 0 < x < self.size - 1 and 0 < y < self.size - 1

    def universe(self):
        return Universe([(AGENT, "robot")] + [(i.name, "item") for i in self.items])


@dataclass(frozen=True)
class GridGoal:
    verb: str
    color: str
    shape: str

    def __post_init__(self):
        if self.verb not in VERBS:
            raise GridConfigError(f"unknown goal verb {self.verb!r}")
        if self.verb == "open" and self.shape != "door":
            raise GridConfigError("only doors can be opened")
        if self.verb == "pickup" and self.shape not in PICKABLE:
            raise GridConfigError(f"a {self.shape} cannot be picked up")

    def describe(self):
        return f"{self.verb} {self.color} {self.shape}"

    def to_expression(self):
        """Goal in the domain language."""
        color, shape = f"(is-{self.color} ?o)", f"(is-{self.shape} ?o)"
        if self.verb == "goto":
            return f"(exists (?o - item) (and (robot-facing {AGENT} ?o) {color} {shape}))"
        if self.verb == "pickup":
            return f"(exists (?o - item) (and (robot-holding {AGENT} ?o) {color} {shape}))"
        return f"(exists (?o - item) (and {color} {shape} (is-open ?o)))"

    def matches(self, item):
        return item.color == self.color and item.shape == self.shape


# ------------------------------------------------------------------------------
# DYNAMICS
# ------------------------------------------------------------------------------

def _ring_cells(size):
    last = size - 1
    cells = [(x, 0) for x in range(1, last)] + [(x, last) for x in range(1, last)]
    cells += [(0, y) for y in range(1, last)] + [(last, y) for y in range(1, last)]
    return sorted(cells)


def reset(config, seed=None):
    """
    Random layout: doors on the wall ring, objects inside, agent at the centre.

    Returns:
        tuple[GridState, dict]: State and its observation.

    Raises:
        GridConfigError: The objects do not fit.
    """
    config.check()
    rng = np.random.default_rng(config.seed if seed is None else seed)
    size = config.size
    centre = (size // 2, size // 2)
    ring = _ring_cells(size)
    inner = [(x, y) for x in range(1, size - 1) for y in range(1, size - 1) if (x, y) != centre]

    items = []
    for k in rng.choice(len(ring), size=config.n_doors, replace=False):
        items.append(("door", ring[int(k)]))
    for k in rng.choice(len(inner), size=config.n_objects, replace=False):
        items.append((PICKABLE[int(rng.integers(len(PICKABLE)))], inner[int(k)]))

    built = tuple(
        Item(f"item{i}", COLORS[int(rng.integers(len(COLORS)))], shape, pose)
        for i, (shape, pose) in enumerate(items)
    )
    state = GridState(size, centre, int(rng.integers(4)), built)
    return state, observation(state)


def step(state, action, goal=None):
    """
    Ground-truth transition.

    Returns:
        tuple[GridState, dict, int | None]: Next state, its observation and
            the success flag of `goal` (None without a goal).
    """
    if action not in ACTIONS:
        raise GridConfigError(f"unknown action {action!r}")
    nxt = _transition(state, action)
    return nxt, observation(nxt), (eval_success(nxt, goal) if goal is not None else None)


def _transition(state, action):
    if action == "lturn":
        return replace(state, direction=(state.direction - 1) % 4)
    if action == "rturn":
        return replace(state, direction=(state.direction + 1) % 4)

    target = state.facing_cell()
    item = state.item_at(target)
    if action == "forward":
        if item is not None:
            return replace(state, agent=target) if not item.blocks else state
        return replace(state, agent=target) if state.interior(target) else state
    if action == "pickup":
        if item is None or item.shape not in PICKABLE or state.holding() is not None:
            return state
        return _replace_item(state, replace(item, pose=HELD))
    # toggle
    if item is None or item.shape != "door":
        return state
    return _replace_item(state, replace(item, is_open=not item.is_open))


def _replace_item(state, new):
    return replace(state, items=tuple(new if i.name == new.name else i for i in state.items))


def eval_success(state, goal):
    """Ground-truth goal test (0 or 1)."""
    if goal.verb == "goto":
        item = state.facing()
        return int(item is not None and goal.matches(item))
    if goal.verb == "pickup":
        item = state.holding()
        return int(item is not None and goal.matches(item))
    return int(any(i.is_open and goal.matches(i) for i in state.items))


# ------------------------------------------------------------------------------
# OBSERVATIONS
# ------------------------------------------------------------------------------

def raw_tables(state):
    """Input predicate tables: predicate -> {(object,): np.ndarray}."""
    direction = np.zeros(4, dtype=np.float32)
    direction[state.direction] = 1.0
    return {
        "robot-pose": {(AGENT,): np.asarray(state.agent, dtype=np.float32)},
        "robot-direction": {(AGENT,): direction},
        "item-pose": {(i.name,): np.asarray(i.pose, dtype=np.float32) for i in state.items},
        "item-image": {(i.name,): i.image() for i in state.items},
    }


def observation(state):
    """Per-object feature records in the dataset format."""
    tables = raw_tables(state)
    objects = [{"name": AGENT, "type": "robot"}] + [{"name": i.name, "type": "item"} for i in state.items]
    by_name = {o["name"]: o for o in objects}
    for pred, table in tables.items():
        for (name,), value in table.items():
            by_name[name][pred] = value.tolist()
    return {"objects": objects}


def render(state):
    """ASCII picture of the grid."""
    rows = []
    arrows = "^>v<"
    for y in range(state.size):
        row = []
        for x in range(state.size):
            cell = (x, y)
            item = state.item_at(cell)
            if cell == state.agent:
                row.append(arrows[state.direction])
            elif item is not None:
                row.append(_glyph(item))
            elif state.interior(cell):
                row.append(".")
            else:
                row.append("#")
        rows.append("".join(row))
    held = state.holding()
    if held is not None:
        rows.append(f"holding {held.color} {held.shape}")
    return "\n".join(rows) + "\n"


def _glyph(item):
    if item.shape == "door":
        return "_" if item.is_open else "D"
    return {"key": "k", "ball": "b", "box": "x"}[item.shape]


# ------------------------------------------------------------------------------
# GOALS AND DEMONSTRATIONS
# ------------------------------------------------------------------------------

def achievable_goals(state):
    """Every (verb, color, shape) goal with a matching object in the layout, sorted."""
    goals = set()
    for item in state.items:
        goals.add(GridGoal("goto", item.color, item.shape))
        if item.shape in PICKABLE:
            goals.add(GridGoal("pickup", item.color, item.shape))
        elif not item.is_open:
            goals.add(GridGoal("open", item.color, item.shape))
    return sorted(goals, key=lambda g: (g.verb, g.color, g.shape))


def sample_goal(state, rng):
    """Uniform over the achievable (verb, color, shape) goals of the layout."""
    goals = achievable_goals(state)
    return goals[int(rng.integers(len(goals)))]


def make_task(config, seed=None):
    """Layout and sampled goal of one planning task; same seed, same task."""
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    state, _ = reset(config, seed)
    return state, sample_goal(state, rng)


def parse_goal(text):
    """GridGoal from "verb color shape", e.g. "pickup red ball"."""
    parts = text.split()
    if len(parts) != 3:
        raise GridConfigError(f"expected 'verb color shape', got {text!r}")
    if parts[1] not in COLORS or parts[2] not in SHAPES:
        raise GridConfigError(f"unknown color or shape in {text!r}")
    return GridGoal(*parts)


def _key(state):
    return (state.agent, state.direction, tuple((i.pose, i.is_open) for i in state.items))


def shortest_plan(state, goal, max_states=200000):
    """
    Optimal action sequence by breadth-first search over the simulator.

    Raises:
        Unsolvable: No state satisfying `goal` is reachable.
    """
    if eval_success(state, goal):
        return []
    parents = {_key(state): None}
    frontier = deque([state])
    while frontier:
        current = frontier.popleft()
        for action in ACTIONS:
            nxt = _transition(current, action)
            key = _key(nxt)
            if key in parents:
                continue
            parents[key] = (_key(current), action, current)
            if eval_success(nxt, goal):
                return _unwind(parents, key)
            if len(parents) > max_states:
                raise Unsolvable(f"search space above {max_states} states for {goal.describe()}")
            frontier.append(nxt)
    raise Unsolvable(f"{goal.describe()} is unreachable")


def _unwind(parents, key):
    actions = []
    while parents[key] is not None:
        key, action, _ = parents[key]
        actions.append(action)
    return actions[::-1]


def _approach_wrong(state, goal):
    wrong = sorted(
        (i for i in state.items if not goal.matches(i) and not i.held),
        key=lambda i: i.name,
    )
    for item in wrong:
        try:
            return shortest_plan(state, GridGoal("goto", item.color, item.shape))
        except Unsolvable:
            continue
    return []


def rollout(state, actions, goal):
    """States and success flags along `actions` from `state`."""
    states, succ = [state], [eval_success(state, goal)]
    for action in actions:
        state = _transition(state, action)
        states.append(state)
        succ.append(eval_success(state, goal))
    return states, succ


def generate_demo(config, goal=None, success=True, seed=None, episode_id="ep"):
    """
    One demonstration as a dataset record.

    Successful demonstrations follow a shortest plan. Unsuccessful ones
    approach an object that does not match the goal and then take
    RANDOM_WALK_STEPS random actions.

    Args:
        config (GridConfig): Layout parameters.
        goal (GridGoal, optional): Sampled from the layout when omitted.
        success (bool): Kind of demonstration.
        seed (int, optional): Layout and walk seed (default: config.seed).
        episode_id (str): Record id.

    Returns:
        dict: Record in the dataset format.

    Raises:
        Unsolvable: `success` and the goal cannot be reached.
    """
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    state, _ = reset(config, seed)
    goal = goal or sample_goal(state, rng)
    if success:
        actions = shortest_plan(state, goal)
    else:
        actions = _approach_wrong(state, goal)
        actions += [ACTIONS[int(k)] for k in rng.integers(len(ACTIONS), size=RANDOM_WALK_STEPS)]
    states, succ = rollout(state, actions, goal)
    return episode_record(
        episode_id,
        state.universe(),
        [raw_tables(s) for s in states],
        [(a, (AGENT,)) for a in actions],
        goal.to_expression(),
        succ,
    )


def generate_dataset(config, n_success, n_fail, seed=0):
    """
    Records for `n_success` successful and `n_fail` unsuccessful demonstrations.

    Layouts whose sampled goal is unreachable are skipped and redrawn.
    """
    records = []
    attempt = 0
    for kind, count in (("s", n_success), ("f", n_fail)):
        made = 0
        while made < count:
            episode_seed = seed * 1_000_003 + attempt
            attempt += 1
            try:
                record = generate_demo(config, success=kind == "s", seed=episode_seed,
                                       episode_id=f"{kind}{made:06d}")
            except Unsolvable as exc:
                logger.debug("skipping layout %d: %s", episode_seed, exc)
                continue
            records.append(record)
            made += 1
            if made % 100 == 0:
                logger.info("generated %d/%d %s demonstrations", made, count,
                            "successful" if kind == "s" else "unsuccessful")
    return records


# ------------------------------------------------------------------------------
# ORACLE SLOTS
# ------------------------------------------------------------------------------

def _feature(image, dim):
    out = np.zeros(dim)
    out[:IMAGE_DIM] = np.asarray(image).reshape(-1)[:IMAGE_DIM]
    return out


def oracle_slots(size=7, feature_dim=32):
    """
    Ground-truth implementations of the slots of the bundled abs domain.

    Returns:
        dict[str, FunctionSlot]: canonical slot name -> implementation.
    """
    slots = {
        "derived::item-feature::f": FunctionSlot(lambda img: _feature(img, feature_dim), (IMAGE_DIM,), feature_dim),
    }
    for k, color in enumerate(COLORS):
        slots[f"derived::is-{color}::f"] = FunctionSlot(
            lambda f, k=k: float(f[k] > 0.5), (feature_dim,), 1, is_bool=True)
    for k, shape in enumerate(SHAPES):
        slots[f"derived::is-{shape}::f"] = FunctionSlot(
            lambda f, k=k: float(f[len(COLORS) + k] > 0.5), (feature_dim,), 1, is_bool=True)
    slots["derived::is-open::f"] = FunctionSlot(lambda f: float(f[IMAGE_DIM - 1] > 0.5), (feature_dim,), 1, is_bool=True)
    slots["derived::can-pickup::f"] = FunctionSlot(
        lambda f: float(f[len(COLORS) + SHAPES.index("door")] < 0.5), (feature_dim,), 1, is_bool=True)
    slots["derived::robot-holding::f"] = FunctionSlot(
        lambda pose: float(np.allclose(pose, HELD)), (2,), 1, is_bool=True)
    slots["derived::robot-facing::f"] = FunctionSlot(_facing, (2, 4, 2), 1, is_bool=True)

    slots["action::lturn::f"] = FunctionSlot(lambda d: np.roll(d, -1), (4,), 4)
    slots["action::rturn::f"] = FunctionSlot(lambda d: np.roll(d, 1), (4,), 4)
    slots["action::forward::f"] = FunctionSlot(
        lambda pose, d, faced: _forward(pose, d, faced, size), (2, 4, None), 2)
    slots["action::pickup::f"] = FunctionSlot(lambda: np.asarray(HELD, dtype=np.float64), (), 2)
    slots["action::toggle::f"] = FunctionSlot(_toggle, (IMAGE_DIM,), IMAGE_DIM)
    return slots


def _facing(pose, direction, item_pose):
    dx, dy = DELTAS[int(np.argmax(direction))]
    return float(np.allclose(np.asarray(pose) + (dx, dy), item_pose))


def _forward(pose, direction, faced, size):
    dx, dy = DELTAS[int(np.argmax(direction))]
    target = np.asarray(pose) + (dx, dy)
    present = [f for c, f in faced if c > 0.5]
    if present:
        f = present[0]
        is_open_door = f[len(COLORS) + SHAPES.index("door")] > 0.5 and f[IMAGE_DIM - 1] > 0.5
        return target if is_open_door else np.asarray(pose)
    inside = 0 < target[0] < size - 1 and 0 < target[1] < size - 1
    return target if inside else np.asarray(pose)


def _toggle(image):
    out = np.asarray(image, dtype=np.float64).copy()
    out[-1] = 1.0 - out[-1]
    return out


def bind_oracle_slots(domain, size=7):
    """Bind every slot of `domain` that has a ground-truth implementation; returns the names bound."""
    dims = domain.value_types.get("feature")
    feature_dim = dims.size if dims is not None and dims.size else 32
    bound = []
    for name, impl in oracle_slots(size, feature_dim).items():
        if name in domain.slots:
            bind_slot(domain, name, impl)
            bound.append(name)
    return bound
