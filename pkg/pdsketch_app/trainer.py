"""
Dataset loading and training of slot parameters.

Datasets are JSON-lines files, one episode per line:

    {"id": "ep-0001",
     "goal": "(exists (?o - item) (and (robot-holding agent ?o) (is-red ?o)))",
     "states": [{"objects": [{"name": "agent", "type": "robot",
                              "robot-pose": [3, 3], "robot-direction": [1, 0, 0, 0]},
                             {"name": "o1", "type": "item", ...}],
                 "relations": [{"predicate": "near", "args": ["o1", "o2"], "value": 1}]},
                ...],
     "actions": [{"name": "forward", "args": ["agent"]}, ...],
     "succ": [0, 0, 1]}

Unary input predicates are read from the object records; other arities come
from the optional "relations" list. Vector values are float32 arrays and
Boolean values are 0/1.

The training loss of one episode is

    lambda_goal  * sum_i BCE(eval(g, E(s_i)), succ_i)
  + lambda_trans * sum_i sum_entries L1(T(E(s_i), a_i), E(s_i+1))
  + lambda_look  * sum_i BCE(eval(g, T(E(s_i), a_i)), succ_i+1)

where L1 of one entry is the sum of absolute differences over its vector.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from . import autodiff as ad
from .conf import default_seed, get_section
from .domain_model import Universe, find_action
from .exceptions import ConfigError, DatasetIOError, GoalParseError, NonBooleanGoal, SchemaError
from .pds_validation import validate_goal
from .state_eval import apply_action, eval_goal, make_state

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["epoch", "loss", "goal_acc", "trans_l1"]


# ------------------------------------------------------------------------------
# DATASETS
# ------------------------------------------------------------------------------

@dataclass
class Episode:
    """
    One demonstration.

    Attributes:
        id (str): Episode id; training visits episodes in sorted-id order.
        universe (Universe): Objects, constant across the episode.
        states (list[dict]): Raw tables, predicate -> {args: np.ndarray}.
        actions (list[tuple[str, tuple[str]]]): (action name, arguments).
        goal_text (str): Goal as written in the file.
        goal (Expr): Checked goal expression.
        succ (list[int]): Goal-satisfaction flag per state.
        line (int): Line number in the dataset file.
    """

    id: str
    universe: Universe
    states: list
    actions: list
    goal_text: str
    goal: object
    succ: list
    line: int = 0

    @property
    def n_steps(self):
        return len(self.actions)

    def grounded_actions(self, domain):
        return [find_action(domain, self.universe, name, args) for name, args in self.actions]


def _universe_of(state, where):
    objects = state.get("objects")
    if not isinstance(objects, list):
        raise SchemaError("state has no object list", *where)
    try:
        return Universe((o["name"], o["type"]) for o in objects)
    except (KeyError, TypeError):
        raise SchemaError("every object needs a name and a type", *where) from None


def _raw_tables(domain, state, where):
    tables = {}
    unary = {p.name for p in domain.input_predicates if p.arity == 1}
    for obj in state["objects"]:
        for key, value in obj.items():
            if key in ("name", "type"):
                continue
            if key not in unary:
                raise SchemaError(f"unknown unary input predicate {key!r}", *where)
            tables.setdefault(key, {})[(obj["name"],)] = np.asarray(value, dtype=np.float32)
    for rel in state.get("relations", []):
        try:
            name, args, value = rel["predicate"], tuple(rel["args"]), rel["value"]
        except (KeyError, TypeError):
            raise SchemaError("relation needs predicate, args and value", *where) from None
        if name not in domain.predicates or not domain.predicates[name].is_input:
            raise SchemaError(f"unknown input predicate {name!r}", *where)
        tables.setdefault(name, {})[args] = np.asarray(value, dtype=np.float32)
    return tables


def parse_episode(domain, record, line=0):
    """
    Turn one decoded JSON record into an Episode.

    Raises:
        SchemaError: Missing fields, length mismatches, unknown predicates,
            objects or actions, or an unparsable goal.
    """
    if not isinstance(record, dict):
        raise SchemaError("record must be a JSON object", line)
    episode_id = str(record.get("id", f"line-{line}"))
    where = (line, episode_id)
    for key in ("states", "actions", "goal", "succ"):
        if key not in record:
            raise SchemaError(f"missing field {key!r}", *where)

    states, actions, succ = record["states"], record["actions"], record["succ"]
    if not states:
        raise SchemaError("episode has no states", *where)
    if len(succ) != len(states):
        raise SchemaError(f"succ has {len(succ)} flags for {len(states)} states", *where)
    if len(actions) != len(states) - 1:
        raise SchemaError(f"{len(actions)} actions for {len(states)} states", *where)
    if any(f not in (0, 1) for f in succ):
        raise SchemaError("succ flags must be 0 or 1", *where)

    universe = _universe_of(states[0], where)
    raw = []
    for state in states:
        if _universe_of(state, where) != universe:
            raise SchemaError("universe changes within the episode", *where)
        raw.append(_raw_tables(domain, state, where))

    parsed_actions = []
    for a in actions:
        try:
            name, args = a["name"], tuple(a.get("args", ()))
        except (KeyError, TypeError):
            raise SchemaError("action needs a name", *where) from None
        try:
            find_action(domain, universe, name, args)
        except SchemaError as exc:
            raise SchemaError(str(exc), *where) from None
        parsed_actions.append((name, args))

    try:
        goal = validate_goal(domain, record["goal"])
    except (GoalParseError, NonBooleanGoal) as exc:
        raise SchemaError(f"bad goal: {exc}", *where) from exc

    return Episode(episode_id, universe, raw, parsed_actions, record["goal"], goal, [int(f) for f in succ], line)


def load_dataset(path, domain):
    """
    Read every episode of a JSON-lines dataset file; blank lines are skipped.

    Raises:
        DatasetIOError: The file cannot be read.
        SchemaError: First invalid record, with its line number and id.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetIOError(f"cannot read dataset {path}: {exc}") from exc

    episodes = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except ValueError as exc:
            raise SchemaError(f"invalid JSON: {exc}", n) from None
        episodes.append(parse_episode(domain, record, n))
    logger.info("loaded %d episodes from %s", len(episodes), path)
    return episodes


def _json_value(value):
    value = np.asarray(value)
    return value.tolist() if value.ndim else value.item()


def episode_record(episode_id, universe, states, actions, goal, succ):
    """
    Build a JSON-serializable dataset record.

    `states` holds raw tables as produced by simulators:
    predicate -> {args: value}.
    """
    out_states = []
    for tables in states:
        objects = [{"name": n, "type": t} for n, t in universe]
        by_name = {o["name"]: o for o in objects}
        relations = []
        for pred in sorted(tables):
            for args, value in sorted(tables[pred].items()):
                if len(args) == 1:
                    by_name[args[0]][pred] = _json_value(value)
                else:
                    relations.append({"predicate": pred, "args": list(args), "value": _json_value(value)})
        record = {"objects": objects}
        if relations:
            record["relations"] = relations
        out_states.append(record)
    return {
        "id": episode_id,
        "goal": goal,
        "states": out_states,
        "actions": [{"name": n, "args": list(a)} for n, a in actions],
        "succ": [int(f) for f in succ],
    }


def split_dataset(episodes, holdout, seed=None):
    """Deterministic (train, held-out) split; the held-out share is `holdout`."""
    if not 0.0 <= holdout < 1.0:
        raise ConfigError("holdout must be in [0, 1)")
    ordered = sorted(episodes, key=lambda e: e.id)
    n_held = int(round(len(ordered) * holdout))
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    picked = set(rng.permutation(len(ordered))[:n_held].tolist())
    train = [e for i, e in enumerate(ordered) if i not in picked]
    held = [e for i, e in enumerate(ordered) if i in picked]
    return train, held


# ------------------------------------------------------------------------------
# LOSS
# ------------------------------------------------------------------------------

@dataclass
class LossTerms:
    """Scalar loss node plus the statistics needed for epoch metrics."""

    total: ad.DiffNode
    goal_correct: int = 0
    goal_count: int = 0
    trans_sum: float = 0.0
    trans_entries: int = 0


def encode_states(domain, params, episode):
    encoder = getattr(params, "encoder", None)
    return [make_state(domain, episode.universe, raw, encoder) for raw in episode.states]


def episode_loss(domain, params, episode, config=None):
    """
    Build the loss graph of one episode.

    Args:
        domain (Domain): Domain with every slot bound.
        params (SlotParams): Supplies the encoder.
        episode (Episode): Demonstration.
        config (dict, optional): TRAIN section overrides (lambda weights).

    Returns:
        LossTerms
    """
    cfg = get_section("TRAIN", config)
    lam_goal, lam_trans, lam_look = cfg["lambda_goal"], cfg["lambda_trans"], cfg["lambda_look"]
    if min(lam_goal, lam_trans, lam_look) < 0 or lam_goal <= 0:
        raise ConfigError("loss weights must be >= 0 and lambda_goal > 0")

    latent = encode_states(domain, params, episode)
    actions = episode.grounded_actions(domain)
    terms = []
    out = LossTerms(total=None)

    for state, flag in zip(latent, episode.succ):
        score = eval_goal(domain, state, episode.goal)
        terms.append(ad.scale(ad.bce(score, float(flag)), lam_goal))
        out.goal_correct += int((score.item() > 0.5) == bool(flag))
        out.goal_count += 1

    for i, action in enumerate(actions):
        predicted = apply_action(domain, latent[i], action)
        observed = latent[i + 1]
        for pred in sorted(predicted.tables):
            for args in sorted(predicted.tables[pred]):
                diff = ad.l1(predicted.tables[pred][args], observed.tables[pred][args])
                out.trans_sum += diff.item()
                out.trans_entries += 1
                if lam_trans > 0:
                    terms.append(ad.scale(diff, lam_trans))
        if lam_look > 0:
            score = eval_goal(domain, predicted, episode.goal)
            terms.append(ad.scale(ad.bce(score, float(episode.succ[i + 1])), lam_look))

    out.total = ad.add(*terms)
    return out


def loss(domain, params, episode, config=None):
    """Scalar loss node of one episode."""
    return episode_loss(domain, params, episode, config).total


# ------------------------------------------------------------------------------
# OPTIMIZERS
# ------------------------------------------------------------------------------

class Adam:
    """Adam with global-norm gradient clipping."""

    def __init__(self, store, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, clip_norm=10.0):
        self.store = store
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self.m = {t.name: np.zeros(t.shape) for t in store}
        self.v = {t.name: np.zeros(t.shape) for t in store}

    def _clip_scale(self):
        if not self.clip_norm:
            return 1.0
        norm = self.store.grad_norm()
        return min(1.0, self.clip_norm / norm) if norm > 0 else 1.0

    def step(self):
        self.t += 1
        k = self._clip_scale()
        for t in self.store:
            g = t.grad * k
            m = self.m[t.name] = self.beta1 * self.m[t.name] + (1 - self.beta1) * g
            v = self.v[t.name] = self.beta2 * self.v[t.name] + (1 - self.beta2) * g * g
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            t.assign(t.values - self.lr * m_hat / (np.sqrt(v_hat) + self.eps))


class SGD(Adam):
    def step(self):
        self.t += 1
        k = self._clip_scale()
        for t in self.store:
            t.assign(t.values - self.lr * k * t.grad)


def make_optimizer(store, cfg):
    kinds = {"adam": Adam, "sgd": SGD}
    if cfg["optimizer"] not in kinds:
        raise ConfigError(f"unknown optimizer {cfg['optimizer']!r}")
    return kinds[cfg["optimizer"]](store, lr=cfg["lr"], clip_norm=cfg["clip_norm"])


# ------------------------------------------------------------------------------
# TRAINING
# ------------------------------------------------------------------------------

@dataclass
class _EpochStats:
    loss: float = 0.0
    episodes: int = 0
    goal_correct: int = 0
    goal_count: int = 0
    trans_sum: float = 0.0
    trans_entries: int = 0

    def add(self, terms):
        self.loss += terms.total.item()
        self.episodes += 1
        self.goal_correct += terms.goal_correct
        self.goal_count += terms.goal_count
        self.trans_sum += terms.trans_sum
        self.trans_entries += terms.trans_entries

    def row(self, epoch):
        return {
            "epoch": epoch,
            "loss": self.loss / max(self.episodes, 1),
            "goal_acc": self.goal_correct / max(self.goal_count, 1),
            "trans_l1": self.trans_sum / max(self.trans_entries, 1),
        }


def train(domain, params, dataset, config=None, seed=None, callback=None):
    """
    Minimize the episode loss over all slot and encoder parameters.

    Batches are drawn by a seeded permutation; inside a batch, gradients are
    accumulated in sorted episode-id order.

    Args:
        domain (Domain): Domain bound to `params`.
        params (ParamStore): Updated in place.
        dataset (list[Episode]): Training episodes (must be nonempty).
        config (dict, optional): TRAIN section overrides.
        seed (int, optional): Defaults to settings.PDSKETCH["SEED"].
        callback (callable, optional): Called with each history row.

    Returns:
        list[dict]: One row per epoch: epoch, loss, goal_acc, trans_l1.
    """
    if not dataset:
        raise ConfigError("training needs at least one episode")
    cfg = get_section("TRAIN", config)
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    optimizer = make_optimizer(params, cfg)
    ordered = sorted(dataset, key=lambda e: e.id)
    batch_size = max(int(cfg["batch_size"]), 1)
    history = []

    for epoch in range(1, int(cfg["epochs"]) + 1):
        stats = _EpochStats()
        order = rng.permutation(len(ordered))
        for start in range(0, len(order), batch_size):
            batch = sorted((ordered[i] for i in order[start:start + batch_size]), key=lambda e: e.id)
            params.zero_grad()
            for episode in batch:
                terms = episode_loss(domain, params, episode, cfg)
                stats.add(terms)
                ad.backward(ad.scale(terms.total, 1.0 / len(batch)))
            optimizer.step()
        row = stats.row(epoch)
        history.append(row)
        logger.info(
            "epoch %d: loss=%.4f goal_acc=%.3f trans_l1=%.4f",
            epoch, row["loss"], row["goal_acc"], row["trans_l1"],
        )
        if callback is not None:
            callback(row)
    return history


def evaluate(domain, params, episodes, config=None):
    """Mean loss, goal accuracy and transition L1 without updating parameters."""
    stats = _EpochStats()
    with ad.no_grad():
        for episode in sorted(episodes, key=lambda e: e.id):
            stats.add(episode_loss(domain, params, episode, config))
    row = stats.row(0)
    row.pop("epoch")
    return row


def goal_accuracy(domain, params, episodes):
    """Share of states whose goal score agrees with the succ flag at 0.5."""
    correct = total = 0
    with ad.no_grad():
        for episode in episodes:
            for state, flag in zip(encode_states(domain, params, episode), episode.succ):
                correct += int((eval_goal(domain, state, episode.goal).item() > 0.5) == bool(flag))
                total += 1
    return correct / max(total, 1)


def write_metrics(history, path):
    """Write the per-epoch history as CSV."""
    frame = pd.DataFrame(history, columns=METRIC_COLUMNS)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
    except OSError as exc:
        raise DatasetIOError(f"cannot write metrics to {path}: {exc}") from exc
