"""
Factored states and the differentiable evaluator.

A `FactoredState` holds, for every input predicate, a table mapping argument
tuples to DiffNodes (scalars in [0, 1] for Boolean predicates, vectors
otherwise). Logic is evaluated with Goedel t-norms:

    not p = 1 - p      and = min      or = max      implies p q = max(1 - p, q)
    forall = min over objects (1 when empty)   exists = max (0 when empty)

Effects read the pre-state only. A conditional assign with condition score c
blends `c * new + (1 - c) * old`; conditional Boolean set-true gives
`max(old, c)` and set-false gives `min(old, 1 - c)`.
"""

import itertools
import logging

import numpy as np

from . import autodiff as ad
from .exceptions import (
    AssignToDerived,
    EffectConflict,
    NonBooleanGoal,
    PDSketchError,
    SchemaError,
    ShapeMismatch,
    UnknownObjectConstant,
)
from .expressions import (
    And,
    Assign,
    Constant,
    Exists,
    Forall,
    Foreach,
    Implies,
    Not,
    Or,
    PredicateCall,
    SlotCall,
    VariableRef,
    When,
    to_text,
)

logger = logging.getLogger(__name__)


# ------------------------------------------------------------------------------
# STATES
# ------------------------------------------------------------------------------

class FactoredState:
    """
    Universe plus per-predicate value tables.

    Tables are never mutated after construction; `apply_action` builds a new
    state that shares every table it does not change.
    """

    def __init__(self, universe, tables):
        self.universe = universe
        self.tables = tables
        self._derived_cache = {}

    def __repr__(self):
        return f"<FactoredState {len(self.universe)} objects, {len(self.tables)} tables>"

    def value(self, predicate, args):
        try:
            return self.tables[predicate][tuple(args)]
        except KeyError:
            raise SchemaError(f"state has no value for ({predicate} {' '.join(args)})") from None

    def to_numpy(self):
        """{predicate: {args: np.ndarray}} snapshot of the input tables."""
        return {p: {a: n.numpy() for a, n in t.items()} for p, t in self.tables.items()}


def argument_tuples(universe, parameters):
    """All type-correct argument tuples for a parameter list, in lexicographic order."""
    pools = [universe.of_type(p.type) for p in parameters]
    return list(itertools.product(*pools))


def make_state(domain, universe, raw_tables, encoder=None):
    """
    Build a FactoredState from raw observation tables.

    Args:
        domain (Domain): Validated domain.
        universe (Universe): Objects of the episode.
        raw_tables (dict): predicate -> {args tuple: number | array}.
        encoder (Encoder, optional): Applied to vector-valued entries.

    Raises:
        SchemaError: An input predicate table is incomplete or has the wrong shape.
    """
    tables = {}
    for info in domain.input_predicates:
        raw = raw_tables.get(info.name, {})
        table = {}
        for args in argument_tuples(universe, info.parameters):
            if args not in raw:
                raise SchemaError(f"missing value for ({info.name} {' '.join(args)})")
            value = np.asarray(raw[args], dtype=np.float64)
            if info.return_type.kind == "vector":
                value = value.reshape(-1)
                dim = info.return_type.dim
                if dim is not None and value.size != dim:
                    raise SchemaError(f"({info.name} {' '.join(args)}) has size {value.size}, expected {dim}")
                node = encoder.encode(info.name, value) if encoder is not None else ad.constant(value)
            else:
                if value.size != 1:
                    raise SchemaError(f"({info.name} {' '.join(args)}) must be a scalar")
                node = ad.constant(float(value.reshape(-1)[0]))
            table[args] = node
        tables[info.name] = table
    return FactoredState(universe, tables)


# ------------------------------------------------------------------------------
# EVALUATION
# ------------------------------------------------------------------------------

class _Evaluator:
    def __init__(self, domain, state):
        self.domain = domain
        self.state = state

    def objects(self, args, binding):
        out = []
        for a in args:
            if isinstance(a, VariableRef):
                try:
                    out.append(binding[a.name])
                except KeyError:
                    raise PDSketchError(f"unbound variable {a.name}") from None
            elif isinstance(a, Constant) and isinstance(a.value, str):
                if a.value not in self.state.universe:
                    raise UnknownObjectConstant(f"unknown object {a.value!r}")
                out.append(a.value)
            else:
                raise PDSketchError(f"predicate argument must be an object, got {to_text(a)}")
        return tuple(out)

    def derived(self, name, args):
        key = (ad.grad_enabled(), name, args)
        cache = self.state._derived_cache
        if key not in cache:
            info = self.domain.derived[name]
            binding = {p.name: o for p, o in zip(info.predicate.parameters, args)}
            cache[key] = self.eval(info.body, binding)
        return cache[key]

    def eval(self, e, b):
        if isinstance(e, PredicateCall):
            args = self.objects(e.args, b)
            if e.name in self.domain.derived:
                return self.derived(e.name, args)
            return self.state.value(e.name, args)
        if isinstance(e, Constant):
            if isinstance(e.value, bool):
                return ad.constant(1.0 if e.value else 0.0)
            if isinstance(e.value, (int, float)):
                return ad.constant(float(e.value))
            raise PDSketchError(f"object constant {e.value!r} used as a value")
        if isinstance(e, And):
            items = [self.eval(i, b) for i in e.items]
            return ad.minimum(*items) if items else ad.constant(1.0)
        if isinstance(e, Or):
            items = [self.eval(i, b) for i in e.items]
            return ad.maximum(*items) if items else ad.constant(0.0)
        if isinstance(e, Not):
            return ad.one_minus(self.eval(e.item, b))
        if isinstance(e, Implies):
            return ad.maximum(ad.one_minus(self.eval(e.lhs, b)), self.eval(e.rhs, b))
        if isinstance(e, (Forall, Exists)):
            items = [self.eval(e.body, {**b, e.variable.name: o}) for o in self.state.universe.of_type(e.variable.type)]
            if isinstance(e, Forall):
                return ad.minimum(*items) if items else ad.constant(1.0)
            return ad.maximum(*items) if items else ad.constant(0.0)
        if isinstance(e, Foreach):
            return [self.eval(e.body, {**b, e.variable.name: o}) for o in self.state.universe.of_type(e.variable.type)]
        if isinstance(e, When):
            return (self.eval(e.condition, b), self.eval(e.body, b))
        if isinstance(e, SlotCall):
            impl = self.domain.slot_impl(e.canonical or e.name)
            args = []
            for a in e.args:
                v = self.eval(a, b)
                if isinstance(v, list):
                    v = [item if isinstance(item, tuple) else (None, item) for item in v]
                args.append(v)
            return impl(args)
        if isinstance(e, Assign):
            raise PDSketchError("assign can only be evaluated as an effect")
        raise PDSketchError(f"cannot evaluate {to_text(e)}")


def eval_expr(domain, state, expr, binding=None):
    """
    Evaluate an expression in a state.

    Returns:
        DiffNode for values; a list for `foreach`; a (condition, value) pair
        for `when`.
    """
    return _Evaluator(domain, state).eval(expr, dict(binding or {}))


def eval_goal(domain, state, goal):
    """
    Score of a Boolean goal in [0, 1]; satisfied iff > 0.5.

    Raises:
        NonBooleanGoal: The goal does not evaluate to a scalar.
    """
    score = eval_expr(domain, state, goal)
    if not isinstance(score, ad.DiffNode) or score.value.size != 1:
        raise NonBooleanGoal(f"goal {to_text(goal)} is not Boolean")
    return score


def satisfied(score):
    return score.item() > 0.5


def applicable(domain, state, action):
    """Whether the precondition of a grounded action scores above 0.5."""
    with ad.no_grad():
        return eval_expr(domain, state, action.precondition).item() > 0.5


def evaluate_derived(domain, state, names=None):
    """{derived predicate: {args: DiffNode}} for every grounding of `names` (default: all)."""
    evaluator = _Evaluator(domain, state)
    out = {}
    for name, info in domain.derived.items():
        if names is not None and name not in names:
            continue
        out[name] = {
            args: evaluator.derived(name, args)
            for args in argument_tuples(state.universe, info.predicate.parameters)
        }
    return out


# ------------------------------------------------------------------------------
# TRANSITIONS
# ------------------------------------------------------------------------------

def _collect_effects(ev, e, b, cond, out):
    if isinstance(e, And):
        for item in e.items:
            _collect_effects(ev, item, b, cond, out)
    elif isinstance(e, Foreach):
        for o in ev.state.universe.of_type(e.variable.type):
            _collect_effects(ev, e.body, {**b, e.variable.name: o}, cond, out)
    elif isinstance(e, When):
        c = ev.eval(e.condition, b)
        _collect_effects(ev, e.body, b, c if cond is None else ad.minimum(cond, c), out)
    elif isinstance(e, Assign):
        name = e.target.name
        if name in ev.domain.derived:
            raise AssignToDerived(f"cannot assign to derived predicate {name}")
        args = ev.objects(e.target.args, b)
        flag = e.value.value if isinstance(e.value, Constant) and isinstance(e.value.value, bool) else None
        out.append((name, args, ev.eval(e.value, b), cond, flag))
    else:
        raise PDSketchError(f"not an effect: {to_text(e)}")


def apply_action(domain, state, action):
    """
    Apply a grounded action and return the successor state.

    Every right-hand side is evaluated against `state`; tables that no effect
    touches are shared with `state`.

    Raises:
        AssignToDerived: An effect writes a derived predicate.
        EffectConflict: Two effects write the same entry.
    """
    ev = _Evaluator(domain, state)
    effects = []
    _collect_effects(ev, action.effect, {}, None, effects)

    updates = {}
    for name, args, value, cond, flag in effects:
        if (name, args) in updates:
            raise EffectConflict(f"({name} {' '.join(args)}) is written twice by {action.label}")
        old = state.value(name, args)
        if value.shape != old.shape:
            raise ShapeMismatch(f"({name} {' '.join(args)}): new value {value.shape}, stored {old.shape}")
        if cond is None:
            new = value
        elif flag is True:
            new = ad.maximum(old, cond)
        elif flag is False:
            new = ad.minimum(old, ad.one_minus(cond))
        else:
            new = ad.add(ad.mul(cond, value), ad.mul(ad.one_minus(cond), old))
        updates[(name, args)] = new

    tables = dict(state.tables)
    for (name, args), node in updates.items():
        if tables[name] is state.tables[name]:
            tables[name] = dict(state.tables[name])
        tables[name][args] = node
    return FactoredState(state.universe, tables)
