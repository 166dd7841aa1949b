"""
Static validation of desugared PDSketch domains.

`validate(ast)` type-checks every definition, infers the signature of every
slot and returns a `Domain`. All violations found are reported together in a
single `ValidationError`.

Slots are named after their definition site: the `??f` inside
`(:derived (is-red ?o - item) ...)` becomes "derived::is-red::f", and the
`??f` inside `(:action forward ...)` becomes "action::forward::f". A slot's
output type comes from its `[return_type=...]` kwarg or, failing that, from
the position it is used in (a derived predicate body, an assign value, a
Boolean connective).
"""

import logging
from dataclasses import dataclass, replace
from pathlib import Path

from .domain_model import (
    ActionSchema,
    DerivedInfo,
    Domain,
    PredicateInfo,
    SlotInput,
    SlotSignature,
)
from .exceptions import (
    DesugarError,
    GoalParseError,
    LexError,
    NonBooleanGoal,
    ParseError,
    ValidationError,
)
from .expressions import (
    BOOL,
    FLOAT32,
    INT64,
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
    SugarCall,
    TypedVariable,
    ValueType,
    VariableRef,
    When,
    Wildcard,
    to_text,
    walk,
)
from .pds_parser import desugar, desugar_expression, parse_domain, parse_expression

logger = logging.getLogger(__name__)

BUILTIN_TYPES = ("object", "bool", "int64", "float32")


@dataclass(frozen=True)
class _SetOf:
    """Type of a foreach used as a value: a set of `elem` values."""

    elem: ValueType
    conditional: bool = False


@dataclass(frozen=True)
class _Guarded:
    """Type of a `when` used as a value: `elem` plus a condition score."""

    elem: ValueType


def _describe(t):
    if isinstance(t, _SetOf):
        return "{" + t.elem.to_text() + "}"
    if isinstance(t, _Guarded):
        return "(when " + t.elem.to_text() + ")"
    if t.is_object:
        return f"object {t.name or ''}".strip()
    return t.to_text()


def _shape_key(sig):
    ins = tuple((i.type.kind, i.type.prim, i.type.dim, i.variadic, i.conditional) for i in sig.inputs)
    return ins, (sig.output.kind, sig.output.prim, sig.output.dim)


class _Checker:
    """Type checker state shared across one domain (or one goal)."""

    def __init__(self):
        self.errors = []
        self.object_types = ["object"]
        self.value_types = {}
        self.predicates = {}
        self.pending_derived = set()
        self.slots = {}

    @classmethod
    def for_domain(cls, domain):
        checker = cls()
        checker.object_types = list(domain.object_types)
        checker.value_types = dict(domain.value_types)
        checker.predicates = dict(domain.predicates)
        checker.slots = dict(domain.slots)
        return checker

    def error(self, message):
        self.errors.append(message)

    def tag_line(self, start, line):
        """Suffix the errors reported since `start` with a source line."""
        if line is None:
            return
        for i in range(start, len(self.errors)):
            self.errors[i] = f"{self.errors[i]} (line {line})"

    # -- types ----------------------------------------------------------------

    def declare_types(self, type_defs):
        for names, base in type_defs:
            for name in names:
                if name in BUILTIN_TYPES or name in self.object_types or name in self.value_types:
                    self.error(f"type {name!r} declared twice")
                    continue
                if base.kind == "object":
                    self.object_types.append(name)
                elif base.kind == "named":
                    if base.name in self.object_types:
                        self.error(f"type {name!r}: object type hierarchies are not supported")
                    elif base.name in self.value_types:
                        self.value_types[name] = replace(self.value_types[base.name], name=name)
                    elif base.name in BUILTIN_TYPES:
                        self.value_types[name] = ValueType(base.name, name=name)
                    else:
                        self.error(f"type {name!r}: undeclared base type {base.name!r}")
                else:
                    self.value_types[name] = replace(base, name=name)

    def resolve_value_type(self, vtype, where):
        if vtype.kind != "named":
            if vtype.kind == "object":
                self.error(f"{where}: a value type is required, got object")
                return None
            return vtype
        if vtype.name in self.value_types:
            return self.value_types[vtype.name]
        if vtype.name in ("bool", "int64", "float32"):
            return ValueType(vtype.name)
        if vtype.name in self.object_types:
            self.error(f"{where}: {vtype.name!r} is an object type, a value type is required")
        else:
            self.error(f"{where}: undeclared type {vtype.name!r}")
        return None

    def check_parameters(self, params, where, bodies=()):
        """Resolve parameter types; untyped ones are inferred from their first typed use."""
        out = []
        for p in params:
            type_name = p.type
            if type_name is None:
                type_name = self.infer_parameter_type(p.name, bodies)
            if type_name in self.value_types or type_name in ("bool", "int64", "float32"):
                self.error(f"{where}: parameter {p.name} has value type {type_name!r}; "
                           f"value-typed parameters are not supported")
            elif type_name not in self.object_types:
                self.error(f"{where}: undeclared type {type_name!r} for parameter {p.name}")
            out.append(TypedVariable(p.name, type_name))
        names = [p.name for p in out]
        if len(set(names)) != len(names):
            self.error(f"{where}: duplicate parameter names")
        return tuple(out)

    def infer_parameter_type(self, name, bodies):
        for body in bodies:
            for node in walk(body):
                if not isinstance(node, PredicateCall):
                    continue
                info = self.predicates.get(node.name)
                if info is None:
                    continue
                for arg, param in zip(node.args, info.parameters):
                    if isinstance(arg, VariableRef) and arg.name == name and param.type != "object":
                        return param.type
        return "object"

    def bind(self, var, env, where):
        type_name = var.type or "object"
        if type_name not in self.object_types:
            self.error(f"{where}: undeclared object type {type_name!r} for {var.name}")
        new_env = dict(env)
        new_env[var.name] = type_name
        return TypedVariable(var.name, type_name), new_env

    # -- expressions ----------------------------------------------------------

    def expect_bool(self, e, env, site):
        new, t = self.infer(e, env, site, BOOL)
        if t is not None and not (isinstance(t, ValueType) and t.is_bool):
            self.error(f"{site}: expected a Boolean expression, got {_describe(t)} in {to_text(e)}")
        return new

    def infer(self, e, env, site, expected=None):
        """Return (checked expression, type); type is None after a reported error."""
        if isinstance(e, Constant):
            v = e.value
            if isinstance(v, bool):
                return e, BOOL
            if isinstance(v, int):
                return e, INT64
            if isinstance(v, float):
                return e, FLOAT32
            return e, ValueType("object")
        if isinstance(e, VariableRef):
            if e.name not in env:
                self.error(f"{site}: unbound variable {e.name}")
                return e, None
            return e, ValueType("object", name=env[e.name])
        if isinstance(e, (Wildcard, SugarCall)):
            self.error(f"{site}: syntax sugar left after desugaring: {to_text(e)}")
            return e, None
        if isinstance(e, PredicateCall):
            return self.call(e, env, site)
        if isinstance(e, (And, Or)):
            return e.with_children(tuple(self.expect_bool(i, env, site) for i in e.items)), BOOL
        if isinstance(e, Not):
            return Not(self.expect_bool(e.item, env, site)), BOOL
        if isinstance(e, Implies):
            return Implies(self.expect_bool(e.lhs, env, site), self.expect_bool(e.rhs, env, site)), BOOL
        if isinstance(e, (Forall, Exists)):
            var, inner = self.bind(e.variable, env, site)
            return replace(e, variable=var, body=self.expect_bool(e.body, inner, site)), BOOL
        if isinstance(e, Foreach):
            var, inner = self.bind(e.variable, env, site)
            body, t = self.infer(e.body, inner, site)
            new = replace(e, variable=var, body=body)
            if t is None:
                return new, None
            if isinstance(t, _Guarded):
                return new, _SetOf(t.elem, True)
            if isinstance(t, ValueType) and not t.is_object:
                return new, _SetOf(t, False)
            self.error(f"{site}: foreach must select values, got {_describe(t)}")
            return new, None
        if isinstance(e, When):
            cond = self.expect_bool(e.condition, env, site)
            body, t = self.infer(e.body, env, site)
            new = When(cond, body)
            if t is None:
                return new, None
            if isinstance(t, ValueType) and not t.is_object:
                return new, _Guarded(t)
            self.error(f"{site}: when must select a value, got {_describe(t)}")
            return new, None
        if isinstance(e, Assign):
            self.error(f"{site}: assign is only allowed in action effects")
            return e, None
        if isinstance(e, SlotCall):
            return self.slot(e, env, site, expected)
        self.error(f"{site}: unsupported expression {e!r}")
        return e, None

    def call(self, e, env, site):
        info = self.predicates.get(e.name)
        if info is None:
            if e.name in self.pending_derived:
                self.error(f"{site}: derived predicate {e.name} is used before its definition")
            else:
                self.error(f"{site}: undeclared predicate {e.name}")
            return e, None
        if len(e.args) != info.arity:
            self.error(f"{site}: {e.name} takes {info.arity} arguments, got {len(e.args)}")
            return e, None
        ok = True
        for i, (arg, param) in enumerate(zip(e.args, info.parameters)):
            _, t = self.infer(arg, env, site)
            if t is None:
                ok = False
            elif not (isinstance(t, ValueType) and t.is_object):
                self.error(f"{site}: argument {i + 1} of {e.name} must be an object, got {_describe(t)}")
                ok = False
            elif t.name and t.name != "object" and param.type != "object" and t.name != param.type:
                self.error(f"{site}: argument {i + 1} of {e.name} must be of type {param.type}, got {t.name}")
                ok = False
        return e, (info.return_type if ok else None)

    def slot(self, e, env, site, expected):
        inputs, args, ok = [], [], True
        for i, arg in enumerate(e.args):
            a, t = self.infer(arg, env, site)
            args.append(a)
            if t is None:
                ok = False
            elif isinstance(t, _SetOf):
                inputs.append(SlotInput(t.elem, True, t.conditional))
            elif isinstance(t, ValueType) and not t.is_object:
                inputs.append(SlotInput(t))
            else:
                self.error(f"{site}: input {i + 1} of slot ??{e.name} must be a value, got {_describe(t)}")
                ok = False

        declared = e.kwarg("return_type")
        if declared is not None:
            output = self.resolve_value_type(declared, f"{site}: slot ??{e.name}")
        elif isinstance(expected, ValueType) and not expected.is_object:
            output = expected
        else:
            self.error(f"{site}: cannot infer the output type of slot ??{e.name}")
            output = None
        if output is None or not ok:
            return e, None

        canonical = f"{site}::{e.name}"
        signature = SlotSignature(canonical, tuple(inputs), output)
        previous = self.slots.get(canonical)
        if previous is None:
            self.slots[canonical] = signature
        elif _shape_key(previous) != _shape_key(signature):
            self.error(
                f"{site}: slot ??{e.name} used with inconsistent signatures "
                f"{previous.describe()} and {signature.describe()}"
            )
            return e, None
        return replace(e, args=tuple(args), canonical=canonical), output

    # -- effects --------------------------------------------------------------

    def effect(self, e, env, site, writes):
        if isinstance(e, And):
            return And(tuple(self.effect(i, env, site, writes) for i in e.items))
        if isinstance(e, Foreach):
            var, inner = self.bind(e.variable, env, site)
            return replace(e, variable=var, body=self.effect(e.body, inner, site, writes))
        if isinstance(e, When):
            return When(self.expect_bool(e.condition, env, site), self.effect(e.body, env, site, writes))
        if isinstance(e, Assign):
            return self.assign(e, env, site, writes)
        self.error(f"{site}: not an effect: {to_text(e)}")
        return e

    def assign(self, e, env, site, writes):
        target = e.target
        info = self.predicates.get(target.name)
        if info is None and target.name not in self.pending_derived:
            self.error(f"{site}: undeclared predicate {target.name}")
            return e
        if info is None or not info.is_input:
            self.error(f"{site}: cannot assign to derived predicate {target.name}")
            return e
        self.call(target, env, site)
        value, t = self.infer(e.value, env, site, info.return_type)
        if t is not None:
            if not isinstance(t, ValueType) or t.is_object or not info.return_type.same_shape(t):
                self.error(
                    f"{site}: cannot assign {_describe(t)} to {target.name} "
                    f"of type {info.return_type.to_text()}"
                )
        key = (target.name, tuple(to_text(a) for a in target.args))
        if key in writes:
            self.error(f"{site}: {to_text(target)} is written twice")
        writes.add(key)
        return Assign(target, value)


# ------------------------------------------------------------------------------
# PUBLIC FUNCTIONS
# ------------------------------------------------------------------------------

def validate(ast):
    """
    Type-check a desugared DomainAST and build the runtime Domain.

    Raises:
        ValidationError: With one message per violation.
    """
    c = _Checker()
    c.declare_types(ast.type_defs)

    for p in ast.predicate_defs:
        mark = len(c.errors)
        where = f"predicate {p.name}"
        if p.name in c.predicates:
            c.error(f"predicate {p.name!r} declared twice")
            c.tag_line(mark, p.line)
            continue
        params = c.check_parameters(p.parameters, where)
        rtype = p.kwarg("return_type")
        rtype = BOOL if rtype is None else c.resolve_value_type(rtype, where)
        if rtype is None:
            c.tag_line(mark, p.line)
            continue
        c.predicates[p.name] = PredicateInfo(p.name, params, rtype, True, replace(p, parameters=params))
        c.tag_line(mark, p.line)

    c.pending_derived = {d.signature.name for d in ast.derived_defs}
    derived = {}
    for d in ast.derived_defs:
        mark = len(c.errors)
        sig = d.signature
        site = f"derived::{sig.name}"
        if sig.name in c.predicates:
            c.error(f"derived predicate {sig.name!r} conflicts with an earlier predicate")
            c.tag_line(mark, d.line)
            continue
        params = c.check_parameters(sig.parameters, site, (d.body,))
        rtype = sig.kwarg("return_type")
        rtype = BOOL if rtype is None else c.resolve_value_type(rtype, site)
        if rtype is None:
            c.tag_line(mark, d.line)
            continue
        env = {p.name: p.type for p in params}
        body, t = c.infer(d.body, env, site, rtype)
        if t is not None and not (isinstance(t, ValueType) and not t.is_object and rtype.same_shape(t)):
            c.error(f"{site}: body has type {_describe(t)}, declared {rtype.to_text()}")
        info = PredicateInfo(sig.name, params, rtype, False, replace(sig, parameters=params))
        c.predicates[sig.name] = info
        c.pending_derived.discard(sig.name)
        derived[sig.name] = DerivedInfo(info, body)
        c.tag_line(mark, d.line)

    actions = {}
    for a in ast.action_defs:
        mark = len(c.errors)
        site = f"action::{a.name}"
        if a.name in actions:
            c.error(f"action {a.name!r} declared twice")
            c.tag_line(mark, a.line)
            continue
        params = c.check_parameters(a.parameters, site, (a.precondition, a.effect))
        env = {p.name: p.type for p in params}
        pre = c.expect_bool(a.precondition, env, site)
        eff = c.effect(a.effect, env, site, set())
        actions[a.name] = ActionSchema(a.name, params, pre, eff, bool(a.kwarg("distinct", False)))
        c.tag_line(mark, a.line)

    if c.errors:
        logger.debug("domain %s failed validation with %d errors", ast.name, len(c.errors))
        raise ValidationError(c.errors)

    domain = Domain(ast.name, c.object_types, c.value_types, c.predicates, derived, actions, c.slots)
    logger.info("validated domain %s (%d slots)", domain.name, len(domain.slots))
    return domain


def load_domain(source):
    """Parse, desugar and validate PDSketch source text."""
    return validate(desugar(parse_domain(source)))


def load_domain_file(path):
    return load_domain(Path(path).read_text(encoding="utf-8"))


def validate_goal(domain, goal):
    """
    Parse (if text), desugar and type-check a goal formula against `domain`.

    Returns:
        Expr: The checked goal expression.

    Raises:
        GoalParseError: Syntax errors, unknown predicates, arity errors, slots.
        NonBooleanGoal: The formula is well-formed but not Boolean.
    """
    if isinstance(goal, str):
        try:
            goal = parse_expression(goal)
        except (LexError, ParseError) as exc:
            raise GoalParseError(f"cannot parse goal: {exc}") from exc
    try:
        goal = desugar_expression(goal, domain.predicate_def, domain.resolve)
    except DesugarError as exc:
        raise GoalParseError(str(exc)) from exc

    checker = _Checker.for_domain(domain)
    checked, t = checker.infer(goal, {}, "goal", None)
    if any(isinstance(n, SlotCall) for n in walk(goal)):
        raise GoalParseError("goals may not contain slots")
    if checker.errors:
        raise GoalParseError("; ".join(checker.errors))
    if not (isinstance(t, ValueType) and t.is_bool):
        raise NonBooleanGoal(f"goal {to_text(goal)} has type {_describe(t)}, expected bool")
    return checked
