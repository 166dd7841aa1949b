"""
Expression and type AST for the PDSketch language.

This module defines the immutable building blocks shared by the parser, the
validator, the evaluator and the heuristic compilers:

- `ValueType` and `TypedVariable`: the type language (object types, bool,
  int64, float32, vector[prim, dim?]).
- `Expr` subclasses: And, Or, Not, Implies, Forall, Exists, Foreach, When,
  Assign, PredicateCall, SlotCall, VariableRef, Constant, plus the two
  surface-only forms removed by desugaring (SugarCall for `p::assign`,
  `p::cond-assign`, `p::cond-select`, and Wildcard for `(pred ??)`).
- A printer (`to_text`) whose output parses back to the same tree.
- Small tree utilities: walking, child mapping, variable substitution.

All nodes are frozen dataclasses, so trees can be shared freely between
threads and used as dictionary keys.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Tuple


PRIMITIVE_KINDS = ("bool", "int64", "float32")


# ------------------------------------------------------------------------------
# TYPES
# ------------------------------------------------------------------------------

@dataclass(frozen=True)
class ValueType:
    """
    A PDSketch base type.

    Fields:
        kind (str): "object", "bool", "int64", "float32", "vector", or
            "named" (an unresolved reference to a declared type).
        prim (str): Element kind for vectors ("bool", "int64", "float32").
        dim (int): Vector dimension; None when unspecified.
        name (str): Declared type name ("pose", "item", ...) when known.
    """

    kind: str
    prim: str = None
    dim: int = None
    name: str = None

    @property
    def is_bool(self):
        return self.kind == "bool"

    @property
    def is_object(self):
        return self.kind == "object"

    @property
    def size(self):
        """Flat width of a value of this type (None when unspecified)."""
        if self.kind in PRIMITIVE_KINDS:
            return 1
        if self.kind == "vector":
            return self.dim
        return None

    def same_shape(self, other):
        """Structural equality ignoring the declared name; unspecified dims match anything."""
        if self.kind != other.kind:
            return False
        if self.kind == "vector":
            if self.prim != other.prim:
                return False
            return self.dim is None or other.dim is None or self.dim == other.dim
        if self.kind == "object":
            return True
        return True

    def to_text(self):
        if self.kind == "named":
            return self.name
        if self.kind == "vector":
            if self.dim is None:
                return f"vector[{self.prim}]"
            return f"vector[{self.prim}, {self.dim}]"
        if self.kind == "object" and self.name:
            return self.name
        return self.kind


BOOL = ValueType("bool")
INT64 = ValueType("int64")
FLOAT32 = ValueType("float32")


@dataclass(frozen=True)
class TypedVariable:
    """A `?name - type` binder. `type` is None for untyped variables."""

    name: str
    type: str = None

    def to_text(self):
        if self.type is None:
            return self.name
        return f"{self.name} - {self.type}"


# ------------------------------------------------------------------------------
# EXPRESSIONS
# ------------------------------------------------------------------------------

class Expr:
    """Base class of all expression nodes."""

    def children(self):
        return ()

    def with_children(self, children):
        return self

    def to_text(self):
        return to_text(self)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Constant(Expr):
    """`true`/`false`, a number, or an object name (str)."""

    value: Any

    @property
    def is_object(self):
        return isinstance(self.value, str)


@dataclass(frozen=True)
class VariableRef(Expr):
    name: str


@dataclass(frozen=True)
class Wildcard(Expr):
    """The `??` argument of `(pred ??)`; removed by desugaring."""


@dataclass(frozen=True)
class PredicateCall(Expr):
    name: str
    args: Tuple[Expr, ...] = ()

    def children(self):
        return self.args

    def with_children(self, children):
        return replace(self, args=tuple(children))


@dataclass(frozen=True)
class SlotCall(Expr):
    """
    A blank `(??name [kwargs] args...)`.

    `canonical` is filled in by validation ("derived::<pred>::<name>" or
    "action::<action>::<name>").
    """

    name: str
    args: Tuple[Expr, ...] = ()
    kwargs: Tuple[Tuple[str, Any], ...] = ()
    canonical: str = None

    def children(self):
        return self.args

    def with_children(self, children):
        return replace(self, args=tuple(children))

    def kwarg(self, key, default=None):
        for k, v in self.kwargs:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class SugarCall(Expr):
    """`(p::assign ...)`, `(p::cond-assign ...)` or `(p::cond-select ...)`."""

    predicate: str
    sugar: str
    args: Tuple[Expr, ...] = ()

    def children(self):
        return self.args

    def with_children(self, children):
        return replace(self, args=tuple(children))


@dataclass(frozen=True)
class And(Expr):
    items: Tuple[Expr, ...] = ()

    def children(self):
        return self.items

    def with_children(self, children):
        return And(tuple(children))


@dataclass(frozen=True)
class Or(Expr):
    items: Tuple[Expr, ...] = ()

    def children(self):
        return self.items

    def with_children(self, children):
        return Or(tuple(children))


@dataclass(frozen=True)
class Not(Expr):
    item: Expr

    def children(self):
        return (self.item,)

    def with_children(self, children):
        return Not(children[0])


@dataclass(frozen=True)
class Implies(Expr):
    lhs: Expr
    rhs: Expr

    def children(self):
        return (self.lhs, self.rhs)

    def with_children(self, children):
        return Implies(children[0], children[1])


@dataclass(frozen=True)
class _Binder(Expr):
    variable: TypedVariable
    body: Expr

    def children(self):
        return (self.body,)

    def with_children(self, children):
        return replace(self, body=children[0])


@dataclass(frozen=True)
class Forall(_Binder):
    pass


@dataclass(frozen=True)
class Exists(_Binder):
    pass


@dataclass(frozen=True)
class Foreach(_Binder):
    pass


@dataclass(frozen=True)
class When(Expr):
    condition: Expr
    body: Expr

    def children(self):
        return (self.condition, self.body)

    def with_children(self, children):
        return When(children[0], children[1])


@dataclass(frozen=True)
class Assign(Expr):
    target: PredicateCall
    value: Expr

    def children(self):
        return (self.target, self.value)

    def with_children(self, children):
        return Assign(children[0], children[1])


TRUE = Constant(True)
FALSE = Constant(False)
EMPTY_AND = And(())


# ------------------------------------------------------------------------------
# TREE UTILITIES
# ------------------------------------------------------------------------------

def walk(expr):
    """Yield every node of `expr` in pre-order."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children()))


def transform(expr, fn):
    """
    Rebuild `expr` bottom-up, replacing each node by `fn(node)`.

    `fn` receives the node with already-transformed children.
    """
    kids = expr.children()
    if kids:
        new_kids = tuple(transform(k, fn) for k in kids)
        if any(a is not b for a, b in zip(new_kids, kids)):
            expr = expr.with_children(new_kids)
    return fn(expr)


def substitute(expr, mapping):
    """
    Replace free variables by expressions (usually object Constants).

    Bound variables of quantifiers and foreach shadow the mapping.

    Args:
        expr (Expr): Expression to rewrite.
        mapping (dict[str, Expr]): Variable name -> replacement.
    """
    if not mapping:
        return expr
    if isinstance(expr, VariableRef):
        return mapping.get(expr.name, expr)
    if isinstance(expr, _Binder):
        inner = {k: v for k, v in mapping.items() if k != expr.variable.name}
        return replace(expr, body=substitute(expr.body, inner))
    kids = expr.children()
    if not kids:
        return expr
    return expr.with_children(tuple(substitute(k, mapping) for k in kids))


def free_variables(expr, bound=frozenset()):
    """Return the set of free variable names of `expr`."""
    if isinstance(expr, VariableRef):
        return set() if expr.name in bound else {expr.name}
    if isinstance(expr, _Binder):
        return free_variables(expr.body, bound | {expr.variable.name})
    out = set()
    for k in expr.children():
        out |= free_variables(k, bound)
    return out


def predicate_names(expr):
    """All predicate names called anywhere inside `expr`."""
    return {n.name for n in walk(expr) if isinstance(n, PredicateCall)}


# ------------------------------------------------------------------------------
# PRINTER
# ------------------------------------------------------------------------------

def _kwarg_text(value):
    if isinstance(value, ValueType):
        return value.to_text()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return '"' + value.replace('"', '\\"') + '"'
    return repr(value)


def kwargs_text(kwargs):
    return "".join(f"[{k}={_kwarg_text(v)}]" for k, v in kwargs)


def to_text(expr):
    """Print an expression as PDSketch source (single line)."""
    if isinstance(expr, Constant):
        if isinstance(expr.value, bool):
            return "true" if expr.value else "false"
        if isinstance(expr.value, str):
            return expr.value
        return repr(expr.value)
    if isinstance(expr, VariableRef):
        return expr.name
    if isinstance(expr, Wildcard):
        return "??"
    if isinstance(expr, PredicateCall):
        return "(" + " ".join([expr.name] + [to_text(a) for a in expr.args]) + ")"
    if isinstance(expr, SlotCall):
        head = "??" + expr.name
        if expr.kwargs:
            head += " " + kwargs_text(expr.kwargs)
        return "(" + " ".join([head] + [to_text(a) for a in expr.args]) + ")"
    if isinstance(expr, SugarCall):
        head = f"{expr.predicate}::{expr.sugar}"
        return "(" + " ".join([head] + [to_text(a) for a in expr.args]) + ")"
    if isinstance(expr, And):
        return "(and " + " ".join(to_text(c) for c in expr.items) + ")"
    if isinstance(expr, Or):
        return "(or " + " ".join(to_text(c) for c in expr.items) + ")"
    if isinstance(expr, Not):
        return f"(not {to_text(expr.item)})"
    if isinstance(expr, Implies):
        return f"(implies {to_text(expr.lhs)} {to_text(expr.rhs)})"
    if isinstance(expr, _Binder):
        keyword = type(expr).__name__.lower()
        return f"({keyword} ({expr.variable.to_text()}) {to_text(expr.body)})"
    if isinstance(expr, When):
        return f"(when {to_text(expr.condition)} {to_text(expr.body)})"
    if isinstance(expr, Assign):
        return f"(assign {to_text(expr.target)} {to_text(expr.value)})"
    raise TypeError(f"cannot print {expr!r}")


# ------------------------------------------------------------------------------
# DOMAIN AST
# ------------------------------------------------------------------------------

@dataclass(frozen=True)
class PredicateDef:
    name: str
    kwargs: Tuple[Tuple[str, Any], ...] = ()
    parameters: Tuple[TypedVariable, ...] = ()
    line: int = field(default=None, compare=False)

    def kwarg(self, key, default=None):
        for k, v in self.kwargs:
            if k == key:
                return v
        return default

    def to_text(self):
        parts = [self.name]
        if self.kwargs:
            parts.append(kwargs_text(self.kwargs))
        parts.extend(p.to_text() for p in self.parameters)
        return "(" + " ".join(parts) + ")"


@dataclass(frozen=True)
class DerivedDef:
    signature: PredicateDef
    body: Expr
    line: int = field(default=None, compare=False)


@dataclass(frozen=True)
class ActionDef:
    name: str
    kwargs: Tuple[Tuple[str, Any], ...] = ()
    parameters: Tuple[TypedVariable, ...] = ()
    precondition: Expr = EMPTY_AND
    effect: Expr = EMPTY_AND
    line: int = field(default=None, compare=False)

    def kwarg(self, key, default=None):
        for k, v in self.kwargs:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class DomainAST:
    """
    Parsed (not yet validated) PDSketch domain.

    Fields:
        name (str): Domain name.
        type_defs: ((type names...), ValueType) pairs in source order.
        predicate_defs: PredicateDef entries from :predicates blocks.
        derived_defs: DerivedDef entries.
        action_defs: ActionDef entries.
    """

    name: str
    type_defs: Tuple[Tuple[Tuple[str, ...], ValueType], ...] = ()
    predicate_defs: Tuple[PredicateDef, ...] = ()
    derived_defs: Tuple[DerivedDef, ...] = ()
    action_defs: Tuple[ActionDef, ...] = ()

    def signature_of(self, name):
        """Return the PredicateDef (input or derived) called `name`, or None."""
        for p in self.predicate_defs:
            if p.name == name:
                return p
        for d in self.derived_defs:
            if d.signature.name == name:
                return d.signature
        return None


def print_domain(ast):
    """Print a DomainAST as PDSketch source that parses back to an equal AST."""
    lines = ["(define (domain " + ast.name + ")"]
    if ast.type_defs:
        lines.append("  (:types")
        for names, base in ast.type_defs:
            lines.append("    " + " ".join(names) + " - " + base.to_text())
        lines.append("  )")
    if ast.predicate_defs:
        lines.append("  (:predicates")
        for p in ast.predicate_defs:
            lines.append("    " + p.to_text())
        lines.append("  )")
    for d in ast.derived_defs:
        lines.append(f"  (:derived {d.signature.to_text()} {to_text(d.body)})")
    for a in ast.action_defs:
        head = a.name
        if a.kwargs:
            head += " " + kwargs_text(a.kwargs)
        params = " ".join(p.to_text() for p in a.parameters)
        lines.append(f"  (:action {head}")
        lines.append(f"    :parameters ({params})")
        lines.append(f"    :precondition {to_text(a.precondition)}")
        lines.append(f"    :effect {to_text(a.effect)}")
        lines.append("  )")
    lines.append(")")
    return "\n".join(lines) + "\n"
