"""
Runtime domain model: validated domains, object universes, grounded actions
and slot bindings.

A `Domain` is produced by `pds_validation.validate`. Slots (the `??` blanks)
start unbound; implementations are attached with `bind_slot` and looked up
during evaluation.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Any, Tuple

from .exceptions import SchemaError, SignatureMismatch, UnboundSlot, UnknownSlot
from .expressions import Constant, PredicateDef, TypedVariable, ValueType, substitute

logger = logging.getLogger(__name__)


# ------------------------------------------------------------------------------
# SIGNATURES
# ------------------------------------------------------------------------------

@dataclass(frozen=True)
class SlotInput:
    """
    One input of a slot.

    `variadic` marks a foreach argument (a set of values, one per object);
    `conditional` marks a foreach whose elements carry a when-condition score.
    """

    type: ValueType
    variadic: bool = False
    conditional: bool = False

    @property
    def dim(self):
        return self.type.size


@dataclass(frozen=True)
class SlotSignature:
    name: str
    inputs: Tuple[SlotInput, ...]
    output: ValueType

    @property
    def input_dims(self):
        return tuple(i.dim for i in self.inputs)

    @property
    def output_dim(self):
        return self.output.size

    @property
    def site(self):
        """`derived::<pred>` or `action::<name>`."""
        return self.name.rsplit("::", 1)[0]

    def describe(self):
        ins = ", ".join(
            ("{" + i.type.to_text() + "}" if i.variadic else i.type.to_text()) for i in self.inputs
        )
        return f"({ins}) -> {self.output.to_text()}"


@dataclass(frozen=True)
class PredicateInfo:
    name: str
    parameters: Tuple[TypedVariable, ...]
    return_type: ValueType
    is_input: bool
    definition: PredicateDef = field(compare=False, default=None)

    @property
    def arg_types(self):
        return tuple(p.type for p in self.parameters)

    @property
    def is_bool(self):
        return self.return_type.is_bool

    @property
    def arity(self):
        return len(self.parameters)


@dataclass(frozen=True)
class DerivedInfo:
    predicate: PredicateInfo
    body: Any


@dataclass(frozen=True)
class ActionSchema:
    name: str
    parameters: Tuple[TypedVariable, ...]
    precondition: Any
    effect: Any
    distinct: bool = False


# ------------------------------------------------------------------------------
# DOMAIN
# ------------------------------------------------------------------------------

class Domain:
    """
    Validated PDSketch domain.

    Attributes:
        name (str): Domain name.
        object_types (list[str]): Declared object types (plus "object").
        value_types (dict[str, ValueType]): Declared value types.
        predicates (dict[str, PredicateInfo]): Input and derived predicates.
        derived (dict[str, DerivedInfo]): Derived definitions in evaluation
            order (each only references input predicates and earlier ones).
        actions (dict[str, ActionSchema]): Action schemas in source order.
        slots (dict[str, SlotSignature]): Canonical slot name -> signature.
        implementations (dict[str, object]): Bound slot implementations.
    """

    def __init__(self, name, object_types, value_types, predicates, derived, actions, slots):
        self.name = name
        self.object_types = list(object_types)
        self.value_types = dict(value_types)
        self.predicates = dict(predicates)
        self.derived = dict(derived)
        self.actions = dict(actions)
        self.slots = dict(slots)
        self.implementations = {}

    def __repr__(self):
        return (
            f"<Domain {self.name}: {len(self.predicates)} predicates, "
            f"{len(self.actions)} actions, {len(self.slots)} slots>"
        )

    @property
    def input_predicates(self):
        return [p for p in self.predicates.values() if p.is_input]

    def predicate_def(self, name):
        """PredicateDef of `name` (None when undeclared); used to desugar goals."""
        info = self.predicates.get(name)
        return info.definition if info else None

    def resolve(self, vtype):
        if vtype.kind == "named":
            if vtype.name in self.value_types:
                return self.value_types[vtype.name]
            if vtype.name in ("bool", "int64", "float32"):
                return ValueType(vtype.name)
        return vtype

    def slot_impl(self, name):
        """Return the implementation bound to `name`."""
        try:
            return self.implementations[name]
        except KeyError:
            if name not in self.slots:
                raise UnknownSlot(f"unknown slot {name!r}") from None
            raise UnboundSlot(f"slot {name!r} has no implementation") from None

    def slots_of(self, site):
        """Slots defined at one definition site, e.g. "derived::is-red"."""
        return [s for s in self.slots.values() if s.site == site]


def bind_slot(domain, slot_name, impl):
    """
    Attach an implementation to a slot, replacing any previous binding.

    `impl` must expose `input_dims` (one entry per input; element width for
    variadic inputs) and `output_dim`, and be callable on a list of
    arguments.

    Raises:
        UnknownSlot: `slot_name` is not a slot of `domain`.
        SignatureMismatch: Arity or a known dimension differs.
    """
    sig = domain.slots.get(slot_name)
    if sig is None:
        raise UnknownSlot(f"unknown slot {slot_name!r}")

    impl_inputs = tuple(getattr(impl, "input_dims", ()))
    if len(impl_inputs) != len(sig.inputs):
        raise SignatureMismatch(
            f"slot {slot_name}: expected {len(sig.inputs)} inputs, implementation takes {len(impl_inputs)}"
        )
    for i, (want, got) in enumerate(zip(sig.input_dims, impl_inputs)):
        if want is not None and got is not None and want != got:
            raise SignatureMismatch(f"slot {slot_name}: input {i} has dim {want}, implementation expects {got}")
    out = getattr(impl, "output_dim", None)
    if sig.output_dim is not None and out is not None and out != sig.output_dim:
        raise SignatureMismatch(f"slot {slot_name}: output dim {sig.output_dim}, implementation returns {out}")

    if slot_name in domain.implementations:
        logger.debug("rebinding slot %s", slot_name)
    domain.implementations[slot_name] = impl


def check_complete(domain):
    """Return the sorted names of slots lacking an implementation."""
    return sorted(n for n in domain.slots if n not in domain.implementations)


# ------------------------------------------------------------------------------
# UNIVERSE AND GROUNDING
# ------------------------------------------------------------------------------

class Universe:
    """
    Ordered set of (object name, object type) pairs for one episode.
    """

    def __init__(self, objects):
        self.objects = tuple((str(n), str(t)) for n, t in objects)
        self._types = {}
        for name, typ in self.objects:
            if name in self._types:
                raise SchemaError(f"duplicate object name {name!r}")
            self._types[name] = typ

    def __iter__(self):
        return iter(self.objects)

    def __len__(self):
        return len(self.objects)

    def __contains__(self, name):
        return name in self._types

    def __eq__(self, other):
        return isinstance(other, Universe) and self.objects == other.objects

    def __hash__(self):
        return hash(self.objects)

    def __repr__(self):
        return f"Universe({list(self.objects)!r})"

    def type_of(self, name):
        return self._types.get(name)

    def of_type(self, type_name):
        """Object names of a type in lexicographic order ("object" or None: all)."""
        if type_name in (None, "object"):
            return sorted(self._types)
        return sorted(n for n, t in self.objects if t == type_name)

    def to_json(self):
        return [{"name": n, "type": t} for n, t in self.objects]


@dataclass(frozen=True)
class GroundedAction:
    name: str
    arguments: Tuple[str, ...]
    precondition: Any
    effect: Any

    @property
    def label(self):
        return f"{self.name}({', '.join(self.arguments)})"

    def __str__(self):
        return self.label


def ground_action(schema, arguments):
    """Bind the parameters of `schema` to object names."""
    mapping = {p.name: Constant(a) for p, a in zip(schema.parameters, arguments)}
    return GroundedAction(
        schema.name,
        tuple(arguments),
        substitute(schema.precondition, mapping),
        substitute(schema.effect, mapping),
    )


def ground_actions(domain, universe):
    """
    Enumerate every type-correct grounding of every action schema.

    Order: schema order, then the lexicographic cross product of objects.
    Schemas declared with `[distinct=true]` skip tuples repeating an object.
    """
    out = []
    for schema in domain.actions.values():
        pools = [universe.of_type(p.type) for p in schema.parameters]
        for args in itertools.product(*pools):
            if schema.distinct and len(set(args)) != len(args):
                continue
            out.append(ground_action(schema, args))
    return out


def find_action(domain, universe, name, arguments):
    """Ground one named action, checking argument count and types."""
    schema = domain.actions.get(name)
    if schema is None:
        raise SchemaError(f"unknown action {name!r}")
    if len(arguments) != len(schema.parameters):
        raise SchemaError(f"action {name} takes {len(schema.parameters)} arguments, got {len(arguments)}")
    for p, a in zip(schema.parameters, arguments):
        if a not in universe:
            raise SchemaError(f"unknown object {a!r} in action {name}")
        if p.type not in (None, "object") and universe.type_of(a) != p.type:
            raise SchemaError(f"object {a!r} is not of type {p.type} in action {name}")
    return ground_action(schema, arguments)

