"""
Relaxed compilations of PDSketch domains and the hFF heuristic.

Two compilations turn a domain into delete-relaxed operators over discrete
propositions (pred, args, value):

OPT
    Every effect writing a non-Boolean predicate adds the optimistic value
    `opt` (printed `pred-opt`). Boolean tests that go through slots become
    `Test` nodes: true if the test held in the initial state, or if any
    predicate entry the test reads has changed since then.

AO
    Non-Boolean values are codebook codes. Every learned computation (derived
    predicates and tests defined by slots, and effects with computed values)
    is replaced by a learned first-order rule; effects become one conditional
    production per produced code (an SAS block). A target without a rule falls
    back to the OPT treatment.

`hff` chains relaxed operators forward layer by layer until the goal holds,
then backtraces supporters and counts the distinct operators marked.
Derived propositions come from axioms, which cost nothing.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from .discretize import (
    FALSE_F,
    OPT,
    TRUE_F,
    AndF,
    ExistsF,
    FirstOrderRule,
    ForallF,
    FormulaEvaluator,
    Lit,
    OrF,
    codebooks_from_json,
    codebooks_to_json,
    is_variable,
    negate,
)
from .exceptions import MissingRule, ParamIOError, PDSketchError
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
    free_variables,
    to_text,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


# ------------------------------------------------------------------------------
# RELAXED STRUCTURES
# ------------------------------------------------------------------------------

@dataclass(frozen=True)
class Test:
    """
    Optimistic stand-in for a Boolean computation through slots.

    `polarity` True/False: holds if the computation had that truth value in
    the initial state, or if any entry it reads has changed. None: holds only
    after a change.
    """

    expr: object
    variables: tuple
    polarity: object = True

    def negated_form(self):
        return Test(self.expr, self.variables, None if self.polarity is None else not self.polarity)

    def to_text(self, types=None):
        kind = {True: "opt", False: "opt-not", None: "opt-changed"}[self.polarity]
        return f"({kind} {to_text(self.expr)})"


@dataclass(frozen=True)
class RelaxedEffect:
    variables: tuple
    condition: object
    predicate: str
    args: tuple
    value: object
    rule_key: str = None

    def to_text(self):
        atom = Lit(self.predicate, self.args, self.value).to_text()
        if self.condition == TRUE_F:
            return atom
        return f"(when {self.condition.to_text()} {atom})"


@dataclass(frozen=True)
class RelaxedAction:
    name: str
    parameters: tuple
    precondition: object
    effects: tuple
    distinct: bool = False


@dataclass(frozen=True)
class Axiom:
    predicate: str
    variables: tuple
    args: tuple
    value: object
    body: object
    rule_key: str = None


@dataclass(frozen=True)
class RuleTarget:
    """
    A learned computation that the AO compilation replaces with a rule.

    Attributes:
        key (str): "derived::<pred>", "test::<site>::<n>" or "action::<name>::<n>".
        kind (str): "derived", "test" or "effect".
        predicate (str): Head predicate (the key itself for tests).
        head_args (tuple[str]): Head terms.
        variables (tuple[tuple[str, str]]): Rule variables with their types.
        is_bool (bool): Boolean head.
        expr (Expr): Derived body or test expression.
        action (str): Action schema of an effect target.
        allowed_derived (tuple[str]): Derived predicates a rule body may use.
    """

    key: str
    kind: str
    predicate: str
    head_args: tuple
    variables: tuple
    is_bool: bool
    expr: object = None
    action: str = None
    allowed_derived: tuple = ()


def _type_name(t):
    return t or "object"


def _term(arg):
    if isinstance(arg, VariableRef):
        return arg.name
    if isinstance(arg, Constant):
        return str(arg.value)
    raise PDSketchError(f"predicate argument must be a variable or an object, got {to_text(arg)}")


def _is_symbolic(e, domain):
    """Boolean structure over Boolean predicates only (no slots anywhere)."""
    if isinstance(e, PredicateCall):
        info = domain.predicates.get(e.name)
        return info is not None and info.is_bool
    if isinstance(e, Constant):
        return isinstance(e.value, bool)
    if isinstance(e, (And, Or)):
        return all(_is_symbolic(i, domain) for i in e.items)
    if isinstance(e, Not):
        return _is_symbolic(e.item, domain)
    if isinstance(e, Implies):
        return _is_symbolic(e.lhs, domain) and _is_symbolic(e.rhs, domain)
    if isinstance(e, (Forall, Exists)):
        return _is_symbolic(e.body, domain)
    return False


# ------------------------------------------------------------------------------
# COMPILER
# ------------------------------------------------------------------------------

class _Compiler:
    def __init__(self, domain, mode, rules=None, strict=False, collect=False):
        self.domain = domain
        self.mode = mode
        self.rules = rules or {}
        self.strict = strict
        self.collect = collect
        self.targets = []
        self.used_rules = {}
        self.fallbacks = []
        self.axioms = []
        self._counters = {}

    # -- rules --------------------------------------------------------------

    def _rule(self, target):
        if self.collect:
            self.targets.append(target)
            return None
        if self.mode != "ao":
            return None
        rule = self.rules.get(target.key)
        if rule is None:
            if self.strict:
                raise MissingRule(f"no rule for {target.key}")
            logger.warning("no rule for %s, using the optimistic treatment", target.key)
            self.fallbacks.append(target.key)
            return None
        self.used_rules[target.key] = rule
        return rule

    def _next(self, site):
        n = self._counters.get(site, 0)
        self._counters[site] = n + 1
        return n

    # -- formulas -----------------------------------------------------------

    def formula(self, e, site, scope, allowed):
        if isinstance(e, PredicateCall):
            info = self.domain.predicates.get(e.name)
            if info is not None and info.is_bool:
                return Lit(e.name, tuple(_term(a) for a in e.args), True)
        elif isinstance(e, Constant) and isinstance(e.value, bool):
            return TRUE_F if e.value else FALSE_F
        elif isinstance(e, And):
            return AndF(tuple(self.formula(i, site, scope, allowed) for i in e.items))
        elif isinstance(e, Or):
            return OrF(tuple(self.formula(i, site, scope, allowed) for i in e.items))
        elif isinstance(e, Not):
            return negate(self.formula(e.item, site, scope, allowed))
        elif isinstance(e, Implies):
            lhs = self.formula(e.lhs, site, scope, allowed)
            return OrF((negate(lhs), self.formula(e.rhs, site, scope, allowed)))
        elif isinstance(e, (Forall, Exists)):
            v = e.variable
            body = self.formula(e.body, site, {**scope, v.name: _type_name(v.type)}, allowed)
            cls = ForallF if isinstance(e, Forall) else ExistsF
            return cls(v.name, _type_name(v.type), body)
        return self._test(e, site, scope, allowed)

    def _test(self, e, site, scope, allowed):
        free = free_variables(e)
        variables = tuple((n, scope.get(n, "object")) for n in scope if n in free)
        head = tuple(n for n, _ in variables)
        key = f"test::{site}::{self._next(site)}"
        target = RuleTarget(key, "test", key, head, variables, True, expr=e, allowed_derived=allowed)
        rule = self._rule(target)
        if rule is None:
            return Test(e, head, True)
        self._rule_axioms(rule, variables)
        return Lit(key, head, True)

    def _rule_axioms(self, rule, variables):
        if rule.is_bool:
            true_body = rule.body_for(True)
            has_false = any(v is False for v, _ in rule.cases)
            false_body = rule.body_for(False) if has_false else negate(true_body)
            cases = ((True, true_body), (False, false_body))
        else:
            cases = rule.cases
        for value, body in cases:
            self.axioms.append(Axiom(rule.predicate, variables, rule.head_args, value, body, rule.key))

    # -- derived predicates -------------------------------------------------

    def derived(self):
        names = list(self.domain.derived)
        for i, name in enumerate(names):
            info = self.domain.derived[name]
            params = info.predicate.parameters
            variables = tuple((p.name, _type_name(p.type)) for p in params)
            head = tuple(p.name for p in params)
            scope = dict(variables)
            allowed = tuple(names[:i])
            body = info.body
            site = f"derived::{name}"

            if info.predicate.is_bool and _is_symbolic(body, self.domain):
                f = self.formula(body, site, scope, allowed)
                self.axioms.append(Axiom(name, variables, head, True, f))
                self.axioms.append(Axiom(name, variables, head, False, negate(f)))
                continue

            if info.predicate.is_bool and not isinstance(body, SlotCall):
                # structural body with tests inside
                f = self.formula(body, site, scope, allowed)
                self.axioms.append(Axiom(name, variables, head, True, f))
                self.axioms.append(Axiom(name, variables, head, False, negate(f)))
                continue

            target = RuleTarget(site, "derived", name, head, variables, info.predicate.is_bool,
                                expr=body, allowed_derived=allowed)
            rule = self._rule(target)
            if rule is not None:
                self._rule_axioms(rule, variables)
            elif not self.collect:
                if info.predicate.is_bool:
                    self.axioms.append(Axiom(name, variables, head, True, Test(body, head, True)))
                    self.axioms.append(Axiom(name, variables, head, False, Test(body, head, False)))
                else:
                    self.axioms.append(Axiom(name, variables, head, OPT, Test(body, head, None)))

    # -- actions ------------------------------------------------------------

    def action(self, schema):
        params = tuple((p.name, _type_name(p.type)) for p in schema.parameters)
        site = f"action::{schema.name}"
        allowed = tuple(self.domain.derived)
        pre = self.formula(schema.precondition, site, dict(params), allowed)
        effects = []
        self._effect(schema, schema.effect, params, (), [], effects, site, allowed)
        return RelaxedAction(schema.name, params, pre, tuple(effects), schema.distinct)

    def _effect(self, schema, e, params, local, conds, out, site, allowed):
        scope = dict(params + local)
        if isinstance(e, And):
            for item in e.items:
                self._effect(schema, item, params, local, conds, out, site, allowed)
        elif isinstance(e, Foreach):
            v = e.variable
            self._effect(schema, e.body, params, local + ((v.name, _type_name(v.type)),), conds, out, site, allowed)
        elif isinstance(e, When):
            c = self.formula(e.condition, site, scope, allowed)
            self._effect(schema, e.body, params, local, conds + [c], out, site, allowed)
        elif isinstance(e, Assign):
            pred = e.target.name
            args = tuple(_term(a) for a in e.target.args)
            cond = AndF(tuple(conds)) if conds else TRUE_F
            if isinstance(e.value, Constant) and isinstance(e.value.value, bool):
                out.append(RelaxedEffect(local, cond, pred, args, e.value.value))
                return
            key = f"{site}::{self._next(site + '::effect')}"
            info = self.domain.predicates[pred]
            target = RuleTarget(key, "effect", pred, args, params + local, info.is_bool,
                                action=schema.name, allowed_derived=allowed)
            rule = self._rule(target)
            if rule is None:
                out.append(RelaxedEffect(local, cond, pred, args, OPT))
                return
            for value, body in rule.cases:
                guard = body if cond == TRUE_F else AndF((cond, body))
                out.append(RelaxedEffect(local, guard, pred, args, value, rule.key))

    def build(self):
        self.derived()
        actions = tuple(self.action(s) for s in self.domain.actions.values())
        return actions, tuple(self.axioms)


def rule_targets(domain):
    """Every target the AO compilation of `domain` would look up a rule for."""
    compiler = _Compiler(domain, "ao", collect=True)
    compiler.build()
    return compiler.targets


# ------------------------------------------------------------------------------
# RELAXED DOMAIN
# ------------------------------------------------------------------------------

@dataclass(frozen=True)
class _GroundEffect:
    condition: object
    binding: dict
    prop: tuple


@dataclass(frozen=True)
class _GroundOp:
    label: str
    precondition: object
    binding: dict
    effects: tuple


def _bindings(universe, variables, distinct=False):
    pools = [universe.of_type(t) for _, t in variables]
    for combo in itertools.product(*pools):
        if distinct and len(set(combo)) != len(combo):
            continue
        yield dict(zip((n for n, _ in variables), combo)), combo


def _ground_args(args, binding):
    return tuple(binding[a] if is_variable(a) else a for a in args)


class RelaxedDomain:
    """
    Delete-relaxed operators and axioms over discrete propositions.

    Attributes:
        name (str): Source domain name.
        mode (str): "opt" or "ao".
        actions (tuple[RelaxedAction]): Relaxed operators.
        axioms (tuple[Axiom]): Derived propositions, in evaluation order.
        domain (Domain | None): Source domain (needed for Test nodes and goals).
        rules (dict[str, FirstOrderRule]): Rules used by the compilation.
        codebooks (dict[str, Codebook]): Codebooks of the AO compilation.
        fallbacks (list[str]): Targets compiled optimistically.
    """

    def __init__(self, name, mode, actions, axioms=(), domain=None, rules=None, codebooks=None, fallbacks=()):
        self.name = name
        self.mode = mode
        self.actions = tuple(actions)
        self.axioms = tuple(axioms)
        self.domain = domain
        self.rules = dict(rules or {})
        self.codebooks = dict(codebooks or {})
        self.fallbacks = list(fallbacks)
        self._ground_cache = {}

    def __repr__(self):
        return f"<RelaxedDomain {self.name} ({self.mode}): {len(self.actions)} actions, {len(self.axioms)} axioms>"

    def compile_goal(self, goal):
        """Relaxed formula of a checked goal expression."""
        compiler = _Compiler(self.domain, self.mode, self.rules)
        return compiler.formula(goal, "goal", {}, tuple(self.domain.derived) if self.domain else ())

    def ground(self, universe):
        """Ground operators and axioms over `universe` (cached per universe)."""
        if universe in self._ground_cache:
            return self._ground_cache[universe]
        ops = []
        for action in self.actions:
            for binding, combo in _bindings(universe, action.parameters, action.distinct):
                effects = []
                for eff in action.effects:
                    for local, _ in _bindings(universe, eff.variables):
                        b = {**binding, **local}
                        effects.append(_GroundEffect(eff.condition, b, (eff.predicate, _ground_args(eff.args, b), eff.value)))
                ops.append(_GroundOp(f"{action.name}({', '.join(combo)})", action.precondition, binding, tuple(effects)))
        axioms = []
        for ax in self.axioms:
            for binding, _ in _bindings(universe, ax.variables):
                axioms.append((ax.body, binding, (ax.predicate, _ground_args(ax.args, binding), ax.value)))
        task = (tuple(ops), tuple(axioms))
        self._ground_cache[universe] = task
        return task

    # -- text ----------------------------------------------------------------

    def to_text(self):
        lines = [f"(define (relaxed-domain {self.name})", f"  (:mode {self.mode})"]
        if self.codebooks:
            books = " ".join(f"({n} {b.k})" for n, b in sorted(self.codebooks.items()))
            lines.append(f"  (:codebooks {books})")
        for key in self.fallbacks:
            lines.append(f"  (:optimistic {key})")
        printed = set()
        for ax in self.axioms:
            if ax.rule_key:
                if ax.rule_key not in printed:
                    printed.add(ax.rule_key)
                    lines.append(_indent(self.rules[ax.rule_key].to_text(), 2))
                continue
            head = Lit(ax.predicate, ax.args, ax.value).to_text(dict(ax.variables))
            lines.append(f"  (:axiom {head} <- {ax.body.to_text()})")
        for action in self.actions:
            params = " ".join(f"{n} - {t}" for n, t in action.parameters)
            lines.append(f"  (:action {action.name}")
            lines.append(f"    :parameters ({params})")
            lines.append(f"    :precondition {action.precondition.to_text()}")
            lines.append("    :effect (and")
            done = set()
            for eff in action.effects:
                prefix = "".join(f"(foreach ({n} - {t}) " for n, t in eff.variables)
                suffix = ")" * len(eff.variables)
                if eff.rule_key:
                    if eff.rule_key in done:
                        continue
                    done.add(eff.rule_key)
                    block = self.rules[eff.rule_key].to_text()
                    lines.append(_indent(prefix + block + suffix, 6))
                else:
                    lines.append(f"      {prefix}{eff.to_text()}{suffix}")
            lines.append("    ))")
        lines.append(")")
        return "\n".join(lines) + "\n"

    # -- json ----------------------------------------------------------------

    def to_json(self):
        return {
            "format": FORMAT_VERSION,
            "domain": self.name,
            "mode": self.mode,
            "codebooks": codebooks_to_json(self.codebooks),
            "rules": {k: r.to_json() for k, r in sorted(self.rules.items())},
        }

    def dump_json(self, path):
        try:
            Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True), encoding="utf-8")
        except OSError as exc:
            raise ParamIOError(f"cannot write {path}: {exc}") from exc


def _indent(text, n):
    pad = " " * n
    return "\n".join(pad + line for line in text.splitlines())


def compile_opt(domain):
    """Optimistic compilation."""
    actions, axioms = _Compiler(domain, "opt").build()
    relaxed = RelaxedDomain(domain.name, "opt", actions, axioms, domain)
    logger.info("compiled %s (opt): %d actions, %d axioms", domain.name, len(actions), len(axioms))
    return relaxed


def compile_ao(domain, codebooks, rules, strict=False):
    """
    And-Or compilation from codebooks and learned rules.

    Args:
        domain (Domain): Source domain.
        codebooks (dict[str, Codebook]): One per non-Boolean predicate.
        rules (dict[str, FirstOrderRule | None]): Learned rules by target key;
            None marks a target whose rule could not be learned.
        strict (bool): Raise instead of falling back to the optimistic
            treatment.

    Raises:
        MissingRule: `strict` and some target has no rule.
    """
    compiler = _Compiler(domain, "ao", {k: r for k, r in rules.items() if r is not None}, strict)
    actions, axioms = compiler.build()
    relaxed = RelaxedDomain(domain.name, "ao", actions, axioms, domain, compiler.used_rules, codebooks,
                            compiler.fallbacks)
    logger.info(
        "compiled %s (ao): %d rules, %d optimistic fallbacks",
        domain.name, len(compiler.used_rules), len(compiler.fallbacks),
    )
    return relaxed


def load_json(path, domain):
    """Rebuild a compilation from its JSON companion."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ParamIOError(f"cannot read compiled domain {path}: {exc}") from exc
    if data.get("format") != FORMAT_VERSION:
        raise ParamIOError(f"{path}: unsupported format {data.get('format')!r}")
    if data.get("domain") != domain.name:
        raise ParamIOError(f"{path} was compiled for {data.get('domain')!r}, not {domain.name!r}")
    if data["mode"] == "opt":
        return compile_opt(domain)
    rules = {k: FirstOrderRule.from_json(r) for k, r in data["rules"].items()}
    return compile_ao(domain, codebooks_from_json(data["codebooks"]), rules)


# ------------------------------------------------------------------------------
# HFF
# ------------------------------------------------------------------------------

class _RelaxedState:
    """Accumulating proposition set with the first layer of every value."""

    def __init__(self, initial):
        self.layers = {}
        self.initial = {}
        for pred, args, value in initial:
            self.layers.setdefault((pred, args), {})[value] = 0
            self.initial.setdefault((pred, args), set()).add(value)

    def __contains__(self, prop):
        pred, args, value = prop
        values = self.layers.get((pred, args), {})
        return any(v == value and type(v) is type(value) for v in values)

    def values_of(self, pred, args):
        return self.layers.get((pred, tuple(args)), {}).keys()

    def add(self, prop, layer):
        pred, args, value = prop
        self.layers.setdefault((pred, args), {})[value] = layer

    def layer_of(self, prop):
        pred, args, value = prop
        return self.layers[(pred, args)][value]

    def changed(self, pred, args):
        start = self.initial.get((pred, args), set())
        return [(pred, args, v) for v in self.layers.get((pred, args), {}) if v not in start]


class _RelaxedEvaluator(FormulaEvaluator):
    def __init__(self, state, universe, domain=None, oracle=None):
        super().__init__(state, universe)
        self.domain = domain
        self.oracle = oracle
        self._initial = {}
        self._deps = {}

    # -- tests --------------------------------------------------------------

    def _key(self, f, binding):
        return (f.expr, tuple(binding.get(v) for v in f.variables))

    def initial(self, f, binding):
        key = self._key(f, binding)
        if key not in self._initial:
            if self.oracle is None:
                raise PDSketchError("optimistic tests need the initial latent state")
            self._initial[key] = bool(self.oracle(f.expr, {v: binding[v] for v in f.variables}))
        return self._initial[key]

    def deps(self, f, binding):
        key = self._key(f, binding)
        if key not in self._deps:
            found = []
            self._collect(f.expr, {v: binding[v] for v in f.variables}, found, set())
            self._deps[key] = tuple(dict.fromkeys(found))
        return self._deps[key]

    def _collect(self, e, b, out, seen):
        if isinstance(e, PredicateCall):
            args = tuple(b[a.name] if isinstance(a, VariableRef) else str(a.value) for a in e.args)
            out.append((e.name, args))
            if e.name in self.domain.derived and (e.name, args) not in seen:
                seen.add((e.name, args))
                info = self.domain.derived[e.name]
                inner = {p.name: o for p, o in zip(info.predicate.parameters, args)}
                self._collect(info.body, inner, out, seen)
            return
        if isinstance(e, (Forall, Exists, Foreach)):
            for o in self.universe.of_type(e.variable.type):
                self._collect(e.body, {**b, e.variable.name: o}, out, seen)
            return
        for child in e.children():
            self._collect(child, b, out, seen)

    def other(self, f, binding):
        if not isinstance(f, Test):
            return super().other(f, binding)
        if f.polarity is not None and self.initial(f, binding) == f.polarity:
            return True
        return any(self.state.changed(p, a) for p, a in self.deps(f, binding))

    # -- witnesses ----------------------------------------------------------

    def _rank(self, props):
        return (max((self.state.layer_of(p) for p in props), default=0), len(props))

    def witness(self, f, binding=None):
        """Propositions that make `f` hold, preferring early layers; None if it fails."""
        b = binding or {}
        if isinstance(f, Lit):
            args = self.ground(f.args, b)
            options = []
            for v in self.state.values_of(f.predicate, args):
                same = v == f.value and type(v) is type(f.value)
                if v == OPT or (same != f.negated):
                    options.append((self.state.layer_of((f.predicate, args, v)), repr(v), (f.predicate, args, v)))
            return frozenset([min(options)[2]]) if options else None
        if isinstance(f, (AndF, ForallF)):
            parts = (
                [self.witness(i, b) for i in f.items]
                if isinstance(f, AndF)
                else [self.witness(f.body, {**b, f.variable: o}) for o in self.universe.of_type(f.type)]
            )
            if any(p is None for p in parts):
                return None
            return frozenset().union(*parts)
        if isinstance(f, (OrF, ExistsF)):
            parts = (
                [self.witness(i, b) for i in f.items]
                if isinstance(f, OrF)
                else [self.witness(f.body, {**b, f.variable: o}) for o in self.universe.of_type(f.type)]
            )
            best = None
            for p in parts:
                if p is not None and (best is None or self._rank(p) < self._rank(best)):
                    best = p
            return best
        if isinstance(f, Test):
            if f.polarity is not None and self.initial(f, b) == f.polarity:
                return frozenset()
            options = [c for p, a in self.deps(f, b) for c in self.state.changed(p, a)]
            if not options:
                return None
            return frozenset([min(options, key=lambda c: (self.state.layer_of(c), repr(c)))])
        raise PDSketchError(f"cannot evaluate {f!r}")


def _apply_axioms(axioms, state, ev, layer, supporter):
    changed = True
    while changed:
        changed = False
        for body, binding, prop in axioms:
            if prop in state or not ev.holds(body, binding):
                continue
            supporter[prop] = (None, ev.witness(body, binding))
            state.add(prop, layer)
            changed = True


def hff(relaxed, state, goal, universe, oracle=None):
    """
    FF heuristic on a relaxed domain.

    Args:
        relaxed (RelaxedDomain): Compilation.
        state (Iterable[tuple]): Initial propositions (e.g. a DiscreteState).
        goal: Relaxed goal formula (see RelaxedDomain.compile_goal).
        universe (Universe): Objects to ground over.
        oracle (callable, optional): (expr, binding) -> bool, the initial
            truth of optimistic tests.

    Returns:
        int | float: Number of distinct operators in the relaxed plan, or
            math.inf when the goal is unreachable.
    """
    ops, axioms = relaxed.ground(universe)
    rs = _RelaxedState(state)
    ev = _RelaxedEvaluator(rs, universe, relaxed.domain, oracle)
    supporter = {}
    _apply_axioms(axioms, rs, ev, 0, supporter)

    layer = 0
    while not ev.holds(goal):
        new = {}
        for op in ops:
            pending = [e for e in op.effects if e.prop not in rs]
            if not pending or not ev.holds(op.precondition, op.binding):
                continue
            pre = None
            for eff in pending:
                if not ev.holds(eff.condition, eff.binding):
                    continue
                if pre is None:
                    pre = ev.witness(op.precondition, op.binding)
                support = pre | ev.witness(eff.condition, eff.binding)
                rank = (sum(1 for p in support if rs.layer_of(p) > 0), op.label)
                if eff.prop not in new or rank < new[eff.prop][0]:
                    new[eff.prop] = (rank, op.label, support)
        if not new:
            return math.inf
        layer += 1
        for prop, (_, label, support) in new.items():
            rs.add(prop, layer)
            supporter[prop] = (label, support)
        _apply_axioms(axioms, rs, ev, layer, supporter)

    marked, seen = set(), set()
    agenda = list(ev.witness(goal))
    while agenda:
        prop = agenda.pop()
        if prop in seen:
            continue
        seen.add(prop)
        if prop not in supporter:
            continue
        label, support = supporter[prop]
        if label is not None:
            marked.add(label)
        agenda.extend(support)
    logger.debug("hff=%d after %d layers", len(marked), layer)
    return len(marked)
