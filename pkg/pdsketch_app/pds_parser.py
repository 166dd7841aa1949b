"""
Lexer, parser and desugarer for PDSketch domain files.

A domain file is a LISP-style definition:

    (define (domain babyai)
      (:types robot item - object  pose - vector[float32, 2])
      (:predicates (robot-pose [return_type=pose] ?r - robot) ...)
      (:derived (is-red ?o - item) (??f (item-feature ?o)))
      (:action forward :parameters (?r - robot) :precondition (and ) :effect ...)
    )

Typical usage:
    ast = desugar(parse_domain(source))
    goal = parse_expression("(exists (?o - item) (is-red ?o))")

Keywords (`:types`, `and`, `forall`, ...) are case-insensitive; identifiers
are case-sensitive. Comments run from ";" to the end of the line. Commas are
treated as whitespace (they only appear inside vector types).
"""

import logging
import re
from dataclasses import dataclass, replace

from .exceptions import DesugarError, LexError, ParseError
from .expressions import (
    FALSE,
    TRUE,
    ActionDef,
    And,
    Assign,
    Constant,
    DerivedDef,
    DomainAST,
    Exists,
    Forall,
    Foreach,
    Implies,
    Not,
    Or,
    PredicateCall,
    PredicateDef,
    SlotCall,
    SugarCall,
    TypedVariable,
    ValueType,
    VariableRef,
    When,
    Wildcard,
    walk,
)

logger = logging.getLogger(__name__)


SUGARS = ("assign", "cond-assign", "cond-select")
PRIM_TYPES = ("bool", "int64", "float32")


# ------------------------------------------------------------------------------
# LEXER
# ------------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int
    start: int
    end: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[\s,]+)
  | (?P<comment>;[^\n]*)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<lbracket>\[)
  | (?P<rbracket>\])
  | (?P<equals>=)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<slot>\?\?[A-Za-z0-9_\-]*)
  | (?P<variable>\?[A-Za-z_][A-Za-z0-9_\-]*)
  | (?P<keyword>:[A-Za-z][A-Za-z0-9_\-]*)
  | (?P<float>-?(?:\d+\.\d*|\.\d+)(?:[eE][-+]?\d+)?|-?\d+[eE][-+]?\d+)
  | (?P<int>-?\d+)
  | (?P<symbol>[A-Za-z_][A-Za-z0-9_\-:.@\#]*)
  | (?P<dash>-)
    """,
    re.VERBOSE,
)


def tokenize(source):
    """
    Split PDSketch source into tokens, dropping whitespace and comments.

    Args:
        source (str): Domain file text or a standalone expression.

    Returns:
        list[Token]: Tokens with 1-based line/col and character offsets, so
            `source[t.start:t.end] == t.text` for every token.

    Raises:
        LexError: On a character that starts no token.
    """
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    n = len(source)
    while pos < n:
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise LexError(f"illegal character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, pos - line_start + 1, pos, m.end()))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    return tokens


# ------------------------------------------------------------------------------
# PARSER
# ------------------------------------------------------------------------------

class _Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0
        self.open_parens = []

    # -- token helpers --------------------------------------------------------

    def peek(self, offset=0):
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def at_end(self):
        return self.pos >= len(self.tokens)

    def next(self):
        tok = self.peek()
        if tok is None:
            self._eof("unexpected end of input")
        self.pos += 1
        return tok

    def _eof(self, message):
        if self.open_parens:
            opener = self.open_parens[-1]
            raise ParseError("unclosed parenthesis", opener.line, opener.col)
        last = self.tokens[-1] if self.tokens else None
        raise ParseError(message, last.line if last else 1, last.col if last else 1)

    def error(self, message, tok=None):
        tok = tok or self.peek()
        if tok is None:
            self._eof(message)
        raise ParseError(f"{message}, got {tok.text!r}", tok.line, tok.col)

    def expect(self, kind, what=None):
        tok = self.peek()
        if tok is None:
            self._eof(f"expected {what or kind}")
        if tok.kind != kind:
            self.error(f"expected {what or kind}")
        self.pos += 1
        return tok

    def open(self):
        tok = self.expect("lparen", "'('")
        self.open_parens.append(tok)
        return tok

    def close(self):
        self.expect("rparen", "')'")
        self.open_parens.pop()

    def peek_is(self, kind, word=None):
        tok = self.peek()
        if tok is None or tok.kind != kind:
            return False
        return word is None or tok.text.lower() == word

    # -- domain ---------------------------------------------------------------

    def parse_domain(self):
        self.open()
        if not self.peek_is("symbol", "define"):
            self.error("expected 'define'")
        self.next()

        if self.peek_is("symbol", "domain"):
            self.next()
        if not self.peek_is("lparen"):
            tok = self.peek()
            if tok is None:
                self._eof("missing domain-name-def")
            raise ParseError("missing domain-name-def", tok.line, tok.col)
        self.open()
        if not self.peek_is("symbol", "domain"):
            self.error("expected 'domain'")
        self.next()
        name_tok = self.next()
        if name_tok.kind not in ("symbol", "string"):
            self.error("expected domain name", name_tok)
        name = name_tok.text.strip('"') if name_tok.kind == "string" else name_tok.text
        self.close()

        type_defs, predicate_defs, derived_defs, action_defs = [], [], [], []
        while not self.peek_is("rparen"):
            if self.at_end():
                self._eof("unexpected end of input")
            self.open()
            section = self.expect("keyword", "section keyword")
            key = section.text.lower()
            if key == ":types":
                type_defs.extend(self.parse_type_defs())
            elif key == ":predicates":
                while not self.peek_is("rparen"):
                    predicate_defs.append(self.parse_predicate_signature())
                self.close()
            elif key == ":derived":
                sig = self.parse_predicate_signature()
                body = self.parse_expr()
                self.close()
                derived_defs.append(DerivedDef(sig, body, line=section.line))
            elif key == ":action":
                action_defs.append(self.parse_action(section))
            else:
                raise ParseError(f"unsupported section {section.text}", section.line, section.col)
        self.close()
        if not self.at_end():
            self.error("trailing input after domain definition")
        logger.debug("parsed domain %s: %d types, %d predicates, %d derived, %d actions",
                     name, len(type_defs), len(predicate_defs), len(derived_defs), len(action_defs))
        return DomainAST(
            name=name,
            type_defs=tuple(type_defs),
            predicate_defs=tuple(predicate_defs),
            derived_defs=tuple(derived_defs),
            action_defs=tuple(action_defs),
        )

    def parse_type_defs(self):
        defs = []
        names = []
        while not self.peek_is("rparen"):
            tok = self.next()
            if tok.kind == "symbol":
                names.append(tok.text)
            elif tok.kind == "dash":
                if not names:
                    self.error("type definition without type names", tok)
                defs.append((tuple(names), self.parse_base_type()))
                names = []
            else:
                self.error("expected type name", tok)
        if names:
            defs.append((tuple(names), ValueType("object")))
        self.close()
        return defs

    def parse_base_type(self):
        tok = self.expect("symbol", "base type")
        word = tok.text.lower()
        if word == "object":
            return ValueType("object")
        if word in PRIM_TYPES:
            return ValueType(word)
        if word == "vector":
            self.expect("lbracket", "'['")
            prim_tok = self.expect("symbol", "vector element type")
            prim = prim_tok.text.lower()
            if prim not in PRIM_TYPES:
                self.error("vector element type must be bool, int64 or float32", prim_tok)
            dim = None
            if self.peek_is("int"):
                dim = int(self.next().text)
                if dim <= 0:
                    self.error("vector dimension must be positive", self.tokens[self.pos - 1])
            self.expect("rbracket", "']'")
            return ValueType("vector", prim=prim, dim=dim)
        return ValueType("named", name=tok.text)

    def parse_kwargs(self):
        kwargs = []
        while self.peek_is("lbracket"):
            self.next()
            key = self.expect("symbol", "kwarg key").text
            self.expect("equals", "'='")
            tok = self.peek()
            if tok is None:
                self._eof("malformed kwargs")
            if tok.kind == "string":
                self.next()
                value = tok.text[1:-1].replace('\\"', '"')
            elif tok.kind == "int":
                self.next()
                value = int(tok.text)
            elif tok.kind == "float":
                self.next()
                value = float(tok.text)
            elif tok.kind == "symbol" and tok.text.lower() in ("true", "false"):
                self.next()
                value = tok.text.lower() == "true"
            elif tok.kind == "symbol":
                value = self.parse_base_type()
            else:
                self.error("malformed kwargs")
            self.expect("rbracket", "']' closing kwarg")
            kwargs.append((key, value))
        return tuple(kwargs)

    def parse_variable_list(self):
        """`?a ?b - t1 ?c - t2 ?d` -> typed variables (untyped trailing vars keep type None)."""
        out = []
        pending = []
        while self.peek_is("variable") or self.peek_is("dash"):
            tok = self.next()
            if tok.kind == "variable":
                pending.append(tok.text)
                continue
            if not pending:
                self.error("type annotation without variable", tok)
            type_name = self.expect("symbol", "type name").text
            out.extend(TypedVariable(v, type_name) for v in pending)
            pending = []
        out.extend(TypedVariable(v, None) for v in pending)
        return tuple(out)

    def parse_predicate_signature(self):
        start = self.open()
        name = self.expect("symbol", "predicate name").text
        kwargs = self.parse_kwargs()
        params = self.parse_variable_list()
        self.close()
        return PredicateDef(name, kwargs, params, line=start.line)

    def parse_action(self, section):
        head = self.peek()
        if head is not None and head.kind == "lparen":
            # `(:action (name [kwargs]) ...)` form
            self.open()
            name = self.expect("symbol", "action name").text
            kwargs = self.parse_kwargs()
            self.close()
        else:
            name = self.expect("symbol", "action name").text
            kwargs = self.parse_kwargs()

        parameters, precondition, effect = (), And(()), And(())
        while not self.peek_is("rparen"):
            key_tok = self.expect("keyword", "action section keyword")
            key = key_tok.text.lower()
            if key in (":parameters", ":parameter"):
                self.open()
                parameters = self.parse_variable_list()
                self.close()
            elif key == ":precondition":
                precondition = self.parse_expr()
            elif key == ":effect":
                effect = self.parse_expr()
            else:
                raise ParseError(f"unsupported action section {key_tok.text}", key_tok.line, key_tok.col)
        self.close()
        return ActionDef(name, kwargs, parameters, precondition, effect, line=section.line)

    # -- expressions ----------------------------------------------------------

    def parse_typed_binder(self):
        self.open()
        var = self.expect("variable", "bound variable").text
        type_name = None
        if self.peek_is("dash"):
            self.next()
            type_name = self.expect("symbol", "type name").text
        self.close()
        return TypedVariable(var, type_name)

    def parse_args(self):
        args = []
        while not self.peek_is("rparen"):
            if self.at_end():
                self._eof("unexpected end of input")
            args.append(self.parse_expr())
        return tuple(args)

    def parse_expr(self):
        tok = self.peek()
        if tok is None:
            self._eof("expected expression")
        if tok.kind == "variable":
            self.next()
            return VariableRef(tok.text)
        if tok.kind == "slot":
            if tok.text != "??":
                self.error("slot call must be parenthesized")
            self.next()
            return Wildcard()
        if tok.kind == "int":
            self.next()
            return Constant(int(tok.text))
        if tok.kind == "float":
            self.next()
            return Constant(float(tok.text))
        if tok.kind == "string":
            self.next()
            return Constant(tok.text[1:-1])
        if tok.kind == "symbol":
            self.next()
            word = tok.text.lower()
            if word in ("true", "false"):
                return Constant(word == "true")
            return Constant(tok.text)
        if tok.kind != "lparen":
            self.error("expected expression")

        self.open()
        head = self.peek()
        if head is None:
            self._eof("expected expression")
        if head.kind == "rparen":
            self.error("empty expression")

        if head.kind == "slot":
            self.next()
            name = head.text[2:]
            if not name:
                name = self.expect("symbol", "slot name").text
            kwargs = self.parse_kwargs()
            args = self.parse_args()
            self.close()
            return SlotCall(name, args, kwargs)

        if head.kind != "symbol":
            self.error("expected operator or predicate name")
        self.next()
        word = head.text.lower()

        if word in ("and", "or"):
            items = self.parse_args()
            self.close()
            return And(items) if word == "and" else Or(items)
        if word == "not":
            item = self.parse_expr()
            self.close()
            return Not(item)
        if word == "implies":
            lhs = self.parse_expr()
            rhs = self.parse_expr()
            self.close()
            return Implies(lhs, rhs)
        if word in ("forall", "exists", "foreach"):
            var = self.parse_typed_binder()
            body = self.parse_expr()
            self.close()
            return {"forall": Forall, "exists": Exists, "foreach": Foreach}[word](var, body)
        if word == "when":
            cond = self.parse_expr()
            body = self.parse_expr()
            self.close()
            return When(cond, body)
        if word == "assign":
            target = self.parse_expr()
            if not isinstance(target, PredicateCall) or not all(
                isinstance(a, (VariableRef, Constant)) for a in target.args
            ):
                raise ParseError("assign target must be a predicate over variables or constants", head.line, head.col)
            value = self.parse_expr()
            self.close()
            return Assign(target, value)

        if "::" in head.text:
            predicate, _, sugar = head.text.partition("::")
            if sugar.lower() not in SUGARS:
                raise ParseError(f"unknown syntax sugar {head.text}", head.line, head.col)
            args = self.parse_args()
            self.close()
            return SugarCall(predicate, sugar.lower(), args)

        args = self.parse_args()
        self.close()
        return PredicateCall(head.text, args)


def parse_domain(source):
    """
    Parse a PDSketch domain file into a DomainAST (no desugaring, no checks).

    Both `(define domain (domain NAME) ...)` and the PDDL-style
    `(define (domain NAME) ...)` headers are accepted.

    Raises:
        LexError | ParseError: First error found, with line and column.
    """
    tokens = tokenize(source)
    if not tokens:
        raise ParseError("empty domain file", 1, 1)
    return _Parser(tokens).parse_domain()


def parse_expression(source):
    """Parse one standalone expression (e.g. a goal)."""
    tokens = tokenize(source)
    if not tokens:
        raise ParseError("empty expression", 1, 1)
    parser = _Parser(tokens)
    expr = parser.parse_expr()
    if not parser.at_end():
        parser.error("trailing input after expression")
    return expr


# ------------------------------------------------------------------------------
# DESUGARING
# ------------------------------------------------------------------------------

def _returns_bool(signature, resolve):
    rtype = signature.kwarg("return_type")
    if rtype is None:
        return True
    return resolve(rtype).is_bool


class _Desugarer:
    """
    Rewrites one definition body.

    `signature_of(name)` returns a PredicateDef (or None); `resolve(vt)`
    resolves named value types.
    """

    def __init__(self, signature_of, resolve, used_names=()):
        self.signature_of = signature_of
        self.resolve = resolve
        self.used = set(used_names)

    def fresh(self):
        candidate, i = "?x", 0
        while candidate in self.used:
            i += 1
            candidate = f"?x{i}"
        self.used.add(candidate)
        return candidate

    def signature(self, name, context):
        sig = self.signature_of(name)
        if sig is None:
            raise DesugarError(f"unknown predicate {name!r} in {context}")
        return sig

    def expr(self, e):
        if isinstance(e, SugarCall):
            return self.sugar(e, effect=False)
        if isinstance(e, PredicateCall) and any(isinstance(a, Wildcard) for a in e.args):
            return self.wildcard(e)
        kids = e.children()
        if not kids:
            return e
        return e.with_children(tuple(self.expr(k) for k in kids))

    def effect(self, e):
        if isinstance(e, And):
            return And(tuple(self.effect(i) for i in e.items))
        if isinstance(e, Foreach):
            return replace(e, body=self.effect(e.body))
        if isinstance(e, When):
            return When(self.expr(e.condition), self.effect(e.body))
        if isinstance(e, Assign):
            return Assign(e.target, self.expr(e.value))
        if isinstance(e, SugarCall):
            return self.sugar(e, effect=True)
        if isinstance(e, PredicateCall):
            sig = self.signature(e.name, "effect")
            if _returns_bool(sig, self.resolve):
                return Assign(e, TRUE)
            return e
        if isinstance(e, Not) and isinstance(e.item, PredicateCall):
            sig = self.signature(e.item.name, "effect")
            if _returns_bool(sig, self.resolve):
                return Assign(e.item, FALSE)
            return e
        return self.expr(e)

    def sugar(self, e, effect):
        context = f"{e.predicate}::{e.sugar}"
        sig = self.signature(e.predicate, context)
        n = len(sig.parameters)
        extra = {"assign": 1, "cond-assign": 2, "cond-select": 1}[e.sugar]
        if len(e.args) != n + extra:
            raise DesugarError(f"{context} expects {n + extra} arguments, got {len(e.args)}")
        target = PredicateCall(e.predicate, tuple(e.args[:n]))
        rest = [self.expr(a) for a in e.args[n:]]
        if e.sugar == "assign":
            return Assign(target, rest[0])
        if e.sugar == "cond-assign":
            return When(rest[0], Assign(target, rest[1]))
        body = target
        if effect and _returns_bool(sig, self.resolve):
            body = Assign(target, TRUE)
        return When(rest[0], body)

    def wildcard(self, e):
        positions = [i for i, a in enumerate(e.args) if isinstance(a, Wildcard)]
        if len(positions) > 1:
            raise DesugarError(f"only one '??' argument is allowed in ({e.name} ...)")
        sig = self.signature(e.name, f"({e.name} ??)")
        i = positions[0]
        if i >= len(sig.parameters):
            raise DesugarError(f"'??' argument out of range for predicate {e.name!r}")
        var = self.fresh()
        args = tuple(VariableRef(var) if j == i else self.expr(a) for j, a in enumerate(e.args))
        return Foreach(TypedVariable(var, sig.parameters[i].type), PredicateCall(e.name, args))


def _variable_names(*exprs):
    names = set()
    for expr in exprs:
        for node in walk(expr):
            if isinstance(node, VariableRef):
                names.add(node.name)
            elif isinstance(node, (Forall, Exists, Foreach)):
                names.add(node.variable.name)
    return names


def resolve_type(ast, vtype):
    """Resolve a named value type against the type definitions of `ast`."""
    seen = set()
    while vtype is not None and vtype.kind == "named" and vtype.name not in seen:
        seen.add(vtype.name)
        for names, base in ast.type_defs:
            if vtype.name in names:
                if base.kind == "named":
                    vtype = base
                else:
                    vtype = replace(base, name=vtype.name)
                break
        else:
            if vtype.name in PRIM_TYPES:
                return ValueType(vtype.name)
            return vtype
    return vtype


def desugar_expression(expr, signature_of, resolve=None, effect=False, used_names=()):
    """
    Desugar a single expression.

    Args:
        expr (Expr): Parsed expression.
        signature_of (callable): name -> PredicateDef or None.
        resolve (callable, optional): ValueType -> resolved ValueType.
        effect (bool): Interpret `expr` as an action effect.
        used_names (iterable[str]): Variable names fresh variables must avoid.
    """
    resolve = resolve or (lambda t: t)
    d = _Desugarer(signature_of, resolve, set(used_names) | _variable_names(expr))
    return d.effect(expr) if effect else d.expr(expr)


def desugar(ast):
    """
    Rewrite every sugar form of a parsed domain into core syntax.

    Idempotent: desugaring an already desugared AST returns an equal AST.

    Raises:
        DesugarError: Sugar applied to an unknown predicate, or malformed sugar.
    """
    def resolve(vt):
        return resolve_type(ast, vt)

    derived = []
    for d in ast.derived_defs:
        params = {p.name for p in d.signature.parameters}
        body = desugar_expression(d.body, ast.signature_of, resolve, used_names=params)
        derived.append(replace(d, body=body))

    actions = []
    for a in ast.action_defs:
        used = {p.name for p in a.parameters} | _variable_names(a.precondition, a.effect)
        pre = desugar_expression(a.precondition, ast.signature_of, resolve, used_names=used)
        eff = desugar_expression(a.effect, ast.signature_of, resolve, effect=True, used_names=used)
        actions.append(replace(a, precondition=pre, effect=eff))

    return replace(ast, derived_defs=tuple(derived), action_defs=tuple(actions))


def load_domain_ast(source):
    """Parse and desugar in one step."""
    return desugar(parse_domain(source))
