from pathlib import Path

from django.test import SimpleTestCase

from pdsketch_app.exceptions import DesugarError, GoalParseError, LexError, NonBooleanGoal, ParseError, ValidationError
from pdsketch_app.expressions import (
    FALSE,
    TRUE,
    And,
    Assign,
    Constant,
    Foreach,
    PredicateCall,
    SlotCall,
    VariableRef,
    When,
    print_domain,
)
from pdsketch_app.pds_parser import desugar, load_domain_ast, parse_domain, parse_expression, tokenize
from pdsketch_app.pds_validation import load_domain, load_domain_file, validate, validate_goal

DOMAINS = Path(__file__).resolve().parent.parent / "domains"

HEADER = """
(define (domain toy)
  (:types
    robot item - object
    pose - vector[float32, 2]
  )
  (:predicates
    (robot-pose [return_type=pose] ?r - robot)
    (item-pose [return_type=pose] ?o - item)
    (p ?o - item)
    (q ?o - item)
  )
"""

OP1_OP2 = HEADER + """
  (:action op1
   :parameters (?o - item)
   :precondition (p ?o)
   :effect (q::assign ?o (??f (q ?o))))
  (:action op2
   :parameters (?o - item)
   :precondition (and )
   :effect (when (p ?o) (q::assign ?o (??f (q ?o)))))
)
"""

SET_PQR = """
(define (domain pqr)
  (:types robot - object)
  (:predicates (p ?r - robot) (q ?r - robot) (r ?r - robot) (t ?r - robot))
  (:action set-pqr
   :parameters (?r - robot)
   :precondition (and )
   :effect (and
     (assign (p ?r) (??f))
     (assign (q ?r) (??f))
     (assign (r ?r) (??f))
     (not (t ?r))))
)
"""

MYSTERIOUS = """
(define (domain mystery)
  (:types
    robot item - object
    pose - vector[float32, 2]
    direction - vector[float32, 4]
    feature - vector[float32, 8]
  )
  (:predicates
    (robot-pose [return_type=pose] ?r - robot)
    (robot-direction [return_type=direction] ?r - robot)
    (item-pose [return_type=pose] ?o - item)
    (item-feature [return_type=feature] ?o - item)
  )
  (:action mysterious-action
   :parameter (?r - robot)
   :precondition (and )
   :effect (and
     (robot-pose::assign ?r (??f1
       (robot-pose ?r) (robot-direction ?r) (item-pose ??) (item-feature ??)))
     (robot-direction::assign ?r (??f2
       (robot-pose ?r) (robot-direction ?r) (item-pose ??) (item-feature ??)))
     (foreach (?o - item) (item-pose::assign ?o (??f3
       (robot-pose ?r) (robot-direction ?r) (item-pose ??) (item-feature ??))))
     (foreach (?o - item) (item-feature::assign ?o (??f4
       (robot-pose ?r) (robot-direction ?r) (item-pose ??) (item-feature ??))))))
)
"""


class TokenizerTests(SimpleTestCase):
    def test_offsets_cover_token_text(self):
        source = "(define (domain d) ; comment\n  (:types pose - vector[float32, 2]))"
        for tok in tokenize(source):
            self.assertEqual(source[tok.start:tok.end], tok.text)
        self.assertNotIn("comment", [t.text for t in tokenize(source)])

    def test_commas_are_whitespace(self):
        kinds = [t.kind for t in tokenize("vector[float32, 2]")]
        self.assertEqual(kinds, ["symbol", "lbracket", "symbol", "int", "rbracket"])

    def test_slot_and_variable_tokens(self):
        toks = tokenize("(??f ?o ??)")
        self.assertEqual([t.kind for t in toks], ["lparen", "slot", "variable", "slot", "rparen"])

    def test_illegal_character_reports_position(self):
        with self.assertRaises(LexError) as ctx:
            tokenize("(and\n  $)")
        self.assertEqual((ctx.exception.line, ctx.exception.col), (2, 3))


class ParserTests(SimpleTestCase):
    def test_unclosed_parenthesis_points_at_opener(self):
        with self.assertRaises(ParseError) as ctx:
            parse_expression("(and (p ?o)\n (q ?o)")
        self.assertEqual(ctx.exception.line, 1)
        self.assertIn("unclosed", str(ctx.exception))

    def test_missing_domain_name(self):
        with self.assertRaises(ParseError):
            parse_domain("(define domain (:types a - object))")

    def test_unknown_sugar(self):
        with self.assertRaises(ParseError):
            parse_expression("(p::frobnicate ?o)")

    def test_both_headers_are_accepted(self):
        a = parse_domain("(define (domain d) (:types a - object))")
        b = parse_domain("(define domain (domain d) (:types a - object))")
        self.assertEqual(a, b)

    def test_keywords_are_case_insensitive(self):
        self.assertEqual(parse_expression("(AND (p ?o))"), parse_expression("(and (p ?o))"))

    def test_empty_and(self):
        self.assertEqual(parse_expression("(and )"), And(()))

    def test_slot_call_with_kwargs(self):
        e = parse_expression("(??f [return_type=pose] (item-pose ?o))")
        self.assertIsInstance(e, SlotCall)
        self.assertEqual(e.name, "f")
        self.assertEqual(e.kwarg("return_type").name, "pose")


class DesugarTests(SimpleTestCase):
    def desugar_effect(self, text):
        ast = desugar(parse_domain(HEADER + f"""
          (:action a :parameters (?r - robot ?o - item) :precondition (and ) :effect {text}))"""))
        return ast.action_defs[0].effect

    def test_assign_sugar_matches_core_form(self):
        sugared = self.desugar_effect("(robot-pose::assign ?r (??f (robot-pose ?r)))")
        core = self.desugar_effect("(assign (robot-pose ?r) (??f (robot-pose ?r)))")
        self.assertEqual(sugared, core)

    def test_cond_assign_becomes_when(self):
        e = self.desugar_effect("(item-pose::cond-assign ?o (p ?o) (??f))")
        self.assertIsInstance(e, When)
        self.assertEqual(e.condition, PredicateCall("p", (VariableRef("?o"),)))
        self.assertIsInstance(e.body, Assign)

    def test_boolean_effect_literals(self):
        e = self.desugar_effect("(and (p ?o) (not (q ?o)))")
        self.assertEqual(e.items[0], Assign(PredicateCall("p", (VariableRef("?o"),)), TRUE))
        self.assertEqual(e.items[1], Assign(PredicateCall("q", (VariableRef("?o"),)), FALSE))

    def test_wildcard_becomes_foreach_with_fresh_variable(self):
        e = self.desugar_effect("(robot-pose::assign ?r (??f (item-pose ??)))")
        arg = e.value.args[0]
        self.assertIsInstance(arg, Foreach)
        self.assertEqual(arg.variable.type, "item")
        self.assertNotIn(arg.variable.name, ("?r", "?o"))
        self.assertEqual(arg.body, PredicateCall("item-pose", (VariableRef(arg.variable.name),)))

    def test_sugar_on_unknown_predicate(self):
        with self.assertRaises(DesugarError):
            self.desugar_effect("(nope::assign ?o (??f))")

    def test_sugar_arity(self):
        with self.assertRaises(DesugarError):
            self.desugar_effect("(item-pose::assign ?o)")

    def test_desugar_is_idempotent(self):
        ast = load_domain_ast((DOMAINS / "babyai_listings.pds").read_text())
        self.assertEqual(desugar(ast), ast)

    def test_printed_domain_parses_back(self):
        ast = load_domain_ast((DOMAINS / "babyai_listings.pds").read_text())
        self.assertEqual(parse_domain(print_domain(ast)), ast)


class ListingCorpusTests(SimpleTestCase):
    def test_listing_domain_validates(self):
        domain = load_domain_file(DOMAINS / "babyai_listings.pds")
        self.assertEqual(domain.name, "babyai-listings")
        for name in ("derived::is-red::f", "derived::robot-facing::f", "action::lturn::f",
                     "action::forward::f", "action::forward-detail::f", "action::pickup::f"):
            self.assertIn(name, domain.slots)

    def test_untyped_parameter_is_inferred(self):
        domain = load_domain_file(DOMAINS / "babyai_listings.pds")
        self.assertEqual(domain.predicates["can-pickup"].arg_types, ("item",))

    def test_forward_slot_takes_a_conditional_set(self):
        sig = load_domain_file(DOMAINS / "babyai_listings.pds").slots["action::forward::f"]
        self.assertEqual(len(sig.inputs), 3)
        self.assertTrue(sig.inputs[2].variadic)
        self.assertTrue(sig.inputs[2].conditional)
        self.assertEqual(
            sig.describe(), "(vector[float32, 2], vector[int64, 1], {vector[float32, 64]}) -> vector[float32, 2]"
        )

    def test_bundled_domains_validate(self):
        for name in ("babyai_abs.pds", "babyai_base.pds"):
            with self.subTest(name=name):
                self.assertTrue(load_domain_file(DOMAINS / name).actions)

    def test_precondition_versus_conditional_effect(self):
        domain = load_domain(OP1_OP2)
        self.assertEqual(domain.actions["op1"].precondition, PredicateCall("p", (VariableRef("?o"),)))
        self.assertEqual(domain.actions["op2"].precondition, And(()))
        self.assertIsInstance(domain.actions["op2"].effect, When)

    def test_shared_slot_within_one_action(self):
        domain = load_domain(SET_PQR)
        self.assertEqual(domain.slots_of("action::set-pqr")[0].name, "action::set-pqr::f")
        self.assertEqual(len(domain.slots_of("action::set-pqr")), 1)
        self.assertEqual(domain.actions["set-pqr"].effect.items[3].value, Constant(False))

    def test_mysterious_action(self):
        domain = load_domain(MYSTERIOUS)
        self.assertEqual(len(domain.slots), 4)
        sig = domain.slots["action::mysterious-action::f3"]
        self.assertEqual([i.variadic for i in sig.inputs], [False, False, True, True])
        self.assertEqual(sig.output_dim, 2)


class ValidationTests(SimpleTestCase):
    def validation_messages(self, body):
        with self.assertRaises(ValidationError) as ctx:
            load_domain(HEADER + body + ")")
        return ctx.exception.messages

    def test_every_violation_is_reported(self):
        messages = self.validation_messages("""
          (:derived (bad1 ?o - item) (nope ?o))
          (:derived (bad2 ?o - item) (p ?o ?o))
        """)
        self.assertEqual(len(messages), 2)
        self.assertIn("undeclared predicate nope", messages[0])
        self.assertIn("takes 1 arguments", messages[1])
        self.assertTrue(all("(line " in m for m in messages))

    def test_assign_to_derived(self):
        messages = self.validation_messages("""
          (:derived (d ?o - item) (p ?o))
          (:action a :parameters (?o - item) :precondition (and ) :effect (assign (d ?o) true))
        """)
        self.assertIn("cannot assign to derived predicate d", messages[0])

    def test_type_mismatch_in_assign(self):
        messages = self.validation_messages("""
          (:action a :parameters (?o - item) :precondition (and ) :effect (assign (item-pose ?o) (p ?o)))
        """)
        self.assertIn("cannot assign bool to item-pose", messages[0])

    def test_argument_type_error(self):
        messages = self.validation_messages("""
          (:derived (d ?r - robot) (p ?r))
        """)
        self.assertIn("must be of type item", messages[0])

    def test_slot_without_output_type(self):
        messages = self.validation_messages("""
          (:derived (d [return_type=pose] ?o - item) (??f (??g (item-pose ?o))))
        """)
        self.assertIn("cannot infer the output type of slot ??g", messages[0])

    def test_value_typed_parameter_rejected(self):
        messages = self.validation_messages("(:derived (d ?v - pose) (and ))")
        self.assertIn("value-typed parameters are not supported", messages[0])


class GoalTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.domain = load_domain(OP1_OP2)

    def test_goal_checks(self):
        goal = validate_goal(self.domain, "(exists (?o - item) (and (p ?o) (q ?o)))")
        self.assertEqual(goal, parse_expression("(exists (?o - item) (and (p ?o) (q ?o)))"))

    def test_goal_syntax_error(self):
        with self.assertRaises(GoalParseError):
            validate_goal(self.domain, "(exists (?o - item)")

    def test_goal_unknown_predicate(self):
        with self.assertRaises(GoalParseError):
            validate_goal(self.domain, "(is-red o1)")

    def test_goal_with_slot(self):
        with self.assertRaises(GoalParseError):
            validate_goal(self.domain, "(??f (p o1))")

    def test_non_boolean_goal(self):
        with self.assertRaises(NonBooleanGoal):
            validate_goal(self.domain, "(item-pose o1)")

    def test_validate_accepts_desugared_ast(self):
        self.assertEqual(validate(load_domain_ast(OP1_OP2)).name, "toy")
