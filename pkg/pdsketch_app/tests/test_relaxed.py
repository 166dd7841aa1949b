import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from pdsketch_app.discretize import Codebook, FirstOrderRule, ForallF, Lit
from pdsketch_app.domain_model import Universe
from pdsketch_app.exceptions import MissingRule, ParamIOError
from pdsketch_app.pds_validation import load_domain, load_domain_file, validate_goal
from pdsketch_app.relaxed import compile_ao, compile_opt, hff, load_json, rule_targets
from pdsketch_app.search import heuristic_for
from pdsketch_app.state_eval import make_state

from .helpers import lights_domain, lights_state

DOMAINS = Path(__file__).resolve().parent.parent / "domains"

# Each step needs the code produced by the previous one: set-p, then set-q, then set-r.
CHAIN = """
(define (domain chain)
  (:types
    item - object
    val - vector[float32, 1]
  )
  (:predicates
    (p [return_type=val] ?o - item)
    (q [return_type=val] ?o - item)
    (r [return_type=val] ?o - item)
  )
  (:action set-p
   :parameters (?o - item)
   :precondition (and )
   :effect (p::assign ?o (??f)))
  (:action set-q
   :parameters (?o - item)
   :precondition (and )
   :effect (q::assign ?o (??g (p ?o))))
  (:action set-r
   :parameters (?o - item)
   :precondition (and )
   :effect (r::assign ?o (??h (q ?o))))
)
"""

VARS = (("?o", "item"),)


def chain_rule(action, pred, value, body):
    return FirstOrderRule(f"action::{action}::0", pred, ("?o",), VARS, ((value, body),))


def chain_rules():
    return {
        "action::set-p::0": chain_rule("set-p", "p", 1, Lit("p", ("?o",), 0)),
        "action::set-q::0": chain_rule("set-q", "q", 2, Lit("p", ("?o",), 1)),
        "action::set-r::0": chain_rule("set-r", "r", 4, Lit("q", ("?o",), 2)),
    }


def chain_books():
    return {name: Codebook(name, np.arange(5.0).reshape(5, 1)) for name in ("p", "q", "r")}


def chain_props(p=0, q=0, r=0, objects=("o1", "o2")):
    return [(pred, (o,), value) for o in objects for pred, value in (("p", p), ("q", q), ("r", r))]


def all_r(code):
    return ForallF("?x", "item", Lit("r", ("?x",), code))


class ChainTests(SimpleTestCase):
    def setUp(self):
        self.domain = load_domain(CHAIN)
        self.universe = Universe([("o1", "item"), ("o2", "item")])

    def ao(self, rules=None, strict=False):
        return compile_ao(self.domain, chain_books(), chain_rules() if rules is None else rules, strict)

    def test_targets(self):
        self.assertEqual([t.key for t in rule_targets(self.domain)],
                         ["action::set-p::0", "action::set-q::0", "action::set-r::0"])

    def test_ao_counts_the_whole_chain(self):
        self.assertEqual(hff(self.ao(), chain_props(), all_r(4), self.universe), 6)

    def test_opt_skips_to_the_last_step(self):
        self.assertEqual(hff(compile_opt(self.domain), chain_props(), all_r(4), self.universe), 2)

    def test_goal_already_true(self):
        self.assertEqual(hff(self.ao(), chain_props(r=4), all_r(4), self.universe), 0)

    def test_partial_progress(self):
        self.assertEqual(hff(self.ao(), chain_props(p=1), all_r(4), self.universe), 4)

    def test_unreachable_code(self):
        self.assertEqual(hff(self.ao(), chain_props(), all_r(3), self.universe), math.inf)

    def test_missing_rule_falls_back_to_opt(self):
        rules = chain_rules()
        del rules["action::set-q::0"]
        relaxed = self.ao(rules)
        self.assertEqual(relaxed.fallbacks, ["action::set-q::0"])
        self.assertEqual(hff(relaxed, chain_props(), all_r(4), self.universe), 4)
        with self.assertRaises(MissingRule):
            self.ao(rules, strict=True)

    def test_text_forms(self):
        opt = compile_opt(self.domain).to_text()
        self.assertTrue(opt.startswith("(define (relaxed-domain chain)\n  (:mode opt)\n"))
        self.assertIn("(r-opt ?o)", opt)
        ao = self.ao().to_text()
        self.assertIn("(:codebooks (p 5) (q 5) (r 5))", ao)
        self.assertIn("((r ?o - item) <- (SAS\n", ao)
        self.assertIn("4 <- (q@2 ?o)", ao)
        self.assertEqual(ao.count("(:action"), 3)

    def test_json_companion(self):
        relaxed = self.ao()
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "chain.json"
            relaxed.dump_json(path)
            again = load_json(path, self.domain)
            self.assertEqual(again.mode, "ao")
            self.assertEqual(again.rules, relaxed.rules)
            self.assertEqual(hff(again, chain_props(), all_r(4), self.universe), 6)

            data = json.loads(path.read_text())
            data["format"] = 2
            path.write_text(json.dumps(data))
            with self.assertRaises(ParamIOError):
                load_json(path, self.domain)
            with self.assertRaises(ParamIOError):
                load_json(Path(tmp) / "absent.json", self.domain)

    def test_json_for_another_domain(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "chain.json"
            self.ao().dump_json(path)
            with self.assertRaises(ParamIOError):
                load_json(path, lights_domain())


class OptimisticTestNodes(SimpleTestCase):
    def setUp(self):
        self.domain = lights_domain()
        self.relaxed = compile_opt(self.domain)

    def h(self, state, goal):
        return heuristic_for(state, self.relaxed, validate_goal(self.domain, goal))

    def test_slot_test_holds_after_a_change(self):
        state = lights_state(self.domain, level=(0.2, 0.9))
        self.assertEqual(self.h(state, "(bright a)"), 1)
        self.assertEqual(self.h(state, "(bright b)"), 0)

    def test_one_action_serves_two_goals(self):
        state = lights_state(self.domain, on=(0.0, 0.0))
        self.assertEqual(self.h(state, "(and (on a) (on b))"), 1)

    def test_unreachable_symbolic_goal(self):
        state = lights_state(self.domain, broken=(1.0, 0.0))
        self.assertEqual(self.h(state, "(not (broken a))"), math.inf)

    def test_printed_tests(self):
        text = self.relaxed.to_text()
        self.assertIn("(:axiom (bright ?o - item) <- (opt (??f (level ?o))))", text)
        self.assertIn("(level-opt ?o)", text)


class BundledDomainTests(SimpleTestCase):
    def test_opt_compiles_every_bundled_domain(self):
        for name in ("babyai_listings.pds", "babyai_abs.pds", "babyai_base.pds"):
            with self.subTest(name=name):
                relaxed = compile_opt(load_domain_file(DOMAINS / name))
                self.assertEqual(relaxed.mode, "opt")
                self.assertTrue(relaxed.to_text().endswith(")\n"))


# via-abc (three preconditions, one new) and via-ce (two, both new) reach g at the same layer.
SUPPORTERS = """
(define (domain supporters)
  (:types item - object)
  (:predicates (a ?o - item) (b ?o - item) (c ?o - item) (e ?o - item) (g ?o - item))
  (:action make-c :parameters (?o - item) :precondition (and ) :effect (c ?o))
  (:action make-e :parameters (?o - item) :precondition (and ) :effect (e ?o))
  (:action via-abc
   :parameters (?o - item)
   :precondition (and (a ?o) (b ?o) (c ?o))
   :effect (g ?o))
  (:action via-ce
   :parameters (?o - item)
   :precondition (and (c ?o) (e ?o))
   :effect (g ?o))
)
"""


class SupporterChoiceTests(SimpleTestCase):
    def test_fewest_new_preconditions_wins(self):
        domain = load_domain(SUPPORTERS)
        raw = {pred: {("o",): value} for pred, value in
               (("a", 1.0), ("b", 1.0), ("c", 0.0), ("e", 0.0), ("g", 0.0))}
        state = make_state(domain, Universe([("o", "item")]), raw)
        self.assertEqual(heuristic_for(state, compile_opt(domain), validate_goal(domain, "(g o)")), 2)
