import numpy as np
from django.test import SimpleTestCase

from pdsketch_app.domain_model import GroundedAction, Universe, find_action
from pdsketch_app.exceptions import AssignToDerived, EffectConflict, NonBooleanGoal, SchemaError, UnknownObjectConstant
from pdsketch_app.expressions import TRUE, Assign, Constant, PredicateCall
from pdsketch_app.pds_parser import parse_expression
from pdsketch_app.state_eval import (
    applicable,
    apply_action,
    eval_expr,
    eval_goal,
    evaluate_derived,
    make_state,
    satisfied,
)

from .helpers import lights_domain, lights_state


class MakeStateTests(SimpleTestCase):
    def setUp(self):
        self.domain = lights_domain()

    def test_missing_entry(self):
        universe = Universe([("a", "item")])
        with self.assertRaises(SchemaError):
            make_state(self.domain, universe, {"on": {("a",): 1.0}, "broken": {}, "level": {("a",): [0.0]}})

    def test_wrong_vector_size(self):
        universe = Universe([("a", "item")])
        raw = {"on": {("a",): 1.0}, "broken": {("a",): 0.0}, "level": {("a",): [0.0, 1.0]}}
        with self.assertRaises(SchemaError):
            make_state(self.domain, universe, raw)

    def test_values(self):
        state = lights_state(self.domain)
        self.assertEqual(state.value("on", ("b",)).item(), 1.0)
        np.testing.assert_allclose(state.value("level", ("a",)).numpy(), [0.2])


class LogicTests(SimpleTestCase):
    def setUp(self):
        self.domain = lights_domain()
        self.state = lights_state(self.domain, on=(0.25, 0.75))

    def score(self, text):
        return eval_goal(self.domain, self.state, parse_expression(text)).item()

    def test_goedel_connectives(self):
        self.assertAlmostEqual(self.score("(and (on a) (on b))"), 0.25)
        self.assertAlmostEqual(self.score("(or (on a) (on b))"), 0.75)
        self.assertAlmostEqual(self.score("(not (on a))"), 0.75)
        self.assertAlmostEqual(self.score("(implies (on b) (on a))"), 0.25)

    def test_quantifiers(self):
        self.assertAlmostEqual(self.score("(forall (?o - item) (on ?o))"), 0.25)
        self.assertAlmostEqual(self.score("(exists (?o - item) (on ?o))"), 0.75)

    def test_empty_quantifiers(self):
        state = lights_state(self.domain, on=(), broken=(), level=(), names=())
        self.assertEqual(eval_goal(self.domain, state, parse_expression("(forall (?o - item) (on ?o))")).item(), 1.0)
        self.assertEqual(eval_goal(self.domain, state, parse_expression("(exists (?o - item) (on ?o))")).item(), 0.0)

    def test_derived_through_slot(self):
        self.assertEqual(self.score("(bright b)"), 1.0)
        self.assertEqual(self.score("(bright a)"), 0.0)
        derived = evaluate_derived(self.domain, self.state)
        self.assertEqual(sorted(derived["bright"]), [("a",), ("b",)])

    def test_satisfied_threshold(self):
        self.assertFalse(satisfied(eval_goal(self.domain, self.state, parse_expression("(on a)"))))
        self.assertTrue(satisfied(eval_goal(self.domain, self.state, parse_expression("(on b)"))))

    def test_foreach_is_not_a_goal(self):
        with self.assertRaises(NonBooleanGoal):
            eval_goal(self.domain, self.state, parse_expression("(foreach (?o - item) (on ?o))"))

    def test_unknown_object(self):
        with self.assertRaises(UnknownObjectConstant):
            eval_expr(self.domain, self.state, parse_expression("(on zz)"))


IDENTITIES = [
    ("(not (and (on a) (broken b)))", "(or (not (on a)) (not (broken b)))"),
    ("(not (or (on a) (broken c)))", "(and (not (on a)) (not (broken c)))"),
    ("(forall (?o - item) (on ?o))", "(and (on a) (on b) (on c))"),
    ("(exists (?o - item) (broken ?o))", "(or (broken a) (broken b) (broken c))"),
    ("(implies (on b) (broken a))", "(or (not (on b)) (broken a))"),
]


class GoedelIdentityTests(SimpleTestCase):
    """Seeded random states; 2,000 states x 5 identities."""

    def test_identities_hold_exactly(self):
        domain = lights_domain()
        pairs = [(parse_expression(lhs), parse_expression(rhs)) for lhs, rhs in IDENTITIES]
        rng = np.random.default_rng(0)
        for _ in range(2000):
            on, broken = rng.random(3), rng.random(3)
            state = lights_state(domain, on=tuple(on), broken=tuple(broken), level=(0.0, 0.0, 0.0),
                                 names=("a", "b", "c"))
            for lhs, rhs in pairs:
                self.assertEqual(eval_goal(domain, state, lhs).item(), eval_goal(domain, state, rhs).item())

    def test_implies_is_max_of_complement(self):
        domain = lights_domain()
        goal = parse_expression("(implies (on a) (on b))")
        rng = np.random.default_rng(1)
        for _ in range(200):
            on = tuple(rng.random(2))
            state = lights_state(domain, on=on)
            p, q = state.value("on", ("a",)).item(), state.value("on", ("b",)).item()
            self.assertAlmostEqual(eval_goal(domain, state, goal).item(), max(1.0 - p, q), places=6)


class TransitionTests(SimpleTestCase):
    def setUp(self):
        self.domain = lights_domain()

    def act(self, state, name, *args):
        return apply_action(self.domain, state, find_action(self.domain, state.universe, name, list(args)))

    def test_precondition(self):
        state = lights_state(self.domain, broken=(1.0, 0.0))
        self.assertFalse(applicable(self.domain, state, find_action(self.domain, state.universe, "switch", ["a"])))
        self.assertTrue(applicable(self.domain, state, find_action(self.domain, state.universe, "switch", ["b"])))

    def test_unconditional_effects_read_the_pre_state(self):
        state = lights_state(self.domain)
        nxt = self.act(state, "switch", "a")
        self.assertEqual(nxt.value("on", ("a",)).item(), 1.0)
        np.testing.assert_allclose(nxt.value("level", ("a",)).numpy(), [1.2])
        np.testing.assert_allclose(state.value("level", ("a",)).numpy(), [0.2])
        self.assertIs(nxt.tables["broken"], state.tables["broken"])

    def test_conditional_set_false(self):
        state = lights_state(self.domain, on=(0.9, 1.0), broken=(0.3, 0.0))
        nxt = self.act(state, "fail", "a")
        self.assertAlmostEqual(nxt.value("on", ("a",)).item(), 0.7)

    def test_conditional_set_true(self):
        state = lights_state(self.domain, on=(0.1, 1.0), broken=(0.4, 0.0))
        nxt = self.act(state, "repair", "a")
        self.assertAlmostEqual(nxt.value("on", ("a",)).item(), 0.4)

    def test_conditional_value_blends(self):
        state = lights_state(self.domain, broken=(0.25, 0.0), level=(0.8, 0.9))
        nxt = self.act(state, "dim", "a")
        np.testing.assert_allclose(nxt.value("level", ("a",)).numpy(), [0.6])

    def test_conflicting_writes(self):
        state = lights_state(self.domain)
        with self.assertRaises(EffectConflict):
            self.act(state, "twice", "a", "a")

    def test_assign_to_derived(self):
        state = lights_state(self.domain)
        action = GroundedAction("hack", (), TRUE, Assign(PredicateCall("bright", (Constant("a"),)), TRUE))
        with self.assertRaises(AssignToDerived):
            apply_action(self.domain, state, action)
