from django.test import SimpleTestCase

from pdsketch_app.domain_model import Universe, bind_slot, check_complete, find_action, ground_actions
from pdsketch_app.exceptions import SchemaError, SignatureMismatch, UnboundSlot, UnknownSlot
from pdsketch_app.neural_slots import FunctionSlot

from .helpers import lights_domain


class SlotBindingTests(SimpleTestCase):
    def setUp(self):
        self.domain = lights_domain(bind=False)

    def test_slots_are_named_by_site(self):
        self.assertEqual(
            sorted(self.domain.slots), ["action::dim::h", "action::switch::g", "derived::bright::f"]
        )
        self.assertEqual(self.domain.slots["derived::bright::f"].describe(), "(vector[float32, 1]) -> bool")

    def test_check_complete_lists_unbound_slots(self):
        self.assertEqual(check_complete(self.domain), sorted(self.domain.slots))
        bind_slot(self.domain, "derived::bright::f", FunctionSlot(lambda v: 1.0, (1,), 1, is_bool=True))
        self.assertEqual(check_complete(self.domain), ["action::dim::h", "action::switch::g"])

    def test_unknown_slot(self):
        with self.assertRaises(UnknownSlot):
            bind_slot(self.domain, "derived::nope::f", FunctionSlot(lambda: 0.0, (), 1))

    def test_arity_mismatch(self):
        with self.assertRaises(SignatureMismatch):
            bind_slot(self.domain, "derived::bright::f", FunctionSlot(lambda: 0.0, (), 1))

    def test_dimension_mismatch(self):
        with self.assertRaises(SignatureMismatch):
            bind_slot(self.domain, "action::switch::g", FunctionSlot(lambda v: v, (3,), 1))

    def test_unbound_lookup(self):
        with self.assertRaises(UnboundSlot):
            self.domain.slot_impl("action::switch::g")
        with self.assertRaises(UnknownSlot):
            self.domain.slot_impl("action::switch::zz")

    def test_rebinding_replaces(self):
        first = FunctionSlot(lambda v: v, (1,), 1)
        second = FunctionSlot(lambda v: v * 2, (1,), 1)
        bind_slot(self.domain, "action::switch::g", first)
        bind_slot(self.domain, "action::switch::g", second)
        self.assertIs(self.domain.slot_impl("action::switch::g"), second)


class UniverseTests(SimpleTestCase):
    def test_of_type_is_sorted(self):
        universe = Universe([("b", "item"), ("a", "item"), ("r", "robot")])
        self.assertEqual(universe.of_type("item"), ["a", "b"])
        self.assertEqual(universe.of_type("object"), ["a", "b", "r"])
        self.assertEqual(universe.of_type("door"), [])

    def test_duplicate_names(self):
        with self.assertRaises(SchemaError):
            Universe([("a", "item"), ("a", "robot")])


class GroundingTests(SimpleTestCase):
    def setUp(self):
        self.domain = lights_domain()
        self.universe = Universe([("b", "item"), ("a", "item")])

    def test_grounding_order_and_distinct(self):
        labels = [g.label for g in ground_actions(self.domain, self.universe)]
        self.assertEqual(labels[:2], ["switch(a)", "switch(b)"])
        self.assertIn("both(a, b)", labels)
        self.assertNotIn("both(a, a)", labels)
        self.assertIn("twice(a, a)", labels)
        self.assertEqual(len(labels), 2 * 4 + 2 + 4)

    def test_find_action(self):
        action = find_action(self.domain, self.universe, "switch", ["a"])
        self.assertEqual(action.label, "switch(a)")
        self.assertEqual(str(action), "switch(a)")

    def test_find_action_errors(self):
        for name, args in (("nope", ["a"]), ("switch", ["a", "b"]), ("switch", ["z"])):
            with self.subTest(name=name, args=args):
                with self.assertRaises(SchemaError):
                    find_action(self.domain, self.universe, name, args)
