import numpy as np
from django.test import SimpleTestCase

from pdsketch_app.discretize import (
    OPT,
    AndF,
    Codebook,
    DiscreteState,
    ExistsF,
    FirstOrderRule,
    ForallF,
    FormulaEvaluator,
    Lit,
    OrF,
    build_codebooks,
    fit_codebook,
    fit_value_codebook,
    formula_from_json,
    formula_to_json,
    negate,
    quantize_state,
)
from pdsketch_app.domain_model import Universe
from pdsketch_app.exceptions import EmptyInput, KTooLarge, MissingCodebook
from pdsketch_app.neural_slots import ArchConfig, instantiate
from pdsketch_app.trainer import parse_episode

from .helpers import lights_domain, lights_state
from .test_trainer import lights_record

UNIVERSE = Universe([("a", "item"), ("b", "item")])


class CodebookTests(SimpleTestCase):
    def test_two_clusters(self):
        x = [[0.0], [0.1], [0.2], [5.0], [5.1], [5.2]]
        book = fit_codebook(x, 2, seed=0, predicate="level")
        np.testing.assert_allclose(sorted(book.centroids[:, 0]), [0.1, 5.1], atol=1e-9)
        self.assertEqual((book.k, book.dim, book.kind), (2, 1, "kmeans"))
        self.assertTrue(all(a >= b - 1e-12 for a, b in zip(book.objective, book.objective[1:])))

    def test_fit_is_seeded(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(40, 2))
        a = fit_codebook(x, 4, seed=9)
        b = fit_codebook(x, 4, seed=9)
        np.testing.assert_array_equal(a.centroids, b.centroids)

    def test_bad_k(self):
        with self.assertRaises(KTooLarge):
            fit_codebook([[1.0], [1.0], [2.0]], 3)
        with self.assertRaises(KTooLarge):
            fit_codebook([[1.0]], 0)
        with self.assertRaises(EmptyInput):
            fit_codebook([], 1)

    def test_ties_go_to_the_lowest_index(self):
        book = Codebook("x", np.array([[0.0], [2.0]]))
        self.assertEqual(book.assign([1.0]), 0)
        self.assertEqual(list(book.assign_many([[1.9], [-4.0]])), [1, 0])

    def test_value_codebook(self):
        book = fit_value_codebook([[2.0], [0.0], [2.0]], "count")
        self.assertEqual(book.kind, "values")
        np.testing.assert_array_equal(book.centroids, [[0.0], [2.0]])

    def test_json(self):
        book = Codebook("level", np.array([[0.5, 1.0], [2.0, 3.0]]))
        again = Codebook.from_json("level", book.to_json())
        np.testing.assert_array_equal(again.centroids, book.centroids)
        self.assertEqual(again.kind, "kmeans")


class QuantizeTests(SimpleTestCase):
    def setUp(self):
        self.domain = lights_domain()
        self.books = {"level": Codebook("level", np.array([[0.0], [1.0]]))}

    def test_quantize_state(self):
        state = lights_state(self.domain, on=(0.3, 0.8), level=(0.2, 0.9))
        discrete = quantize_state(self.domain, state, self.books)
        self.assertEqual(discrete.value_of("on", ("a",)), False)
        self.assertEqual(discrete.value_of("on", ("b",)), True)
        self.assertEqual(discrete.value_of("level", ("a",)), 0)
        self.assertEqual(discrete.value_of("level", ("b",)), 1)
        self.assertEqual(discrete.value_of("bright", ("b",)), True)
        self.assertEqual(len(discrete), 8)

    def test_derived_can_be_left_out(self):
        state = lights_state(self.domain)
        discrete = quantize_state(self.domain, state, self.books, include_derived=False)
        self.assertEqual(discrete.values_of("bright", ("a",)), ())

    def test_missing_codebook(self):
        with self.assertRaises(MissingCodebook):
            quantize_state(self.domain, lights_state(self.domain), {})

    def test_equal_states_hash_alike(self):
        a = quantize_state(self.domain, lights_state(self.domain, level=(0.1, 0.9)), self.books)
        b = quantize_state(self.domain, lights_state(self.domain, level=(0.3, 0.7)), self.books)
        self.assertEqual(a, b)
        self.assertEqual(len({a, b}), 1)


class BuildCodebookTests(SimpleTestCase):
    def test_one_codebook_per_latent_predicate(self):
        domain = lights_domain(bind=False)
        params = instantiate(domain, ArchConfig(hidden=(8,), nonlinearity="tanh"), seed=0)
        episodes = [parse_episode(domain, lights_record(f"e{i}", s), i) for i, s in enumerate((0.1, 0.2, 0.3))]
        books = build_codebooks(domain, params, episodes, {"bins": 2, "finetune": False}, seed=0)
        self.assertEqual(sorted(books), ["level"])
        centers = sorted(books["level"].centroids[:, 0])
        self.assertLess(centers[0], 0.5)
        self.assertGreater(centers[1], 1.0)


class FormulaTests(SimpleTestCase):
    def state(self, *props):
        return FormulaEvaluator(DiscreteState(props), UNIVERSE)

    def test_literals(self):
        ev = self.state(("level", ("a",), 2), ("on", ("a",), True))
        self.assertTrue(ev.holds(Lit("level", ("?o",), 2), {"?o": "a"}))
        self.assertFalse(ev.holds(Lit("level", ("?o",), 1), {"?o": "a"}))
        self.assertTrue(ev.holds(Lit("level", ("a",), 1, negated=True)))
        self.assertTrue(ev.holds(Lit("on", ("a",))))
        self.assertFalse(ev.holds(Lit("on", ("a",), 1)))

    def test_optimistic_value_satisfies_everything(self):
        ev = self.state(("level", ("a",), OPT))
        self.assertTrue(ev.holds(Lit("level", ("a",), 3)))
        self.assertTrue(ev.holds(Lit("level", ("a",), 3, negated=True)))

    def test_quantifiers(self):
        ev = self.state(("on", ("a",), True), ("on", ("b",), False))
        body = Lit("on", ("?x",))
        self.assertTrue(ev.holds(ExistsF("?x", "item", body)))
        self.assertFalse(ev.holds(ForallF("?x", "item", body)))
        self.assertTrue(ev.holds(AndF(())))
        self.assertFalse(ev.holds(OrF(())))

    def test_negation_normal_form(self):
        f = ExistsF("?x", "item", AndF((Lit("on", ("?x",)), Lit("level", ("?x",), 1))))
        self.assertEqual(
            negate(f),
            ForallF("?x", "item", OrF((Lit("on", ("?x",), negated=True), Lit("level", ("?x",), 1, negated=True)))),
        )
        self.assertEqual(negate(negate(f)), f)

    def test_text_and_json(self):
        f = ExistsF("?x", "item", AndF((Lit("on", ("?x",)), Lit("level", ("?x",), 1, negated=True))))
        self.assertEqual(f.to_text(), "(exists (?x - item) (and (on ?x) (not (level@1 ?x))))")
        self.assertEqual(Lit("level", ("a",), OPT).to_text(), "(level-opt a)")
        self.assertEqual(formula_from_json(formula_to_json(f)), f)


class RuleTests(SimpleTestCase):
    def test_sas_rule(self):
        rule = FirstOrderRule(
            "action::switch::0", "level", ("?o",), (("?o", "item"),),
            ((1, Lit("on", ("?o",))), (0, Lit("on", ("?o",), negated=True))),
        )
        self.assertEqual(rule.to_text(), "((level ?o - item) <- (SAS\n  1 <- (on ?o)\n  0 <- (not (on ?o))))")
        ev = FormulaEvaluator(DiscreteState([("on", ("a",), False)]), UNIVERSE)
        self.assertEqual(rule.predict(ev, {"?o": "a"}), 0)
        self.assertEqual(FirstOrderRule.from_json(rule.to_json()), rule)

    def test_boolean_rule(self):
        rule = FirstOrderRule("derived::bright", "bright", ("?o",), (("?o", "item"),),
                              ((True, Lit("level", ("?o",), 1)),), is_bool=True)
        self.assertEqual(rule.to_text(), "(bright ?o - item) = (level@1 ?o)")
        ev = FormulaEvaluator(DiscreteState([("level", ("a",), 0)]), UNIVERSE)
        self.assertIs(rule.predict(ev, {"?o": "a"}), False)
        self.assertEqual(rule.body_for(False), OrF(()))
