from collections import Counter

import numpy as np
from django.test import SimpleTestCase

from pdsketch_app.discretize import AndF, DiscreteState, Lit, OrF, build_codebooks
from pdsketch_app.domain_model import Universe
from pdsketch_app.exceptions import Inseparable
from pdsketch_app.neural_slots import ArchConfig, instantiate
from pdsketch_app.relaxed import rule_targets
from pdsketch_app.rule_learning import (
    RuleSample,
    candidate_literals,
    collect_samples,
    extract_all_rules,
    extract_rules,
    foil,
    rule_accuracy,
    vocabulary,
)
from pdsketch_app.trainer import parse_episode

from .helpers import lights_domain
from .test_trainer import lights_record

UNIVERSE = Universe([("a", "item"), ("b", "item")])


def lights_props(level_a, level_b, on):
    props = []
    for name, level in (("a", level_a), ("b", level_b)):
        props += [("on", (name,), on), ("broken", (name,), False), ("level", (name,), level)]
    return DiscreteState(props)


def bright_samples():
    """bright holds exactly where level has code 1; `on` is noise."""
    first = lights_props(1, 0, True)
    second = lights_props(0, 1, False)
    return Counter({
        RuleSample(first, UNIVERSE, (("?o", "a"),), True): 3,
        RuleSample(first, UNIVERSE, (("?o", "b"),), False): 3,
        RuleSample(second, UNIVERSE, (("?o", "a"),), False): 2,
        RuleSample(second, UNIVERSE, (("?o", "b"),), True): 2,
    })


class FoilTests(SimpleTestCase):
    def test_single_literal(self):
        coverage = np.array([[1, 1, 1, 0], [1, 1, 0, 0], [0, 0, 0, 1]], dtype=bool)
        positive = np.array([True, True, False, False])
        body = foil(["loose", "exact", "wrong"], coverage, positive, np.ones(4))
        self.assertEqual(body, "exact")

    def test_disjunction(self):
        coverage = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [1, 1, 1, 1]], dtype=bool)
        positive = np.array([True, True, False, False])
        self.assertEqual(foil(["left", "right", "all"], coverage, positive, np.ones(4)), OrF(("left", "right")))

    def test_inseparable(self):
        with self.assertRaises(Inseparable):
            foil(["all"], np.array([[1, 1]], dtype=bool), np.array([True, False]), np.ones(2))

    def test_small_residual_is_tolerated(self):
        coverage = np.array([[1, 0, 0]], dtype=bool)
        body = foil(["most"], coverage, np.array([True, True, False]), np.array([99.0, 1.0, 10.0]))
        self.assertEqual(body, "most")

    def test_clause_length_cap(self):
        coverage = np.array([[1, 1, 0, 0], [1, 0, 1, 0]], dtype=bool)
        positive = np.array([True, False, False, False])
        self.assertEqual(foil(["x", "y"], coverage, positive, np.ones(4)), AndF(("x", "y")))
        with self.assertRaises(Inseparable):
            foil(["x", "y"], coverage, positive, np.ones(4), max_clause_length=1)


class ExtractTests(SimpleTestCase):
    def setUp(self):
        self.domain = lights_domain(bind=False)
        self.targets = {t.key: t for t in rule_targets(self.domain)}

    def test_rule_targets(self):
        self.assertEqual(list(self.targets), ["derived::bright", "action::switch::0", "action::dim::0"])
        bright = self.targets["derived::bright"]
        self.assertEqual((bright.kind, bright.variables, bright.is_bool), ("derived", (("?o", "item"),), True))
        self.assertEqual(self.targets["action::switch::0"].action, "switch")

    def test_vocabulary_excludes_the_head(self):
        self.assertEqual(vocabulary(self.domain, self.targets["derived::bright"]), {"on", "broken", "level"})

    def test_candidates_come_in_both_polarities(self):
        candidates = candidate_literals(self.domain, self.targets["derived::bright"], list(bright_samples()))
        self.assertIn(Lit("level", ("?o",), 1), candidates)
        self.assertIn(Lit("level", ("?o",), 1, negated=True), candidates)
        self.assertEqual(len(candidates) % 2, 0)

    def test_boolean_rule(self):
        samples = bright_samples()
        rule = extract_rules(self.domain, self.targets["derived::bright"], samples)
        self.assertEqual(rule.body_for(True), Lit("level", ("?o",), 1))
        self.assertEqual(rule.to_text(), "(bright ?o - item) = (level@1 ?o)")
        self.assertEqual(rule_accuracy(rule, samples), 1.0)

    def test_constant_label(self):
        samples = Counter({RuleSample(lights_props(0, 0, True), UNIVERSE, (("?o", "a"),), 1): 4})
        rule = extract_rules(self.domain, self.targets["action::dim::0"], samples)
        self.assertEqual(rule.cases, ((1, AndF(())),))

    def test_no_samples(self):
        rule = extract_rules(self.domain, self.targets["action::dim::0"], Counter())
        self.assertEqual(rule.cases, ())

    def test_inseparable_target_names_the_value(self):
        state = lights_props(0, 0, True)
        samples = Counter({
            RuleSample(state, UNIVERSE, (("?o", "a"),), True): 1,
            RuleSample(state, UNIVERSE, (("?o", "a"),), False): 1,
        })
        with self.assertRaisesMessage(Inseparable, "derived::bright = True"):
            extract_rules(self.domain, self.targets["derived::bright"], samples)


class TrainedModelTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.domain = lights_domain(bind=False)
        cls.params = instantiate(cls.domain, ArchConfig(hidden=(8,), nonlinearity="tanh"), seed=0)
        cls.episodes = [
            parse_episode(cls.domain, lights_record(f"e{i}", s), i) for i, s in enumerate((0.1, 0.2, 0.3))
        ]
        cls.books = build_codebooks(cls.domain, cls.params, cls.episodes, {"bins": 2, "finetune": False}, seed=0)

    def test_sample_counts(self):
        samples = collect_samples(self.domain, self.params, self.episodes, self.books)
        # 6 states x 2 objects
        self.assertEqual({k: sum(c.values()) for k, c in samples.items()},
                         {"derived::bright": 12, "action::switch::0": 12, "action::dim::0": 12})
        for key in ("action::switch::0", "action::dim::0"):
            self.assertTrue(all(s.label in (0, 1) for s in samples[key]))

    def test_every_target_gets_an_entry(self):
        rules = extract_all_rules(self.domain, self.params, self.episodes, self.books)
        self.assertEqual(sorted(rules), sorted(t.key for t in rule_targets(self.domain)))
        for rule in filter(None, rules.values()):
            self.assertTrue(rule.cases)
