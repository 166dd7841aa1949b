import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, override_settings

from pdsketch_app import autodiff as ad
from pdsketch_app.domain_model import check_complete
from pdsketch_app.exceptions import ConfigError, FormatVersionMismatch, MissingSlot, ShapeMismatch
from pdsketch_app.neural_slots import (
    ArchConfig,
    arch_for,
    arch_from_settings,
    instantiate,
    load,
    load_arch_file,
    load_into,
    save,
    save_arch,
)
from pdsketch_app.pds_validation import load_domain_file

from .helpers import lights_domain

DOMAINS = Path(__file__).resolve().parent.parent / "domains"
SMALL = ArchConfig(hidden=(8,), nonlinearity="tanh")


class TempDirMixin:
    def setUp(self):
        super().setUp()
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)


class InstantiateTests(SimpleTestCase):
    def test_binds_every_slot(self):
        domain = lights_domain(bind=False)
        store = instantiate(domain, SMALL, seed=1)
        self.assertEqual(check_complete(domain), [])
        self.assertEqual(sorted(store.modules), sorted(domain.slots))
        self.assertIsNotNone(store.encoder)

    def test_seeded_initialization_is_reproducible(self):
        a = instantiate(lights_domain(bind=False), SMALL, seed=3)
        b = instantiate(lights_domain(bind=False), SMALL, seed=3)
        c = instantiate(lights_domain(bind=False), SMALL, seed=4)
        for t in a:
            np.testing.assert_array_equal(t.values, b[t.name].values)
        self.assertFalse(all(np.array_equal(t.values, c[t.name].values) for t in a))

    def test_boolean_slot_is_a_probability(self):
        domain = lights_domain(bind=False)
        instantiate(domain, SMALL, seed=0)
        out = domain.slot_impl("derived::bright::f")([ad.constant([0.4])])
        self.assertEqual(out.shape, ())
        self.assertTrue(0.0 < out.item() < 1.0)

    def test_input_width_is_checked(self):
        domain = lights_domain(bind=False)
        instantiate(domain, SMALL, seed=0)
        with self.assertRaises(ShapeMismatch):
            domain.slot_impl("action::switch::g")([ad.constant([0.1, 0.2])])

    def test_vector_without_dimension(self):
        domain = load_domain_file(DOMAINS / "babyai_listings.pds")
        with self.assertRaises(ConfigError):
            instantiate(domain, SMALL, seed=0)
        instantiate(domain, ArchConfig(hidden=(4,), dims={"vector[float32]": 6}), seed=0)
        self.assertEqual(check_complete(domain), [])

    def test_gradients_through_a_slot(self):
        domain = lights_domain(bind=False)
        store = instantiate(domain, SMALL, seed=0)
        slot = domain.slot_impl("derived::bright::f")
        report = ad.grad_check(lambda: ad.bce(slot([ad.constant([0.3])]), 1.0), store)
        self.assertTrue(report.passed, report.errors)


class VariadicSlotTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.domain = load_domain_file(DOMAINS / "babyai_abs.pds")
        instantiate(cls.domain, SMALL, seed=0)
        cls.forward = cls.domain.slot_impl("action::forward::f")

    def args(self, items):
        return [ad.constant([1.0, 2.0]), ad.constant([0.0, 1.0, 0.0, 0.0]), items]

    def test_pooling_ignores_element_order(self):
        rng = np.random.default_rng(0)
        items = [(ad.constant(c), ad.constant(rng.normal(size=32))) for c in (0.9, 0.2, 0.5)]
        a = self.forward(self.args(items)).numpy()
        b = self.forward(self.args(list(reversed(items)))).numpy()
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_empty_set(self):
        out = self.forward(self.args([]))
        self.assertEqual(out.shape, (2,))

    def test_zero_condition_drops_an_element(self):
        rng = np.random.default_rng(1)
        kept = (ad.constant(1.0), ad.constant(rng.normal(size=32)))
        dropped = (ad.constant(0.0), ad.constant(rng.normal(size=32)))
        np.testing.assert_allclose(
            self.forward(self.args([kept])).numpy(), self.forward(self.args([kept, dropped])).numpy(), atol=1e-12
        )


class PersistenceTests(TempDirMixin, SimpleTestCase):
    def test_save_and_load_into(self):
        domain = lights_domain(bind=False)
        store = instantiate(domain, SMALL, seed=5)
        path = self.tmp / "lights.params"
        save(store, path)

        fresh = lights_domain(bind=False)
        loaded = load_into(fresh, path, SMALL)
        for t in store:
            np.testing.assert_array_equal(loaded[t.name].values, t.values)
        x = [ad.constant([0.7])]
        self.assertEqual(
            fresh.slot_impl("derived::bright::f")(x).item(), domain.slot_impl("derived::bright::f")(x).item()
        )

    def test_bad_magic(self):
        path = self.tmp / "junk.params"
        path.write_bytes(b"NOPE" + bytes(8))
        with self.assertRaises(FormatVersionMismatch):
            load(path)

    def test_truncated_file(self):
        store = instantiate(lights_domain(bind=False), SMALL, seed=0)
        path = self.tmp / "cut.params"
        save(store, path)
        path.write_bytes(path.read_bytes()[:-3])
        with self.assertRaises(FormatVersionMismatch):
            load(path)

    def test_unknown_version(self):
        store = instantiate(lights_domain(bind=False), SMALL, seed=0)
        path = self.tmp / "v9.params"
        save(store, path)
        data = bytearray(path.read_bytes())
        data[4] = 9
        path.write_bytes(bytes(data))
        with self.assertRaises(FormatVersionMismatch):
            load(path)

    def test_mismatched_domain(self):
        path = self.tmp / "lights.params"
        save(instantiate(lights_domain(bind=False), SMALL, seed=0), path)
        other = load_domain_file(DOMAINS / "babyai_abs.pds")
        with self.assertRaises(MissingSlot):
            load_into(other, path, SMALL)


class ArchConfigTests(TempDirMixin, SimpleTestCase):
    def test_key_value_file(self):
        path = self.tmp / "arch.txt"
        path.write_text(
            "# widths\nhidden = 16, 16\nnonlinearity = tanh\nderived::is-* = 4\ndim.image = 11\n"
        )
        arch = load_arch_file(path, base=ArchConfig())
        self.assertEqual(arch.hidden, (16, 16))
        self.assertEqual(arch.nonlinearity, "tanh")
        self.assertEqual(arch.hidden_for("derived::is-red::f"), (4,))
        self.assertEqual(arch.hidden_for("action::forward::f"), (16, 16))
        self.assertEqual(arch.dims, {"image": 11})

    def test_malformed_file(self):
        path = self.tmp / "arch.txt"
        for text in ("hidden 16\n", "hidden = a, b\n", "nonlinearity = swish\n"):
            with self.subTest(text=text):
                path.write_text(text)
                with self.assertRaises(ConfigError):
                    load_arch_file(path, base=ArchConfig())

    @override_settings(PDSKETCH={"ARCH": {"hidden": [12], "nonlinearity": "tanh"}})
    def test_settings_layer(self):
        arch = arch_from_settings({"encoder": "mlp"})
        self.assertEqual((arch.hidden, arch.nonlinearity, arch.encoder), ((12,), "tanh", "mlp"))

    def test_companion_json_is_preferred_to_settings(self):
        params = self.tmp / "run.params"
        custom = ArchConfig(hidden=(3,), encoder="mlp")
        save_arch(custom, params)
        self.assertEqual(arch_for(params), custom)
        self.assertEqual(json.loads((self.tmp / "run.params.arch.json").read_text())["hidden"], [3])

    def test_explicit_file_wins(self):
        params = self.tmp / "run.params"
        save_arch(ArchConfig(hidden=(3,)), params)
        explicit = self.tmp / "arch.txt"
        explicit.write_text("hidden = 5\n")
        self.assertEqual(arch_for(params, explicit).hidden, (5,))
