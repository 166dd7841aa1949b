import numpy as np
from django.test import SimpleTestCase

from pdsketch_app import autodiff as ad
from pdsketch_app.exceptions import NonScalarRoot, ShapeMismatch


class OperationTests(SimpleTestCase):
    def setUp(self):
        self.store = ad.ParamStore()

    def test_matvec_gradient(self):
        w = self.store.create("w", [[1.0, 2.0], [3.0, 4.0]])
        x = ad.constant([1.0, -1.0])
        ad.backward(ad.total(ad.matvec(w.node(), x)))
        np.testing.assert_allclose(w.grad, [[1.0, -1.0], [1.0, -1.0]])

    def test_gradients_accumulate_over_shared_nodes(self):
        a = self.store.create("a", 3.0)
        node = a.node()
        ad.backward(ad.add(ad.mul(node, node), node))
        self.assertAlmostEqual(float(a.grad), 7.0)

    def test_l1_sums_over_the_vector(self):
        p = self.store.create("p", [1.0, -2.0, 0.5, 0.0])
        out = ad.l1(p.node(), [0.0, 0.0, 0.0, 0.0])
        self.assertAlmostEqual(out.item(), 3.5)
        ad.backward(out)
        np.testing.assert_allclose(p.grad, [1.0, -1.0, 1.0, 0.0])

    def test_min_max_send_gradient_to_first_extremum(self):
        a = self.store.create("a", 0.5)
        b = self.store.create("b", 0.5)
        out = ad.minimum(a.node(), b.node())
        self.assertTrue(out.tie)
        ad.backward(out)
        self.assertEqual(float(a.grad), 1.0)
        self.assertEqual(float(b.grad), 0.0)

    def test_bce_is_clamped(self):
        loss = ad.bce(ad.constant(0.0), 1.0)
        self.assertAlmostEqual(loss.item(), -np.log(1e-7), places=5)

    def test_shape_errors(self):
        with self.assertRaises(ShapeMismatch):
            ad.add(ad.constant([1.0, 2.0]), ad.constant([1.0, 2.0, 3.0]))
        with self.assertRaises(ShapeMismatch):
            ad.matvec(ad.constant(np.ones((2, 3))), ad.constant(np.ones(2)))
        with self.assertRaises(ShapeMismatch):
            ad.index(ad.constant([1.0]), 3)

    def test_non_scalar_root(self):
        with self.assertRaises(NonScalarRoot):
            ad.backward(ad.constant([1.0, 2.0]))

    def test_no_grad_records_nothing(self):
        w = self.store.create("w", [1.0, 2.0])
        with ad.no_grad():
            out = ad.total(w.node())
        self.assertFalse(out.requires_grad)
        self.assertTrue(ad.grad_enabled())

    def test_concat_and_index_route_gradients(self):
        a = self.store.create("a", [1.0, 2.0])
        b = self.store.create("b", 5.0)
        joined = ad.concat(a.node(), b.node())
        self.assertEqual(joined.shape, (3,))
        ad.backward(ad.index(joined, 2))
        np.testing.assert_allclose(a.grad, [0.0, 0.0])
        self.assertEqual(float(b.grad), 1.0)


class GradCheckTests(SimpleTestCase):
    def test_mlp_like_graph_passes(self):
        rng = np.random.default_rng(0)
        store = ad.ParamStore()
        w1 = store.create("w1", rng.normal(size=(4, 3)))
        b1 = store.create("b1", rng.normal(size=4))
        w2 = store.create("w2", rng.normal(size=(1, 4)))
        x = ad.constant(rng.normal(size=3))

        def f():
            h = ad.tanh(ad.add(ad.matvec(w1.node(), x), b1.node()))
            p = ad.sigmoid(ad.index(ad.matvec(w2.node(), h), 0))
            return ad.bce(p, 1.0)

        report = ad.grad_check(f, store)
        self.assertTrue(report.passed, report.errors)
        self.assertFalse(report.at_nondifferentiable_point)

    def test_ties_are_flagged_not_failed(self):
        store = ad.ParamStore()
        a = store.create("a", 0.3)
        b = store.create("b", 0.3)
        report = ad.grad_check(lambda: ad.maximum(a.node(), b.node()), store)
        self.assertTrue(report.at_nondifferentiable_point)
        self.assertTrue(report.passed)

    def test_values_are_restored(self):
        store = ad.ParamStore()
        a = store.create("a", [0.1, 0.2])
        ad.grad_check(lambda: ad.l1(a.node(), [0.0, 0.0]), store)
        np.testing.assert_allclose(a.values, [0.1, 0.2], rtol=1e-6)
        self.assertEqual(a.values.dtype, np.float32)
