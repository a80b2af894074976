import unittest
import os
import sys

import numpy as np

# Add the src directory to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from core.errors import DimensionMismatch, HeisenbergError
from core.nilmanifold_lab import NilmanifoldModel
from core.rumin import (
    complex_defects,
    contact_D,
    contact_laplacians,
    dilation_scaling,
    hodge_relation_defect,
    laplacian_report,
    projection_defects,
    projection_operator,
    rumin_build,
    rumin_projections,
)


class TestRuminComplex(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.model = NilmanifoldModel(16.0, 4, 16, 8)
        cls.ops = rumin_build(cls.model)
        cls.laplacians = contact_laplacians(cls.ops)
        cls.projections = rumin_projections(cls.ops)

    def test_complex_identities(self):
        """D d0 = 0 and d1 D = 0 on every sector"""
        self.assertEqual(self.ops.labels, list(range(-4, 5)))
        defects = complex_defects(self.ops)
        self.assertLess(defects["D_d0"], 1e-12)
        self.assertLess(defects["d1_D"], 1e-12)

    def test_sector_lookup(self):
        self.assertEqual(self.ops.sector(2).m, 2)
        with self.assertRaises(DimensionMismatch):
            self.ops.sector(7)
        with self.assertRaises(DimensionMismatch):
            rumin_build(self.model, [5])

    def test_laplacians(self):
        report = laplacian_report(self.laplacians, self.model)
        self.assertEqual(set(report), {"delta0", "delta11", "delta12", "delta2"})
        for name, entry in report.items():
            self.assertLess(entry["hermitian_defect"], 1e-10, name)
            self.assertGreaterEqual(entry["scaled_lower_bound"], 1e-6, name)

    def test_zero_sector_kernels(self):
        """Constants and the two constant horizontal forms are harmonic on the abelian sector"""
        index = self.laplacians.labels.index(0)
        for name, expected in (("delta0", 1), ("delta11", 2)):
            values = np.linalg.eigvalsh(self.laplacians.by_name()[name][index])
            threshold = 1e-8 * max(1.0, float(np.max(np.abs(values))))
            self.assertEqual(int(np.sum(np.abs(values) < threshold)), expected, name)

    def test_projections(self):
        for name, defect in projection_defects(self.projections).items():
            self.assertLess(defect, 1e-8, name)
        hodge = hodge_relation_defect(self.projections, self.laplacians)
        self.assertLess(hodge["one_forms"], 1e-6)
        self.assertLess(hodge["two_forms"], 1e-6)
        op = projection_operator(self.projections, "D", self.model)
        self.assertEqual(op.rank, 2)
        self.assertEqual(op.symbol_tag, "Pi0(D)")

    def test_partial_projection_is_rejected(self):
        partial = rumin_projections(rumin_build(self.model, [1, 2]))
        with self.assertRaises(HeisenbergError):
            projection_operator(partial, "d0", self.model)


class TestContactOperator(unittest.TestCase):
    def setUp(self):
        self.model = NilmanifoldModel(16.0, 4, 16, 8)

    def test_center_part(self):
        tau = 2.0 * np.pi / self.model.central_period
        difference = contact_D(self.model, 1, True) - contact_D(self.model, 1, False)
        np.testing.assert_allclose(difference, 1j * tau * np.eye(difference.shape[0]), atol=1e-12)

    def test_dilation_scaling(self):
        """d0 has order 1, D and Delta0 order 2, Delta11 order 4"""
        measured = dilation_scaling(self.model, 1)
        for name, order in {"d0": 1.0, "D": 2.0, "delta0": 2.0, "delta11": 4.0}.items():
            self.assertAlmostEqual(measured[name], order, places=8, msg=name)
        with self.assertRaises(HeisenbergError):
            dilation_scaling(self.model, 0)


if __name__ == "__main__":
    unittest.main()
