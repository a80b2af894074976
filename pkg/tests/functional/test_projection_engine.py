import unittest
import os
import sys
from dataclasses import replace

import numpy as np

# Add the src directory to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from core.errors import ContourHitsSpectrum, HeisenbergError, PathError, RangesDiffer
from core.projection_engine import (
    IdempotentSymbolPath,
    complement,
    orthogonalize,
    orthogonalize_matrix,
    projection_from_symbol,
    random_lower_terms,
    riesz_projection,
    riesz_symbol_projection,
    rotation_path,
    same_range_residue,
    transport_involution,
)
from core.residue_engine import residue
from core.symbol_algebra import HomogeneousSymbol, as_expansion, expansion_adjoint, level_projector

N = 8


def level_symbol(plus, minus, cutoff=N):
    return HomogeneousSymbol(0, 1, 1, cutoff, level_projector(1, cutoff, plus), level_projector(1, cutoff, minus),
                             self_adjoint=True)


class TestMatrixProjections(unittest.TestCase):
    def test_riesz_projection(self):
        A = np.diag([0.0, 1.0, 2.0])
        np.testing.assert_allclose(riesz_projection(A, 1.0, 0.5), np.diag([0.0, 1.0, 0.0]), atol=1e-12)
        with self.assertRaises(ContourHitsSpectrum):
            riesz_projection(A, 1.0, 1.0)

    def test_orthogonalize_matrix(self):
        oblique = np.array([[1.0, 3.0], [0.0, 0.0]])
        np.testing.assert_allclose(orthogonalize_matrix(oblique), np.diag([1.0, 0.0]), atol=1e-12)


class TestProjectionFromSymbol(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_projection_laws(self):
        """Idempotent, real residue, adjoint-invariant, complement negates the residue"""
        pi0 = level_symbol([0, 1], [2])
        P = projection_from_symbol(pi0, random_lower_terms(pi0, self.rng))
        self.assertLess(P.idempotency_defect, 1e-9)
        self.assertEqual(P.principal.degree, 0)
        value = residue(P.expansion)
        self.assertLess(abs(value.imag), 1e-10)
        self.assertLess(abs(residue(expansion_adjoint(P.expansion)) - value), 1e-10)
        self.assertLess(abs(residue(complement(P).expansion) + value), 1e-10)
        report = P.report({"residue": 1e-6})
        self.assertEqual(report["method"], "symbolic")
        self.assertEqual(report["tolerances"], {"residue": 1e-6})

    def test_orthogonalize(self):
        pi0 = level_symbol([0], [0, 1])
        P0 = orthogonalize(projection_from_symbol(pi0, random_lower_terms(pi0, self.rng)))
        self.assertLess(P0.idempotency_defect, 1e-8)

    def test_rejects_non_idempotent_leading_symbol(self):
        with self.assertRaises(HeisenbergError):
            projection_from_symbol(HomogeneousSymbol(0, 1, 1, N, 2.0 * np.eye(N), np.eye(N)))
        with self.assertRaises(HeisenbergError):
            projection_from_symbol(HomogeneousSymbol(1, 1, 1, N, np.eye(N), np.eye(N)))

    def test_riesz_symbol_projection(self):
        """The contour around +1 recovers the projector of an involution symbol"""
        plus, minus = level_projector(1, N, [0, 1]), level_projector(1, N, [2])
        F = as_expansion(HomogeneousSymbol(0, 1, 1, N, 2.0 * plus - np.eye(N), 2.0 * minus - np.eye(N)))
        principal = riesz_symbol_projection(F, 1.0, 1.0).principal
        self.assertEqual(principal.degree, 0)
        np.testing.assert_allclose(principal.fiber_plus, plus, atol=1e-10)
        np.testing.assert_allclose(principal.fiber_minus, minus, atol=1e-10)
        with self.assertRaises(ContourHitsSpectrum):
            riesz_symbol_projection(F, 0.0, 1.0)
        with self.assertRaises(HeisenbergError):
            riesz_symbol_projection(as_expansion(HomogeneousSymbol(1, 1, 1, N, np.eye(N), np.eye(N))), 1.0, 0.5)


class TestRangeComparison(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(11)

    def test_same_range_same_residue(self):
        pi0 = level_symbol([0], [1])
        realization = tuple(pi0.fibers())
        first = replace(projection_from_symbol(pi0, random_lower_terms(pi0, self.rng)), realization=realization)
        second = replace(projection_from_symbol(pi0, random_lower_terms(pi0, self.rng)), realization=realization)
        report = same_range_residue(first, second)
        self.assertTrue(report["passed"])
        self.assertLess(report["max_principal_angle"], 1e-8)
        kernel = same_range_residue(first, second, mode="kernel")
        self.assertTrue(kernel["passed"])

    def test_different_ranges(self):
        a, b = level_symbol([0], [1]), level_symbol([1], [0])
        first = replace(projection_from_symbol(a), realization=tuple(a.fibers()))
        second = replace(projection_from_symbol(b), realization=tuple(b.fibers()))
        with self.assertRaises(RangesDiffer):
            same_range_residue(first, second)
        with self.assertRaises(HeisenbergError):
            same_range_residue(projection_from_symbol(a), second)


class TestPaths(unittest.TestCase):
    def test_path_validation(self):
        p = level_symbol([0], [0])
        with self.assertRaises(PathError):
            IdempotentSymbolPath(((0.0, p), (0.5, p)))
        with self.assertRaises(PathError):
            IdempotentSymbolPath(((0.0, p), (0.5, p), (0.5, p), (1.0, p)))
        with self.assertRaises(PathError):
            IdempotentSymbolPath(((0.0, p), (1.0, HomogeneousSymbol(0, 1, 1, N, 2.0 * np.eye(N), np.eye(N)))))

    def test_rotation_transport(self):
        """Residues stay constant along a rotation of the leading idempotent"""
        rng = np.random.default_rng(3)
        pi0 = level_symbol([0], [0])
        path = rotation_path(pi0, 0, 1, samples=17)
        self.assertEqual(path.times[0], 0.0)
        self.assertEqual(path.times[-1], 1.0)
        self.assertLess(path.continuity_modulus, 0.2)
        start, end = path.samples[0][1], path.samples[-1][1]
        P0 = projection_from_symbol(start, random_lower_terms(start, rng))
        P1 = projection_from_symbol(end, random_lower_terms(end, rng))
        report = transport_involution(path, P0, P1)
        self.assertEqual(report["samples"], 17)
        self.assertTrue(report["passed"])
        with self.assertRaises(PathError):
            transport_involution(path, P1, P0)


if __name__ == "__main__":
    unittest.main()
