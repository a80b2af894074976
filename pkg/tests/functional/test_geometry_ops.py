import unittest
import os
import sys

import numpy as np

# Add the src directory to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from core.errors import DimensionMismatch, HeisenbergError, NotInvertible, PathError, YConditionFails
from core.geometry_ops import (
    ContactData,
    calibration_defects,
    conformal_covariance_check,
    dbar_b,
    dbar_kernel_projection,
    dbar_star_kernel_projection,
    folland_stein,
    frame_szego_symbol,
    interpolate_J,
    kohn_laplacian,
    path_signatures,
    szego_path_from_J,
    szego_relation_check,
    szego_symbol,
)
from core.group_model import dilation_matrix, standard_dtheta, standard_J
from core.symbol_algebra import (
    HomogeneousSymbol,
    adjoint_symbol,
    fiber_defect,
    invert_homogeneous,
    level_projector,
    min_singular_values,
    star,
)

N = 12
N2 = 4


class TestFollandStein(unittest.TestCase):
    def test_invertibility_scan(self):
        """FS(lambda) degenerates exactly when |lambda| - n/2 is a nonnegative integer"""
        for n, cutoff in ((1, N), (2, N2)):
            for j in range(-16, 17):
                lam = j / 4.0
                offset = abs(lam) - n / 2.0
                smallest = min(min_singular_values(folland_stein(lam, n, cutoff)))
                if offset >= 0 and float(offset).is_integer():
                    self.assertLess(smallest, 1e-8, f"n={n}, lambda={lam}")
                else:
                    self.assertGreater(smallest, 0.1, f"n={n}, lambda={lam}")

    def test_fibers_are_shifted_number_operators(self):
        p = folland_stein(0.3, 1, N)
        expected_plus = np.diag(np.arange(N) + 0.5 - 0.3)
        expected_minus = np.diag(np.arange(N) + 0.5 + 0.3)
        reference = HomogeneousSymbol(2, 1, 1, N, expected_plus, expected_minus)
        self.assertLess(fiber_defect(p, reference), 1e-10)


class TestKohnLaplacian(unittest.TestCase):
    def test_low_dimension_identities(self):
        box = kohn_laplacian(1, 0, N)
        self.assertLess(fiber_defect(box, folland_stein(0.5, 1, N)), 1e-9)
        with self.assertRaises(NotInvertible):
            invert_homogeneous(box)
        dbar_squared = star(dbar_b(2, 1, N2), dbar_b(2, 0, N2))
        for fiber in dbar_squared.fibers():
            self.assertLess(float(np.max(np.abs(fiber))), 1e-12)

    def test_ranks_and_invertibility(self):
        self.assertEqual(kohn_laplacian(2, 1, N2).rank, 2)
        self.assertEqual(dbar_b(2, 0, N2).rank, 4)
        self.assertGreaterEqual(min(min_singular_values(kohn_laplacian(2, 1, N2))), 0.1)
        with self.assertRaises(DimensionMismatch):
            kohn_laplacian(2, 3, N2)


class TestKernelProjections(unittest.TestCase):
    def test_y_condition_gates(self):
        with self.assertRaises(YConditionFails):
            dbar_kernel_projection(1, 0, N)
        with self.assertRaises(YConditionFails):
            dbar_star_kernel_projection(1, 1, N)
        with self.assertRaises(YConditionFails):
            dbar_kernel_projection(2, 1, N2)

    def test_kernel_projection_is_idempotent(self):
        P = dbar_kernel_projection(2, 0, N2)
        self.assertLess(P.idempotency_defect, 1e-9)
        self.assertEqual(P.principal.degree, 0)
        Q = dbar_star_kernel_projection(2, 2, N2)
        self.assertLess(Q.idempotency_defect, 1e-9)

    def test_szego_relation(self):
        """Pi(dbar) + Pi(dbar*) - 1 is the harmonic projection in middle degree"""
        report = szego_relation_check(4, 2, 3)
        self.assertLess(report["defect"], 1e-9)
        self.assertEqual(len(report["harmonic_ranks"]), 2)


class TestSzegoSymbols(unittest.TestCase):
    def test_level_projections(self):
        for k in (0, 1):
            s = szego_symbol(k, 1, N)
            self.assertLess(fiber_defect(star(s, s), s, resolved=False), 1e-10)
            self.assertLess(fiber_defect(adjoint_symbol(s), s, resolved=False), 1e-10)
            reference = HomogeneousSymbol(0, 1, 1, N, level_projector(1, N, [k]), np.zeros((N, N)))
            self.assertLess(fiber_defect(s, reference), 1e-10)
        orthogonal = star(szego_symbol(0, 1, N), szego_symbol(1, 1, N))
        for fiber in orthogonal.fibers():
            self.assertLess(float(np.max(np.abs(fiber))), 1e-10)

    def test_conformal_covariance(self):
        report = conformal_covariance_check(0, 1, 0.3, N)
        self.assertTrue(report["passed"], report)
        for k in (0, 1):
            report = conformal_covariance_check(k, 1, np.log(2.0), N)
            self.assertTrue(report["passed"], report)

    def test_szego_symbol_on_scaled_frame(self):
        """The kernel of box_b + i k X0 does not see a conformal rescaling of the frame"""
        for k in (0, 1):
            scaled = frame_szego_symbol(dilation_matrix(2.0, 1), k, N)
            self.assertLess(fiber_defect(scaled, szego_symbol(k, 1, N), resolved=False), 1e-10)
            self.assertAlmostEqual(np.trace(scaled.fiber_plus).real, 1.0, places=10)
            self.assertLess(float(np.max(np.abs(scaled.fiber_minus))), 1e-12)


class TestContactData(unittest.TestCase):
    def test_standard_structure(self):
        data = ContactData(2)
        np.testing.assert_array_equal(data.J, standard_J(2))
        np.testing.assert_array_equal(data.dtheta, standard_dtheta(2))

    def test_invalid_structures(self):
        with self.assertRaises(HeisenbergError):
            ContactData(1, theta_scale=0.0)
        with self.assertRaises(DimensionMismatch):
            ContactData(1, J=standard_J(2))
        with self.assertRaises(HeisenbergError):
            ContactData(1, J=2.0 * standard_J(1))


class TestJInterpolation(unittest.TestCase):
    def test_calibrated_path(self):
        for n in (1, 2):
            J, dtheta = standard_J(n), standard_dtheta(n)
            A = np.diag([2.0] + [1.0] * (n - 1))
            S = np.block([[A, np.zeros((n, n))], [np.zeros((n, n)), np.linalg.inv(A).T]])
            Jp = S @ J @ np.linalg.inv(S)
            path = interpolate_J(J, Jp, dtheta)
            self.assertLess(path.continuity_modulus, 0.05)
            for J_t in path.structures:
                problems = calibration_defects(J_t, dtheta)
                self.assertLess(problems["square"], 1e-10)
                self.assertLess(problems["symplectic"], 1e-10)
                self.assertGreater(problems["min_positivity"], 0.0)
            self.assertEqual(set(path_signatures(path, dtheta)), {(n, 0)})

    def test_uncalibrated_endpoint(self):
        with self.assertRaises(PathError):
            interpolate_J(standard_J(1), 2.0 * standard_J(1))

    def test_szego_path(self):
        J = standard_J(1)
        S = np.diag([2.0, 0.5])
        path = szego_path_from_J(J, S @ J @ np.linalg.inv(S), 0, N)
        self.assertEqual(path.times[0], 0.0)
        self.assertLess(fiber_defect(path.samples[0][1], szego_symbol(0, 1, N), resolved=False), 1e-10)
        with self.assertRaises(DimensionMismatch):
            szego_path_from_J(standard_J(2), standard_J(2), 0, N)


if __name__ == "__main__":
    unittest.main()
