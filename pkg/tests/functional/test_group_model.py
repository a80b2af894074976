import unittest
import os
import sys

import numpy as np
from scipy.linalg import expm

# Add the src directory to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from core.errors import ContourHitsSpectrum, DegenerateFrame, DegenerateLeviForm, DimensionMismatch, HeisenbergError
from core.group_model import (
    GroupPoint,
    HeisenbergGroupSpec,
    LeviFormMatrix,
    adapted_frame,
    contact_form,
    dilate,
    dilation_matrix,
    frame_map_from_frame,
    group_inverse,
    group_law,
    left_frame,
    levi_form_from_J,
    levi_signature,
    negative_eigenprojection,
    random_points,
    standard_dtheta,
    standard_J,
    structure_constants,
    y_condition,
)


class TestGroupLaw(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_associativity_inverse_and_dilation(self):
        """Group law associativity, inverses and dilation automorphism on random points"""
        for n in (1, 2):
            points = random_points(self.rng, 300, n)
            for k in range(100):
                x, y, z = points[3 * k:3 * k + 3]
                left = group_law(group_law(x, y), z).coords
                right = group_law(x, group_law(y, z)).coords
                np.testing.assert_allclose(left, right, atol=1e-12)
                np.testing.assert_allclose(group_law(x, group_inverse(x)).coords, 0.0, atol=1e-12)
                t = 0.5 + k / 50.0
                np.testing.assert_allclose(dilate(t, group_law(x, y)).coords,
                                           group_law(dilate(t, x), dilate(t, y)).coords, atol=1e-12)

    def test_central_term(self):
        x = GroupPoint([0.0, 1.0, 0.0])
        y = GroupPoint([0.0, 0.0, 1.0])
        self.assertAlmostEqual(group_law(x, y).central, -0.5)
        self.assertAlmostEqual(group_law(y, x).central, 0.5)

    def test_dilation_matrix_and_arrays(self):
        v = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(dilate(2.0, v), [4.0, 4.0, 6.0])
        np.testing.assert_allclose(dilation_matrix(2.0, 1) @ v, dilate(2.0, v))
        self.assertIsInstance(dilate(2.0, GroupPoint(v)), GroupPoint)
        with self.assertRaises(HeisenbergError):
            dilate(0.0, v)

    def test_dimensions(self):
        spec = HeisenbergGroupSpec(2)
        self.assertEqual((spec.d, spec.dim, spec.homogeneous_dim, spec.critical_degree), (4, 5, 6, -6))
        self.assertEqual(GroupPoint([0.0, 1.0, 2.0]).spec, HeisenbergGroupSpec(1))

    def test_point_validation(self):
        with self.assertRaises(DimensionMismatch):
            GroupPoint([1.0, 2.0])
        with self.assertRaises(DimensionMismatch):
            group_law([0.0, 1.0, 2.0], [0.0, 1.0, 2.0, 3.0, 4.0])
        with self.assertRaises(DimensionMismatch):
            HeisenbergGroupSpec(0)


class TestFrame(unittest.TestCase):
    def test_commutation_table(self):
        """[X_j, X_{n+k}] = -delta_jk X0 and every other bracket vanishes"""
        for n in (1, 2, 3):
            spec = HeisenbergGroupSpec(n)
            table = structure_constants(spec)
            expected = np.zeros((spec.dim,) * 3)
            for j in range(1, n + 1):
                expected[j, n + j, 0] = -1.0
                expected[n + j, j, 0] = 1.0
            np.testing.assert_allclose(table, expected, atol=1e-12)

    def test_contact_form_annihilates_horizontal_frame(self):
        spec = HeisenbergGroupSpec(2)
        x = GroupPoint([0.3, -1.0, 2.0, 0.5, 1.5])
        frame = left_frame(spec)
        theta = contact_form(x)
        self.assertAlmostEqual(float(theta @ frame[0].at(x)), 1.0)
        for field in frame[1:]:
            self.assertAlmostEqual(float(theta @ field.at(x)), 0.0)

    def test_adapted_frame_is_orthonormal(self):
        J = standard_J(2)
        dtheta = standard_dtheta(2)
        frame = adapted_frame(J, dtheta)
        g = dtheta @ J
        np.testing.assert_allclose(frame.T @ g @ frame, np.eye(4), atol=1e-12)
        np.testing.assert_allclose(J @ frame[:, :2], frame[:, 2:], atol=1e-12)

    def test_frame_map(self):
        frame = np.diag([2.0, 1.0, 1.0])
        phi = frame_map_from_frame(frame)
        np.testing.assert_allclose(phi([2.0, 1.0, 1.0]), [1.0, 1.0, 1.0])
        self.assertAlmostEqual(phi.jacobian, 0.5)
        np.testing.assert_allclose(phi.compose(phi.inverse()).linear_map, np.eye(3), atol=1e-12)
        with self.assertRaises(DegenerateFrame):
            frame_map_from_frame(np.diag([1.0, 1.0, 0.0]))

    def test_conformally_scaled_frame(self):
        """X0' = 4 X0, Xj' = 2 Xj: the scaled map is the old one followed by a dilation by 1/2"""
        for n in (1, 2):
            phi = frame_map_from_frame(np.eye(2 * n + 1))
            phi_scaled = frame_map_from_frame(dilation_matrix(2.0, n))
            np.testing.assert_allclose(phi_scaled.linear_map, dilation_matrix(0.5, n) @ phi.linear_map, atol=1e-15)
            np.testing.assert_allclose(phi_scaled.inverse().linear_map,
                                       phi.inverse().linear_map @ dilation_matrix(2.0, n), atol=1e-15)
            x = np.arange(1.0, 2 * n + 2)
            np.testing.assert_allclose(phi_scaled(dilate(2.0, x)), phi(x), atol=1e-15)


class TestLeviForm(unittest.TestCase):
    def test_standard_structure_is_strictly_pseudoconvex(self):
        for n in (1, 2, 3):
            levi = levi_form_from_J(standard_J(n), standard_dtheta(n))
            self.assertEqual(levi_signature(levi), (n, 0))

    def test_signature_and_negative_projection(self):
        levi = LeviFormMatrix(np.diag([1.0, -2.0, 3.0, -0.5]))
        self.assertEqual(levi_signature(levi), (2, 2))
        projection = negative_eigenprojection(levi)
        np.testing.assert_allclose(projection, np.diag([0.0, 1.0, 0.0, 1.0]), atol=1e-8)
        with self.assertRaises(DegenerateLeviForm):
            levi_signature(LeviFormMatrix(np.diag([1.0, 0.0])))

    def test_negative_projection_matches_eigh(self):
        rng = np.random.default_rng(12)
        Q, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
        matrix = Q @ np.diag([-1.5, 0.8, -0.7, 2.0]) @ Q.conj().T
        levi = LeviFormMatrix(0.5 * (matrix + matrix.conj().T))
        eigenvalues, vectors = np.linalg.eigh(levi.matrix)
        negative = vectors[:, eigenvalues < 0]
        oracle = negative @ negative.conj().T
        projection = negative_eigenprojection(levi)
        np.testing.assert_allclose(projection, oracle, atol=1e-9)
        np.testing.assert_allclose(projection @ projection, projection, atol=1e-9)
        np.testing.assert_allclose(projection, projection.conj().T, atol=1e-12)
        self.assertAlmostEqual(np.trace(projection).real, levi_signature(levi)[1], places=9)

    def test_contour_through_spectrum(self):
        levi = LeviFormMatrix(np.diag([1.0, -2.0, 3.0, -0.5]))
        # center -0.575, radius 1.575: the circle passes through the eigenvalue 1
        with self.assertRaises(ContourHitsSpectrum):
            negative_eigenprojection(levi, contour_radius_pair=(-2.0, 0.85))

    def test_signature_along_unitary_path(self):
        rng = np.random.default_rng(13)
        H = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        H = H + H.conj().T
        D = np.diag([2.0, -1.0, 0.5])
        for t in np.linspace(0.0, 1.0, 50):
            U = expm(1j * t * H)
            L = U @ D @ U.conj().T
            levi = LeviFormMatrix(0.5 * (L + L.conj().T))
            self.assertEqual(levi_signature(levi), (2, 1), f"t={t}")
            self.assertAlmostEqual(np.trace(negative_eigenprojection(levi)).real, 1.0, places=9)

    def test_json_round_trip(self):
        levi = LeviFormMatrix(np.array([[1.0, 0.5j], [-0.5j, 2.0]]))
        np.testing.assert_allclose(LeviFormMatrix.from_json(levi.to_json()).matrix, levi.matrix)

    def test_y_condition_table(self):
        """Y(q) holds iff q is neither 0 nor n for strictly pseudoconvex signatures"""
        for n in range(1, 7):
            for q in range(n + 1):
                self.assertEqual(y_condition(q, n, 0, n), q not in (0, n), f"n={n}, q={q}")
        self.assertFalse(y_condition(1, 3, 1, 4))
        self.assertTrue(y_condition(0, 3, 1, 4))
        self.assertTrue(y_condition(2, 3, 1, 4))
        with self.assertRaises(HeisenbergError):
            y_condition(5, 4, 0, 4)


if __name__ == "__main__":
    unittest.main()
