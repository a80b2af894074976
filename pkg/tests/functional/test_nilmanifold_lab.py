import unittest
import os
import sys

import numpy as np

# Add the src directory to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from core.config import RunConfig
from core.errors import ConfigError, DimensionMismatch, HeisenbergError, MeshTooCoarse
from core.geometry_ops import folland_stein, szego_symbol
from core.group_model import GroupPoint, group_inverse, group_law
from core.nilmanifold_lab import (
    NilmanifoldModel,
    build_model,
    displacement_matrices,
    frame_operator,
    grid_convolution_oracle,
    group_translate,
    identity_operator,
    lift,
    reconstruct_kernel,
    sector0_mode_function,
    sector_commutator_defect,
    sector_idempotency_defect,
    spectral_kernel_projection,
    taper,
)
from core.symbol_algebra import (
    as_expansion,
    frame_symbol,
    gaussian_symbol,
    random_symbol,
    star,
    unit_expansion,
    unit_symbol,
)

N = 16


class TestModel(unittest.TestCase):
    def test_validation(self):
        with self.assertRaises(ConfigError):
            NilmanifoldModel(16.0, 2, N, 8)
        with self.assertRaises(ConfigError):
            NilmanifoldModel(16.0, 4, 8, 8)
        with self.assertRaises(ConfigError):
            NilmanifoldModel(16.0, 4, N, 9)
        with self.assertRaises(ConfigError):
            NilmanifoldModel(0.0, 4, N, 8)

    def test_layout(self):
        model = NilmanifoldModel(16.0, 4, N, 8)
        self.assertEqual(model.as_dict(), {"period": 16.0, "M": 4, "N": N, "K": 8})
        self.assertAlmostEqual(model.volume, 256.0)
        self.assertEqual(model.sectors.tolist(), [-4, -3, -2, -1, 1, 2, 3, 4])
        self.assertEqual(model.storage_index(-4), 0)
        self.assertEqual(model.storage_index(1), 4)
        self.assertEqual(model.abelian_modes.shape, (64, 2))
        per_sector = identity_operator(model).per_sector
        self.assertEqual(len(per_sector), 9)
        np.testing.assert_array_equal(per_sector[4], np.eye(64))
        np.testing.assert_array_equal(per_sector[0], np.eye(N))
        with self.assertRaises(DimensionMismatch):
            model.storage_index(0)

    def test_build_model_layers(self):
        config = RunConfig(commands={"nilmanifold": {"central_period": 16.0, "sector_M": 8, "hermite_cutoff": 16}})
        model = build_model(config, {"sector_M": 6}, abelian_K=None)
        self.assertEqual(model.as_dict(), {"period": 16.0, "M": 6, "N": 16, "K": config.abelian_K})
        self.assertEqual(build_model(config, sector_M=4).sector_M, 4)


class TestFrameAction(unittest.TestCase):
    def test_center_acts_by_frequency(self):
        """X0 acts on sector m = 3 of a period-1 model as i 6 pi"""
        model = NilmanifoldModel(1.0, 4, N, 8)
        X0 = frame_operator(0, model)
        np.testing.assert_allclose(X0.sector(3), 6j * np.pi * np.eye(N), atol=1e-12)
        np.testing.assert_allclose(X0.sector(0), 0.0)

    def test_commutators(self):
        defects = sector_commutator_defect(NilmanifoldModel(16.0, 4, N, 8))
        self.assertLess(defects["nonzero_sectors"], 1e-10)
        self.assertEqual(defects["abelian"], 0.0)

    def test_sector0_modes(self):
        model = NilmanifoldModel(16.0, 4, N, 8)
        mode = sector0_mode_function(model, [1, -2])
        y = np.array([0.3, 0.2, 0.1])
        self.assertAlmostEqual(abs(mode(y)) ** 2 * model.volume, 1.0)
        h = 1e-5
        step = np.array([0.0, h, 0.0])
        derivative = (mode(y + step) - mode(y - step)) / (2.0 * h)
        index = (1 + 4) * 8 + (-2 + 4)
        multiplier = np.diag(frame_operator(1, model).abelian)[index]
        self.assertLess(abs(derivative - multiplier * mode(y)), 1e-6)
        with self.assertRaises(DimensionMismatch):
            sector0_mode_function(model, [4, 0])


class TestLift(unittest.TestCase):
    def setUp(self):
        self.model = NilmanifoldModel(16.0, 4, N, 8)

    def test_unit_and_frames(self):
        unit = lift(unit_expansion(1, N), self.model)
        identity = identity_operator(self.model)
        np.testing.assert_allclose(unit.blocks, identity.blocks)
        np.testing.assert_allclose(unit.abelian, identity.abelian)
        for j in range(3):
            lifted = lift(as_expansion(frame_symbol(j, 1, N)), self.model)
            target = frame_operator(j, self.model)
            np.testing.assert_allclose(lifted.blocks, -1j * target.blocks, atol=1e-12)

    def test_algebra_map(self):
        """lift(p * q) = lift(p) lift(q) sector by sector"""
        rng = np.random.default_rng(4)
        p, q = random_symbol(rng, 1, 1, N), random_symbol(rng, -1, 1, N)
        product = lift(as_expansion(p), self.model) @ lift(as_expansion(q), self.model)
        direct = lift(as_expansion(star(p, q)), self.model)
        np.testing.assert_allclose(product.blocks, direct.blocks, atol=1e-10)

    def test_mismatches(self):
        with self.assertRaises(DimensionMismatch):
            lift(unit_expansion(1, 8), self.model)
        with self.assertRaises(DimensionMismatch):
            lift(unit_expansion(2, N), self.model)
        with self.assertRaises(HeisenbergError):
            lift(as_expansion(), self.model)

    def test_positive_spectrum(self):
        op = lift(as_expansion(folland_stein(0.0, 1, N)), self.model)
        for block in op.blocks:
            self.assertGreater(np.linalg.eigvalsh(block).min(), 0.0)


class TestSpectralProjection(unittest.TestCase):
    def test_kernel_of_kohn_laplacian(self):
        """The kernel projection of the lifted Kohn Laplacian is the lifted Szego symbol"""
        model = NilmanifoldModel(16.0, 4, N, 8)
        op = lift(as_expansion(folland_stein(0.5, 1, N)), model)
        projection = spectral_kernel_projection(op)
        szego = lift(as_expansion(szego_symbol(0, 1, N)), model)
        np.testing.assert_allclose(projection.blocks, szego.blocks, atol=1e-8)
        self.assertLess(sector_idempotency_defect(projection), 1e-8)
        ranks = [round(float(np.real(np.trace(projection.sector(m))))) for m in model.sectors]
        self.assertEqual(ranks, [0] * 4 + [1] * 4)
        self.assertAlmostEqual(float(np.real(np.trace(projection.abelian))), 1.0, places=8)

    def test_empty_window(self):
        model = NilmanifoldModel(16.0, 4, N, 8)
        op = lift(as_expansion(folland_stein(0.5, 1, N)), model)
        empty = spectral_kernel_projection(op, center=-5.0, radius=0.1)
        self.assertLess(float(np.max(np.abs(empty.blocks))), 1e-12)


class TestKernelReconstruction(unittest.TestCase):
    def setUp(self):
        self.model = NilmanifoldModel(16.0, 8, N, 8)
        self.op = lift(as_expansion(szego_symbol(0, 1, N)), self.model)

    def test_zero_operator(self):
        values = reconstruct_kernel(self.op - self.op, [[0.01, 0.1, 0.0], [0.02, 0.0, 0.1]], tail_tol=None)
        np.testing.assert_allclose(values, 0.0)

    def test_injectivity_box(self):
        with self.assertRaises(HeisenbergError):
            reconstruct_kernel(self.op, [[0.0, 2.0, 0.0]], tail_tol=None)

    def test_translation_equivariance(self):
        """Conjugating by a translation g moves the kernel to y -> k(g^-1 y g)"""
        rng = np.random.default_rng(5)
        y = GroupPoint([0.05, 0.2, -0.1])
        for _ in range(5):
            g = GroupPoint(rng.uniform(-0.3, 0.3, 3))
            moved = reconstruct_kernel(group_translate(self.op, g), [y], tail_tol=None)
            conjugated = group_law(group_law(group_inverse(g), y), g)
            direct = reconstruct_kernel(self.op, [conjugated], tail_tol=None)
            self.assertLess(abs(moved[0] - direct[0]), 1e-8)

    def test_displacement_and_taper(self):
        alpha = 0.3 - 0.2j
        column = displacement_matrices([alpha], N)[0][:, 0]
        expected = np.exp(-0.5 * abs(alpha) ** 2) * np.array(
            [alpha ** j / np.sqrt(float(np.prod(np.arange(1, j + 1)))) for j in range(N)])
        np.testing.assert_allclose(column, expected, atol=1e-14)
        np.testing.assert_allclose(displacement_matrices([0.0], 4)[0], np.eye(4), atol=1e-15)
        self.assertEqual(float(taper(np.array([0.5]), 0.2)[0]), 1.0)
        self.assertAlmostEqual(float(taper(np.array([1.0]), 0.2)[0]), 0.0)
        with self.assertRaises(HeisenbergError):
            taper(np.array([0.5]), 0.0)


class TestGridOracle(unittest.TestCase):
    def test_unit_product(self):
        one = unit_symbol(1, N)
        product = grid_convolution_oracle(one, one)
        self.assertLess(float(np.max(np.abs(product.values - 1.0))), 1e-10)

    def test_gaussian_product(self):
        g = gaussian_symbol(1, 32)
        product = grid_convolution_oracle(g, g)
        Q, P = np.meshgrid(product.q_axis, product.p_axis, indexing="ij")
        expected = 0.8 * np.exp(-0.8 * (Q ** 2 + P ** 2))
        self.assertLess(float(np.max(np.abs(product.values - expected))), 1e-8)

    def test_mesh_checks(self):
        g = gaussian_symbol(1, 32)
        with self.assertRaises(MeshTooCoarse):
            grid_convolution_oracle(g, g, mesh=4)
        with self.assertRaises(HeisenbergError):
            grid_convolution_oracle(g, g, mesh=63)


if __name__ == "__main__":
    unittest.main()
