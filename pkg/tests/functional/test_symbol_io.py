import unittest
import json
import os
import sys
import tempfile

import numpy as np

# Add the src directory to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from core.errors import DimensionMismatch, HeisenbergError
from core.geometry_ops import folland_stein
from core.nilmanifold_lab import NilmanifoldModel, lift
from core.symbol_algebra import as_expansion, random_expansion, truncate
from core.symbol_io import load_sector_operator, load_symbol, restrict_cutoff, save_sector_operator, save_symbol


class TestSymbolContainer(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.stem = os.path.join(self.tmp.name, "symbols", "sample")

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        P = truncate(random_expansion(rng, (1, 0, -2), 1, 6), -4)
        bin_path, json_path = save_symbol(P, self.stem)
        self.assertTrue(bin_path.endswith("sample.bin"))
        with open(json_path) as f:
            manifest = json.load(f)
        self.assertEqual([c["degree"] for c in manifest["components"]], [1, 0, -2])
        loaded = load_symbol(self.stem)
        self.assertEqual(loaded.degrees, P.degrees)
        self.assertEqual(loaded.truncation_degree, -4)
        for a, b in zip(loaded.components, P.components):
            np.testing.assert_array_equal(a.fiber_plus, b.fiber_plus)
            np.testing.assert_array_equal(a.fiber_minus, b.fiber_minus)
            self.assertIsNone(a.abelian_trace)

    def test_checksum(self):
        bin_path, _ = save_symbol(folland_stein(0.2, 1, 4), self.stem)
        with open(bin_path, "r+b") as handle:
            handle.seek(-1, os.SEEK_END)
            last = handle.read(1)
            handle.seek(-1, os.SEEK_END)
            handle.write(bytes([last[0] ^ 0xFF]))
        with self.assertRaises(HeisenbergError):
            load_symbol(self.stem)
        self.assertEqual(load_symbol(self.stem, verify=False).degrees, [2])

    def test_restricted_cutoff(self):
        """Loading at a smaller cutoff keeps the low Hermite levels"""
        save_symbol(folland_stein(0.2, 1, 8), self.stem)
        small = load_symbol(self.stem, cutoff=5).principal
        np.testing.assert_allclose(np.diag(small.fiber_plus).real, np.arange(5) + 0.3)
        with self.assertRaises(DimensionMismatch):
            restrict_cutoff(small, 6)
        with self.assertRaises(HeisenbergError):
            save_symbol(as_expansion(), self.stem)


class TestSectorContainer(unittest.TestCase):
    def test_round_trip(self):
        model = NilmanifoldModel(16.0, 4, 16, 8)
        op = lift(as_expansion(folland_stein(0.5, 1, 16)), model)
        with tempfile.TemporaryDirectory() as tmp:
            save_sector_operator(op, os.path.join(tmp, "box"))
            loaded = load_sector_operator(os.path.join(tmp, "box.bin"))
        self.assertEqual(loaded.model, model)
        np.testing.assert_array_equal(loaded.blocks, op.blocks)
        np.testing.assert_array_equal(loaded.abelian, op.abelian)
        self.assertEqual(loaded.symbol_tag, op.symbol_tag)


if __name__ == "__main__":
    unittest.main()
