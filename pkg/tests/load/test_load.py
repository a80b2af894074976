import time
import unittest
import contextlib
import io
import json
import os
import sys
import tempfile

import numpy as np

# Add the src directory to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from analyze_residue import main
from core.geometry_ops import folland_stein, szego_symbol
from core.nilmanifold_lab import NilmanifoldModel, lift, reconstruct_kernel
from core.residue_engine import sphere_integral
from core.symbol_algebra import as_expansion, expansion_mul, random_expansion, scalar_eval


class TestLoad(unittest.TestCase):
    def test_repeated_reports(self):
        """Ten kohn runs write byte-identical reports"""
        start_time = time.time()
        reports = set()
        with tempfile.TemporaryDirectory() as tmp:
            config_path = os.path.join(tmp, "config.json")
            with open(config_path, "w") as f:
                json.dump({"commands": {"kohn": {"n": 2, "q": 0, "hermite_cutoff": 4}}}, f)
            for _ in range(10):
                with contextlib.redirect_stdout(io.StringIO()):
                    main(["--config", config_path, "--out", tmp, "kohn"])
                with open(os.path.join(tmp, "kohn_report.json")) as f:
                    reports.add(f.read())
        duration = time.time() - start_time
        print(f"\n10 kohn runs: {duration:.4f} seconds")
        self.assertEqual(len(reports), 1)

    def test_worker_counts(self):
        """Thread count never changes a result"""
        model = NilmanifoldModel(16.0, 256, 16, 8)
        op = lift(as_expansion(szego_symbol(0, 1, 16)), model)
        offsets = [[0.01 * k, 0.1, -0.05 * k] for k in range(12)]
        serial = reconstruct_kernel(op, offsets, tail_tol=None, workers=1)
        for workers in (2, 8):
            np.testing.assert_array_equal(reconstruct_kernel(op, offsets, tail_tol=None, workers=workers), serial)

        rng = np.random.default_rng(3)
        P = random_expansion(rng, (1, 0, -1), 1, 8)
        Q = random_expansion(rng, (0, -2), 1, 8)
        product = expansion_mul(P, Q, workers=1)
        for workers in (2, 8):
            other = expansion_mul(P, Q, workers=workers)
            self.assertEqual(other.degrees, product.degrees)
            for a, b in zip(other.components, product.components):
                np.testing.assert_array_equal(a.fiber_plus, b.fiber_plus)
                np.testing.assert_array_equal(a.fiber_minus, b.fiber_minus)

        p = folland_stein(0.3, 1, 8)
        quad = {"phi_nodes": 12, "omega_nodes": 16}
        integrand = lambda xi: scalar_eval(p, xi)
        reference = sphere_integral(integrand, 1, quad, tol=1.0, workers=1)
        np.testing.assert_array_equal(sphere_integral(integrand, 1, quad, tol=1.0, workers=8), reference)


if __name__ == "__main__":
    unittest.main()
