import unittest
import contextlib
import io
import json
import os
import sys
import tempfile
from dataclasses import replace
from unittest import mock

import numpy as np

# Add the src directory to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from analyze_residue import main
from core.residue_engine import residue_density
from core.symbol_io import load_symbol

SPHERE_QUADRATURE = {"phi_nodes": 96, "omega_nodes": 64, "equator_band": 0.01, "measure": "invariant"}


class TestAnalyzeResidue(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = os.path.join(self.tmp.name, "output")

    def tearDown(self):
        self.tmp.cleanup()

    def run_cli(self, config, *argv):
        """Run the CLI in-process; returns (exit code, stdout)"""
        path = os.path.join(self.tmp.name, "config.json")
        with open(path, "w") as f:
            json.dump(config, f)
        stdout, stderr = io.StringIO(), io.StringIO()
        code = 0
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            try:
                main(["--config", path, "--out", self.out, *argv])
            except SystemExit as e:
                code = e.code
        return code, stdout.getvalue()

    def report(self, command):
        with open(os.path.join(self.out, f"{command}_report.json")) as f:
            return json.load(f)

    def test_verify_algebra(self):
        code, stdout = self.run_cli({}, "verify", "algebra")
        self.assertIn("Running verify suite: algebra", stdout)
        report = self.report("verify")
        self.assertEqual(report["suite"], "algebra")
        self.assertEqual(len(report["checks"]), 8)
        for check in report["checks"]:
            self.assertNotIn("Error", check, check["check"])
        self.assertEqual(code, 0 if report["passed"] else 1)

    def test_unknown_suite(self):
        code, stdout = self.run_cli({}, "verify", "topology")
        self.assertEqual(code, 2)
        self.assertIn("Error: unknown suite", stdout)

    def test_kohn_without_y_condition(self):
        """The only kernel projection at n = 1, q = 0 needs Y(1), which fails"""
        code, stdout = self.run_cli({"commands": {"kohn": {"n": 1, "q": 0, "hermite_cutoff": 8}}}, "kohn")
        self.assertEqual(code, 3)
        self.assertTrue(stdout.strip().splitlines()[-1].startswith("Error:"))
        self.assertFalse(os.path.exists(os.path.join(self.out, "kohn_report.json")))

    def test_kohn_report(self):
        code, stdout = self.run_cli({"commands": {"kohn": {"n": 2, "q": 0, "hermite_cutoff": 4}}}, "kohn")
        self.assertEqual(code, 0)
        self.assertIn("Analysis complete", stdout)
        report = self.report("kohn")
        self.assertEqual(report["signature"], [2, 0])
        self.assertEqual(report["y_condition"], {"0": False, "1": True, "2": False})
        self.assertFalse(report["kohn_min_singular_values"]["invertible"])
        self.assertIn("kernel_projection_dbar", report)
        self.assertNotIn("kernel_projection_dbar_star", report)
        self.assertTrue(report["passed"])

    def test_residue_of_gaussian(self):
        config = {"quadrature": SPHERE_QUADRATURE, "commands": {"residue": {"symbol": "gaussian"}}}
        code, _ = self.run_cli(config, "--hermite-cutoff", "32", "residue")
        self.assertEqual(code, 0)
        report = self.report("residue")
        self.assertTrue(report["route_agreement"]["passed"])
        value = report["routes"]["plancherel"]["residue"]
        self.assertAlmostEqual(value["re"], (1.0 - 3.0 ** (-32)) / np.pi ** 2, places=12)
        self.assertAlmostEqual(value["im"], 0.0, places=15)
        self.assertTrue(os.path.exists(report["density_csv"]))
        self.assertEqual(load_symbol(report["symbol_container"]).degrees, [-4])

    def test_residue_routes_disagree(self):
        """A sphere route off by a factor 2 fails the run"""
        def doubled_sphere(expansion, quad, method="plancherel", **kwargs):
            density = residue_density(expansion, quad, method=method, **kwargs)
            return replace(density, values=2.0 * density.values) if method == "sphere" else density

        config = {"quadrature": SPHERE_QUADRATURE, "commands": {"residue": {"symbol": "gaussian"}}}
        with mock.patch("analyze_residue.residue_density", side_effect=doubled_sphere):
            code, stdout = self.run_cli(config, "--hermite-cutoff", "32", "residue")
        self.assertEqual(code, 1)
        self.assertIn("Analysis complete with failed checks", stdout)
        self.assertFalse(self.report("residue")["passed"])

    def test_residue_without_critical_component(self):
        config = {"commands": {"residue": {"symbol": "folland_stein", "lambda": 0.3}}}
        code, _ = self.run_cli(config, "--hermite-cutoff", "8", "residue")
        self.assertEqual(code, 0)
        report = self.report("residue")
        self.assertEqual(report["degrees"], [2])
        self.assertEqual(report["routes"]["plancherel"]["residue"], {"re": 0.0, "im": 0.0})

    def test_malformed_section(self):
        code, stdout = self.run_cli({"commands": {"kohn": {"n": "two"}}}, "kohn")
        self.assertEqual(code, 1)
        self.assertTrue(stdout.strip().splitlines()[-1].startswith("Error:"))

    def test_bad_arguments(self):
        code, _ = self.run_cli({"commands": {"residue": {"symbol": "bessel"}}}, "residue")
        self.assertEqual(code, 2)
        code, _ = self.run_cli({}, "szego", "--route", "spectral")
        self.assertEqual(code, 2)
        small = {"commands": {"fit": {"central_period": 16.0, "sector_M": 4, "hermite_cutoff": 16}}}
        code, stdout = self.run_cli(small, "fit", "--shells", "3")
        self.assertEqual(code, 2)
        self.assertIn("at least 4 shells", stdout)


if __name__ == "__main__":
    unittest.main()
