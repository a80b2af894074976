import unittest
import json
import os
import sys
import tempfile

# Add the src directory to the Python path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../../src')))

from core.config import DEFAULT_TOLERANCES, RunConfig, load_config
from core.errors import ConfigError


class TestConfig(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, payload):
        path = os.path.join(self.tmp.name, "config.json")
        with open(path, "w") as f:
            if isinstance(payload, str):
                f.write(payload)
            else:
                json.dump(payload, f)
        return path

    def test_defaults(self):
        config = load_config(None)
        self.assertEqual(config.hermite_cutoff, 32)
        self.assertEqual(config.tolerances, DEFAULT_TOLERANCES)
        self.assertEqual(config.command("szego"), {})

    def test_file_values_and_commands(self):
        path = self.write({"hermite_cutoff": 12, "tolerances": {"residue": 1e-7},
                           "commands": {"kohn": {"n": 3, "q": 1}}})
        config = load_config(path)
        self.assertEqual(config.hermite_cutoff, 12)
        self.assertEqual(config.tol("residue"), 1e-7)
        self.assertEqual(config.tol("tail"), DEFAULT_TOLERANCES["tail"])
        self.assertEqual(config.command("kohn"), {"n": 3, "q": 1})

    def test_overrides(self):
        config = load_config(None).with_overrides(seed=5, hermite_cutoff=None, output_dir="reports")
        self.assertEqual(config.seed, 5)
        self.assertEqual(config.hermite_cutoff, 32)
        self.assertEqual(config.output_dir, "reports")
        self.assertNotIn("commands", config.as_dict())

    def test_invalid_values(self):
        """Missing files, bad JSON and out-of-range sizes are configuration errors"""
        with self.assertRaises(ConfigError):
            load_config(os.path.join(self.tmp.name, "missing.json"))
        with self.assertRaises(ConfigError):
            load_config(self.write("{not json"))
        with self.assertRaises(ConfigError):
            load_config(self.write({"hermite_cutoff": "many"}))
        for bad in ({"hermite_cutoff": 1}, {"sector_M": 3}, {"abelian_K": 4}, {"central_period": 0},
                    {"tolerances": {"residue": 0}}, {"quadrature": {"measure": "flat"}}, {"fit": {"shells": 3}}):
            with self.assertRaises(ConfigError, msg=str(bad)):
                load_config(self.write(bad))
        with self.assertRaises(ConfigError):
            RunConfig(workers=0)


if __name__ == "__main__":
    unittest.main()
