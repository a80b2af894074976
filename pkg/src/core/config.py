"""Run configuration loaded from ``config.json``."""

import json
import logging
import os
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional

from .errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_QUADRATURE = {
    "phi_nodes": 48,
    "omega_nodes": 128,
    "equator_band": 0.05,
    "measure": "invariant",
}

DEFAULT_TOLERANCES = {
    "invert": 1e-8,
    "idempotent": 1e-9,
    "residue": 1e-6,
    "contour": 1e-8,
    "tail": 1e-4,
    "quadrature": 1e-4,
}

DEFAULT_FIT = {
    "shells": 9,
    "shell_ratio": 2.0 ** 0.25,
    "taper_fraction": 0.2,
}


@dataclass(frozen=True)
class RunConfig:
    """Global parameters shared by every command.

    Attributes:
        hermite_cutoff: Hermite levels N per horizontal pair.
        sector_M: Central sectors m in [-M, M] of the nilmanifold model.
        abelian_K: Fourier modes per axis on the m = 0 sector.
        central_period: Period of the central coordinate on the nilmanifold.
        quadrature: Sphere quadrature parameters.
        tolerances: Named numerical tolerances.
        fit: Kernel-fit shell layout.
        seed: Seed for every random draw.
        output_dir: Directory receiving reports.
        workers: Thread count for fiberwise and sectorwise work.
        commands: Command-specific parameter maps.
    """

    hermite_cutoff: int = 32
    sector_M: int = 32
    abelian_K: int = 8
    central_period: float = 1.0
    quadrature: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_QUADRATURE))
    tolerances: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    fit: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_FIT))
    seed: int = 0
    output_dir: str = "output"
    workers: int = 4
    commands: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def __post_init__(self):
        if self.hermite_cutoff < 2:
            raise ConfigError(f"hermite_cutoff must be >= 2, got {self.hermite_cutoff}", self.hermite_cutoff)
        if self.sector_M < 4:
            raise ConfigError(f"sector_M must be >= 4, got {self.sector_M}", self.sector_M)
        if self.abelian_K < 8:
            raise ConfigError(f"abelian_K must be >= 8, got {self.abelian_K}", self.abelian_K)
        if self.central_period <= 0:
            raise ConfigError("central_period must be positive", self.central_period)
        for name, value in self.tolerances.items():
            if value <= 0:
                raise ConfigError(f"tolerance '{name}' must be positive", value)
        if self.quadrature.get("measure") not in ("invariant", "euclidean"):
            raise ConfigError(f"unknown surface measure {self.quadrature.get('measure')!r}")
        if self.fit["shells"] < 4:
            raise ConfigError("at least 4 fit shells are required", self.fit["shells"])
        if self.workers < 1:
            raise ConfigError("workers must be >= 1", self.workers)

    def tol(self, name: str) -> float:
        return float(self.tolerances[name])

    def command(self, name: str) -> Dict[str, Any]:
        return dict(self.commands.get(name, {}))

    def with_overrides(self, **overrides) -> "RunConfig":
        """Return a copy with the non-None overrides applied."""
        values = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **values)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "hermite_cutoff": self.hermite_cutoff,
            "sector_M": self.sector_M,
            "abelian_K": self.abelian_K,
            "central_period": self.central_period,
            "quadrature": dict(self.quadrature),
            "tolerances": dict(self.tolerances),
            "fit": dict(self.fit),
            "seed": self.seed,
            "output_dir": self.output_dir,
            "workers": self.workers,
        }


def load_config(path: Optional[str] = None) -> RunConfig:
    """Load a RunConfig from a JSON file, falling back to defaults for missing keys.

    Args:
        path: Path to a JSON file. None or a missing default file gives the defaults.

    Returns:
        The validated configuration.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path, 'r') as config_file:
                data = json.load(config_file)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file is not valid JSON: {str(e)}")
        logger.debug("loaded config from %s", path)

    quadrature = dict(DEFAULT_QUADRATURE)
    quadrature.update(data.get("quadrature", {}))
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(data.get("tolerances", {}))
    fit = dict(DEFAULT_FIT)
    fit.update(data.get("fit", {}))

    try:
        return RunConfig(
            hermite_cutoff=int(data.get("hermite_cutoff", 32)),
            sector_M=int(data.get("sector_M", 32)),
            abelian_K=int(data.get("abelian_K", 8)),
            central_period=float(data.get("central_period", 1.0)),
            quadrature=quadrature,
            tolerances={k: float(v) for k, v in tolerances.items()},
            fit=fit,
            seed=int(data.get("seed", 0)),
            output_dir=str(data.get("output_dir", "output")),
            workers=int(data.get("workers", 4)),
            commands=dict(data.get("commands", {})),
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid config value: {str(e)}")
