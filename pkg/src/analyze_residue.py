import argparse
import json
import logging
import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from core.config import load_config
from core.errors import ConfigError, HeisenbergError, YConditionFails
from core.geometry_ops import (
    dbar_kernel_projection,
    dbar_star_kernel_projection,
    folland_stein,
    kohn_laplacian,
    szego_relation_check,
    szego_symbol,
)
from core.group_model import y_condition
from core.nilmanifold_lab import build_model, lift, shell_kernel_fit
from core.residue_engine import (
    MEASURE_NOTE,
    IdempotentPair,
    density_report,
    density_to_csv,
    residue,
    residue_density,
    rho_R,
    szego_L,
)
from core.rumin import (
    complex_defects,
    contact_laplacians,
    dilation_scaling,
    hodge_relation_defect,
    laplacian_report,
    projection_defects,
    projection_operator,
    residue_duality,
    rumin_build,
    rumin_projections,
)
from core.symbol_algebra import (
    as_expansion,
    gaussian_symbol,
    invert_homogeneous,
    min_singular_values,
    star,
)
from core.symbol_io import load_symbol, save_sector_operator, save_symbol
from core.verify_suites import run_suite

logger = logging.getLogger("analyze_residue")

SLOPE_TOLERANCE = 0.02
CROSS_ROUTE_TOLERANCE = 0.05


def _complex(value):
    return {"re": float(np.real(value)), "im": float(np.imag(value))}


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return _complex(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def save_report(report, config, command):
    """Write output/<command>_report.json and return its path"""
    os.makedirs(config.output_dir, exist_ok=True)
    output_path = os.path.join(config.output_dir, f"{command}_report.json")
    with open(output_path, 'w') as output_file:
        json.dump(report, output_file, indent=4, default=_json_default)
    return output_path


def envelope(command, config, cutoff, **fields):
    """Common report header: cutoffs, tolerances and the measure normalization"""
    report = {
        "command": command,
        "hermite_cutoff": cutoff,
        "sector_M": config.sector_M,
        "seed": config.seed,
        "tolerances": dict(config.tolerances),
        "quadrature": dict(config.quadrature),
        "normalization": MEASURE_NOTE,
    }
    report.update(fields)
    return report


def section_cutoff(args, section, config):
    if args.hermite_cutoff is not None:
        return args.hermite_cutoff
    return int(section.get("hermite_cutoff", config.hermite_cutoff))


def section_model(args, section, config):
    """Nilmanifold model described by a command section, with --sectors and --hermite-cutoff on top"""
    return build_model(config, section, sector_M=args.sectors, hermite_cutoff=args.hermite_cutoff)


def run_verify(args, config):
    print(f"Running verify suite: {args.suite}")
    report = run_suite(args.suite, config)
    return report, report["passed"]


def szego_symbolic(n, k, cutoff, config):
    """Res S_k from projections over three lower-term seeds"""
    s = szego_symbol(k, n, cutoff)
    homogeneous = residue(as_expansion(s), real=True)
    seeds = (config.seed, config.seed + 1, config.seed + 2)
    realized = rho_R(IdempotentPair(s, 1, "trivial line bundle"), seeds)
    tolerance = config.tol("residue")
    return {
        "route": "symbolic",
        "homogeneous_residue": {"value": homogeneous, "tolerance": tolerance},
        "residue": {"value": realized["value"], "seed_spread": realized["spread"], "tolerance": tolerance},
        "seeds": realized["seeds"],
        "L": {"value": szego_L(realized["value"]), "tolerance": 0.5 * tolerance},
        "passed": bool(realized["spread"] <= tolerance),
    }


def szego_kernel_fit(args, k, section, config):
    """Kernel of s_k on the nilmanifold, fitted on dilation shells"""
    kernel = section.get("kernel", {})
    model = section_model(args, kernel, config)
    op = lift(as_expansion(szego_symbol(k, 1, model.hermite_cutoff)), model)
    shells = args.shells if args.shells is not None else int(kernel.get("shells", config.fit["shells"]))
    result = shell_kernel_fit(
        op,
        kernel.get("direction", [0.2, 0.9, 0.6]),
        shells=shells,
        ratio=float(kernel.get("ratio", config.fit["shell_ratio"])),
        largest=float(kernel.get("largest", 1.0)),
        exponents=tuple(kernel.get("exponents", [-4.0, 4.0, 8.0])),
        taper_fraction=float(config.fit["taper_fraction"]),
        tail_tol=kernel.get("tail_tol", config.tol("tail")),
        workers=config.workers,
    )
    c = result.fit.coefficient
    slope_error = abs(result.slope + 4.0) / 4.0
    return {
        "route": "kernel-fit",
        "model": model.as_dict(),
        "shells": result.as_dict(),
        "log_coefficient": {"value": _complex(c), "band": result.fit.band,
                            "vanishes": bool(abs(c) <= result.fit.band)},
        "phase_relation": {"c_S": _complex(result.phase_fit.coefficient),
                           "beta0": _complex(result.phase_fit.beta0),
                           "difference": float(abs(result.phase_fit.coefficient - c)),
                           "band": result.fit.band + result.phase_fit.band},
        "decay_slope": {"value": result.slope, "expected": -4.0, "relative_error": slope_error,
                        "tolerance": SLOPE_TOLERANCE},
        "L": {"value": szego_L(float(np.real(c)) * model.volume), "band": 0.5 * result.fit.band * model.volume},
        "passed": bool(abs(c) <= result.fit.band and slope_error <= SLOPE_TOLERANCE),
    }


def run_szego(args, config):
    section = config.command("szego")
    n = int(section.get("n", 1))
    k = int(section.get("k", 0))
    route = args.route or section.get("route", "symbolic")
    print(f"Running szego: n={n}, k={k}, route={route}")
    if route == "symbolic":
        cutoff = section_cutoff(args, section, config)
        body = szego_symbolic(n, k, cutoff, config)
    elif route == "kernel-fit":
        cutoff = section_model(args, section.get("kernel", {}), config).hermite_cutoff
        body = szego_kernel_fit(args, k, section, config)
    else:
        raise ConfigError(f"unknown route '{route}'")
    report = envelope("szego", config, cutoff, n=n, k=k, **body)
    return report, report["passed"]


def kohn_projection(builder, n, q, cutoff, config):
    try:
        P = builder(n, q, cutoff)
    except YConditionFails:
        raise
    except Exception as e:
        return {"Error": f"Projection failed: {str(e)}"}
    return P.report(config.tolerances)


def run_kohn(args, config):
    section = config.command("kohn")
    n = int(section.get("n", 2))
    q = int(section.get("q", 0))
    cutoff = section_cutoff(args, section, config)
    print(f"Running kohn: n={n}, q={q}")
    table = {str(p): y_condition(p, n, 0, n) for p in range(n + 1)}
    lowest = min_singular_values(kohn_laplacian(n, q, cutoff))
    report = envelope("kohn", config, cutoff, n=n, q=q, signature=[n, 0], y_condition=table,
                      kohn_min_singular_values={"plus": lowest[0], "minus": lowest[1],
                                                "invertible": bool(table[str(q)])})
    if q < n:
        report["kernel_projection_dbar"] = kohn_projection(dbar_kernel_projection, n, q, cutoff, config)
    if q > 0:
        report["kernel_projection_dbar_star"] = kohn_projection(dbar_star_kernel_projection, n, q, cutoff, config)
    if 0 < q < n:
        relation = szego_relation_check(n, q, cutoff)
        relation["tolerance"] = config.tol("idempotent")
        report["relation"] = relation
    defects = [v["idempotency_defect"] for key, v in report.items()
               if key.startswith("kernel_projection") and "idempotency_defect" in v]
    passed = all(d <= config.tol("idempotent") for d in defects)
    passed = passed and all("Error" not in v for key, v in report.items() if key.startswith("kernel_projection"))
    report["passed"] = bool(passed)
    return report, report["passed"]


def residue_symbol(section, cutoff):
    """Expansion named by the residue section"""
    if "symbol_file" in section:
        return load_symbol(section["symbol_file"], cutoff=section.get("hermite_cutoff")), "file"
    name = section.get("symbol", "gaussian")
    if name == "gaussian":
        return as_expansion(gaussian_symbol(1, cutoff)), name
    if name == "folland_stein":
        return as_expansion(folland_stein(float(section.get("lambda", 0.0)), 1, cutoff)), name
    if name == "folland_stein_inverse_square":
        inverse = invert_homogeneous(folland_stein(0.0, 1, cutoff))
        return as_expansion(star(inverse, inverse)), name
    raise ConfigError(f"unknown symbol '{name}'")


def run_residue(args, config):
    section = config.command("residue")
    cutoff = section_cutoff(args, section, config)
    expansion, name = residue_symbol(section, cutoff)
    print(f"Running residue: {name}")
    tolerance = config.tol("quadrature")
    density = residue_density(expansion, config.quadrature, method="plancherel")
    routes = {"plancherel": density_report(density, config.tol("residue"))}
    try:
        sphere = residue_density(expansion, config.quadrature, method="sphere", tol=tolerance)
        routes["sphere"] = density_report(sphere, tolerance)
    except HeisenbergError as e:
        routes["sphere"] = {"Error": f"Sphere quadrature failed: {str(e)}"}
    csv_path = density_to_csv(density, os.path.join(config.output_dir, "residue_density.csv"))
    bin_path, _ = save_symbol(expansion, os.path.join(config.output_dir, f"residue_{name}"))
    report = envelope("residue", config, expansion.signature()[2], symbol=name, degrees=expansion.degrees,
                      routes=routes, density_csv=csv_path, symbol_container=bin_path)
    if "residue" in routes["sphere"]:
        a = complex(routes["plancherel"]["residue"]["re"], routes["plancherel"]["residue"]["im"])
        b = complex(routes["sphere"]["residue"]["re"], routes["sphere"]["residue"]["im"])
        difference = abs(a - b) / max(abs(a), 1e-300) if abs(a) > 0 else abs(b)
        report["route_agreement"] = {"difference": difference, "tolerance": tolerance,
                                     "passed": bool(difference <= tolerance)}
    report["passed"] = bool(report.get("route_agreement", {}).get("passed", False))
    return report, report["passed"]


def run_rumin(args, config):
    section = config.command("rumin")
    model = section_model(args, section, config)
    print(f"Running rumin: M={model.sector_M}, N={model.hermite_cutoff}")
    ops = rumin_build(model, workers=config.workers)
    laplacians = contact_laplacians(ops)
    projections = rumin_projections(ops)
    defects = projection_defects(projections)
    report = envelope("rumin", config, model.hermite_cutoff, model=model.as_dict(),
                      complex_defects=complex_defects(ops),
                      laplacians=laplacian_report(laplacians, model),
                      projection_idempotency={"defects": defects, "tolerance": config.tol("idempotent")},
                      hodge_relation=hodge_relation_defect(projections, laplacians),
                      dilation_scaling=dilation_scaling(model, 1))
    try:
        report["duality"] = residue_duality(
            projections, model, section.get("direction", [0.2, 0.9, 0.6]),
            shells=int(section.get("shells", config.fit["shells"])),
            ratio=float(section.get("ratio", config.fit["shell_ratio"])),
            largest=float(section.get("largest", 1.0)),
            taper_fraction=float(config.fit["taper_fraction"]),
            tail_tol=section.get("tail_tol", config.tol("tail")),
        )
    except HeisenbergError as e:
        report["duality"] = {"Error": f"Duality fit failed: {str(e)}"}
    exports = {}
    for name in section.get("export", ["D"]):
        if name not in projections.projections:
            raise ConfigError(f"unknown Rumin projection '{name}'", name)
        bin_path, _ = save_sector_operator(projection_operator(projections, name, model),
                                           os.path.join(config.output_dir, f"rumin_pi0_{name}"))
        exports[name] = bin_path
    report["exports"] = exports
    report["passed"] = bool(max(defects.values()) <= config.tol("idempotent"))
    return report, report["passed"]


def run_fit(args, config):
    section = config.command("fit")
    model = section_model(args, section, config)
    shells = args.shells if args.shells is not None else int(section.get("shells", config.fit["shells"]))
    print(f"Running fit: M={model.sector_M}, N={model.hermite_cutoff}, shells={shells}")
    inverse = invert_homogeneous(folland_stein(0.0, 1, model.hermite_cutoff))
    expansion = as_expansion(star(inverse, inverse))
    symbolic = residue(expansion, real=True)
    result = shell_kernel_fit(
        lift(expansion, model),
        section.get("direction", [1.0, 0.0, 0.0]),
        shells=shells,
        ratio=float(section.get("ratio", 2.0 ** 0.125)),
        largest=float(section.get("largest", 1.2)),
        exponents=tuple(section.get("exponents", [4.0, 8.0])),
        taper_fraction=float(config.fit["taper_fraction"]),
        tail_tol=section.get("tail_tol", config.tol("tail")),
        workers=config.workers,
    )
    c = float(np.real(result.fit.coefficient))
    relative = abs(c - symbolic) / abs(symbolic)
    report = envelope("fit", config, model.hermite_cutoff, model=model.as_dict(),
                      symbol="folland_stein_inverse_square",
                      symbolic_density={"value": symbolic, "tolerance": config.tol("residue")},
                      kernel_fit=result.as_dict(),
                      relative_difference={"value": relative, "tolerance": CROSS_ROUTE_TOLERANCE},
                      passed=bool(relative <= CROSS_ROUTE_TOLERANCE))
    return report, report["passed"]


COMMANDS = {
    "verify": run_verify,
    "szego": run_szego,
    "kohn": run_kohn,
    "residue": run_residue,
    "rumin": run_rumin,
    "fit": run_fit,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="analyze-residue",
                                     description="Residues of Heisenberg pseudodifferential projections")
    parser.add_argument("--config", default="config.json", help="path to the JSON run configuration")
    parser.add_argument("--seed", type=int, help="seed for every random draw")
    parser.add_argument("--hermite-cutoff", type=int, help="Hermite levels per horizontal pair")
    parser.add_argument("--sectors", type=int, help="central sectors M of the nilmanifold model")
    parser.add_argument("--out", help="report directory")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)
    verify = commands.add_parser("verify", help="run a property suite")
    verify.add_argument("suite", nargs="?", default="all")
    szego = commands.add_parser("szego", help="residue of a Szego projection")
    szego.add_argument("--route", choices=["symbolic", "kernel-fit"])
    szego.add_argument("--shells", type=int)
    commands.add_parser("kohn", help="Kohn Laplacian kernel projections")
    commands.add_parser("residue", help="residue density of a symbol")
    commands.add_parser("rumin", help="Rumin complex projections")
    fit = commands.add_parser("fit", help="kernel-fit residue against the symbolic value")
    fit.add_argument("--shells", type=int)
    return parser


def main(argv=None):
    """Main function to run the analysis"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        config_path = args.config
        if config_path == "config.json" and not os.path.exists(config_path):
            config_path = None
        config = load_config(config_path)
        config = config.with_overrides(seed=args.seed, hermite_cutoff=args.hermite_cutoff,
                                       sector_M=args.sectors, output_dir=args.out)
        logger.debug("configuration: %s", config.as_dict())
        report, passed = COMMANDS[args.command](args, config)
        output_path = save_report(report, config, args.command)
        print("Analysis complete" if passed else "Analysis complete with failed checks")
        print(f"Results saved to {output_path}")
    except HeisenbergError as e:
        print(f"Error: {str(e)}")
        sys.exit(e.exit_code)
    except Exception as e:
        print(f"Error: {str(e)}")
        sys.exit(1)
    if not passed:
        sys.exit(1)


if __name__ == "__main__":
    main()
