"""Property suites run by the `verify` command.

Every check reports the measured defect next to its tolerance. A check that raises is
recorded as an error entry and counts as failed; the rest of the suite still runs.
"""

import logging
from dataclasses import replace
from typing import Callable, Dict, List

import numpy as np

from .config import RunConfig
from .errors import ConfigError, InsufficientShells, NotInvertible, YConditionFails
from .geometry_ops import (
    calibration_defects,
    conformal_covariance_check,
    dbar_b,
    dbar_kernel_projection,
    dbar_star_kernel_projection,
    folland_stein,
    interpolate_J,
    kohn_laplacian,
    path_signatures,
    szego_path_from_J,
    szego_relation_check,
    szego_symbol,
)
from .group_model import (
    HeisenbergGroupSpec,
    dilate,
    group_inverse,
    group_law,
    random_points,
    standard_dtheta,
    standard_J,
    structure_constants,
    y_condition,
)
from .nilmanifold_lab import (
    NilmanifoldModel,
    frame_operator,
    grid_convolution_oracle,
    lift,
    sector_commutator_defect,
    sector_idempotency_defect,
    spectral_kernel_projection,
)
from .projection_engine import (
    complement,
    orthogonalize,
    projection_from_symbol,
    random_lower_terms,
    rotation_path,
    same_range_residue,
    transport_involution,
)
from .residue_engine import (
    IdempotentPair,
    kernel_log_fit,
    quartic_sphere_area,
    quartic_sphere_area_elliptic,
    residue,
    rho_R,
    shell_samples,
    sphere_integral,
    synthesize_shell_data,
    trace_property_check,
)
from .rumin import (
    complex_defects,
    contact_D,
    contact_laplacians,
    hodge_relation_defect,
    laplacian_report,
    projection_defects,
    rumin_build,
    rumin_projections,
    dilation_scaling,
)
from .symbol_algebra import (
    HomogeneousSymbol,
    SymbolExpansion,
    adjoint_symbol,
    as_expansion,
    expansion_adjoint,
    expansion_mul,
    fiber_defect,
    frame_symbol,
    gaussian_symbol,
    invert_homogeneous,
    level_projector,
    min_singular_values,
    neumann_parametrix,
    random_expansion,
    random_symbol,
    remainder,
    star,
    symbol_add,
    symbol_scale,
    transpose_symbol,
    truncate,
    unit_symbol,
)

logger = logging.getLogger(__name__)

SUITES = ("algebra", "residue", "projections", "geometry", "rumin")

EXACT_TOL = 1e-12
ORTHOGONALIZE_TOL = 1e-8
SMALL_N2_CUTOFF = 6
SMALL_N4_CUTOFF = 3
LAB_SECTORS = 8


def _check(name: str, measure: Callable[[], object], tolerance: float) -> dict:
    """Run measure() and compare its defect with tolerance; a dict result may carry details."""
    try:
        value = measure()
        details = dict(value) if isinstance(value, dict) else {"defect": value}
        defect = float(details.pop("defect"))
        entry = {"check": name, "defect": defect, "tolerance": tolerance, "passed": bool(defect <= tolerance)}
        entry.update(details)
    except Exception as e:
        logger.debug("check %s raised %r", name, e)
        entry = {"check": name, "Error": f"{name} failed: {str(e)}", "passed": False}
    logger.info("%s: %s", name, "ok" if entry["passed"] else "FAILED")
    return entry


def _at_least(name: str, measure: Callable[[], float], bound: float) -> dict:
    try:
        value = float(measure())
        entry = {"check": name, "measured": value, "lower_bound": bound, "passed": bool(value >= bound)}
    except Exception as e:
        logger.debug("check %s raised %r", name, e)
        entry = {"check": name, "Error": f"{name} failed: {str(e)}", "passed": False}
    logger.info("%s: %s", name, "ok" if entry["passed"] else "FAILED")
    return entry


def _raises(error: type, action: Callable[[], object]) -> float:
    """0 when action raises error, 1 otherwise."""
    try:
        action()
    except error:
        return 0.0
    return 1.0


def _worst(parts: Dict[str, float]) -> dict:
    """Fold named defects into one, keeping the parts as details."""
    report = {k: float(v) for k, v in parts.items()}
    report["defect"] = max(report.values())
    return report


def _max_fiber(p: HomogeneousSymbol) -> float:
    return max(float(np.max(np.abs(f), initial=0.0)) for f in p.fibers())


def _expansion_defect(P: SymbolExpansion, Q: SymbolExpansion) -> float:
    difference = {c.degree: c for c in P.components}
    worst = 0.0
    for c in Q.components:
        if c.degree in difference:
            worst = max(worst, _max_fiber(symbol_add(difference.pop(c.degree), symbol_scale(c, -1.0))))
        else:
            worst = max(worst, _max_fiber(c))
    for c in difference.values():
        worst = max(worst, _max_fiber(c))
    return worst


# algebra


def _group_laws(rng: np.random.Generator) -> Dict[str, float]:
    assoc = inverse = automorphism = 0.0
    for n in (1, 2):
        points = random_points(rng, 3000, n)
        scales = rng.uniform(0.5, 2.0, 1000)
        for k in range(1000):
            x, y, z = points[3 * k:3 * k + 3]
            left = group_law(group_law(x, y), z).coords
            right = group_law(x, group_law(y, z)).coords
            assoc = max(assoc, float(np.max(np.abs(left - right))))
            inverse = max(inverse, float(np.max(np.abs(group_law(x, group_inverse(x)).coords))))
            t = scales[k]
            image = dilate(t, group_law(x, y)).coords
            product = group_law(dilate(t, x), dilate(t, y)).coords
            automorphism = max(automorphism, float(np.max(np.abs(image - product))))
    return {"associativity": assoc, "inverse": inverse, "dilation": automorphism}


def _commutation_table() -> float:
    worst = 0.0
    for n in (1, 2, 3):
        spec = HeisenbergGroupSpec(n)
        expected = np.zeros((spec.dim,) * 3)
        for j in range(1, n + 1):
            expected[j, n + j, 0] = -1.0
            expected[n + j, j, 0] = 1.0
        worst = max(worst, float(np.max(np.abs(structure_constants(spec) - expected))))
    return worst


def _star_laws(rng: np.random.Generator, N: int) -> Dict[str, float]:
    p, q, r = (random_symbol(rng, m, 1, N) for m in (1, -1, 0))
    scale = _max_fiber(p) * _max_fiber(q) * _max_fiber(r) * N
    left = star(star(p, q), r)
    right = star(p, star(q, r))
    unit = unit_symbol(1, N)
    adjoint = fiber_defect(adjoint_symbol(star(p, q)), star(adjoint_symbol(q), adjoint_symbol(p)), resolved=False)
    transpose = fiber_defect(transpose_symbol(star(p, q)), star(transpose_symbol(q), transpose_symbol(p)),
                             resolved=False)
    return {
        "defect": fiber_defect(left, right, resolved=False) / scale,
        "unit": fiber_defect(star(unit, p), p, resolved=False),
        "adjoint": adjoint,
        "transpose": transpose,
    }


def _expansion_associativity(rng: np.random.Generator, N: int) -> float:
    P = random_expansion(rng, (0, -1, -2), 1, N)
    Q = random_expansion(rng, (1, 0, -3), 1, N)
    R = random_expansion(rng, (-1, -2), 1, N)
    left = truncate(expansion_mul(expansion_mul(P, Q), R), -4)
    right = truncate(expansion_mul(P, expansion_mul(Q, R)), -4)
    return _expansion_defect(left, right) / N


def _inverse_and_parametrix(rng: np.random.Generator, N: int) -> Dict[str, float]:
    p = folland_stein(0.3, 1, N)
    inverse = fiber_defect(star(p, invert_homogeneous(p)), unit_symbol(1, N), resolved=False)
    P = as_expansion(p, random_symbol(rng, 1, 1, N, scale=0.1), random_symbol(rng, 0, 1, N, scale=0.1))
    depth = 6
    Q = neumann_parametrix(P, depth)
    leftover = [c for c in remainder(P, Q).components if c.degree > P.order - depth]
    return {"defect": inverse, "parametrix": max((_max_fiber(c) for c in leftover), default=0.0)}


def _frame_commutator(N: int) -> float:
    f0, f1, f2 = (frame_symbol(j, 1, N) for j in range(3))
    commutator = symbol_add(star(f1, f2), symbol_scale(star(f2, f1), -1.0))
    return fiber_defect(commutator, symbol_scale(f0, 1j), resolved=True)


def _oracle_unit(N: int) -> float:
    one = unit_symbol(1, N)
    product = grid_convolution_oracle(one, one)
    return float(np.max(np.abs(product.values - 1.0)))


def _oracle_gaussian(N: int) -> float:
    g = gaussian_symbol(1, N)
    product = grid_convolution_oracle(g, g)
    Q, P = np.meshgrid(product.q_axis, product.p_axis, indexing="ij")
    expected = 0.8 * np.exp(-0.8 * (Q ** 2 + P ** 2))
    return float(np.max(np.abs(product.values - expected)))


def algebra_suite(config: RunConfig) -> List[dict]:
    rng = np.random.default_rng(config.seed)
    N = config.hermite_cutoff
    return [
        _check("group_laws", lambda: _worst(_group_laws(rng)), EXACT_TOL),
        _check("commutation_table", _commutation_table, EXACT_TOL),
        _check("associativity", lambda: _worst(_star_laws(rng, N)), EXACT_TOL),
        _check("expansion_associativity", lambda: _expansion_associativity(rng, N), EXACT_TOL),
        _check("inverse_and_parametrix", lambda: _worst(_inverse_and_parametrix(rng, N)), 1e-10),
        _check("frame_commutator", lambda: _frame_commutator(N), EXACT_TOL),
        _check("oracle_unit_product", lambda: _oracle_unit(N), 1e-10),
        _check("oracle_gaussian_product", lambda: _oracle_gaussian(N), 1e-8),
    ]


# residue


def _sphere_area(config: RunConfig) -> dict:
    quad = {**config.quadrature, "measure": "invariant"}
    value = sphere_integral(lambda xi: np.ones(xi.shape[0]), 1, quad, vectorized=True, tol=config.tol("quadrature"))
    quadrature = float(np.real(value.reshape(-1)[0])) * (2.0 * np.pi) ** 3
    closed = quartic_sphere_area(1)
    elliptic = quartic_sphere_area_elliptic()
    return {
        "defect": max(abs(quadrature - closed), abs(elliptic - closed)) / closed,
        "area": closed,
    }


def _gaussian_routes(config: RunConfig, N: int) -> dict:
    g = as_expansion(gaussian_symbol(1, N))
    expected = (1.0 - 3.0 ** (-N)) / np.pi ** 2
    plancherel = residue(g, method="plancherel")
    quad = {**config.quadrature, "measure": "invariant", "phi_nodes": 96, "omega_nodes": 64, "equator_band": 0.01}
    sphere = residue(g, quad=quad, method="sphere")
    return {
        "defect": max(abs(sphere - plancherel) / abs(plancherel), abs(plancherel - expected)),
        "plancherel": float(plancherel.real),
        "sphere": float(sphere.real),
    }


def _trace_property(rng: np.random.Generator, N: int, pairs: int = 20) -> float:
    worst = 0.0
    for _ in range(pairs):
        degrees = [sorted(rng.choice(np.arange(-4, 3), size=3, replace=False), reverse=True) for _ in range(2)]
        A = random_expansion(rng, degrees[0], 1, N)
        B = random_expansion(rng, degrees[1], 1, N)
        scale = max(1.0, max(c.scale() for c in A.components) * max(c.scale() for c in B.components) * N)
        worst = max(worst, trace_property_check(A, B) / scale)
    return worst


def _vanishing(rng: np.random.Generator, N: int) -> Dict[str, float]:
    f0, f1, f2 = (frame_symbol(j, 1, N) for j in range(3))
    differential = as_expansion(folland_stein(0.5, 1, N), f1, unit_symbol(1, N))
    truncated = random_expansion(rng, (-5, -6, -7), 1, N)
    projection = as_expansion(szego_symbol(0, 1, N))
    return {
        "differential": abs(residue(differential)) + abs(residue(as_expansion(star(f0, f0)))),
        "below_critical": abs(residue(truncated)),
        "homogeneous_projection": abs(residue(projection)),
    }


def _synthetic_fit() -> dict:
    offsets = shell_samples([1.0, 0.5, -0.3], shells=9, ratio=2.0 ** 0.25)
    data = synthesize_shell_data(0.7, {2.0: 0.3, 4.0: -0.1}, offsets, constant=1.2)
    norm = kernel_log_fit(data, exponents=(2.0, 4.0))
    phase = kernel_log_fit(data, exponents=(2.0, 4.0), log_variable="phase")
    short = _raises(InsufficientShells, lambda: kernel_log_fit(data[:3]))
    return {
        "defect": max(abs(norm.coefficient - 0.7), abs(phase.coefficient - norm.coefficient), short),
        "coefficient": float(norm.coefficient.real),
        "band": norm.band,
    }


def residue_suite(config: RunConfig) -> List[dict]:
    rng = np.random.default_rng(config.seed)
    N = config.hermite_cutoff
    return [
        _check("sphere_area", lambda: _sphere_area(config), 1e-6),
        _check("gaussian_plancherel_vs_sphere", lambda: _gaussian_routes(config, N), config.tol("quadrature")),
        _check("trace_property", lambda: _trace_property(rng, N), config.tol("residue")),
        _check("vanishing_laws", lambda: _worst(_vanishing(rng, N)), 1e-8),
        _check("synthetic_kernel_fit", _synthetic_fit, 1e-8),
    ]


# projections


def _idempotents(rng: np.random.Generator, N: int, count: int) -> List[HomogeneousSymbol]:
    symbols = []
    for k in range(count):
        plus = level_projector(1, N, [0, 1] if k % 2 else [0])
        minus = level_projector(1, N, [2] if k % 3 else [])
        if k % 3 == 1:
            Z = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
            U, _ = np.linalg.qr(Z)
            plus, minus = U @ plus @ U.conj().T, U @ minus @ U.conj().T
        elif k % 3 == 2:
            S = np.eye(N) + 0.2 * rng.standard_normal((N, N)) / np.sqrt(N)
            S_inv = np.linalg.inv(S)
            plus, minus = S @ plus @ S_inv, S @ minus @ S_inv
        symbols.append(HomogeneousSymbol(0, 1, 1, N, plus, minus))
    return symbols


def _projection_laws(rng: np.random.Generator, N: int, count: int, workers: int) -> Dict[str, float]:
    idempotency = imaginary = adjoint = complementary = orthogonal = 0.0
    for pi0 in _idempotents(rng, N, count):
        P = projection_from_symbol(pi0, random_lower_terms(pi0, rng), workers=workers)
        value = residue(P.expansion)
        idempotency = max(idempotency, P.idempotency_defect)
        imaginary = max(imaginary, abs(value.imag))
        adjoint = max(adjoint, abs(residue(expansion_adjoint(P.expansion)) - value))
        complementary = max(complementary, abs(residue(complement(P).expansion) + value))
        P0 = orthogonalize(P, workers=workers)
        hermitian = _expansion_defect(P0.expansion, expansion_adjoint(P0.expansion))
        orthogonal = max(orthogonal, P0.idempotency_defect, hermitian)
    return {
        "idempotency": idempotency,
        "imaginary_part": imaginary,
        "adjoint": adjoint,
        "complement": complementary,
        "orthogonalized": orthogonal,
    }


def _rho_R(N: int, seed: int) -> Dict[str, float]:
    a = HomogeneousSymbol(0, 1, 1, N, level_projector(1, N, [0]), level_projector(1, N, [0, 1]))
    b = HomogeneousSymbol(0, 1, 1, N, level_projector(1, N, [1, 2]), level_projector(1, N, []))
    seeds = (seed, seed + 1, seed + 2)
    first = rho_R(IdempotentPair(a, 1), seeds)
    second = rho_R(IdempotentPair(b, 1), seeds)
    summed = HomogeneousSymbol(0, 2, 1, N, np.kron(np.diag([1.0, 0.0]), a.fiber_plus)
                               + np.kron(np.diag([0.0, 1.0]), b.fiber_plus),
                               np.kron(np.diag([1.0, 0.0]), a.fiber_minus)
                               + np.kron(np.diag([0.0, 1.0]), b.fiber_minus))
    total = rho_R(IdempotentPair(summed, 2), seeds)
    return {
        "seed_spread": max(first["spread"], second["spread"], total["spread"]),
        "additivity": abs(total["value"] - first["value"] - second["value"]),
    }


def _same_range(rng: np.random.Generator, N: int, workers: int) -> dict:
    pi0 = HomogeneousSymbol(0, 1, 1, N, level_projector(1, N, [0]), level_projector(1, N, [1]), self_adjoint=True)
    first = projection_from_symbol(pi0, random_lower_terms(pi0, rng), workers=workers)
    second = projection_from_symbol(pi0, random_lower_terms(pi0, rng), workers=workers)
    realization = tuple(pi0.fibers())
    report = same_range_residue(replace(first, realization=realization), replace(second, realization=realization))
    return {"defect": report["difference"], "max_principal_angle": report["max_principal_angle"]}


def _rotation_transport(rng: np.random.Generator, N: int, workers: int) -> dict:
    pi0 = HomogeneousSymbol(0, 1, 1, N, level_projector(1, N, [0]), level_projector(1, N, [0]), self_adjoint=True)
    path = rotation_path(pi0, 0, 1, samples=33)
    start, end = path.samples[0][1], path.samples[-1][1]
    P0 = projection_from_symbol(start, random_lower_terms(start, rng), workers=workers)
    P1 = projection_from_symbol(end, random_lower_terms(end, rng), workers=workers)
    report = transport_involution(path, P0, P1, workers=workers)
    return {
        "defect": max(report["max_residue_drift"], report["endpoint_difference"]),
        "continuity_modulus": report["continuity_modulus"],
    }


def _y_table(N: int) -> dict:
    mismatches = 0
    for n in range(1, 7):
        for q in range(n + 1):
            if y_condition(q, n, 0, n) != (q not in (0, n)):
                mismatches += 1
    example = [y_condition(1, 3, 1, 4), y_condition(0, 3, 1, 4), y_condition(2, 3, 1, 4)]
    mismatches += int(example != [False, True, True])
    gated = _raises(YConditionFails, lambda: dbar_star_kernel_projection(1, 1, N))
    gated += _raises(YConditionFails, lambda: dbar_kernel_projection(1, 0, N))
    return {"defect": float(mismatches) + gated, "mismatches": mismatches}


def projections_suite(config: RunConfig) -> List[dict]:
    rng = np.random.default_rng(config.seed)
    N = config.hermite_cutoff
    workers = config.workers
    residue_tol = config.tol("residue")
    laws = _check("projection_laws", lambda: _worst(_projection_laws(rng, N, 10, workers)), ORTHOGONALIZE_TOL)
    return [
        laws,
        _check("rho_R", lambda: _worst(_rho_R(N, config.seed)), residue_tol),
        _check("same_range_residue", lambda: _same_range(rng, N, workers), residue_tol),
        _check("rotation_path_transport", lambda: _rotation_transport(rng, N, workers), residue_tol),
        _check("y_condition_table", lambda: _y_table(N), 0.0),
    ]


# geometry


def _folland_stein_scan(n: int, N: int) -> dict:
    mismatches = 0
    zeros = []
    for j in range(-32, 33):
        lam = j / 8.0
        offset = abs(lam) - n / 2.0
        expected_zero = offset >= 0 and float(offset).is_integer()
        smallest = min(min_singular_values(folland_stein(lam, n, N)))
        if expected_zero:
            zeros.append(lam)
            mismatches += int(smallest >= 1e-8)
        else:
            mismatches += int(smallest <= 0.1)
    return {"defect": float(mismatches), "zeros": zeros}


def _kohn_facts(N: int, N2: int) -> Dict[str, float]:
    box = kohn_laplacian(1, 0, N)
    dbar_squared = star(dbar_b(2, 1, N2), dbar_b(2, 0, N2))
    return {
        "kohn_is_folland_stein": fiber_defect(box, folland_stein(0.5, 1, N), resolved=True),
        "dbar_squared": _max_fiber(dbar_squared),
        "kohn_n1_q0_not_invertible": _raises(NotInvertible, lambda: invert_homogeneous(box)),
        "kernel_projection_idempotency": dbar_kernel_projection(2, 0, N2).idempotency_defect,
    }


def _szego_symbols(N: int) -> float:
    s0, s1 = szego_symbol(0, 1, N), szego_symbol(1, 1, N)
    worst = 0.0
    for s in (s0, s1):
        worst = max(worst, fiber_defect(star(s, s), s, resolved=False), fiber_defect(adjoint_symbol(s), s, resolved=False))
    return max(worst, _max_fiber(star(s0, s1)))


def _j_path(n: int) -> dict:
    J = standard_J(n)
    dtheta = standard_dtheta(n)
    A = np.diag([2.0] + [1.0] * (n - 1))
    S = np.block([[A, np.zeros((n, n))], [np.zeros((n, n)), np.linalg.inv(A).T]])
    Jp = S @ J @ np.linalg.inv(S)
    path = interpolate_J(J, Jp, dtheta)
    worst = 0.0
    for J_t in path.structures:
        problems = calibration_defects(J_t, dtheta)
        if problems["min_positivity"] <= 0:
            worst = max(worst, 1.0)
        worst = max(worst, problems["square"], problems["symplectic"])
    signatures = path_signatures(path, dtheta)
    changes = sum(1 for s in signatures if s != signatures[0])
    return {"defect": worst + changes, "samples": len(path.times), "continuity_modulus": path.continuity_modulus}


def _szego_j_transport(rng: np.random.Generator, N: int, workers: int) -> dict:
    J = standard_J(1)
    S = np.diag([2.0, 0.5])
    path = szego_path_from_J(J, S @ J @ np.linalg.inv(S), 0, N)
    start, end = path.samples[0][1], path.samples[-1][1]
    P0 = projection_from_symbol(start, random_lower_terms(start, rng), workers=workers)
    P1 = projection_from_symbol(end, random_lower_terms(end, rng), workers=workers)
    report = transport_involution(path, P0, P1, workers=workers)
    return {"defect": max(report["max_residue_drift"], report["endpoint_difference"]),
            "continuity_modulus": report["continuity_modulus"]}


def geometry_suite(config: RunConfig) -> List[dict]:
    rng = np.random.default_rng(config.seed)
    N = config.hermite_cutoff
    N2 = min(N, SMALL_N2_CUTOFF)
    N4 = min(N, SMALL_N4_CUTOFF)
    return [
        _check("folland_stein_scan_n1", lambda: _folland_stein_scan(1, N), 0.0),
        _check("folland_stein_scan_n2", lambda: _folland_stein_scan(2, N2), 0.0),
        _check("kohn_and_dbar", lambda: _worst(_kohn_facts(N, N2)), 1e-9),
        _at_least("kohn_n2_q1_lowest_singular_value", lambda: min(min_singular_values(kohn_laplacian(2, 1, N2))), 0.1),
        _check("szego_relation_n4_q2", lambda: szego_relation_check(4, 2, N4)["defect"], 1e-9),
        _check("szego_symbols", lambda: _szego_symbols(N), 1e-10),
        _check("conformal_covariance", lambda: _covariance(N), 1e-10),
        _check("j_interpolation_n1", lambda: _j_path(1), 1e-10),
        _check("j_interpolation_n2", lambda: _j_path(2), 1e-10),
        _check("szego_path_from_J_transport", lambda: _szego_j_transport(rng, N, config.workers), config.tol("residue")),
    ]


def _covariance(N: int) -> dict:
    report = conformal_covariance_check(0, 1, 0.3, N)
    return {"defect": max(report["scaling_defect"], report["frame_map_defect"], report["flip_defect"])}


# rumin and nilmanifold model


def _lab_model(config: RunConfig) -> NilmanifoldModel:
    return NilmanifoldModel(config.central_period, min(config.sector_M, LAB_SECTORS),
                            max(config.hermite_cutoff, 16), config.abelian_K)


def _zero_sector_kernels(laplacians) -> dict:
    index = laplacians.labels.index(0)
    dims = {}
    for name, expected in (("delta0", 1), ("delta11", 2)):
        values = np.linalg.eigvalsh(laplacians.by_name()[name][index])
        threshold = 1e-8 * max(1.0, float(np.max(np.abs(values))))
        dims[name] = int(np.sum(np.abs(values) < threshold))
    mismatches = int(dims["delta0"] != 1) + int(dims["delta11"] != 2)
    return {"defect": float(mismatches), "kernel_dimensions": dims}


def _scaling(model: NilmanifoldModel) -> dict:
    measured = dilation_scaling(model, 1)
    expected = {"d0": 1.0, "D": 2.0, "delta0": 2.0, "delta11": 4.0}
    report = {"defect": max(abs(measured[k] - v) for k, v in expected.items())}
    report["exponents"] = measured
    return report


def _center_part(model: NilmanifoldModel) -> float:
    tau = 2.0 * np.pi / model.central_period
    difference = contact_D(model, 1, True) - contact_D(model, 1, False)
    return float(np.max(np.abs(difference - 1j * tau * np.eye(difference.shape[0])))) / tau


def _lift_checks(rng: np.random.Generator, model: NilmanifoldModel) -> Dict[str, float]:
    N = model.hermite_cutoff
    frames = 0.0
    for j in range(3):
        lifted = lift(as_expansion(frame_symbol(j, 1, N)), model)
        target = frame_operator(j, model)
        frames = max(frames, float(np.max(np.abs(lifted.blocks + 1j * target.blocks))),
                     float(np.max(np.abs(lifted.abelian + 1j * target.abelian))))
    p, q = random_symbol(rng, 1, 1, N), random_symbol(rng, -1, 1, N)
    product = lift(as_expansion(p), model) @ lift(as_expansion(q), model)
    direct = lift(as_expansion(star(p, q)), model)
    scale = max(1.0, float(np.max(np.abs(direct.blocks))))
    algebra = float(np.max(np.abs(product.blocks - direct.blocks))) / scale
    return {"frames": frames, "algebra_map": algebra}


def _spectral_projection(model: NilmanifoldModel, workers: int) -> dict:
    N = model.hermite_cutoff
    op = lift(as_expansion(folland_stein(0.5, 1, N)), model)
    projection = spectral_kernel_projection(op, workers=workers)
    szego = lift(as_expansion(szego_symbol(0, 1, N)), model)
    abelian_rank = float(np.real(np.trace(projection.abelian)))
    return _worst({
        "szego_blocks": float(np.max(np.abs(projection.blocks - szego.blocks))),
        "idempotency": sector_idempotency_defect(projection),
        "abelian_rank": abs(abelian_rank - 1.0),
    })


def rumin_suite(config: RunConfig) -> List[dict]:
    rng = np.random.default_rng(config.seed)
    model = _lab_model(config)
    ops = rumin_build(model, workers=config.workers)
    laplacians = contact_laplacians(ops)
    projections = rumin_projections(ops)
    report = laplacian_report(laplacians, model)
    return [
        _check("complex_identities", lambda: _worst(complex_defects(ops)), EXACT_TOL),
        _check("laplacians_hermitian", lambda: max(r["hermitian_defect"] for r in report.values()), 1e-10),
        _at_least("laplacian_scaled_lower_bound", lambda: min(r["scaled_lower_bound"] for r in report.values()), 1e-6),
        _check("zero_sector_kernels", lambda: _zero_sector_kernels(laplacians), 0.0),
        _check("projection_idempotency", lambda: _worst(projection_defects(projections)), config.tol("idempotent")),
        _check("hodge_relation", lambda: _worst(hodge_relation_defect(projections, laplacians)), 1e-6),
        _check("dilation_scaling", lambda: _scaling(model), 1e-9),
        _check("contact_D_center", lambda: _center_part(model), EXACT_TOL),
        _check("sector_commutators", lambda: _worst(sector_commutator_defect(model)), 1e-10),
        _check("lift", lambda: _worst(_lift_checks(rng, model)), EXACT_TOL),
        _check("spectral_kernel_projection", lambda: _spectral_projection(model, config.workers), 1e-8),
    ]


SUITE_RUNNERS: Dict[str, Callable[[RunConfig], List[dict]]] = {
    "algebra": algebra_suite,
    "residue": residue_suite,
    "projections": projections_suite,
    "geometry": geometry_suite,
    "rumin": rumin_suite,
}


def run_suite(name: str, config: RunConfig) -> dict:
    """Run one suite, or every suite for name 'all'."""
    if name == "all":
        results = {suite: run_suite(suite, config) for suite in SUITES}
        return {
            "suite": "all",
            "hermite_cutoff": config.hermite_cutoff,
            "seed": config.seed,
            "suites": results,
            "passed": all(r["passed"] for r in results.values()),
        }
    if name not in SUITE_RUNNERS:
        raise ConfigError(f"unknown suite '{name}'; choose from {', '.join(SUITES + ('all',))}", name)
    logger.info("running %s suite", name)
    checks = SUITE_RUNNERS[name](config)
    return {
        "suite": name,
        "hermite_cutoff": config.hermite_cutoff,
        "seed": config.seed,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
