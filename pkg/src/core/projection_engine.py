"""Projections in the symbolic calculus and in finite dimensions.

Symbol-level projections are SymbolExpansions truncated at the critical degree -(d+2);
components below it never reach the residue.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import orth, subspace_angles
from scipy.special import comb

from .errors import ContourHitsSpectrum, GapTooSmall, HeisenbergError, PathError, RangesDiffer
from .residue_engine import critical_degree, residue
from .symbol_algebra import (
    HomogeneousSymbol,
    SymbolExpansion,
    as_expansion,
    expansion_add,
    expansion_adjoint,
    expansion_mul,
    expansion_scale,
    fiber_defect,
    conjugate,
    givens_rotation,
    neumann_parametrix,
    random_symbol,
    resolved_block,
    symbol_scale,
    truncate,
    unit_expansion,
    unit_symbol,
)

logger = logging.getLogger(__name__)

CONTOUR_NODES = 64
MAX_CONTOUR_NODES = 4096
IDEMPOTENT_TOL = 1e-9


@dataclass(frozen=True)
class ProjectionOperator:
    expansion: SymbolExpansion
    realization: Optional[Tuple[np.ndarray, ...]] = field(default=None, compare=False)
    idempotency_defect: float = 0.0
    method: str = "symbolic"

    @property
    def principal(self) -> HomogeneousSymbol:
        return self.expansion.principal

    def report(self, tolerances: Optional[dict] = None) -> dict:
        value = residue(self.expansion) if self.expansion.components else 0j
        return {
            "residue": {"re": float(value.real), "im": float(value.imag)},
            "idempotency_defect": float(self.idempotency_defect),
            "method": self.method,
            "tolerances": dict(tolerances or {}),
        }


@dataclass(frozen=True)
class IdempotentSymbolPath:
    samples: Tuple[Tuple[float, HomogeneousSymbol], ...]

    def __post_init__(self):
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        times = [t for t, _ in samples]
        if len(times) < 2 or times[0] != 0.0 or times[-1] != 1.0:
            raise PathError("a path needs samples at t = 0 and t = 1")
        if any(a >= b for a, b in zip(times, times[1:])):
            raise PathError("path sample times must strictly increase")
        for t, symbol in samples:
            defect = max(float(np.max(np.abs(f @ f - f), initial=0.0)) for f in symbol.fibers())
            if defect > 1e-8:
                raise PathError(f"path sample at t = {t:.4f} is not idempotent (defect {defect:.3e})", defect)

    @property
    def continuity_modulus(self) -> float:
        return max(fiber_defect(a, b, resolved=False) for (_, a), (_, b) in zip(self.samples, self.samples[1:]))

    @property
    def times(self) -> List[float]:
        return [t for t, _ in self.samples]


def riesz_projection(matrix: np.ndarray, center: complex, radius: float, tol: float = 1e-8,
                     nodes: int = CONTOUR_NODES, max_nodes: int = MAX_CONTOUR_NODES, workers: int = 4) -> np.ndarray:
    """(2 pi i)^-1 times the contour integral of (z - A)^-1 over |z - center| = radius.

    The trapezoid rule is doubled from `nodes` until two successive results agree.
    """
    A = np.asarray(matrix, dtype=complex)
    eigenvalues = np.linalg.eigvals(A)
    distance = np.abs(np.abs(eigenvalues - center) - radius)
    if distance.size and distance.min() < tol:
        hit = eigenvalues[np.argmin(distance)]
        raise ContourHitsSpectrum(f"eigenvalue {hit:.6g} lies within {distance.min():.3e} of the contour", complex(hit))
    eye = np.eye(A.shape[0], dtype=complex)

    def trapezoid(count: int) -> np.ndarray:
        shifts = radius * np.exp(2j * np.pi * (np.arange(count) + 0.5) / count)
        with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
            terms = list(executor.map(lambda s: s * np.linalg.solve((center + s) * eye - A, eye), shifts))
        total = np.zeros_like(A)
        for term in terms:
            total += term
        return total / count

    previous = trapezoid(nodes)
    count = nodes
    while count < max_nodes:
        count *= 2
        current = trapezoid(count)
        change = float(np.max(np.abs(current - previous), initial=0.0))
        previous = current
        if change <= 1e-13 * max(1.0, float(np.max(np.abs(current), initial=0.0))):
            break
    else:
        logger.warning("contour quadrature reached %d nodes without settling", count)
    return previous


def orthogonalize_matrix(Pi: np.ndarray) -> np.ndarray:
    """Pi0 = Pi Pi* B^-1 with B = 1 + (Pi - Pi*)(Pi* - Pi)."""
    Pi = np.asarray(Pi, dtype=complex)
    Pi_star = Pi.conj().T
    B = np.eye(Pi.shape[0]) + (Pi - Pi_star) @ (Pi_star - Pi)
    return np.linalg.solve(B.T, (Pi @ Pi_star).T).T


def idempotency_defect(P: SymbolExpansion, workers: int = 4) -> float:
    """Largest resolved-block entry of P P - P over the retained degrees."""
    if not P.components:
        return 0.0
    n, rank, cutoff = P.signature()
    floor = critical_degree(n) if P.truncation_degree is None else P.truncation_degree
    square = truncate(expansion_mul(P, P, workers), floor)
    difference = expansion_add(square, expansion_scale(P, -1.0))
    defect = 0.0
    for c in difference.components:
        for fiber in c.fibers():
            defect = max(defect, float(np.max(np.abs(resolved_block(fiber, n, cutoff, rank)), initial=0.0)))
    return defect


def _involution(pi0: HomogeneousSymbol, lower: Optional[SymbolExpansion], floor: int, terms: int,
                workers: int) -> SymbolExpansion:
    """F = f sum_k binom(2k, k) 4^-k R^k with f = 2E - 1 and R = 1 - f^2."""
    n, rank, cutoff = pi0.signature()
    E = as_expansion(pi0) if lower is None or not lower.components else expansion_add(as_expansion(pi0), lower)
    unit = unit_expansion(n, cutoff, rank)
    f = truncate(expansion_add(expansion_scale(E, 2.0), expansion_scale(unit, -1.0)), floor)
    R = truncate(expansion_add(unit, expansion_scale(expansion_mul(f, f, workers), -1.0)), floor)
    # the degree-0 part of R vanishes when pi0 is idempotent
    R = SymbolExpansion(tuple(c for c in R.components if c.degree < 0), R.truncation_degree)
    series = unit
    power = unit
    for k in range(1, terms + 1):
        if not R.components:
            break
        power = truncate(expansion_mul(power, R, workers), floor)
        if not power.components:
            break
        series = expansion_add(series, expansion_scale(power, comb(2 * k, k) / 4.0 ** k))
    return truncate(expansion_mul(f, series, workers), floor)


def riesz_symbol_projection(F: SymbolExpansion, center: complex, radius: float, nodes: int = CONTOUR_NODES,
                            depth: Optional[int] = None, workers: int = 4) -> SymbolExpansion:
    """Expansion-level Riesz projection of a degree-0 expansion.

    (lambda - F)^-1 is the parametrix of lambda - F; the trapezoid rule runs on
    |lambda - center| = radius and the result is truncated at the critical degree.
    """
    principal = F.principal
    if principal.degree != 0:
        raise HeisenbergError(f"Riesz projections need a degree-0 expansion, got degree {principal.degree}")
    n, rank, cutoff = F.signature()
    floor = critical_degree(n)
    depth = -floor + 1 if depth is None else depth
    for fiber in principal.fibers():
        eigenvalues = np.linalg.eigvals(fiber)
        distance = np.abs(np.abs(eigenvalues - center) - radius)
        if distance.size and distance.min() < 1e-8:
            raise ContourHitsSpectrum(f"principal spectrum touches the contour (distance {distance.min():.3e})",
                                      complex(eigenvalues[np.argmin(distance)]))
    unit = unit_symbol(n, cutoff, rank)
    minus_F = expansion_scale(F, -1.0)

    def weighted_resolvent(shift: complex) -> SymbolExpansion:
        shifted = expansion_add(SymbolExpansion((symbol_scale(unit, center + shift),)), minus_F)
        return expansion_scale(truncate(neumann_parametrix(shifted, depth), floor), shift / nodes)

    shifts = radius * np.exp(2j * np.pi * (np.arange(nodes) + 0.5) / nodes)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        terms = list(executor.map(weighted_resolvent, shifts))
    total = terms[0]
    for term in terms[1:]:
        total = expansion_add(total, term)
    return truncate(total, floor)


def _gap_radius(F: SymbolExpansion, tol: float) -> float:
    """Radius between the spectrum near +1 and the spectrum near -1 of the principal fibers."""
    r1, r2 = 0.0, 2.0
    for fiber in F.principal.fibers():
        distance = np.abs(np.linalg.eigvals(fiber) - 1.0)
        near = distance[distance < 1.0]
        far = distance[distance >= 1.0]
        if near.size:
            r1 = max(r1, float(near.max()))
        if far.size:
            r2 = min(r2, float(far.min()))
    if r2 - r1 < 2.0 * tol:
        raise GapTooSmall(f"spectral gap around +1 is {r2 - r1:.3e}", r2 - r1)
    return r1 + 0.5 * (r2 - r1)


def projection_from_symbol(pi0: HomogeneousSymbol, lower_terms: Optional[SymbolExpansion] = None,
                           depth: Optional[int] = None, nodes: int = CONTOUR_NODES, tol: float = 1e-8,
                           workers: int = 4) -> ProjectionOperator:
    """A projection with leading symbol pi0 built through an involution and a contour integral.

    With E = pi0 + lower terms, F = (2E - 1) times the Taylor series of (1 - R)^(-1/2) in
    R = 1 - (2E - 1)^2 up to d + 2 terms, and the projection is the Riesz projection of F
    around +1.
    """
    if pi0.degree != 0:
        raise HeisenbergError(f"leading symbol must have degree 0, got {pi0.degree}")
    defect = max(float(np.max(np.abs(f @ f - f), initial=0.0)) for f in pi0.fibers())
    if defect > tol:
        raise HeisenbergError(f"leading symbol is not idempotent (defect {defect:.3e})", defect)
    n = pi0.n
    floor = critical_degree(n)
    terms = 2 * n + 2 if depth is None else depth
    F = _involution(pi0, lower_terms, floor, terms, workers)
    radius = _gap_radius(F, tol)
    expansion = riesz_symbol_projection(F, 1.0, radius, nodes, workers=workers)
    defect = idempotency_defect(expansion, workers)
    logger.info("projection from symbol: %d components, idempotency defect %.3e", len(expansion), defect)
    return ProjectionOperator(expansion, idempotency_defect=defect, method="symbolic")


def random_lower_terms(pi0: HomogeneousSymbol, rng: np.random.Generator, degrees: Sequence[int] = (-1, -2),
                       scale: float = 0.1) -> SymbolExpansion:
    n, rank, cutoff = pi0.signature()
    return as_expansion(*(random_symbol(rng, m, n, cutoff, rank, scale) for m in degrees))


def orthogonalize(P: ProjectionOperator, depth: Optional[int] = None, workers: int = 4) -> ProjectionOperator:
    """Pi0 = Pi Pi* B^-1 with B = 1 + (Pi - Pi*)(Pi* - Pi)."""
    Pi = P.expansion
    n, rank, cutoff = Pi.signature()
    floor = critical_degree(n)
    depth = -floor + 1 if depth is None else depth
    Pi_star = expansion_adjoint(Pi)
    D = expansion_add(Pi, expansion_scale(Pi_star, -1.0))
    B = truncate(expansion_add(unit_expansion(n, cutoff, rank),
                               expansion_scale(expansion_mul(D, D, workers), -1.0)), floor)
    B_inv = truncate(neumann_parametrix(B, depth), floor)
    Pi0 = truncate(expansion_mul(truncate(expansion_mul(Pi, Pi_star, workers), floor), B_inv, workers), floor)
    realization = None
    if P.realization is not None:
        realization = tuple(orthogonalize_matrix(block) for block in P.realization)
    return ProjectionOperator(Pi0, realization, idempotency_defect(Pi0, workers), P.method)


def complement(P: ProjectionOperator) -> ProjectionOperator:
    """1 - Pi."""
    n, rank, cutoff = P.expansion.signature()
    expansion = expansion_add(unit_expansion(n, cutoff, rank), expansion_scale(P.expansion, -1.0))
    realization = None
    if P.realization is not None:
        realization = tuple(np.eye(block.shape[0]) - block for block in P.realization)
    return ProjectionOperator(expansion, realization, P.idempotency_defect, P.method)


def _max_principal_angle(first: Sequence[np.ndarray], second: Sequence[np.ndarray]) -> float:
    worst = 0.0
    for a, b in zip(first, second):
        range_a, range_b = orth(a, rcond=1e-10), orth(b, rcond=1e-10)
        if range_a.shape[1] != range_b.shape[1]:
            return float(np.pi / 2)
        if range_a.shape[1] == 0:
            continue
        worst = max(worst, float(np.max(subspace_angles(range_a, range_b))))
    return worst


def same_range_residue(P1: ProjectionOperator, P2: ProjectionOperator, mode: str = "range",
                       angle_tol: float = 1e-8, residue_tol: float = 1e-6) -> dict:
    """Check that two projections share their range (or kernel) and compare residues."""
    if P1.realization is None or P2.realization is None:
        raise HeisenbergError("range comparison needs realizations of both projections")
    if len(P1.realization) != len(P2.realization):
        raise HeisenbergError("realizations live on different sector sets")
    if mode == "kernel":
        P1, P2 = complement(P1), complement(P2)
    elif mode != "range":
        raise HeisenbergError(f"unknown comparison mode {mode!r}")
    angle = _max_principal_angle(P1.realization, P2.realization)
    if angle > angle_tol:
        raise RangesDiffer(f"largest principal angle {angle:.3e} exceeds {angle_tol:.1e}", angle)
    res1 = residue(orthogonalize(P1).expansion)
    res2 = residue(orthogonalize(P2).expansion)
    if mode == "kernel":
        res1, res2 = -res1, -res2
    difference = abs(res1 - res2)
    return {
        "mode": mode,
        "max_principal_angle": angle,
        "residue_1": {"re": float(res1.real), "im": float(res1.imag)},
        "residue_2": {"re": float(res2.real), "im": float(res2.imag)},
        "difference": float(difference),
        "tolerance": residue_tol,
        "passed": bool(difference <= residue_tol),
    }


def rotation_path(pi0: HomogeneousSymbol, i: int, j: int, samples: int = 33,
                  angle: float = 0.5 * np.pi) -> IdempotentSymbolPath:
    """U(t) pi0 U(t)* with U(t) a Givens rotation of basis indices i, j by t * angle."""
    size = pi0.fiber_plus.shape[0]
    points = []
    for t in np.linspace(0.0, 1.0, samples):
        U = givens_rotation(size, i, j, t * angle)
        points.append((float(t), conjugate(pi0, U)))
    return IdempotentSymbolPath(tuple(points))


def transport_involution(path: IdempotentSymbolPath, P0: ProjectionOperator, P1: ProjectionOperator,
                         terms: Optional[int] = None, tolerance: float = 1e-6, workers: int = 4) -> dict:
    """Residue drift of the involutions G_t along a sampled idempotent path.

    G_t = f_t sum_k binom(2k, k) 4^-k R_t^k with f_t = 2 E_t - 1, where E_t is the path
    sample plus the lower terms of P0 and P1 blended linearly in t.
    """
    start, end = path.samples[0][1], path.samples[-1][1]
    if fiber_defect(start, P0.principal, resolved=False) > 1e-8 or fiber_defect(end, P1.principal, resolved=False) > 1e-8:
        raise PathError("path endpoints do not match the leading symbols of the projections")
    n = start.n
    floor = critical_degree(n)
    terms = 2 * n + 2 if terms is None else terms
    lower0 = SymbolExpansion(P0.expansion.components[1:], P0.expansion.truncation_degree)
    lower1 = SymbolExpansion(P1.expansion.components[1:], P1.expansion.truncation_degree)

    def residue_at(sample: Tuple[float, HomogeneousSymbol]) -> complex:
        t, symbol = sample
        lower = expansion_add(expansion_scale(lower0, 1.0 - t), expansion_scale(lower1, t))
        G = _involution(symbol, lower, floor, terms, 1)
        return residue(G)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        residues = list(executor.map(residue_at, path.samples))
    times = np.asarray(path.times)
    values = 0.5 * np.asarray(residues)
    drift = float(np.max(np.abs(np.diff(values) / np.diff(times)), initial=0.0))
    endpoint = abs(residue(P0.expansion) - residue(P1.expansion))
    return {
        "samples": len(path.samples),
        "continuity_modulus": path.continuity_modulus,
        "max_residue_drift": drift,
        "endpoint_difference": float(endpoint),
        "tolerance": tolerance,
        "passed": bool(drift <= tolerance and endpoint <= tolerance),
    }
