"""Noncommutative residue: densities, integrated residues, kernel log-coefficient fits."""

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import beta, ellipk, gamma, roots_legendre

from .config import DEFAULT_QUADRATURE
from .errors import DimensionMismatch, HeisenbergError, InsufficientShells, QuadratureUnstable, ResidualsNotMonotone
from .group_model import FrameMap, GroupPoint, dilate
from .symbol_algebra import (
    HomogeneousSymbol,
    SymbolExpansion,
    component,
    expansion_mul,
    scalar_eval,
)

logger = logging.getLogger(__name__)

MEASURE_NOTE = ("d xi on |xi| = 1 is the dilation-invariant form i_E d xi normalized by (2 pi)^-(d+1); "
                "the Euclidean induced measure rescales every residue by one global constant")
MIN_SHELLS = 4
RESIDUAL_TOL = 1e-2


@dataclass(frozen=True)
class ResidueDensity:
    values: np.ndarray
    jacobian_factor: np.ndarray
    base_measure: float = 1.0
    method: str = "plancherel"
    measure: str = "invariant"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim == 2:
            values = values[None]
        if values.shape[0] < 1:
            raise HeisenbergError("a residue density needs at least one sample")
        jacobian = np.broadcast_to(np.asarray(self.jacobian_factor, dtype=float), (values.shape[0],)).copy()
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "jacobian_factor", jacobian)

    @property
    def traces(self) -> np.ndarray:
        return np.trace(self.values, axis1=1, axis2=2) * self.jacobian_factor


@dataclass(frozen=True)
class IdempotentPair:
    symbol: HomogeneousSymbol
    bundle_rank: int
    trivialization_note: str = ""

    def __post_init__(self):
        if self.symbol.degree != 0:
            raise HeisenbergError(f"idempotent pairs carry degree-0 symbols, got degree {self.symbol.degree}")
        if self.bundle_rank != self.symbol.rank:
            raise DimensionMismatch(f"bundle rank {self.bundle_rank} differs from symbol rank {self.symbol.rank}")
        defect = max(float(np.max(np.abs(f @ f - f), initial=0.0)) for f in self.symbol.fibers())
        if defect > 1e-8:
            raise HeisenbergError(f"symbol is not idempotent (defect {defect:.3e})", defect)


@dataclass
class KernelFit:
    coefficient: complex
    band: float
    shells: int
    residual: float
    exponents: Tuple[float, ...]
    log_variable: str = "norm"
    beta0: Optional[complex] = None
    jackknife: List[complex] = field(default_factory=list)
    method: str = "kernel-fit"

    def as_dict(self) -> dict:
        report = {
            "coefficient": {"re": float(np.real(self.coefficient)), "im": float(np.imag(self.coefficient))},
            "band": float(self.band),
            "shells": self.shells,
            "residual": float(self.residual),
            "exponents": [float(e) for e in self.exponents],
            "log_variable": self.log_variable,
            "method": self.method,
        }
        if self.beta0 is not None:
            report["beta0"] = {"re": float(np.real(self.beta0)), "im": float(np.imag(self.beta0))}
        return report


def critical_degree(n: int) -> int:
    return -(2 * n + 2)


def partial_trace(fiber: np.ndarray, rank: int) -> np.ndarray:
    """Trace over the Hermite factor, leaving a rank x rank matrix."""
    B = fiber.shape[0] // rank
    return np.einsum("ahbh->ab", fiber.reshape(rank, B, rank, B))


def plancherel_value(p: HomogeneousSymbol) -> np.ndarray:
    """Integral of p over |xi| = 1 against the invariant measure, from the fiber traces."""
    scale = 2.0 * (2.0 * np.pi) ** (-(p.n + 1))
    return scale * (partial_trace(p.fiber_plus, p.rank) + partial_trace(p.fiber_minus, p.rank))


def quartic_sphere_area(n: int) -> float:
    """Invariant area of |xi| = 1 in R^(2n+1), unnormalized."""
    d = 2 * n
    ball = (2.0 * gamma(1.25)) ** d / gamma(d / 4.0 + 1.0)
    return float(d * ball * beta(d / 4.0, 0.5))


def quartic_sphere_area_elliptic() -> float:
    """The n = 1 area as 4 pi K(1/2)."""
    return float(4.0 * np.pi * ellipk(0.5))


def _circle(count: int) -> Tuple[np.ndarray, np.ndarray]:
    angles = 2.0 * np.pi * np.arange(count) / count
    return angles, np.full(count, 2.0 * np.pi / count)


def sphere_nodes(n: int, phi_nodes: int, omega_nodes: int, measure: str = "invariant") -> Tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes on |xi| = 1 and their weights.

    xi0 = cos(phi), xi' = sqrt(sin(phi)) s / |s|_4 with s on the unit sphere of R^d; the
    invariant measure is sin(phi)^((d-2)/2) |s|_4^(-d) d phi dS. phi = pi (1 - cos theta) / 2
    with Gauss-Legendre in theta.
    """
    if n not in (1, 2):
        raise DimensionMismatch(f"sphere quadrature is available for n = 1, 2, got {n}", n)
    d = 2 * n
    x, w = roots_legendre(phi_nodes)
    theta = 0.5 * np.pi * (x + 1.0)
    phi = 0.5 * np.pi * (1.0 - np.cos(theta))
    phi_weights = w * 0.5 * np.pi * 0.5 * np.pi * np.sin(theta)
    if n == 1:
        angles, angle_weights = _circle(omega_nodes)
        s = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        s_weights = angle_weights
    else:
        ya, wa = roots_legendre(max(4, phi_nodes // 2))
        alpha = 0.25 * np.pi * (ya + 1.0)
        alpha_weights = 0.25 * np.pi * wa * np.sin(alpha) * np.cos(alpha)
        beta_count = max(8, omega_nodes // 4)
        b, bw = _circle(beta_count)
        A, B1, B2 = np.meshgrid(alpha, b, b, indexing="ij")
        WA, W1, W2 = np.meshgrid(alpha_weights, bw, bw, indexing="ij")
        s = np.stack([np.cos(A) * np.cos(B1), np.sin(A) * np.cos(B2),
                      np.cos(A) * np.sin(B1), np.sin(A) * np.sin(B2)], axis=-1).reshape(-1, 4)
        s_weights = (WA * W1 * W2).reshape(-1)
    quartic = np.sum(s ** 4, axis=1) ** 0.25
    direction = s / quartic[:, None]
    PHI, IDX = np.meshgrid(phi, np.arange(s.shape[0]), indexing="ij")
    points = np.concatenate([np.cos(PHI)[..., None],
                             (np.sqrt(np.sin(PHI))[..., None] * direction[IDX])], axis=-1).reshape(-1, d + 1)
    weights = (phi_weights[:, None] * (np.sin(phi)[:, None] ** ((d - 2) / 2.0))
               * (s_weights * quartic ** (-d))[None, :]).reshape(-1)
    if measure == "euclidean":
        weights = weights * np.sqrt(points[:, 0] ** 2 / 4.0 + np.sum(points[:, 1:] ** 6, axis=1))
    elif measure != "invariant":
        raise HeisenbergError(f"unknown measure {measure!r}")
    return points, weights


def sphere_integral(func: Callable[[np.ndarray], np.ndarray], n: int, quad: Optional[dict] = None,
                    vectorized: bool = False, tol: float = 1e-4, workers: int = 4) -> np.ndarray:
    """(2 pi)^-(d+1) times the integral of func over |xi| = 1, checked against a refined mesh."""
    quad = {**DEFAULT_QUADRATURE, **(quad or {})}
    measure = quad["measure"]

    def integrate(phi_nodes: int, omega_nodes: int) -> np.ndarray:
        points, weights = sphere_nodes(n, phi_nodes, omega_nodes, measure)
        if vectorized:
            values = np.asarray(func(points), dtype=complex)
        else:
            with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
                values = np.asarray(list(executor.map(func, points)), dtype=complex)
        values = values.reshape(points.shape[0], -1)
        return np.tensordot(weights, values, axes=1) * (2.0 * np.pi) ** (-(2 * n + 1))

    coarse = integrate(quad["phi_nodes"], quad["omega_nodes"])
    fine = integrate(2 * quad["phi_nodes"], 2 * quad["omega_nodes"])
    scale = max(float(np.max(np.abs(fine))), 1e-300)
    change = float(np.max(np.abs(fine - coarse))) / scale
    if change > tol and float(np.max(np.abs(fine))) > 1e-14:
        raise QuadratureUnstable(f"refining the sphere mesh changed the integral by rel {change:.3e}", change)
    logger.debug("sphere integral converged, refinement change %.3e", change)
    return fine


def residue_density(P: SymbolExpansion, quad: Optional[dict] = None, method: str = "plancherel",
                    jacobian: float = 1.0, base_measure: float = 1.0, tol: float = 1e-4) -> ResidueDensity:
    """c_P = |psi'| times the integral of the degree -(d+2) component over |xi| = 1.

    method "plancherel" reads the integral off the fiber traces; "sphere" integrates
    scalar_eval over the quartic sphere (required for the Euclidean measure).
    """
    if not P.components:
        raise HeisenbergError("cannot take the residue density of an empty expansion without its dimensions")
    n, rank, _ = P.signature()
    target = critical_degree(n)
    if P.truncation_degree is not None and P.truncation_degree > target:
        raise HeisenbergError(f"expansion truncated at degree {P.truncation_degree}, above {target}")
    quad = {**DEFAULT_QUADRATURE, **(quad or {})}
    measure = quad["measure"]
    if measure == "euclidean":
        method = "sphere"
    critical = component(P, target)
    if critical is None:
        return ResidueDensity(np.zeros((rank, rank)), jacobian, base_measure, method, measure)
    if method == "plancherel":
        value = plancherel_value(critical)
    elif method == "sphere":
        band = quad["equator_band"]
        value = sphere_integral(lambda xi: scalar_eval(critical, xi, band), n, quad, tol=tol).reshape(rank, rank)
    else:
        raise HeisenbergError(f"unknown residue method {method!r}")
    return ResidueDensity(value, jacobian, base_measure, method, measure)


def residue(P, quad: Optional[dict] = None, method: str = "plancherel", real: bool = False,
            imag_tol: float = 1e-8) -> complex:
    """Res P: integrated trace of the residue density against the base measure."""
    density = P if isinstance(P, ResidueDensity) else residue_density(P, quad, method)
    samples = density.traces
    value = complex(np.sum(samples) * density.base_measure / samples.size)
    if real:
        if abs(value.imag) > imag_tol:
            raise HeisenbergError(f"residue of a projection has imaginary part {value.imag:.3e}", value.imag)
        return value.real
    return value


def trace_property_check(A: SymbolExpansion, B: SymbolExpansion, method: str = "plancherel",
                         workers: int = 4) -> float:
    """|Res(AB) - Res(BA)|."""
    AB = expansion_mul(A, B, workers)
    BA = expansion_mul(B, A, workers)
    return abs(residue(AB, method=method) - residue(BA, method=method)) if AB.components else 0.0


def szego_L(res_s: float) -> float:
    """L(S) = -Res S / 2."""
    return -0.5 * res_s


def rho_R(pair: IdempotentPair, seeds: Sequence[int] = (0, 1, 2), lower_degrees: Sequence[int] = (-1, -2),
          lower_scale: float = 0.1, depth: Optional[int] = None) -> Dict[str, float]:
    """Residue of projections realizing the pair, over several lower-order seeds."""
    from .projection_engine import projection_from_symbol, random_lower_terms

    values = []
    for seed in seeds:
        lower = random_lower_terms(pair.symbol, np.random.default_rng(seed), lower_degrees, lower_scale)
        projection = projection_from_symbol(pair.symbol, lower, depth=depth)
        values.append(residue(projection.expansion, real=True))
    spread = float(max(values) - min(values))
    logger.info("rho_R over %d seeds: %.6e (spread %.3e)", len(values), float(np.mean(values)), spread)
    return {"value": float(np.mean(values)), "spread": spread, "seeds": list(seeds),
            "values": [float(v) for v in values]}


def wodzicki_log_basis(t: np.ndarray, exponents: Sequence[float], log_variable: str = "norm") -> np.ndarray:
    """Design matrix [t^e for e in exponents, 1, log] for shell-averaged kernel values."""
    if log_variable not in ("norm", "phase"):
        raise HeisenbergError(f"unknown log variable {log_variable!r}")
    t = np.asarray(t, dtype=float)
    log_term = np.log(t) if log_variable == "norm" else 2.0 * np.log(t)
    columns = [t ** e for e in exponents] + [np.ones_like(t), log_term]
    return np.stack(columns, axis=1)


def _shell_average(samples: Sequence[Tuple[object, complex]], frame_map: Optional[FrameMap]) -> Tuple[np.ndarray, np.ndarray]:
    radii, values = [], []
    for offset, value in samples:
        coords = offset.coords if isinstance(offset, GroupPoint) else np.asarray(offset, dtype=float)
        if frame_map is not None:
            coords = frame_map(coords)
        v = coords
        radii.append((v[0] ** 2 + np.sum(v[1:] ** 4)) ** 0.25)
        values.append(value)
    radii = np.asarray(radii)
    values = np.asarray(values, dtype=complex)
    keys = np.round(np.log(radii), 9)
    shells = np.unique(keys)
    t = np.array([np.exp(k) for k in shells])
    averaged = np.array([values[keys == k].mean() for k in shells])
    return t, averaged


def _fit_log(t: np.ndarray, v: np.ndarray, exponents: Sequence[float], log_variable: str) -> Tuple[complex, np.ndarray]:
    design = wodzicki_log_basis(t, exponents, log_variable)
    column_scale = np.max(np.abs(design), axis=0)
    column_scale[column_scale == 0] = 1.0
    solution, *_ = np.linalg.lstsq(design / column_scale, v, rcond=None)
    solution = solution / column_scale
    return complex(solution[-1]), design @ solution - v


def _check_residual_profile(t: np.ndarray, residuals: np.ndarray, threshold: float) -> None:
    order = np.argsort(-t)
    profile = np.abs(residuals[order])
    significant = profile[profile > threshold]
    steps = np.diff(significant)
    if steps.size and np.any(steps > 0) and np.any(steps < 0):
        raise ResidualsNotMonotone(
            f"shell residuals are not monotone in depth above {threshold:.3e}: {np.array2string(profile, precision=3)}",
            profile.tolist())
    logger.debug("shell residual profile %s", profile)


def kernel_log_fit(samples: Sequence[Tuple[object, complex]], frame_map: Optional[FrameMap] = None,
                   exponents: Sequence[float] = (2.0, 4.0), log_variable: str = "norm",
                   floor: float = 1e-9, residual_tol: float = RESIDUAL_TOL) -> KernelFit:
    """Fit the coefficient c of -log|psi(y)| in shell-averaged kernel values.

    Shell averages are regressed on {t^e} + 1 + log t; a homogeneous term a_j contributes a
    pure power of t on every shell. The band is a leave-one-shell-out jackknife plus a
    rounding floor relative to the largest shell value.

    Per-shell residuals above residual_tol times the largest shell value must be monotone in
    shell depth; otherwise the fit is rejected with ResidualsNotMonotone.
    """
    t, v = _shell_average(samples, frame_map)
    shells = t.size
    if shells < MIN_SHELLS:
        raise InsufficientShells(f"kernel fit needs at least {MIN_SHELLS} shells, got {shells}", shells)
    if shells < len(exponents) + 3:
        raise InsufficientShells(f"{len(exponents) + 2} regressors need at least {len(exponents) + 3} shells", shells)
    gamma_hat, residuals = _fit_log(t, v, exponents, log_variable)
    _check_residual_profile(t, residuals, residual_tol * float(np.max(np.abs(v))))
    residual = float(np.linalg.norm(residuals))
    leave_one_out = []
    for k in range(shells):
        mask = np.arange(shells) != k
        leave_one_out.append(_fit_log(t[mask], v[mask], exponents, log_variable)[0])
    leave_one_out = np.asarray(leave_one_out)
    spread = np.sqrt((shells - 1) / shells * np.sum(np.abs(leave_one_out - leave_one_out.mean()) ** 2))
    band = float(spread + floor * np.max(np.abs(v)))
    if log_variable == "phase":
        # log q = 2 log t: the fitted coefficient is beta0 and c = -2 beta0
        return KernelFit(-2.0 * gamma_hat, 2.0 * band, shells, residual, tuple(exponents), log_variable,
                         beta0=gamma_hat, jackknife=list(-2.0 * leave_one_out))
    return KernelFit(-gamma_hat, band, shells, residual, tuple(exponents), log_variable,
                     jackknife=list(-leave_one_out))


def decay_slope(samples: Sequence[Tuple[object, complex]], frame_map: Optional[FrameMap] = None,
                inner: Optional[int] = None) -> float:
    """Least-squares slope of log|k| against log t over the innermost shells."""
    t, v = _shell_average(samples, frame_map)
    inner = max(2, t.size // 2 + 1) if inner is None else inner
    order = np.argsort(t)[:inner]
    slope, _ = np.polyfit(np.log(t[order]), np.log(np.abs(v[order])), 1)
    return float(slope)


def shell_samples(direction, shells: int = 7, ratio: float = 2.0, largest: float = 1.0) -> List[GroupPoint]:
    """Offsets t_k . y0 on geometric dilation shells t_k = largest * ratio^-k."""
    y0 = GroupPoint(np.asarray(direction, dtype=float))
    return [dilate(largest * ratio ** (-k), y0) for k in range(shells)]


def synthesize_shell_data(c_star: float, powers: Dict[float, complex], offsets: Sequence[GroupPoint],
                          constant: complex = 0.0, noise: float = 0.0,
                          rng: Optional[np.random.Generator] = None) -> List[Tuple[GroupPoint, complex]]:
    """Kernel samples sum a_e |y|^e + constant - c* log|y| on the given offsets."""
    rng = np.random.default_rng(0) if rng is None else rng
    data = []
    for y in offsets:
        r = (y.coords[0] ** 2 + np.sum(y.coords[1:] ** 4)) ** 0.25
        value = constant - c_star * np.log(r) + sum(a * r ** e for e, a in powers.items())
        if noise:
            value += noise * rng.standard_normal()
        data.append((y, complex(value)))
    return data


def density_to_csv(density: ResidueDensity, path: str) -> str:
    """Write base_index, re_tr_c, im_tr_c, jacobian rows."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    traces = np.trace(density.values, axis1=1, axis2=2)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["base_index", "re_tr_c", "im_tr_c", "jacobian"])
        for index, (value, jac) in enumerate(zip(traces, density.jacobian_factor)):
            writer.writerow([index, repr(float(value.real)), repr(float(value.imag)), repr(float(jac))])
    return path


def density_report(density: ResidueDensity, tolerance: float) -> dict:
    value = residue(density)
    return {
        "residue": {"re": float(value.real), "im": float(value.imag)},
        "tolerance": tolerance,
        "method": density.method,
        "measure": density.measure,
        "normalization": MEASURE_NOTE,
    }
