"""Spectral model of a compact quotient of the three-dimensional Heisenberg group.

The lattice has central period P and horizontal period L = sqrt(P). Functions split into
central sectors: on sector m != 0 the center acts by tau = 2 pi m / P and the frame acts
by the Hermite fiber at sign(m) scaled by sqrt|tau|; sector m is stored once and carries
its multiplicity |m| as a weight in kernel sums. Sector 0 is the abelian torus with
Fourier modes xi' = 2 pi k / L, k in [-K/2, K/2)^2.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .errors import (
    ConfigError,
    ContourHitsSpectrum,
    DimensionMismatch,
    HeisenbergError,
    InsufficientShells,
    MeshTooCoarse,
    TailNotConverged,
)
from .group_model import GroupPoint, dilate
from .projection_engine import riesz_projection
from .residue_engine import MIN_SHELLS, KernelFit, decay_slope, kernel_log_fit, shell_samples
from .symbol_algebra import (
    HomogeneousSymbol,
    SymbolExpansion,
    anisotropic_norm,
    frame_fibers,
    resolved_indices,
    scalar_eval,
)

logger = logging.getLogger(__name__)

MIN_SECTORS = 4
MIN_HERMITE = 16
MIN_ABELIAN = 8
INJECTIVITY_FRACTION = 0.1
TAIL_RATIO = 0.75


@dataclass(frozen=True)
class NilmanifoldModel:
    central_period: float
    sector_M: int
    hermite_cutoff: int
    abelian_K: int

    def __post_init__(self):
        if self.central_period <= 0:
            raise ConfigError("central_period must be positive", self.central_period)
        if self.sector_M < MIN_SECTORS:
            raise ConfigError(f"sector_M must be >= {MIN_SECTORS}, got {self.sector_M}", self.sector_M)
        if self.hermite_cutoff < MIN_HERMITE:
            raise ConfigError(f"hermite_cutoff must be >= {MIN_HERMITE}, got {self.hermite_cutoff}",
                              self.hermite_cutoff)
        if self.abelian_K < MIN_ABELIAN or self.abelian_K % 2:
            raise ConfigError(f"abelian_K must be even and >= {MIN_ABELIAN}, got {self.abelian_K}", self.abelian_K)

    @property
    def horizontal_period(self) -> float:
        return float(np.sqrt(self.central_period))

    @property
    def volume(self) -> float:
        return self.central_period * self.horizontal_period ** 2

    @property
    def sectors(self) -> np.ndarray:
        """Nonzero sector labels in storage order: -M..-1, 1..M."""
        M = self.sector_M
        return np.concatenate([np.arange(-M, 0), np.arange(1, M + 1)])

    @property
    def taus(self) -> np.ndarray:
        return 2.0 * np.pi * self.sectors / self.central_period

    @property
    def abelian_modes(self) -> np.ndarray:
        half = self.abelian_K // 2
        k = np.arange(-half, half)
        grid = np.stack(np.meshgrid(k, k, indexing="ij"), axis=-1)
        return grid.reshape(-1, 2)

    @property
    def abelian_frequencies(self) -> np.ndarray:
        return 2.0 * np.pi * self.abelian_modes / self.horizontal_period

    def storage_index(self, m: int) -> int:
        if m == 0 or abs(m) > self.sector_M:
            raise DimensionMismatch(f"sector {m} is not a stored nonzero sector", m)
        return m + self.sector_M if m < 0 else m + self.sector_M - 1

    def as_dict(self) -> dict:
        return {"period": self.central_period, "M": self.sector_M, "N": self.hermite_cutoff, "K": self.abelian_K}


def build_model(config, section: Optional[dict] = None, **overrides) -> NilmanifoldModel:
    """Model from a RunConfig.

    The 'nilmanifold' command section overrides the global sizes, a command's own section
    overrides that, and non-None keyword overrides win over both.
    """
    merged = {**config.command("nilmanifold"), **(section or {})}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return NilmanifoldModel(
        central_period=float(merged.get("central_period", config.central_period)),
        sector_M=int(merged.get("sector_M", config.sector_M)),
        hermite_cutoff=int(merged.get("hermite_cutoff", config.hermite_cutoff)),
        abelian_K=int(merged.get("abelian_K", config.abelian_K)),
    )


@dataclass(frozen=True)
class SectorOperator:
    """An operator on the model, block diagonal over the central sectors.

    blocks holds the nonzero sectors, shape (2M, r N, r N), rank-major inside each block;
    abelian is the m = 0 block on r K^2 Fourier modes.
    """

    model: NilmanifoldModel
    rank: int
    blocks: np.ndarray
    abelian: np.ndarray
    symbol_tag: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        size = self.rank * self.model.hermite_cutoff
        modes = self.rank * self.model.abelian_K ** 2
        blocks = np.asarray(self.blocks, dtype=complex)
        abelian = np.asarray(self.abelian, dtype=complex)
        if blocks.shape != (2 * self.model.sector_M, size, size):
            raise DimensionMismatch(f"sector blocks have shape {blocks.shape}", blocks.shape)
        if abelian.shape != (modes, modes):
            raise DimensionMismatch(f"abelian block has shape {abelian.shape}", abelian.shape)
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "abelian", abelian)

    def sector(self, m: int) -> np.ndarray:
        if m == 0:
            return self.abelian
        return self.blocks[self.model.storage_index(m)]

    @property
    def per_sector(self) -> List[np.ndarray]:
        """Matrices for m = -M..M."""
        return [self.sector(m) for m in range(-self.model.sector_M, self.model.sector_M + 1)]

    def __matmul__(self, other: "SectorOperator") -> "SectorOperator":
        _check_same(self, other)
        return SectorOperator(self.model, self.rank, self.blocks @ other.blocks, self.abelian @ other.abelian)

    def __add__(self, other: "SectorOperator") -> "SectorOperator":
        _check_same(self, other)
        return SectorOperator(self.model, self.rank, self.blocks + other.blocks, self.abelian + other.abelian)

    def __sub__(self, other: "SectorOperator") -> "SectorOperator":
        _check_same(self, other)
        return SectorOperator(self.model, self.rank, self.blocks - other.blocks, self.abelian - other.abelian)

    def adjoint(self) -> "SectorOperator":
        return SectorOperator(self.model, self.rank, np.conj(np.swapaxes(self.blocks, 1, 2)),
                              self.abelian.conj().T, self.symbol_tag)


def _check_same(a: SectorOperator, b: SectorOperator):
    if a.model != b.model or a.rank != b.rank:
        raise DimensionMismatch("sector operators live on different models or bundles")


def identity_operator(model: NilmanifoldModel, rank: int = 1) -> SectorOperator:
    size = rank * model.hermite_cutoff
    blocks = np.broadcast_to(np.eye(size), (2 * model.sector_M, size, size)).copy()
    return SectorOperator(model, rank, blocks, np.eye(rank * model.abelian_K ** 2), "identity")


def frame_operator(j: int, model: NilmanifoldModel) -> SectorOperator:
    """X_j on every sector: i tau for j = 0, sqrt|tau| times the fiber ladder for j = 1, 2."""
    if j not in (0, 1, 2):
        raise DimensionMismatch(f"frame index must be 0, 1 or 2, got {j}", j)
    N = model.hermite_cutoff
    blocks = []
    for tau in model.taus:
        sign = 1 if tau > 0 else -1
        fiber = frame_fibers(1, N, sign)[j]
        blocks.append(fiber * (abs(tau) if j == 0 else np.sqrt(abs(tau))))
    if j == 0:
        abelian = np.zeros((model.abelian_K ** 2,) * 2, dtype=complex)
    else:
        abelian = np.diag(1j * model.abelian_frequencies[:, j - 1])
    return SectorOperator(model, 1, np.stack(blocks), abelian, f"X{j}")


def sector_commutator_defect(model: NilmanifoldModel) -> dict:
    """Max defect of [X1, X2] = -X0 on resolved sub-blocks and of commutation on m = 0."""
    X0, X1, X2 = (frame_operator(j, model) for j in range(3))
    bracket = X1 @ X2 - X2 @ X1 + X0
    keep = resolved_indices(1, model.hermite_cutoff, 1)
    resolved = bracket.blocks[:, keep][:, :, keep]
    return {
        "nonzero_sectors": float(np.max(np.abs(resolved))),
        "abelian": float(np.max(np.abs(bracket.abelian))),
    }


def _abelian_values(symbol: HomogeneousSymbol, model: NilmanifoldModel) -> np.ndarray:
    """Multiplier values p(0, xi_k), shape (K^2, r, r); the zero mode follows the degree."""
    r = symbol.rank
    values = np.zeros((model.abelian_K ** 2, r, r), dtype=complex)
    if symbol.abelian_trace is None:
        logger.debug("degree %d component has no equatorial values, sector 0 left at zero", symbol.degree)
        return values
    for index, xi in enumerate(model.abelian_frequencies):
        if np.any(xi):
            values[index] = symbol.abelian_trace(xi)
        elif symbol.degree >= 0:
            try:
                values[index] = symbol.abelian_trace(xi)
            except (HeisenbergError, ArithmeticError, np.linalg.LinAlgError):
                logger.debug("zero mode of a degree %d component left at zero", symbol.degree)
    return values


def _multiplier_block(values: np.ndarray) -> np.ndarray:
    """Rank-major block with the mode multipliers on the diagonal of every (i, j) sub-block."""
    modes, r, _ = values.shape
    block = np.zeros((r * modes, r * modes), dtype=complex)
    idx = np.arange(modes)
    for i in range(r):
        for j in range(r):
            block[i * modes + idx, j * modes + idx] = values[:, i, j]
    return block


def lift(expansion: SymbolExpansion, model: NilmanifoldModel) -> SectorOperator:
    """Sector matrices sum_c |tau|^(deg_c / 2) f_c(sign tau), and multipliers on sector 0."""
    if not expansion.components:
        raise HeisenbergError("cannot lift an empty expansion")
    n, rank, cutoff = expansion.signature()
    if n != 1:
        raise DimensionMismatch(f"the nilmanifold model is three-dimensional, got n = {n}", n)
    if cutoff != model.hermite_cutoff:
        raise DimensionMismatch(f"expansion cutoff {cutoff} does not match the model cutoff "
                                f"{model.hermite_cutoff}", cutoff)
    taus = model.taus
    negative = taus < 0
    size = rank * cutoff
    blocks = np.zeros((taus.size, size, size), dtype=complex)
    abelian = np.zeros((rank * model.abelian_K ** 2,) * 2, dtype=complex)
    for c in expansion.components:
        weights = np.abs(taus) ** (c.degree / 2.0)
        blocks[negative] += weights[negative, None, None] * c.fiber_minus
        blocks[~negative] += weights[~negative, None, None] * c.fiber_plus
        abelian += _multiplier_block(_abelian_values(c, model))
    logger.debug("lifted %d components onto %d sectors", len(expansion.components), taus.size)
    return SectorOperator(model, rank, blocks, abelian, f"lift(order={expansion.order})")


def spectral_kernel_projection(op: SectorOperator, center: complex = 0.0, radius: Optional[float] = None,
                               tol: float = 1e-8, workers: int = 4) -> SectorOperator:
    """Riesz projection of every sector onto the spectrum inside |z - center| < radius.

    The default radius is half the central frequency quantum pi / P.
    """
    model = op.model
    radius = np.pi / model.central_period if radius is None else radius

    def project(item: Tuple[int, np.ndarray]) -> np.ndarray:
        m, block = item
        try:
            P = riesz_projection(block, center, radius, tol=tol, workers=1)
        except ContourHitsSpectrum as e:
            raise ContourHitsSpectrum(f"sector {m}: {str(e)}", e.value, sector=m)
        if np.allclose(block, block.conj().T, atol=1e-12 * max(1.0, float(np.max(np.abs(block), initial=0.0)))):
            P = 0.5 * (P + P.conj().T)
        return P

    items = [(0, op.abelian)] + list(zip(model.sectors.tolist(), op.blocks))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        results = list(executor.map(project, items))
    return SectorOperator(model, op.rank, np.stack(results[1:]), results[0], "spectral projection")


def sector_idempotency_defect(op: SectorOperator, resolved: bool = True) -> float:
    defect = op @ op - op
    blocks = defect.blocks
    if resolved:
        keep = resolved_indices(1, op.model.hermite_cutoff, op.rank)
        blocks = blocks[:, keep][:, :, keep]
    return float(max(np.max(np.abs(blocks)), np.max(np.abs(defect.abelian), initial=0.0)))


def displacement_matrices(alphas: np.ndarray, N: int) -> np.ndarray:
    """<j|D(alpha)|k> for D(alpha) = exp(alpha a^+ - conj(alpha) a), one N x N matrix per alpha.

    For j >= k the entry is sqrt(k!/j!) alpha^(j-k) e^(-|alpha|^2/2) L_k^(j-k)(|alpha|^2); the
    other triangle uses -conj(alpha).
    """
    alphas = np.asarray(alphas, dtype=complex).reshape(-1)
    idx = np.arange(N)
    j, k = idx[:, None], idx[None, :]
    hi, lo = np.maximum(j, k), np.minimum(j, k)
    diff = (hi - lo)[None]
    r2 = (np.abs(alphas) ** 2)[:, None, None]
    base = np.where(j >= k, 1.0, 0.0)[None] * alphas[:, None, None] \
        + np.where(j >= k, 0.0, 1.0)[None] * (-np.conj(alphas))[:, None, None]
    log_mag = 0.5 * (gammaln(lo + 1) - gammaln(hi + 1))[None] - 0.5 * r2
    with np.errstate(divide="ignore", invalid="ignore"):
        power = np.where(diff > 0, diff * np.log(np.abs(base)), 0.0)
        phase = np.where(diff > 0, np.exp(1j * diff * np.angle(base)), 1.0)
    power = np.where(np.isfinite(power), power, -np.inf)
    laguerre = eval_genlaguerre(lo[None], diff, r2)
    return np.exp(log_mag + power) * phase * laguerre


def _smooth_step(s: np.ndarray) -> np.ndarray:
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        h0 = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        h1 = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return h0 / (h0 + h1)


def taper(u: np.ndarray, fraction: float) -> np.ndarray:
    """C-infinity cosine taper: 1 for u <= 1 - fraction, 0 at u = 1."""
    if not 0.0 < fraction <= 1.0:
        raise HeisenbergError(f"taper fraction must lie in (0, 1], got {fraction}", fraction)
    s = (np.asarray(u, dtype=float) - (1.0 - fraction)) / fraction
    return 0.5 * (1.0 + np.cos(np.pi * _smooth_step(s)))


def _block_traces(op: SectorOperator, alpha: np.ndarray) -> np.ndarray:
    """Tr(D(alpha_m)^* A_m) summed over the bundle diagonal, per stored sector."""
    N = op.model.hermite_cutoff
    r = op.rank
    displacement = displacement_matrices(alpha, N)
    blocks = op.blocks.reshape(-1, r, N, r, N)
    diagonal = np.einsum("sinik->snk", blocks)
    return np.einsum("sjk,sjk->s", np.conj(displacement), diagonal)


def _offset_coords(offset) -> np.ndarray:
    coords = offset.coords if isinstance(offset, GroupPoint) else np.asarray(offset, dtype=float).reshape(-1)
    if coords.size != 3:
        raise DimensionMismatch(f"offsets on the model have 3 coordinates, got {coords.size}", coords.size)
    return coords


def _kernel_value(op: SectorOperator, y: np.ndarray, sector_limit: int, taper_fraction: float,
                  traces: Optional[np.ndarray] = None) -> complex:
    model = op.model
    P = model.central_period
    sectors = model.sectors
    taus = model.taus
    signs = np.sign(taus)
    if traces is None:
        alpha = -np.sqrt(np.abs(taus) / 2.0) * (y[1] + 1j * signs * y[2])
        traces = _block_traces(op, alpha)
    weights = np.abs(sectors) / P ** 2 * taper(np.abs(sectors) / sector_limit, taper_fraction)
    weights[np.abs(sectors) > sector_limit] = 0.0
    central = np.sum(weights * np.exp(-1j * taus * y[0]) * traces)
    r = op.rank
    modes = model.abelian_K ** 2
    multipliers = sum(np.diag(op.abelian)[i * modes:(i + 1) * modes] for i in range(r))
    k_inf = np.max(np.abs(model.abelian_modes), axis=1) / (model.abelian_K // 2)
    abelian_weights = taper(k_inf, taper_fraction) / model.volume
    phases = np.exp(1j * model.abelian_frequencies @ y[1:])
    return complex(central + np.sum(abelian_weights * multipliers * phases))


def reconstruct_kernel(op: SectorOperator, offsets: Sequence, taper_fraction: float = 0.2,
                       tail_tol: Optional[float] = 1e-4, workers: int = 4) -> np.ndarray:
    """Kernel values k(y) of a left-invariant sector operator at the given offsets.

    Sector sums use the multiplicity weight |m| / P^2 and a smooth taper over the top
    taper_fraction of |m| and of the abelian modes. With tail_tol set, the sum is repeated
    with 3/4 of the sectors and a relative change above tail_tol raises TailNotConverged.
    """
    model = op.model
    limit = INJECTIVITY_FRACTION * model.central_period
    coords = [_offset_coords(y) for y in offsets]
    for y in coords:
        if anisotropic_norm(y) >= limit:
            raise HeisenbergError(f"offset {y.tolist()} lies outside the injectivity box |y| < {limit:.3g}", y)
    M = model.sector_M
    reduced = max(1, int(round(TAIL_RATIO * M)))

    def evaluate(y: np.ndarray) -> Tuple[complex, float]:
        taus = model.taus
        alpha = -np.sqrt(np.abs(taus) / 2.0) * (y[1] + 1j * np.sign(taus) * y[2])
        traces = _block_traces(op, alpha)
        full = _kernel_value(op, y, M, taper_fraction, traces)
        if tail_tol is None:
            return full, 0.0
        partial = _kernel_value(op, y, reduced, taper_fraction, traces)
        return full, abs(full - partial)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        results = list(executor.map(evaluate, coords))
    values = np.array([v for v, _ in results], dtype=complex)
    if tail_tol is not None:
        scale = max(float(np.max(np.abs(values), initial=0.0)), 1e-300)
        tails = np.array([t for _, t in results])
        worst = float(np.max(tails / np.maximum(np.abs(values), 1e-12 * scale)))
        if worst > tail_tol:
            raise TailNotConverged(f"sector sum changed by {worst:.3e} (relative) between {reduced} and {M} "
                                   f"sectors", worst)
        if worst > 0.1 * tail_tol:
            logger.warning("sector tail estimate %.3e is within a factor 10 of its tolerance", worst)
    return values


@dataclass
class ShellFit:
    """Kernel values on dilation shells with the log-coefficient fits in both variables."""

    fit: KernelFit
    phase_fit: KernelFit
    slope: float
    offsets: List[GroupPoint]
    values: np.ndarray

    def as_dict(self) -> dict:
        return {
            "fit": self.fit.as_dict(),
            "phase_fit": self.phase_fit.as_dict(),
            "decay_slope": self.slope,
            "shell_radii": [anisotropic_norm(y.coords) for y in self.offsets],
        }


def unit_direction(direction: Sequence[float]) -> GroupPoint:
    """The dilate of direction with anisotropic norm 1."""
    y = GroupPoint(np.asarray(direction, dtype=float))
    norm = anisotropic_norm(y.coords)
    if norm == 0.0:
        raise HeisenbergError("shell direction must be nonzero")
    return dilate(1.0 / norm, y)


def shell_kernel_fit(op: SectorOperator, direction: Sequence[float], shells: int = 9, ratio: float = 2.0 ** 0.25,
                     largest: float = 1.0, exponents: Sequence[float] = (4.0, 8.0), taper_fraction: float = 0.2,
                     tail_tol: Optional[float] = 1e-4, workers: int = 4) -> ShellFit:
    """Reconstruct the kernel on shells t_k . y0 and fit its -log coefficient."""
    if shells < MIN_SHELLS:
        raise InsufficientShells(f"kernel fit needs at least {MIN_SHELLS} shells, got {shells}", shells)
    offsets = shell_samples(unit_direction(direction).coords, shells, ratio, largest)
    values = reconstruct_kernel(op, offsets, taper_fraction=taper_fraction, tail_tol=tail_tol, workers=workers)
    samples = list(zip(offsets, values))
    fit = kernel_log_fit(samples, exponents=exponents)
    phase_fit = kernel_log_fit(samples, exponents=exponents, log_variable="phase")
    logger.info("shell fit on %s: c = %.6e +- %.1e", op.symbol_tag, fit.coefficient.real, fit.band)
    return ShellFit(fit, phase_fit, decay_slope(samples), offsets, values)


def group_translate(op: SectorOperator, g) -> SectorOperator:
    """Conjugate every sector by the representation of g; the kernel becomes y -> k(g^-1 y g)."""
    model = op.model
    coords = _offset_coords(g)
    taus = model.taus
    beta = -np.sqrt(np.abs(taus) / 2.0) * (coords[1] + 1j * np.sign(taus) * coords[2])
    displacement = displacement_matrices(beta, model.hermite_cutoff)
    if op.rank > 1:
        displacement = np.stack([np.kron(np.eye(op.rank), D) for D in displacement])
    blocks = displacement @ op.blocks @ np.conj(np.swapaxes(displacement, 1, 2))
    return SectorOperator(model, op.rank, blocks, op.abelian.copy(), op.symbol_tag)


def sector0_mode_function(model: NilmanifoldModel, k: Sequence[int]):
    """The normalized sector-0 Fourier mode e^(i xi_k . y') as a function of a group point."""
    k = np.asarray(k, dtype=int)
    half = model.abelian_K // 2
    if k.shape != (2,) or np.any(k < -half) or np.any(k >= half):
        raise DimensionMismatch(f"mode {k.tolist()} is outside [-{half}, {half})^2", k)
    xi = 2.0 * np.pi * k / model.horizontal_period
    norm = 1.0 / np.sqrt(model.volume)

    def mode(y) -> complex:
        c = _offset_coords(y)
        return complex(norm * np.exp(1j * xi @ c[1:]))

    return mode


@dataclass(frozen=True)
class OracleProduct:
    q_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray
    sign: int
    nyquist_fraction: float

    def at(self, i: int, j: int) -> complex:
        return complex(self.values[i, j])


def _sample_slice(p: HomogeneousSymbol, q_axis: np.ndarray, p_axis: np.ndarray, sign: int) -> np.ndarray:
    values = np.zeros((q_axis.size, p_axis.size), dtype=complex)
    for i, qv in enumerate(q_axis):
        for j, pv in enumerate(p_axis):
            xi = np.array([float(sign), pv, -sign * qv])
            values[i, j] = scalar_eval(p, xi)[0, 0]
    return values


def _nyquist_fraction(coefficients: np.ndarray, m: int) -> float:
    freq = np.abs(np.fft.fftfreq(m, d=1.0 / m))
    outer = (freq[:, None] >= m // 4) | (freq[None, :] >= m // 4)
    energy = np.abs(coefficients) ** 2
    total = float(np.sum(energy))
    return float(np.sum(energy[outer]) / total) if total > 0 else 0.0


def grid_convolution_oracle(p: HomogeneousSymbol, q: HomogeneousSymbol, mesh: int = 64, extent: float = 8.0,
                            sign: int = 1, aliasing_tol: float = 0.01) -> OracleProduct:
    """Brute-force product of two n = 1 symbols on the slice xi0 = sign.

    Both slices are sampled as phase-space functions on a periodic mesh over [-extent, extent)^2,
    expanded in plane waves W(k) = exp(i k.z), and multiplied with the twisted rule
    W(k) W(l) = exp(-i sigma(k, l) / 2) W(k + l). Raises MeshTooCoarse when more than
    aliasing_tol of either input's spectral energy sits in the outer half of the frequencies.
    """
    if p.n != 1 or q.n != 1 or p.rank != 1 or q.rank != 1:
        raise DimensionMismatch("the grid oracle handles scalar n = 1 symbols")
    if mesh % 2:
        raise HeisenbergError(f"mesh must be even, got {mesh}", mesh)
    h = 2.0 * extent / mesh
    axis = -extent + h * np.arange(mesh)
    kappa = 2.0 * np.pi * np.fft.fftfreq(mesh, d=h)
    shift = np.exp(1j * extent * kappa)

    coefficients = []
    fractions = []
    for symbol in (p, q):
        samples = _sample_slice(symbol, axis, axis, sign)
        c = np.fft.fft2(samples) * np.outer(shift, shift) / mesh ** 2
        fractions.append(_nyquist_fraction(c, mesh))
        coefficients.append(c)
    worst = max(fractions)
    if worst > aliasing_tol:
        raise MeshTooCoarse(f"{worst:.2%} of the spectral energy lies in the outer frequency band", worst)

    c, d = coefficients
    kq, kp = np.meshgrid(kappa, kappa, indexing="ij")
    out = np.zeros_like(c)
    significant = np.argwhere(np.abs(d) > 1e-16 * np.max(np.abs(d)))
    for lq, lp in significant:
        sigma = kq * kappa[lp] - kp * kappa[lq]
        out += np.roll(c * d[lq, lp] * np.exp(-0.5j * sigma), shift=(lq, lp), axis=(0, 1))
    values = np.fft.ifft2(out / np.outer(shift, shift)) * mesh ** 2
    logger.debug("oracle product on a %d^2 mesh, outer-band energy %.2e", mesh, worst)
    return OracleProduct(axis, axis, values, sign, worst)
