"""Rumin complex of the three-dimensional model, sector by sector.

Forms are written in the coframe (theta, theta1, theta2) dual to (X0, X1, X2), so that
d theta = theta1 ^ theta2. The complex is

    functions --d0--> horizontal 1-forms (a, b) --D--> 2-forms (u, v) on theta^theta_j --d1--> 3-forms

with d0 f = (X1 f, X2 f), D(a, b) = (X0 a - X1 h, X0 b - X2 h) for h = X2 a - X1 b, and
d1(u, v) = X2 u - X1 v. On truncated fibers D is replaced by Q2 D Q1, where Q1 removes the
range of d0 and Q2 projects onto the kernel of d1, so both complex identities hold to
rounding on every sector.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import null_space, orth, pinv

from .errors import DimensionMismatch, HeisenbergError
from .nilmanifold_lab import NilmanifoldModel, SectorOperator, reconstruct_kernel
from .residue_engine import kernel_log_fit, shell_samples
from .symbol_algebra import HERMITE_PAD, compressed_indices, frame_fibers, resolved_indices

logger = logging.getLogger(__name__)

KERNEL_CUTOFF = 1e-10


@dataclass(frozen=True)
class SectorComplex:
    """One sector of the complex: the three differentials as dense matrices."""

    m: int
    d0: np.ndarray
    D: np.ndarray
    d1: np.ndarray


@dataclass(frozen=True)
class RuminOperators:
    model: NilmanifoldModel
    sectors: Tuple[SectorComplex, ...]

    def sector(self, m: int) -> SectorComplex:
        for s in self.sectors:
            if s.m == m:
                return s
        raise DimensionMismatch(f"sector {m} is not part of the complex", m)

    @property
    def labels(self) -> List[int]:
        return [s.m for s in self.sectors]


def _range_projector(A: np.ndarray) -> np.ndarray:
    basis = orth(A, rcond=KERNEL_CUTOFF)
    return basis @ basis.conj().T


def _kernel_projector(A: np.ndarray) -> np.ndarray:
    basis = null_space(A, rcond=KERNEL_CUTOFF)
    return basis @ basis.conj().T


def _frame_blocks(model: NilmanifoldModel, m: int, pad: int) -> List[np.ndarray]:
    """X0, X1, X2 on sector m, on N + pad levels (m != 0) or on the abelian modes (m = 0)."""
    if m == 0:
        xi = model.abelian_frequencies
        zero = np.zeros((xi.shape[0],) * 2, dtype=complex)
        return [zero, np.diag(1j * xi[:, 0]), np.diag(1j * xi[:, 1])]
    tau = 2.0 * np.pi * m / model.central_period
    sign = 1 if tau > 0 else -1
    X = frame_fibers(1, model.hermite_cutoff + pad, sign)
    return [abs(tau) * X[0], np.sqrt(abs(tau)) * X[1], np.sqrt(abs(tau)) * X[2]]


def contact_D(model: NilmanifoldModel, m: int, include_center: bool = True) -> np.ndarray:
    """D on sector m before the complex is made exact; include_center=False drops the X0 part."""
    # second order: assemble on padded levels and compress
    pad = 0 if m == 0 else HERMITE_PAD
    Y0, Y1, Y2 = _frame_blocks(model, m, pad)
    if not include_center:
        Y0 = np.zeros_like(Y0)
    D = np.block([[Y0 - Y1 @ Y2, Y1 @ Y1], [-Y2 @ Y2, Y0 + Y2 @ Y1]])
    if pad:
        keep = compressed_indices(1, model.hermite_cutoff, pad, 2)
        D = D[np.ix_(keep, keep)]
    return D


def _sector_complex(model: NilmanifoldModel, m: int) -> SectorComplex:
    _, X1, X2 = _frame_blocks(model, m, 0)
    d0 = np.vstack([X1, X2])
    d1 = np.hstack([X2, -X1])
    Q1 = np.eye(d0.shape[0]) - _range_projector(d0)
    Q2 = _kernel_projector(d1)
    return SectorComplex(m, d0, Q2 @ contact_D(model, m) @ Q1, d1)


def rumin_build(model: NilmanifoldModel, sectors: Optional[List[int]] = None, workers: int = 4) -> RuminOperators:
    """Per-sector differentials of the three-dimensional Rumin complex.

    Args:
        model: The nilmanifold model; its sector range bounds the default sector list.
        sectors: Sector labels to build; defaults to every sector -M..M.
        workers: Threads for the per-sector assembly.

    Returns:
        The complex, in the order of the requested sectors.
    """
    labels = list(range(-model.sector_M, model.sector_M + 1)) if sectors is None else list(sectors)
    for m in labels:
        if abs(m) > model.sector_M:
            raise DimensionMismatch(f"sector {m} lies outside [-{model.sector_M}, {model.sector_M}]", m)
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        complexes = list(executor.map(lambda m: _sector_complex(model, m), labels))
    logger.info("built Rumin complex on %d sectors", len(complexes))
    return RuminOperators(model, tuple(complexes))


def complex_defects(ops: RuminOperators) -> Dict[str, float]:
    """Largest entries of D d0 and d1 D, relative to the operator scales, over all sectors."""
    worst_first, worst_second = 0.0, 0.0
    for s in ops.sectors:
        scale = max(1.0, np.linalg.norm(s.D, 2) * max(np.linalg.norm(s.d0, 2), np.linalg.norm(s.d1, 2)))
        worst_first = max(worst_first, float(np.max(np.abs(s.D @ s.d0))) / scale)
        worst_second = max(worst_second, float(np.max(np.abs(s.d1 @ s.D))) / scale)
    return {"D_d0": worst_first, "d1_D": worst_second}


@dataclass(frozen=True)
class ContactLaplacians:
    delta0: Tuple[np.ndarray, ...]
    delta11: Tuple[np.ndarray, ...]
    delta12: Tuple[np.ndarray, ...]
    delta2: Tuple[np.ndarray, ...]
    labels: Tuple[int, ...]

    def by_name(self) -> Dict[str, Tuple[np.ndarray, ...]]:
        return {"delta0": self.delta0, "delta11": self.delta11, "delta12": self.delta12, "delta2": self.delta2}


def contact_laplacians(ops: RuminOperators) -> ContactLaplacians:
    """Delta0 = 2 d0* d0, Delta11 = (d0 d0*)^2 + D* D, Delta12 = D D* + (d1* d1)^2, Delta2 = 2 d1 d1*."""
    delta0, delta11, delta12, delta2 = [], [], [], []
    for s in ops.sectors:
        d0h, Dh, d1h = s.d0.conj().T, s.D.conj().T, s.d1.conj().T
        lower = s.d0 @ d0h
        upper = d1h @ s.d1
        delta0.append(2.0 * d0h @ s.d0)
        delta11.append(lower @ lower + Dh @ s.D)
        delta12.append(s.D @ Dh + upper @ upper)
        delta2.append(2.0 * s.d1 @ d1h)
    return ContactLaplacians(tuple(delta0), tuple(delta11), tuple(delta12), tuple(delta2), tuple(ops.labels))


def laplacian_report(laplacians: ContactLaplacians, model: NilmanifoldModel) -> dict:
    """Hermitian defects and lower spectral bounds per Laplacian over the nonzero sectors.

    The bound is the smallest eigenvalue of the resolved sub-block divided by the homogeneity
    scale |tau|^(order/2), so an invertible principal part shows as a positive number.
    """
    orders = {"delta0": 2, "delta11": 4, "delta12": 4, "delta2": 2}
    report = {}
    for name, matrices in laplacians.by_name().items():
        hermitian = max(float(np.max(np.abs(A - A.conj().T))) / max(1.0, float(np.max(np.abs(A))))
                        for A in matrices)
        bounds = []
        for m, A in zip(laplacians.labels, matrices):
            if m == 0:
                continue
            tau = 2.0 * np.pi * abs(m) / model.central_period
            keep = resolved_indices(1, model.hermite_cutoff, A.shape[0] // model.hermite_cutoff)
            block = A[np.ix_(keep, keep)]
            lowest = float(np.linalg.eigvalsh(0.5 * (block + block.conj().T))[0])
            bounds.append(lowest / tau ** (orders[name] / 2))
        report[name] = {
            "hermitian_defect": hermitian,
            "scaled_lower_bound": min(bounds) if bounds else None,
        }
    return report


def _partial_inverse(A: np.ndarray) -> np.ndarray:
    return pinv(A, rtol=KERNEL_CUTOFF)


@dataclass(frozen=True)
class RuminProjections:
    """Kernel projections of the complex, each as a list of per-sector matrices.

    Keys: 'd0' on functions, 'D' and 'd0_star' on horizontal 1-forms, 'd1' and 'D_star'
    on 2-forms.
    """

    projections: Dict[str, Tuple[np.ndarray, ...]]
    labels: Tuple[int, ...]

    def sector(self, name: str, m: int) -> np.ndarray:
        return self.projections[name][self.labels.index(m)]


def rumin_projections(ops: RuminOperators) -> RuminProjections:
    """Pi0(A) = 1 - A^+ A per sector, with the pseudo-inverse cut at 1e-10 of the top singular value."""
    names = {"d0": lambda s: s.d0, "D": lambda s: s.D, "d1": lambda s: s.d1,
             "d0_star": lambda s: s.d0.conj().T, "D_star": lambda s: s.D.conj().T}
    projections: Dict[str, List[np.ndarray]] = {name: [] for name in names}
    for s in ops.sectors:
        for name, pick in names.items():
            A = pick(s)
            P = np.eye(A.shape[1]) - _partial_inverse(A) @ A
            projections[name].append(0.5 * (P + P.conj().T))
    return RuminProjections({k: tuple(v) for k, v in projections.items()}, tuple(ops.labels))


def projection_defects(projections: RuminProjections) -> Dict[str, float]:
    return {
        name: max(float(np.max(np.abs(P @ P - P))) for P in matrices)
        for name, matrices in projections.projections.items()
    }


def hodge_relation_defect(projections: RuminProjections, laplacians: ContactLaplacians) -> Dict[str, float]:
    """Pi0(D) + Pi0(d0*) - 1 and Pi0(d1) + Pi0(D*) - 1 against the Laplacian kernels.

    The two sums differ from the identity by finite-rank projections, which is what makes the
    residues of a projection and of its dual opposite.
    """
    first, second = 0.0, 0.0
    for index, m in enumerate(projections.labels):
        P_D = projections.projections["D"][index]
        P_d0s = projections.projections["d0_star"][index]
        harmonic1 = _kernel_projector(laplacians.delta11[index])
        first = max(first, float(np.max(np.abs(P_D + P_d0s - np.eye(P_D.shape[0]) - harmonic1))))
        P_d1 = projections.projections["d1"][index]
        P_Ds = projections.projections["D_star"][index]
        harmonic2 = _kernel_projector(laplacians.delta12[index])
        second = max(second, float(np.max(np.abs(P_d1 + P_Ds - np.eye(P_d1.shape[0]) - harmonic2))))
    return {"one_forms": first, "two_forms": second}


def projection_operator(projections: RuminProjections, name: str, model: NilmanifoldModel) -> SectorOperator:
    """A full-range projection as a SectorOperator; every sector -M..M must be present."""
    expected = tuple(range(-model.sector_M, model.sector_M + 1))
    if projections.labels != expected:
        raise HeisenbergError("projection does not cover every sector of the model")
    matrices = projections.projections[name]
    blocks = [P for m, P in zip(projections.labels, matrices) if m != 0]
    abelian = matrices[projections.labels.index(0)]
    size = blocks[0].shape[0]
    rank = size // model.hermite_cutoff
    # sector matrices are form-major; SectorOperator blocks are rank-major, which matches
    return SectorOperator(model, rank, np.stack(blocks), abelian, f"Pi0({name})")


def dilation_scaling(model: NilmanifoldModel, m: int, factor: int = 4) -> Dict[str, float]:
    """Growth exponents of operator norms between sectors m and factor * m.

    Sector m carries |tau| proportional to m, and a homogeneous operator of order k scales by
    |tau|^(k/2), so d0 shows 1, D and Delta0 show 2, Delta11 shows 4.
    """
    if m == 0:
        raise HeisenbergError("the scaling sweep needs a nonzero sector", m)
    ops = rumin_build(model, [m, factor * m], workers=1)
    laplacians = contact_laplacians(ops)
    keep = np.arange(model.hermite_cutoff // 4)

    def low(A: np.ndarray, blocks: int, cols: int) -> np.ndarray:
        N = model.hermite_cutoff
        rows = np.concatenate([b * N + keep for b in range(blocks)])
        columns = np.concatenate([b * N + keep for b in range(cols)])
        return A[np.ix_(rows, columns)]

    def exponent(first: np.ndarray, second: np.ndarray) -> float:
        return float(np.log(np.linalg.norm(second, 2) / np.linalg.norm(first, 2)) / np.log(factor))

    a, b = ops.sectors
    return {
        "d0": 2.0 * exponent(low(a.d0, 2, 1), low(b.d0, 2, 1)),
        "D": 2.0 * exponent(low(a.D, 2, 2), low(b.D, 2, 2)),
        "delta0": 2.0 * exponent(low(laplacians.delta0[0], 1, 1), low(laplacians.delta0[1], 1, 1)),
        "delta11": 2.0 * exponent(low(laplacians.delta11[0], 2, 2), low(laplacians.delta11[1], 2, 2)),
    }


DUALITY_PAIRS = (("D", "d0_star"), ("d1", "D_star"))


def residue_duality(projections: RuminProjections, model: NilmanifoldModel, direction: Sequence[float],
                    shells: int = 9, ratio: float = 2.0 ** 0.25, largest: float = 1.0,
                    exponents: Sequence[float] = (-4.0, -2.0, 2.0), taper_fraction: float = 0.2,
                    tail_tol: Optional[float] = 1e-4) -> dict:
    """Kernel-fit residues of each projection and its dual, with their sum and combined band."""
    offsets = shell_samples(direction, shells, ratio, largest)
    report = {}
    for first, second in DUALITY_PAIRS:
        fits = {}
        for name in (first, second):
            op = projection_operator(projections, name, model)
            values = reconstruct_kernel(op, offsets, taper_fraction=taper_fraction, tail_tol=tail_tol)
            fits[name] = kernel_log_fit(list(zip(offsets, values)), exponents=exponents)
        total = fits[first].coefficient + fits[second].coefficient
        band = fits[first].band + fits[second].band
        report[f"{first}+{second}"] = {
            first: fits[first].as_dict(),
            second: fits[second].as_dict(),
            "sum": {"re": float(total.real), "im": float(total.imag)},
            "band": band,
            "passed": bool(abs(total) <= band),
        }
    return report
