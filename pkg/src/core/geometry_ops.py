"""Geometric operator families of the model contact structure.

(0,q)-forms are the degree-q part of the exterior algebra on n antiholomorphic
directions, stored as bitmasks; wedging with d zbar_j is the Jordan-Wigner creation
operator eps_j. In the fibers sqrt(2) Zbar_j acts as a_j at xi0 = +1 and as -a_j^+ at
xi0 = -1, so dbar_b^2 = 0 holds exactly on truncated fibers.
"""

import logging
from dataclasses import dataclass, field
from math import comb
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import expm, logm, pinvh, sqrtm

from .errors import DimensionMismatch, HeisenbergError, PathError, YConditionFails
from .group_model import (
    adapted_frame,
    dilation_matrix,
    frame_map_from_frame,
    levi_form_from_J,
    levi_signature,
    standard_dtheta,
    standard_J,
    y_condition,
)
from .projection_engine import ProjectionOperator, riesz_projection
from .symbol_algebra import (
    HomogeneousSymbol,
    SIGNS,
    as_expansion,
    compressed_indices,
    frame_fibers,
    ladder,
    operator_symbol,
    transpose_symbol,
)

logger = logging.getLogger(__name__)

KERNEL_CUTOFF = 1e-10


@dataclass(frozen=True)
class ContactData:
    n: int
    theta_scale: float = 1.0
    J: np.ndarray = field(default=None, compare=False)
    dtheta: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        J = standard_J(self.n) if self.J is None else np.asarray(self.J, dtype=float)
        dtheta = standard_dtheta(self.n) if self.dtheta is None else np.asarray(self.dtheta, dtype=float)
        if self.theta_scale <= 0:
            raise HeisenbergError("theta_scale must be positive", self.theta_scale)
        if J.shape != (2 * self.n, 2 * self.n):
            raise DimensionMismatch(f"J must be {2 * self.n}x{2 * self.n}, got {J.shape}")
        problems = calibration_defects(J, dtheta)
        if problems["square"] > 1e-12 or problems["symplectic"] > 1e-12 or problems["min_positivity"] <= 0:
            raise HeisenbergError(f"J is not calibrated: {problems}")
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "dtheta", dtheta)


def calibration_defects(J: np.ndarray, dtheta: np.ndarray, samples: int = 20, seed: int = 0) -> dict:
    """J^2 + 1, J^t dtheta J - dtheta, and the smallest dtheta(X, J X) over |X| = 1."""
    rng = np.random.default_rng(seed)
    d = J.shape[0]
    square = float(np.max(np.abs(J @ J + np.eye(d))))
    symplectic = float(np.max(np.abs(J.T @ dtheta @ J - dtheta)))
    vectors = rng.standard_normal((samples, d))
    vectors /= np.linalg.norm(vectors, axis=1)[:, None]
    positivity = np.einsum("si,ij,jk,sk->s", vectors, dtheta, J, vectors)
    return {"square": square, "symplectic": symplectic, "min_positivity": float(positivity.min())}


def folland_stein(lam: float, n: int, cutoff: int) -> HomogeneousSymbol:
    """-1/2 sum X_j^2 + i lam X0; fibers N + n/2 - lam (xi0 = +1) and N + n/2 + lam (xi0 = -1)."""

    def builder(X, sign):
        horizontal = sum(X[j] @ X[j] for j in range(1, 2 * n + 1))
        return -0.5 * horizontal + 1j * lam * X[0]

    return operator_symbol(
        builder, 2, n, cutoff,
        abelian_trace=lambda xi_h: np.array([[0.5 * np.dot(xi_h, xi_h)]], dtype=complex),
        scalar=lambda xi: np.array([[0.5 * np.dot(xi[1:], xi[1:]) - lam * xi[0]]], dtype=complex),
        self_adjoint=True,
    )


def exterior_states(n: int, q: Optional[int] = None) -> List[int]:
    """Bitmasks of the exterior basis, restricted to degree q when given."""
    states = list(range(2 ** n))
    if q is None:
        return states
    return [s for s in states if bin(s).count("1") == q]


def wedge_operator(j: int, n: int) -> np.ndarray:
    """eps_j = d zbar_j ^ . on the full exterior algebra, with Jordan-Wigner signs."""
    size = 2 ** n
    eps = np.zeros((size, size))
    bit = 1 << j
    for state in range(size):
        if state & bit:
            continue
        sign = -1.0 if bin(state & (bit - 1)).count("1") % 2 else 1.0
        eps[state | bit, state] = sign
    return eps


def _dbar_full(X: List[np.ndarray], n: int) -> np.ndarray:
    return sum(np.kron(wedge_operator(j, n), (X[1 + j] + 1j * X[1 + n + j]) / np.sqrt(2.0)) for j in range(n))


def _block_indices(n: int, q: int, basis: int) -> np.ndarray:
    return np.concatenate([s * basis + np.arange(basis) for s in exterior_states(n, q)])


def _check_degree(n: int, q: int):
    if not 0 <= q <= n:
        raise DimensionMismatch(f"form degree q must lie in [0, {n}], got {q}", q)


def dbar_b(n: int, q: int, cutoff: int) -> HomogeneousSymbol:
    """The (0,q) -> (0,q+1) component of dbar_b, as a degree-1 symbol on all forms."""
    _check_degree(n, q)
    full = 2 ** n
    source = np.isin(np.arange(full), exterior_states(n, q))
    target = np.isin(np.arange(full), exterior_states(n, q + 1)) if q < n else np.zeros(full, dtype=bool)

    def builder(X, sign):
        basis = X[0].shape[0]
        rows = np.repeat(target, basis)
        cols = np.repeat(source, basis)
        return _dbar_full(X, n) * np.outer(rows, cols)

    return operator_symbol(builder, 1, n, cutoff, rank=full, pad=0)


def _truncated_dbar(n: int, cutoff: int, sign: int) -> np.ndarray:
    return _dbar_full(frame_fibers(n, cutoff, sign), n)


def kohn_laplacian(n: int, q: int, cutoff: int) -> HomogeneousSymbol:
    """dbar* dbar + dbar dbar* on (0,q)-forms, rank C(n, q)."""
    _check_degree(n, q)

    def builder(X, sign):
        dbar = _dbar_full(X, n)
        box = dbar.conj().T @ dbar + dbar @ dbar.conj().T
        block = _block_indices(n, q, X[0].shape[0])
        return box[np.ix_(block, block)]

    return operator_symbol(builder, 2, n, cutoff, rank=comb(n, q), self_adjoint=True)


def _box_truncated(n: int, cutoff: int, sign: int) -> Tuple[np.ndarray, np.ndarray]:
    dbar = _truncated_dbar(n, cutoff, sign)
    return dbar, dbar.conj().T @ dbar + dbar @ dbar.conj().T


def _kernel_projection_fibers(n: int, q: int, cutoff: int, star_side: bool) -> List[np.ndarray]:
    """Pi0(dbar_q) = 1 - dbar*_{q+1} N_{q+1} dbar_q, or Pi0(dbar*_q) = 1 - dbar_{q-1} N_{q-1} dbar*_q."""
    B = cutoff ** n
    here = _block_indices(n, q, B)
    fibers = []
    for sign in SIGNS:
        dbar, box = _box_truncated(n, cutoff, sign)
        if not star_side:
            there = _block_indices(n, q + 1, B)
            D = dbar[np.ix_(there, here)]
        else:
            there = _block_indices(n, q - 1, B)
            D = dbar.conj().T[np.ix_(there, here)]
        partial_inverse = pinvh(box[np.ix_(there, there)], rtol=KERNEL_CUTOFF)
        projection = np.eye(here.size) - D.conj().T @ partial_inverse @ D
        fibers.append(0.5 * (projection + projection.conj().T))
    return fibers


def _projection(n: int, q: int, fibers: List[np.ndarray], cutoff: int) -> ProjectionOperator:
    symbol = HomogeneousSymbol(0, comb(n, q), n, cutoff, fibers[0], fibers[1], self_adjoint=True)
    defect = max(float(np.max(np.abs(f @ f - f))) for f in fibers)
    return ProjectionOperator(as_expansion(symbol), idempotency_defect=defect, method="symbolic")


def dbar_kernel_projection(n: int, q: int, cutoff: int) -> ProjectionOperator:
    """Projection onto ker dbar_{b;q}, available when Y(q+1) holds for the model signature."""
    _check_degree(n, q)
    if q + 1 > n or not y_condition(q + 1, n, 0, n):
        raise YConditionFails(f"Y({q + 1}) fails for n = {n}, signature ({n}, 0)", q + 1)
    return _projection(n, q, _kernel_projection_fibers(n, q, cutoff, star_side=False), cutoff)


def dbar_star_kernel_projection(n: int, q: int, cutoff: int) -> ProjectionOperator:
    """Projection onto ker dbar*_{b;q}, available when Y(q-1) holds for the model signature."""
    _check_degree(n, q)
    if q - 1 < 0 or not y_condition(q - 1, n, 0, n):
        raise YConditionFails(f"Y({q - 1}) fails for n = {n}, signature ({n}, 0)", q - 1)
    return _projection(n, q, _kernel_projection_fibers(n, q, cutoff, star_side=True), cutoff)


def szego_relation_check(n: int, q: int, cutoff: int) -> dict:
    """Compare Pi0(dbar_q) + Pi0(dbar*_q) - 1 with the kernel projection of box_q fiberwise."""
    P = dbar_kernel_projection(n, q, cutoff).principal
    Q = dbar_star_kernel_projection(n, q, cutoff).principal
    B = cutoff ** n
    here = _block_indices(n, q, B)
    defect = 0.0
    ranks = []
    for sign, p_fiber, q_fiber in zip(SIGNS, P.fibers(), Q.fibers()):
        _, box = _box_truncated(n, cutoff, sign)
        block = box[np.ix_(here, here)]
        values, vectors = np.linalg.eigh(block)
        null = vectors[:, np.abs(values) <= KERNEL_CUTOFF * max(1.0, np.abs(values).max())]
        harmonic = null @ null.conj().T
        relation = p_fiber + q_fiber - np.eye(here.size)
        defect = max(defect, float(np.max(np.abs(relation - harmonic))))
        ranks.append(int(null.shape[1]))
    return {"n": n, "q": q, "defect": defect, "harmonic_ranks": ranks}


def _szego_builder(n: int, k: int, orientation: int):
    lam = 0.5 * n + k

    def builder(X, sign):
        scaled = [orientation * X[0]]
        scaled += [X[j] for j in range(1, n + 1)]
        scaled += [orientation * X[j] for j in range(n + 1, 2 * n + 1)]
        horizontal = sum(Y @ Y for Y in scaled[1:])
        return -0.5 * horizontal + 1j * lam * scaled[0]

    return builder


def szego_symbol(k: int, n: int, cutoff: int, orientation: int = 1) -> HomogeneousSymbol:
    """s_k: fiberwise projection onto the kernel of box_b + i k X0.

    orientation = -1 rebuilds the operator from the frame of (-theta, -J).
    """
    if k < 0:
        raise HeisenbergError(f"Szego level must be nonnegative, got {k}", k)
    operator = operator_symbol(_szego_builder(n, k, orientation), 2, n, cutoff, self_adjoint=True)
    fibers = []
    for fiber in operator.fibers():
        projection = riesz_projection(fiber, 0.0, 0.5)
        fibers.append(0.5 * (projection + projection.conj().T))
    zero = np.zeros((1, 1), dtype=complex)
    return HomogeneousSymbol(0, 1, n, cutoff, fibers[0], fibers[1],
                             abelian_trace=lambda xi_h: zero, self_adjoint=True)


def frame_szego_symbol(frame: np.ndarray, k: int, cutoff: int, tol: float = 1e-8) -> HomogeneousSymbol:
    """s_k with box_b + i k X0 written in the columns of a graded frame matrix.

    The kernel is read off the Hermitian fibers by eigh, independent of any contour.
    """
    frame = np.asarray(frame, dtype=float)
    dim = frame.shape[0]
    n = dim // 2
    level = 0.5 * n + k

    def builder(X, sign):
        fields = [sum(frame[i, j] * X[i] for i in range(dim)) for j in range(dim)]
        return -0.5 * sum(Y @ Y for Y in fields[1:]) + 1j * level * fields[0]

    operator = operator_symbol(builder, 2, n, cutoff, self_adjoint=True)
    fibers = []
    for fiber in operator.fibers():
        values, vectors = np.linalg.eigh(fiber)
        kernel = vectors[:, np.abs(values) < tol * max(1.0, float(np.max(np.abs(values))))]
        fibers.append(kernel @ kernel.conj().T)
    zero = np.zeros((1, 1), dtype=complex)
    return HomogeneousSymbol(0, 1, n, cutoff, fibers[0], fibers[1],
                             abelian_trace=lambda xi_h: zero, self_adjoint=True)


def conformal_covariance_check(k: int, n: int, f_value: float, cutoff: int, tol: float = 1e-10) -> dict:
    """Szego symbols through a conformally scaled frame and through (-theta, -J)."""
    lam = float(np.exp(f_value))
    base = szego_symbol(k, n, cutoff)
    frame = np.eye(2 * n + 1)
    scaled_frame = dilation_matrix(lam, n)
    scaled = frame_szego_symbol(scaled_frame, k, cutoff)
    scaling_defect = max(float(np.max(np.abs(a - b))) for a, b in zip(base.fibers(), scaled.fibers()))
    phi = frame_map_from_frame(frame)
    phi_scaled = frame_map_from_frame(scaled_frame)
    frame_map_defect = float(np.max(np.abs(phi_scaled.linear_map - dilation_matrix(1.0 / lam, n) @ phi.linear_map)))
    flipped = szego_symbol(k, n, cutoff, orientation=-1)
    reference = transpose_symbol(base)
    flip_defect = max(float(np.max(np.abs(a - b))) for a, b in zip(flipped.fibers(), reference.fibers()))
    return {
        "k": k,
        "n": n,
        "f": f_value,
        "scaling_defect": scaling_defect,
        "frame_map_defect": frame_map_defect,
        "flip_defect": flip_defect,
        "tolerance": tol,
        "passed": bool(max(scaling_defect, frame_map_defect, flip_defect) <= tol),
    }


@dataclass(frozen=True)
class JPath:
    times: Tuple[float, ...]
    structures: Tuple[np.ndarray, ...]

    @property
    def continuity_modulus(self) -> float:
        return max(float(np.max(np.abs(b - a))) for a, b in zip(self.structures, self.structures[1:]))


def _j_at(t: float, J: np.ndarray, Jp: np.ndarray) -> np.ndarray:
    d = J.shape[0]
    A = (1.0 - t) * np.eye(d) + t * Jp.T @ J
    if abs(np.linalg.det(A)) < 1e-14:
        raise PathError(f"A_t is singular at t = {t:.4f}", t)
    B = np.linalg.solve(A, J)
    modulus = np.real(sqrtm(-B @ B))
    return B @ np.linalg.inv(modulus)


def interpolate_J(J: np.ndarray, Jp: np.ndarray, dtheta: Optional[np.ndarray] = None, samples: int = 33,
                  max_samples: int = 1025, modulus_tol: float = 0.05) -> JPath:
    """Path J_t = B_t (-B_t^2)^(-1/2), B_t = A_t^-1 J, A_t = (1 - t) + t J'^t J.

    Samples double until adjacent structures differ by less than modulus_tol.
    """
    J = np.asarray(J, dtype=float)
    Jp = np.asarray(Jp, dtype=float)
    dtheta = standard_dtheta(J.shape[0] // 2) if dtheta is None else np.asarray(dtheta, dtype=float)
    for name, structure in (("J", J), ("J'", Jp)):
        problems = calibration_defects(structure, dtheta)
        if problems["square"] > 1e-10 or problems["symplectic"] > 1e-10 or problems["min_positivity"] <= 0:
            raise PathError(f"{name} is not calibrated: {problems}")
    count = samples
    while True:
        times = np.linspace(0.0, 1.0, count)
        structures = [_j_at(t, J, Jp) for t in times]
        for endpoint, expected in ((structures[0], J), (structures[-1], Jp)):
            if np.max(np.abs(endpoint - expected)) > 1e-10:
                raise PathError("interpolated path does not reproduce its endpoint")
        structures[0], structures[-1] = J.copy(), Jp.copy()
        path = JPath(tuple(float(t) for t in times), tuple(structures))
        if path.continuity_modulus < modulus_tol or count >= max_samples:
            break
        count = 2 * count - 1
    logger.info("J interpolation with %d samples, continuity modulus %.3e", count, path.continuity_modulus)
    return path


def path_signatures(path: JPath, dtheta: Optional[np.ndarray] = None) -> List[Tuple[int, int]]:
    dtheta = standard_dtheta(path.structures[0].shape[0] // 2) if dtheta is None else dtheta
    return [levi_signature(levi_form_from_J(J_t, dtheta)) for J_t in path.structures]


def metaplectic_unitary(S: np.ndarray, cutoff: int, pad: int = 2) -> np.ndarray:
    """Unitary exp(-i H) on the +1 fiber (n = 1) with H the quadratic Hamiltonian of log S.

    S acts on the horizontal frame coordinates (xi1, xi2); the fiber sees them as
    (p, -q). H is assembled in a padded basis and compressed, so it stays Hermitian.
    """
    A = logm(S)
    if np.max(np.abs(np.imag(A))) > 1e-8:
        raise PathError("frame change has no real logarithm")
    A = np.real(A)
    # (q, p) = C (xi1, xi2)
    C = np.array([[0.0, -1.0], [1.0, 0.0]])
    A_phase = C @ A @ np.linalg.inv(C)
    J0 = np.array([[0.0, 1.0], [-1.0, 0.0]])
    K = -J0 @ A_phase
    K = 0.5 * (K + K.T)
    M = cutoff + pad
    a = ladder(M)
    q = (a + a.T) / np.sqrt(2.0)
    p = -1j * (a - a.T) / np.sqrt(2.0)
    H = 0.5 * (K[0, 0] * q @ q + K[0, 1] * (q @ p + p @ q) + K[1, 1] * p @ p)
    keep = compressed_indices(1, cutoff, pad, 1)
    H = H[np.ix_(keep, keep)]
    H = 0.5 * (H + H.conj().T)
    return expm(-1j * H)


def szego_path_from_J(J: np.ndarray, Jp: np.ndarray, k: int, cutoff: int, samples: int = 33):
    """Szego symbols along the J-interpolation, expressed in the frame adapted to J (n = 1)."""
    from .projection_engine import IdempotentSymbolPath

    if J.shape != (2, 2):
        raise DimensionMismatch("Szego paths from J are built for n = 1", J.shape)
    dtheta = standard_dtheta(1)
    path = interpolate_J(J, Jp, dtheta, samples)
    base = szego_symbol(k, 1, cutoff)
    reference = adapted_frame(path.structures[0], dtheta)
    points = []
    for t, J_t in zip(path.times, path.structures):
        S = np.linalg.solve(reference, adapted_frame(J_t, dtheta))
        U = metaplectic_unitary(S, cutoff)
        plus = U @ base.fiber_plus @ U.conj().T
        symbol = HomogeneousSymbol(0, 1, 1, cutoff, 0.5 * (plus + plus.conj().T), base.fiber_minus,
                                   self_adjoint=True)
        points.append((t, symbol))
    return IdempotentSymbolPath(tuple(points))
