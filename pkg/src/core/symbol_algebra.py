"""Homogeneous Heisenberg symbols realized on truncated Hermite fibers.

A homogeneous symbol of degree m is determined by its model operators at xi0 = +1 and
xi0 = -1; every other value of xi0 follows by homogeneity. The frame acts at xi0 = tau by

    tau > 0:  X_j -> sqrt(tau/2)(a_j - a_j^+),   X_{n+j} -> -i sqrt(tau/2)(a_j + a_j^+)
    tau < 0:  X_j -> sqrt(|tau|/2)(a_j - a_j^+), X_{n+j} -> +i sqrt(|tau|/2)(a_j + a_j^+)
    X0 -> i tau

so the noncommutative product of symbols is the product of fiber matrices. Fibers are
indexed rank-major (i * B + h) over a Kronecker Hermite basis of size B = N^n.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag
from scipy.special import eval_genlaguerre, gammaln

from .errors import DimensionMismatch, EquatorUnresolved, HeisenbergError, NotInvertible

logger = logging.getLogger(__name__)

SIGNS = (1, -1)
HERMITE_PAD = 2
EQUATOR_BAND = 0.05
INVERT_TOL = 1e-8

MatrixFunction = Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=64)
def ladder(N: int) -> np.ndarray:
    """Annihilation operator a|k> = sqrt(k)|k-1> on span(|0>, ..., |N-1>)."""
    matrix = np.diag(np.sqrt(np.arange(1, N, dtype=float)), k=1)
    matrix.setflags(write=False)
    return matrix


def mode_operator(matrix: np.ndarray, j: int, n: int) -> np.ndarray:
    """Embed a single-mode operator as mode j of the n-fold Kronecker product."""
    N = matrix.shape[0]
    eye = np.eye(N)
    result = np.ones((1, 1))
    for k in range(n):
        result = np.kron(result, matrix if k == j else eye)
    return result


def frame_fibers(n: int, N: int, sign: int) -> List[np.ndarray]:
    """Model operators of X0, X1, ..., X_2n at xi0 = sign on N^n Hermite functions."""
    a = ladder(N)
    B = N ** n
    fibers = [1j * sign * np.eye(B)]
    lowering = [mode_operator(a, j, n) for j in range(n)]
    for j in range(n):
        fibers.append((lowering[j] - lowering[j].T) / np.sqrt(2.0))
    for j in range(n):
        fibers.append(-1j * sign * (lowering[j] + lowering[j].T) / np.sqrt(2.0))
    return fibers


@lru_cache(maxsize=64)
def compressed_indices(n: int, N: int, pad: int, rank: int) -> np.ndarray:
    """Rank-major indices of the N^n block inside the padded (N+pad)^n basis."""
    M = N + pad
    modes = np.indices((M,) * n).reshape(n, -1)
    keep = np.flatnonzero(np.all(modes < N, axis=0))
    indices = np.concatenate([i * M ** n + keep for i in range(rank)])
    indices.setflags(write=False)
    return indices


@lru_cache(maxsize=64)
def resolved_indices(n: int, N: int, rank: int) -> np.ndarray:
    """Indices whose Hermite levels all lie below N/2."""
    modes = np.indices((N,) * n).reshape(n, -1)
    keep = np.flatnonzero(np.all(modes < N // 2, axis=0))
    indices = np.concatenate([i * N ** n + keep for i in range(rank)])
    indices.setflags(write=False)
    return indices


def _infer_n(size: int, rank: int, cutoff: int) -> int:
    if rank < 1 or size % rank:
        raise DimensionMismatch(f"fiber size {size} is not a multiple of rank {rank}", size)
    basis = size // rank
    n = int(round(np.log(basis) / np.log(cutoff))) if basis > 1 else 0
    if n < 1 or cutoff ** n != basis:
        raise DimensionMismatch(f"fiber size {size} is not rank * cutoff^n for rank {rank}, cutoff {cutoff}", size)
    return n


@dataclass(frozen=True)
class HomogeneousSymbol:
    """A degree-m symbol given by its fibers at xi0 = +1 and xi0 = -1.

    abelian_trace is the optional value p(0, xi') on the equator, used near xi0 = 0.
    scalar is an optional exact evaluation xi -> p(xi) that takes precedence over the
    Weyl inversion of the fibers.
    """

    degree: int
    rank: int
    n: int
    cutoff: int
    fiber_plus: np.ndarray
    fiber_minus: np.ndarray
    abelian_trace: Optional[MatrixFunction] = field(default=None, compare=False)
    scalar: Optional[MatrixFunction] = field(default=None, compare=False)
    self_adjoint: bool = False

    def __post_init__(self):
        if isinstance(self.degree, (complex, np.complexfloating)) or int(self.degree) != self.degree:
            raise HeisenbergError(f"symbol degree must be an integer, got {self.degree}", self.degree)
        object.__setattr__(self, "degree", int(self.degree))
        size = self.rank * self.cutoff ** self.n
        plus = np.asarray(self.fiber_plus, dtype=complex)
        minus = np.asarray(self.fiber_minus, dtype=complex)
        for name, fiber in (("fiber_plus", plus), ("fiber_minus", minus)):
            if fiber.shape != (size, size):
                raise DimensionMismatch(f"{name} has shape {fiber.shape}, expected ({size}, {size})", fiber.shape)
            if not np.all(np.isfinite(fiber)):
                raise HeisenbergError(f"{name} contains non-finite entries")
        if self.self_adjoint:
            for name, fiber in (("fiber_plus", plus), ("fiber_minus", minus)):
                defect = np.max(np.abs(fiber - fiber.conj().T), initial=0.0)
                if defect > 1e-10 * max(1.0, np.max(np.abs(fiber), initial=0.0)):
                    raise HeisenbergError(f"{name} of a self-adjoint symbol is not Hermitian (defect {defect:.3e})",
                                          defect)
        object.__setattr__(self, "fiber_plus", plus)
        object.__setattr__(self, "fiber_minus", minus)

    @property
    def d(self) -> int:
        return 2 * self.n

    @property
    def basis_size(self) -> int:
        return self.cutoff ** self.n

    def fiber(self, sign: int) -> np.ndarray:
        return self.fiber_plus if sign > 0 else self.fiber_minus

    def fibers(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.fiber_plus, self.fiber_minus

    def signature(self) -> Tuple[int, int, int]:
        return self.n, self.rank, self.cutoff

    def is_zero(self, atol: float = 0.0) -> bool:
        return all(np.max(np.abs(f), initial=0.0) <= atol for f in self.fibers())

    def scale(self) -> float:
        return float(max(np.max(np.abs(f), initial=0.0) for f in self.fibers()))


def make_homogeneous(degree: int, fiber_plus, fiber_minus, rank: int, cutoff: int,
                     n: Optional[int] = None, abelian_trace: Optional[MatrixFunction] = None,
                     scalar: Optional[MatrixFunction] = None, self_adjoint: bool = False) -> HomogeneousSymbol:
    plus = np.asarray(fiber_plus, dtype=complex)
    minus = np.asarray(fiber_minus, dtype=complex)
    if plus.shape != minus.shape:
        raise DimensionMismatch(f"fiber shapes differ: {plus.shape} vs {minus.shape}")
    if plus.ndim != 2 or plus.shape[0] != plus.shape[1]:
        raise DimensionMismatch(f"fibers must be square, got {plus.shape}", plus.shape)
    if n is None:
        n = _infer_n(plus.shape[0], rank, cutoff)
    return HomogeneousSymbol(degree, rank, n, cutoff, plus, minus, abelian_trace, scalar, self_adjoint)


def unit_symbol(n: int, cutoff: int, rank: int = 1) -> HomogeneousSymbol:
    size = rank * cutoff ** n
    eye = np.eye(rank)
    return HomogeneousSymbol(0, rank, n, cutoff, np.eye(size), np.eye(size),
                             abelian_trace=lambda xi_h: eye.astype(complex),
                             scalar=lambda xi: eye.astype(complex), self_adjoint=True)


def zero_symbol(degree: int, n: int, cutoff: int, rank: int = 1) -> HomogeneousSymbol:
    size = rank * cutoff ** n
    zero = np.zeros((rank, rank), dtype=complex)
    return HomogeneousSymbol(degree, rank, n, cutoff, np.zeros((size, size)), np.zeros((size, size)),
                             abelian_trace=lambda xi_h: zero, scalar=lambda xi: zero, self_adjoint=True)


def operator_symbol(builder: Callable[[List[np.ndarray], int], np.ndarray], degree: int, n: int, cutoff: int,
                    rank: int = 1, pad: int = HERMITE_PAD, abelian_trace: Optional[MatrixFunction] = None,
                    scalar: Optional[MatrixFunction] = None, self_adjoint: bool = False) -> HomogeneousSymbol:
    """Symbol of a left-invariant differential operator written in the model frame.

    builder receives the padded frame fibers [X0, ..., X_2n] and the sign of xi0 and
    returns the operator on rank * (cutoff + pad)^n functions; the result is compressed
    back to the cutoff so products of up to `pad` frame fields are exact there.
    """
    indices = compressed_indices(n, cutoff, pad, rank)
    fibers = []
    for sign in SIGNS:
        padded = np.asarray(builder(frame_fibers(n, cutoff + pad, sign), sign), dtype=complex)
        fibers.append(padded[np.ix_(indices, indices)])
    if self_adjoint:
        fibers = [0.5 * (f + f.conj().T) for f in fibers]
    return HomogeneousSymbol(degree, rank, n, cutoff, fibers[0], fibers[1], abelian_trace, scalar, self_adjoint)


def frame_symbol(j: int, n: int, cutoff: int) -> HomogeneousSymbol:
    """Symbol of (1/i) X_j: xi_j for j >= 1 (degree 1) and xi0 for j = 0 (degree 2)."""
    if not 0 <= j <= 2 * n:
        raise DimensionMismatch(f"frame index must lie in [0, {2 * n}], got {j}", j)
    degree = 2 if j == 0 else 1
    if j == 0:
        equator = lambda xi_h: np.zeros((1, 1), dtype=complex)
    else:
        equator = lambda xi_h: np.array([[xi_h[j - 1]]], dtype=complex)
    return operator_symbol(lambda X, sign: -1j * X[j], degree, n, cutoff, pad=0,
                           abelian_trace=equator,
                           scalar=lambda xi: np.array([[xi[j]]], dtype=complex),
                           self_adjoint=True)


def _check_compatible(p: HomogeneousSymbol, q: HomogeneousSymbol):
    if p.signature() != q.signature():
        raise DimensionMismatch(f"symbols disagree in (n, rank, cutoff): {p.signature()} vs {q.signature()}")


def star(p: HomogeneousSymbol, q: HomogeneousSymbol) -> HomogeneousSymbol:
    """Noncommutative product: degrees add and fibers compose."""
    _check_compatible(p, q)
    equator = None
    if p.abelian_trace is not None and q.abelian_trace is not None:
        pe, qe = p.abelian_trace, q.abelian_trace
        equator = lambda xi_h: pe(xi_h) @ qe(xi_h)
    return HomogeneousSymbol(p.degree + q.degree, p.rank, p.n, p.cutoff,
                             p.fiber_plus @ q.fiber_plus, p.fiber_minus @ q.fiber_minus,
                             abelian_trace=equator)


def symbol_add(p: HomogeneousSymbol, q: HomogeneousSymbol) -> HomogeneousSymbol:
    _check_compatible(p, q)
    if p.degree != q.degree:
        raise DimensionMismatch(f"cannot add symbols of degrees {p.degree} and {q.degree}")
    equator = scalar = None
    if p.abelian_trace is not None and q.abelian_trace is not None:
        pe, qe = p.abelian_trace, q.abelian_trace
        equator = lambda xi_h: pe(xi_h) + qe(xi_h)
    if p.scalar is not None and q.scalar is not None:
        ps, qs = p.scalar, q.scalar
        scalar = lambda xi: ps(xi) + qs(xi)
    return HomogeneousSymbol(p.degree, p.rank, p.n, p.cutoff, p.fiber_plus + q.fiber_plus,
                             p.fiber_minus + q.fiber_minus, equator, scalar,
                             p.self_adjoint and q.self_adjoint)


def symbol_scale(p: HomogeneousSymbol, c: complex) -> HomogeneousSymbol:
    equator = scalar = None
    if p.abelian_trace is not None:
        pe = p.abelian_trace
        equator = lambda xi_h: c * pe(xi_h)
    if p.scalar is not None:
        ps = p.scalar
        scalar = lambda xi: c * ps(xi)
    return HomogeneousSymbol(p.degree, p.rank, p.n, p.cutoff, c * p.fiber_plus, c * p.fiber_minus,
                             equator, scalar, p.self_adjoint and np.imag(c) == 0)


def adjoint_symbol(p: HomogeneousSymbol) -> HomogeneousSymbol:
    equator = scalar = None
    if p.abelian_trace is not None:
        pe = p.abelian_trace
        equator = lambda xi_h: pe(xi_h).conj().T
    if p.scalar is not None:
        ps = p.scalar
        scalar = lambda xi: ps(xi).conj().T
    return HomogeneousSymbol(p.degree, p.rank, p.n, p.cutoff, p.fiber_plus.conj().T,
                             p.fiber_minus.conj().T, equator, scalar, p.self_adjoint)


def transpose_symbol(p: HomogeneousSymbol) -> HomogeneousSymbol:
    """p(-xi)^t: the fibers swap signs and transpose."""
    equator = scalar = None
    if p.abelian_trace is not None:
        pe = p.abelian_trace
        equator = lambda xi_h: pe(-np.asarray(xi_h)).T
    if p.scalar is not None:
        ps = p.scalar
        scalar = lambda xi: ps(-np.asarray(xi)).T
    return HomogeneousSymbol(p.degree, p.rank, p.n, p.cutoff, p.fiber_minus.T, p.fiber_plus.T,
                             equator, scalar, p.self_adjoint)


def direct_sum(p: HomogeneousSymbol, q: HomogeneousSymbol) -> HomogeneousSymbol:
    """Block symbol acting on the direct sum of the coefficient bundles."""
    if (p.n, p.cutoff, p.degree) != (q.n, q.cutoff, q.degree):
        raise DimensionMismatch("direct sum needs matching n, cutoff and degree")
    equator = None
    if p.abelian_trace is not None and q.abelian_trace is not None:
        pe, qe = p.abelian_trace, q.abelian_trace
        equator = lambda xi_h: block_diag(pe(xi_h), qe(xi_h))
    return HomogeneousSymbol(p.degree, p.rank + q.rank, p.n, p.cutoff,
                             block_diag(p.fiber_plus, q.fiber_plus), block_diag(p.fiber_minus, q.fiber_minus),
                             abelian_trace=equator, self_adjoint=p.self_adjoint and q.self_adjoint)


def invert_homogeneous(p: HomogeneousSymbol, tol: float = INVERT_TOL) -> HomogeneousSymbol:
    """Fiberwise inverse; fails when a fiber's smallest singular value is below tol * norm."""
    inverses = []
    for sign, fiber in zip(SIGNS, p.fibers()):
        singular = np.linalg.svd(fiber, compute_uv=False)
        smax, smin = float(singular[0]), float(singular[-1])
        if smin <= tol * smax or smax == 0.0:
            label = "plus" if sign > 0 else "minus"
            raise NotInvertible(f"fiber_{label} has singular value {smin:.3e} (norm {smax:.3e})", smin, label)
        inverses.append(np.linalg.inv(fiber))
    equator = None
    if p.abelian_trace is not None:
        pe = p.abelian_trace
        equator = lambda xi_h: np.linalg.inv(pe(xi_h))
    return HomogeneousSymbol(-p.degree, p.rank, p.n, p.cutoff, inverses[0], inverses[1],
                             abelian_trace=equator, self_adjoint=p.self_adjoint)


def min_singular_values(p: HomogeneousSymbol) -> Tuple[float, float]:
    return tuple(float(np.linalg.svd(f, compute_uv=False)[-1]) for f in p.fibers())


def resolved_block(matrix: np.ndarray, n: int, cutoff: int, rank: int = 1) -> np.ndarray:
    indices = resolved_indices(n, cutoff, rank)
    return matrix[np.ix_(indices, indices)]


def fiber_defect(p: HomogeneousSymbol, q: HomogeneousSymbol, resolved: bool = True) -> float:
    """Max-abs fiber difference, on the resolved sub-block by default."""
    _check_compatible(p, q)
    defect = 0.0
    for a, b in zip(p.fibers(), q.fibers()):
        diff = a - b
        if resolved:
            diff = resolved_block(diff, p.n, p.cutoff, p.rank)
        defect = max(defect, float(np.max(np.abs(diff), initial=0.0)))
    return defect


def anisotropic_norm(xi) -> float:
    """(xi0^2 + xi1^4 + ... + xi_d^4)^(1/4)."""
    v = np.asarray(xi, dtype=float)
    return float((v[0] ** 2 + np.sum(v[1:] ** 4)) ** 0.25)


def weyl_table(N: int, q: float, p: float) -> np.ndarray:
    """Weyl symbols of |m><k| at the phase point (q, p), for m, k < N.

    sigma_mk = 2 (-1)^k sqrt(k!/m!) (sqrt2 (q - ip))^(m-k) e^(-r^2) L_k^(m-k)(2 r^2) for m >= k,
    with sigma_km = conj(sigma_mk).
    """
    idx = np.arange(N)
    m, k = idx[:, None], idx[None, :]
    hi, lo = np.maximum(m, k), np.minimum(m, k)
    diff = hi - lo
    r2 = q * q + p * p
    log_mag = 0.5 * (gammaln(lo + 1) - gammaln(hi + 1)) - r2
    with np.errstate(divide="ignore", invalid="ignore"):
        power = np.where(diff > 0, diff * np.log(np.sqrt(2.0 * r2)), 0.0)
    magnitude = np.exp(log_mag + power)
    laguerre = eval_genlaguerre(lo, diff, 2.0 * r2)
    phase = np.exp(-1j * (m - k) * np.arctan2(p, q))
    return 2.0 * np.where(lo % 2, -1.0, 1.0) * magnitude * laguerre * phase


def phase_point(xi, n: int) -> Tuple[int, np.ndarray, np.ndarray]:
    """Sign of xi0 and the per-mode (q, p) seen by the fiber at that sign."""
    v = np.asarray(xi, dtype=float)
    sign = 1 if v[0] > 0 else -1
    s = 1.0 / np.sqrt(abs(v[0]))
    p = v[1:1 + n] * s
    q = -sign * v[1 + n:1 + 2 * n] * s
    return sign, q, p


def _weyl_value(p: HomogeneousSymbol, xi) -> np.ndarray:
    sign, q, mom = phase_point(xi, p.n)
    table = np.ones((1, 1), dtype=complex)
    for j in range(p.n):
        table = np.kron(table, weyl_table(p.cutoff, q[j], mom[j]))
    B = p.basis_size
    fiber = p.fiber(sign).reshape(p.rank, B, p.rank, B)
    value = np.einsum("ahbk,hk->ab", fiber, table)
    return abs(float(xi[0])) ** (p.degree / 2.0) * value


def scalar_eval(p: HomogeneousSymbol, xi, band: float = EQUATOR_BAND) -> np.ndarray:
    """Value p(xi) as a rank x rank matrix.

    Uses the exact scalar form when the symbol has one. Otherwise the fiber at sign(xi0) is
    read back through the Weyl correspondence and scaled by |xi0|^(m/2). Inside the band
    |xi0| < band * |xi|^2 the value is the quadratic interpolant in xi0 through the equator
    value and two Weyl values at the band edge.
    """
    v = np.asarray(xi, dtype=float).reshape(-1)
    if v.size != 2 * p.n + 1:
        raise DimensionMismatch(f"xi has length {v.size}, expected {2 * p.n + 1}", v.size)
    norm = anisotropic_norm(v)
    if norm == 0.0:
        raise HeisenbergError("symbols are not evaluated at xi = 0")
    if p.scalar is not None:
        return np.asarray(p.scalar(v), dtype=complex)
    edge = band * norm * norm
    if abs(v[0]) >= edge:
        return _weyl_value(p, v)
    if p.abelian_trace is None:
        raise EquatorUnresolved(f"xi0 = {v[0]:.3e} lies in the equator band and no equatorial values are set",
                                float(v[0]))
    side = 1.0 if v[0] >= 0 else -1.0
    nodes = np.array([0.0, side * edge, 2.0 * side * edge])
    values = [np.asarray(p.abelian_trace(v[1:]), dtype=complex)]
    for node in nodes[1:]:
        values.append(_weyl_value(p, np.concatenate([[node], v[1:]])))
    t = v[0]
    weights = [
        (t - nodes[1]) * (t - nodes[2]) / ((nodes[0] - nodes[1]) * (nodes[0] - nodes[2])),
        (t - nodes[0]) * (t - nodes[2]) / ((nodes[1] - nodes[0]) * (nodes[1] - nodes[2])),
        (t - nodes[0]) * (t - nodes[1]) / ((nodes[2] - nodes[0]) * (nodes[2] - nodes[1])),
    ]
    return sum(w * val for w, val in zip(weights, values))


@dataclass(frozen=True)
class SymbolExpansion:
    """p ~ sum of homogeneous components with strictly decreasing degrees.

    truncation_degree is the lowest degree kept when the expansion was formed; None
    means the listed components are the whole symbol.
    """

    components: Tuple[HomogeneousSymbol, ...]
    truncation_degree: Optional[int] = None

    def __post_init__(self):
        components = tuple(self.components)
        object.__setattr__(self, "components", components)
        if not components:
            return
        degrees = [c.degree for c in components]
        if any(a <= b for a, b in zip(degrees, degrees[1:])):
            raise HeisenbergError(f"component degrees must strictly decrease, got {degrees}")
        first = components[0].signature()
        for c in components[1:]:
            if c.signature() != first:
                raise DimensionMismatch(f"components disagree in (n, rank, cutoff): {c.signature()} vs {first}")
        if self.truncation_degree is not None and degrees[-1] < self.truncation_degree:
            raise HeisenbergError(f"component of degree {degrees[-1]} lies below truncation {self.truncation_degree}")

    @property
    def degrees(self) -> List[int]:
        return [c.degree for c in self.components]

    @property
    def order(self) -> Optional[int]:
        return self.components[0].degree if self.components else None

    @property
    def principal(self) -> HomogeneousSymbol:
        if not self.components:
            raise HeisenbergError("empty expansion has no principal symbol")
        return self.components[0]

    def signature(self) -> Optional[Tuple[int, int, int]]:
        return self.components[0].signature() if self.components else None

    def __len__(self) -> int:
        return len(self.components)


def as_expansion(*components: HomogeneousSymbol, truncation_degree: Optional[int] = None) -> SymbolExpansion:
    return SymbolExpansion(tuple(sorted(components, key=lambda c: -c.degree)), truncation_degree)


def unit_expansion(n: int, cutoff: int, rank: int = 1) -> SymbolExpansion:
    return SymbolExpansion((unit_symbol(n, cutoff, rank),))


def component(P: SymbolExpansion, degree: int) -> Optional[HomogeneousSymbol]:
    for c in P.components:
        if c.degree == degree:
            return c
    return None


def _collect(terms: Sequence[HomogeneousSymbol], truncation_degree: Optional[int]) -> SymbolExpansion:
    grouped: Dict[int, HomogeneousSymbol] = {}
    for term in terms:
        if truncation_degree is not None and term.degree < truncation_degree:
            continue
        grouped[term.degree] = symbol_add(grouped[term.degree], term) if term.degree in grouped else term
    ordered = tuple(grouped[k] for k in sorted(grouped, reverse=True))
    return SymbolExpansion(ordered, truncation_degree)


def _combine_truncation(P: SymbolExpansion, Q: SymbolExpansion) -> Optional[int]:
    # a dropped tail of P below t_P shows up in PQ from degree t_P + order(Q) down
    bounds = []
    if P.truncation_degree is not None and Q.order is not None:
        bounds.append(P.truncation_degree + Q.order)
    if Q.truncation_degree is not None and P.order is not None:
        bounds.append(Q.truncation_degree + P.order)
    return max(bounds) if bounds else None


def expansion_mul(P: SymbolExpansion, Q: SymbolExpansion, workers: int = 4) -> SymbolExpansion:
    """Termwise star products regrouped by degree."""
    if P.components and Q.components and P.signature() != Q.signature():
        raise DimensionMismatch(f"expansions disagree in (n, rank, cutoff): {P.signature()} vs {Q.signature()}")
    truncation = _combine_truncation(P, Q)
    pairs = [(p, q) for p in P.components for q in Q.components]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        terms = list(executor.map(lambda pq: star(*pq), pairs))
    return _collect(terms, truncation)


def expansion_add(P: SymbolExpansion, Q: SymbolExpansion) -> SymbolExpansion:
    bounds = [t for t in (P.truncation_degree, Q.truncation_degree) if t is not None]
    return _collect(list(P.components) + list(Q.components), max(bounds) if bounds else None)


def expansion_scale(P: SymbolExpansion, c: complex) -> SymbolExpansion:
    return SymbolExpansion(tuple(symbol_scale(p, c) for p in P.components), P.truncation_degree)


def expansion_adjoint(P: SymbolExpansion) -> SymbolExpansion:
    return SymbolExpansion(tuple(adjoint_symbol(p) for p in P.components), P.truncation_degree)


def expansion_transpose(P: SymbolExpansion) -> SymbolExpansion:
    return SymbolExpansion(tuple(transpose_symbol(p) for p in P.components), P.truncation_degree)


def truncate(P: SymbolExpansion, degree: int) -> SymbolExpansion:
    kept = tuple(c for c in P.components if c.degree >= degree)
    bound = degree if P.truncation_degree is None else max(degree, P.truncation_degree)
    return SymbolExpansion(kept, bound)


def prune(P: SymbolExpansion, rtol: float = 0.0) -> SymbolExpansion:
    """Drop components whose fibers vanish up to rtol times the largest component."""
    scale = max((c.scale() for c in P.components), default=0.0)
    kept = tuple(c for c in P.components if not c.is_zero(rtol * scale))
    return SymbolExpansion(kept, P.truncation_degree)


def remainder(P: SymbolExpansion, Q: SymbolExpansion, rtol: float = 1e-12, workers: int = 4) -> SymbolExpansion:
    """P Q - 1 with numerically vanishing components removed."""
    n, rank, cutoff = P.signature()
    product_ = expansion_mul(P, Q, workers)
    unit = SymbolExpansion((symbol_scale(unit_symbol(n, cutoff, rank), -1.0),))
    difference = expansion_add(product_, unit)
    kept = tuple(c for c in difference.components if c.scale() > rtol)
    return SymbolExpansion(kept, difference.truncation_degree)


def neumann_parametrix(P: SymbolExpansion, depth: int, tol: float = INVERT_TOL) -> SymbolExpansion:
    """Right parametrix Q of P with P Q = 1 + terms of degree <= order(P) - depth.

    q_{-m} = p_m^{-1} and q_{-m-j} = -p_m^{-1} sum_{i=1..j} p_{m-i} q_{-m-j+i}.
    """
    principal = P.principal
    m = principal.degree
    count = max(1, depth - m)
    inverse = invert_homogeneous(principal, tol)
    lower = {c.degree: c for c in P.components[1:]}
    terms: List[HomogeneousSymbol] = [inverse]
    for j in range(1, count):
        total = zero_symbol(-j, principal.n, principal.cutoff, principal.rank)
        for i in range(1, j + 1):
            p_term = lower.get(m - i)
            if p_term is not None:
                total = symbol_add(total, star(p_term, terms[j - i]))
        terms.append(symbol_scale(star(inverse, total), -1.0))
    logger.debug("parametrix of order %d with %d components", -m, len(terms))
    return prune(SymbolExpansion(tuple(terms)))


def random_symbol(rng: np.random.Generator, degree: int, n: int, cutoff: int, rank: int = 1,
                  scale: float = 1.0, self_adjoint: bool = False) -> HomogeneousSymbol:
    size = rank * cutoff ** n
    fibers = []
    for _ in SIGNS:
        fiber = scale * (rng.standard_normal((size, size)) + 1j * rng.standard_normal((size, size))) / np.sqrt(size)
        if self_adjoint:
            fiber = 0.5 * (fiber + fiber.conj().T)
        fibers.append(fiber)
    return HomogeneousSymbol(degree, rank, n, cutoff, fibers[0], fibers[1], self_adjoint=self_adjoint)


def random_expansion(rng: np.random.Generator, degrees: Sequence[int], n: int, cutoff: int,
                     rank: int = 1, scale: float = 1.0) -> SymbolExpansion:
    return as_expansion(*(random_symbol(rng, m, n, cutoff, rank, scale) for m in degrees))


def hermite_levels(n: int, cutoff: int) -> np.ndarray:
    """Total Hermite level |h| = h_1 + ... + h_n of each basis index."""
    return np.indices((cutoff,) * n).reshape(n, -1).sum(axis=0)


def level_projector(n: int, cutoff: int, levels: Sequence[int]) -> np.ndarray:
    return np.diag(np.isin(hermite_levels(n, cutoff), list(levels)).astype(complex))


def givens_rotation(size: int, i: int, j: int, angle: float) -> np.ndarray:
    rotation = np.eye(size, dtype=complex)
    c, s = np.cos(angle), np.sin(angle)
    rotation[i, i], rotation[i, j] = c, -s
    rotation[j, i], rotation[j, j] = s, c
    return rotation


def conjugate(p: HomogeneousSymbol, U_plus: np.ndarray, U_minus: Optional[np.ndarray] = None) -> HomogeneousSymbol:
    """U p U^* fiberwise."""
    U_minus = U_plus if U_minus is None else U_minus
    return HomogeneousSymbol(p.degree, p.rank, p.n, p.cutoff,
                             U_plus @ p.fiber_plus @ U_plus.conj().T,
                             U_minus @ p.fiber_minus @ U_minus.conj().T,
                             self_adjoint=p.self_adjoint)


def gaussian_symbol(n: int, cutoff: int, degree: int = -4) -> HomogeneousSymbol:
    """|xi0|^(degree/2) exp(-|xi'|^2 / (2|xi0|)): fibers prod_j (2/3) 3^-h_j, zero on the equator."""
    levels = hermite_levels(n, cutoff)
    fiber = np.diag((2.0 / 3.0) ** n * 3.0 ** (-levels.astype(float))).astype(complex)
    zero = np.zeros((1, 1), dtype=complex)
    return HomogeneousSymbol(degree, 1, n, cutoff, fiber, fiber.copy(),
                             abelian_trace=lambda xi_h: zero, self_adjoint=True)
