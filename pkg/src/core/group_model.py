"""The Heisenberg group model: group law, dilations, left-invariant frame, Levi form
and the frame maps that identify a tangent space with the group.

Coordinates are ordered (x0, x1, ..., x_2n) with x0 the central coordinate.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import DegenerateFrame, DegenerateLeviForm, DimensionMismatch, HeisenbergError

logger = logging.getLogger(__name__)

SIGNATURE_DEAD_BAND = 1e-10


@dataclass(frozen=True)
class HeisenbergGroupSpec:
    """The group H^{2n+1}; d = 2n is the horizontal dimension."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DimensionMismatch(f"n must be a positive integer, got {self.n}", self.n)

    @property
    def d(self) -> int:
        return 2 * self.n

    @property
    def homogeneous_dim(self) -> int:
        return self.d + 2

    @property
    def critical_degree(self) -> int:
        """Degree -(d+2) of the symbol component carrying the residue."""
        return -(self.d + 2)

    @property
    def dim(self) -> int:
        return self.d + 1


@dataclass(frozen=True)
class GroupPoint:
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1)
        if coords.size < 3 or coords.size % 2 == 0:
            raise DimensionMismatch(f"a group point has odd length 2n+1 >= 3, got {coords.size}", coords.size)
        object.__setattr__(self, "coords", coords)

    @property
    def spec(self) -> HeisenbergGroupSpec:
        return HeisenbergGroupSpec((self.coords.size - 1) // 2)

    @property
    def central(self) -> float:
        return float(self.coords[0])

    @property
    def horizontal(self) -> np.ndarray:
        return self.coords[1:]


@dataclass(frozen=True)
class LeviFormMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatch("Levi form must be a square matrix", matrix.shape)
        if np.max(np.abs(matrix - matrix.conj().T), initial=0.0) > 1e-12:
            raise HeisenbergError("Levi form is not Hermitian")
        object.__setattr__(self, "matrix", matrix)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_json(cls, data: dict) -> "LeviFormMatrix":
        """Build from {"n": int, "matrix": [[[re, im], ...], ...]} (row-major complex pairs)."""
        n = int(data["n"])
        pairs = np.asarray(data["matrix"], dtype=float)
        if pairs.shape != (n, n, 2):
            raise DimensionMismatch(f"expected {n}x{n} complex pairs, got shape {pairs.shape}")
        return cls(pairs[..., 0] + 1j * pairs[..., 1])

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
        }


@dataclass(frozen=True)
class FrameMap:
    """Graded linear map from frame coordinates at a point to group coordinates."""

    linear_map: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.linear_map, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] % 2 == 0:
            raise DimensionMismatch("frame map must be a square matrix of odd size", matrix.shape)
        if abs(np.linalg.det(matrix)) < 1e-14:
            raise DegenerateFrame("frame map is not invertible")
        if np.max(np.abs(matrix[0, 1:])) > 1e-12 or np.max(np.abs(matrix[1:, 0])) > 1e-12:
            raise DegenerateFrame("frame map does not respect the grading")
        object.__setattr__(self, "linear_map", matrix)

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.linear_map @ np.asarray(v, dtype=float)

    def compose(self, other: "FrameMap") -> "FrameMap":
        """self o other."""
        return FrameMap(self.linear_map @ other.linear_map)

    def inverse(self) -> "FrameMap":
        return FrameMap(np.linalg.inv(self.linear_map))

    @property
    def jacobian(self) -> float:
        return float(abs(np.linalg.det(self.linear_map)))


def _as_coords(x) -> np.ndarray:
    if isinstance(x, GroupPoint):
        return x.coords
    return np.asarray(x, dtype=float).reshape(-1)


def group_law(x, y) -> GroupPoint:
    """Product x.y = (x0 + y0 + 1/2 sum(x_{n+j} y_j - x_j y_{n+j}), x' + y')."""
    a, b = _as_coords(x), _as_coords(y)
    if a.size != b.size:
        raise DimensionMismatch(f"cannot multiply points of lengths {a.size} and {b.size}")
    n = (a.size - 1) // 2
    z = a + b
    z[0] += 0.5 * (np.dot(a[1 + n:], b[1:1 + n]) - np.dot(a[1:1 + n], b[1 + n:]))
    return GroupPoint(z)


def group_inverse(x) -> GroupPoint:
    return GroupPoint(-_as_coords(x))


def dilate(t: float, xi):
    """Graded dilation (t^2 xi0, t xi1, ..., t xi_d); group points stay group points."""
    if t <= 0:
        raise HeisenbergError(f"dilation factor must be positive, got {t}", t)
    v = _as_coords(xi).copy()
    v[0] *= t * t
    v[1:] *= t
    return GroupPoint(v) if isinstance(xi, GroupPoint) else v


def dilation_matrix(t: float, n: int) -> np.ndarray:
    return np.diag([t * t] + [t] * (2 * n))


@dataclass(frozen=True)
class VectorField:
    """Affine vector field: coefficient of d/dx_k at x is constant[k] + linear[k] @ x."""

    name: str
    constant: np.ndarray
    linear: np.ndarray

    def at(self, x) -> np.ndarray:
        return self.constant + self.linear @ _as_coords(x)


def left_frame(spec: HeisenbergGroupSpec) -> List[VectorField]:
    """Left-invariant frame X0 = d0, X_j = d_j + 1/2 x_{n+j} d0, X_{n+j} = d_{n+j} - 1/2 x_j d0."""
    n, dim = spec.n, spec.dim
    fields = []
    for k in range(dim):
        constant = np.zeros(dim)
        constant[k] = 1.0
        linear = np.zeros((dim, dim))
        if 1 <= k <= n:
            linear[0, k + n] = 0.5
        elif k > n:
            linear[0, k - n] = -0.5
        fields.append(VectorField(f"X{k}", constant, linear))
    return fields


def contact_form(x) -> np.ndarray:
    """theta0 = dx0 + 1/2 sum(x_j dx_{n+j} - x_{n+j} dx_j) as a covector at x."""
    coords = _as_coords(x)
    n = (coords.size - 1) // 2
    covector = np.zeros(coords.size)
    covector[0] = 1.0
    covector[1:1 + n] = -0.5 * coords[1 + n:]
    covector[1 + n:] = 0.5 * coords[1:1 + n]
    return covector


def bracket(i: int, j: int, spec: HeisenbergGroupSpec) -> np.ndarray:
    """Frame coefficients of [X_i, X_j], computed from the affine coefficient tables."""
    dim = spec.dim
    if not (0 <= i < dim and 0 <= j < dim):
        raise DimensionMismatch(f"frame indices must lie in [0, {dim - 1}], got ({i}, {j})")
    frame = left_frame(spec)
    a, b = frame[i], frame[j]
    # [A, B]^k = A(B^k) - B(A^k); the derivative of an affine coefficient is its linear row
    origin = np.zeros(dim)
    commutator = b.linear @ a.at(origin) - a.linear @ b.at(origin)
    # at the origin the frame is the coordinate basis
    return commutator


def structure_constants(spec: HeisenbergGroupSpec) -> np.ndarray:
    dim = spec.dim
    table = np.zeros((dim, dim, dim))
    for i in range(dim):
        for j in range(dim):
            table[i, j] = bracket(i, j, spec)
    return table


def levi_signature(levi: LeviFormMatrix, dead_band: float = SIGNATURE_DEAD_BAND) -> Tuple[int, int]:
    """Count positive and negative eigenvalues of a nondegenerate Levi form."""
    eigenvalues = np.linalg.eigvalsh(levi.matrix)
    degenerate = np.abs(eigenvalues) < dead_band
    if np.any(degenerate):
        raise DegenerateLeviForm(
            f"eigenvalue {eigenvalues[degenerate][0]:.3e} lies in the dead band of 0",
            float(eigenvalues[degenerate][0]),
        )
    return int(np.sum(eigenvalues > 0)), int(np.sum(eigenvalues < 0))


def negative_eigenprojection(levi: LeviFormMatrix,
                             contour_radius_pair: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """Projection onto the negative eigenspace as a contour integral of the resolvent.

    Args:
        levi: Hermitian input.
        contour_radius_pair: (c2, c1) bracketing the negative spectrum. Defaults to its
            extreme eigenvalues; the circle is widened by 10% of the spectral gap.

    Returns:
        The Hermitian projection onto the span of negative eigenvectors.
    """
    from .projection_engine import riesz_projection

    matrix = levi.matrix
    eigenvalues = np.linalg.eigvalsh(matrix)
    negative = eigenvalues[eigenvalues < 0]
    if negative.size == 0:
        return np.zeros_like(matrix)
    positive = eigenvalues[eigenvalues > 0]
    upper = 0.0 if positive.size == 0 else float(positive.min())
    gap = upper - float(negative.max())
    if contour_radius_pair is None:
        c2, c1 = float(negative.min()), float(negative.max())
    else:
        c2, c1 = contour_radius_pair
    center = 0.5 * (c1 + c2)
    radius = 0.5 * (c1 - c2) + 0.1 * gap
    projection = riesz_projection(matrix, center, radius)
    return 0.5 * (projection + projection.conj().T)


def y_condition(q: int, kappa_plus: int, kappa_minus: int, n: int) -> bool:
    """Y(q): q lies in neither {kappa+, ..., n - kappa-} nor {kappa-, ..., n - kappa+}."""
    if not 0 <= q <= n:
        raise HeisenbergError(f"q must lie in [0, {n}], got {q}", q)
    if kappa_plus < 0 or kappa_minus < 0 or kappa_plus + kappa_minus > n:
        raise HeisenbergError("signature must satisfy kappa+ + kappa- <= n")
    first = kappa_plus <= q <= n - kappa_minus
    second = kappa_minus <= q <= n - kappa_plus
    return not (first or second)


def standard_dtheta(n: int) -> np.ndarray:
    """dtheta = sum dx_j ^ dx_{n+j} on the horizontal space."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def standard_J(n: int) -> np.ndarray:
    """J X_j = X_{n+j}."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def calibration_metric(J: np.ndarray, dtheta: np.ndarray) -> np.ndarray:
    """g(X, Y) = dtheta(X, J Y) as a matrix."""
    return dtheta @ J


def adapted_frame(J: np.ndarray, dtheta: np.ndarray) -> np.ndarray:
    """Columns (e_1..e_n, J e_1..J e_n), orthonormal for g = dtheta(., J .)."""
    d = J.shape[0]
    n = d // 2
    g = calibration_metric(J, dtheta)
    g = 0.5 * (g + g.T)
    basis: List[np.ndarray] = []
    for candidate in np.eye(d):
        if len(basis) == 2 * n:
            break
        v = candidate.copy()
        for e in basis:
            v = v - (e @ g @ v) * e
        norm_sq = v @ g @ v
        if norm_sq < 1e-12:
            continue
        v = v / np.sqrt(norm_sq)
        basis.extend([v, J @ v])
    if len(basis) < 2 * n:
        raise DegenerateFrame("could not complete an adapted frame")
    first = basis[0::2]
    second = basis[1::2]
    return np.column_stack(first + second)


def levi_form_from_J(J: np.ndarray, dtheta: np.ndarray, basis: Optional[np.ndarray] = None) -> LeviFormMatrix:
    """Levi form on Z_j = (v_j - i J v_j)/2: L_jk = dtheta(v_j, J v_k)/2 - i dtheta(v_j, v_k)/2."""
    n = J.shape[0] // 2
    vectors = np.eye(J.shape[0])[:, :n] if basis is None else basis
    matrix = 0.5 * (vectors.T @ dtheta @ J @ vectors) - 0.5j * (vectors.T @ dtheta @ vectors)
    return LeviFormMatrix(0.5 * (matrix + matrix.conj().T))


def is_admissible(horizontal: np.ndarray, J: np.ndarray, atol: float = 1e-12) -> bool:
    n = horizontal.shape[1] // 2
    return bool(np.allclose(J @ horizontal[:, :n], horizontal[:, n:], atol=atol))


def frame_map_from_frame(frame: np.ndarray, metric: Optional[np.ndarray] = None,
                         J: Optional[np.ndarray] = None) -> FrameMap:
    """Frame map phi_{X,a} from a frame given by its vectors at a point.

    Args:
        frame: (d+1)x(d+1) matrix whose columns are X0, X1, ..., Xd at the point, in
            coordinates where the hyperplane H is the span of the last d axes.
        metric: Horizontal metric used to orthonormalize a non-admissible frame.
        J: Almost complex structure on H; frames with X_{n+j} != J X_j are replaced by the
            adapted frame of (J, metric) before the map is built.

    Returns:
        The graded linear map sending x0 [X0] + sum x_j X_j to (x0, ..., x_d).

    A conformally scaled frame (lambda^2 X0, lambda X_j) gives phi' = delta_{1/lambda} o phi,
    equivalently phi'^-1 = phi^-1 o delta_lambda.
    """
    frame = np.asarray(frame, dtype=float)
    dim = frame.shape[0]
    if frame.shape != (dim, dim) or dim % 2 == 0:
        raise DimensionMismatch("frame must be a square matrix of odd size", frame.shape)
    if abs(np.linalg.det(frame)) < 1e-14:
        raise DegenerateFrame("frame vectors are linearly dependent")
    central_scale = frame[0, 0]
    horizontal = frame[1:, 1:]
    if J is not None and not is_admissible(horizontal, J):
        dtheta = standard_dtheta(dim // 2) if metric is None else metric @ np.linalg.inv(J)
        logger.info("frame is not admissible, orthonormalizing against J")
        horizontal = adapted_frame(J, dtheta)
    # the class of X0 modulo H only sees its central component
    linear = np.zeros((dim, dim))
    linear[0, 0] = 1.0 / central_scale
    linear[1:, 1:] = np.linalg.inv(horizontal)
    return FrameMap(linear)


def random_points(rng: np.random.Generator, count: int, n: int, scale: float = 1.0) -> List[GroupPoint]:
    return [GroupPoint(scale * rng.standard_normal(2 * n + 1)) for _ in range(count)]
