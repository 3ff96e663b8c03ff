"""Core geometry for hardmax attention dynamics.

Tokens are points of R^d that interact through the bilinear form
<A x, y> of a symmetric positive definite matrix A = B^T B. This module
holds the immutable value types shared by the rest of the package, the
attention sets of the hardmax rule, the similarity matrices of both
attention modes, the triangular factorization of A, the change of
variables z -> B z, and the planar convex hull used by the
hull-shrinkage checks and the SVG export.

All functions are pure; arrays stored in the value types are copied on
construction and marked read-only.

Raises:
    DimensionMismatchError: Shapes of tokens and matrices disagree.
    InvalidParameterError: A parameter is non-finite or non-positive.
    NotSymmetricError: ``factorize_spd`` received a non-symmetric matrix.
    NotPositiveDefiniteError: ``factorize_spd`` met a non-positive pivot.
    SingularMatrixError: A change of variables uses a singular matrix.
"""

from collections.abc import Iterable
from collections.abc import Sequence
import dataclasses
import math

import numpy as np

from .errors import DimensionMismatchError
from .errors import InvalidParameterError
from .errors import NotPositiveDefiniteError
from .errors import NotSymmetricError
from .errors import SingularMatrixError


DEFAULT_TIE_TOL = 1e-9
NEAR_TIE_FACTOR = 100.0

_SYMMETRY_TOL = 1e-12
_RECONSTRUCTION_TOL = 1e-12
_PIVOT_TOL = 1e-12

Point = np.ndarray


def _readonly(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


def _check_positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise InvalidParameterError(
            f"{name} must be a positive finite number, got {value!r}."
        )


def as_point(coords: Iterable[float]) -> Point:
    """Converts coordinates into a read-only point.

    Args:
        coords: The coordinates of the point.

    Returns:
        A one-dimensional read-only float64 array.

    Raises:
        DimensionMismatchError: The coordinates are not a flat vector.
        InvalidParameterError: A coordinate is NaN or infinite.
    """
    point = np.array(coords, dtype=np.float64)
    if point.ndim != 1 or point.size == 0:
        raise DimensionMismatchError(
            f"A point must be a nonempty vector, got shape {point.shape}."
        )
    if not np.all(np.isfinite(point)):
        raise InvalidParameterError("Point coordinates must be finite.")
    return _readonly(point)


@dataclasses.dataclass(frozen=True, eq=False)
class TokenConfiguration:
    """An ordered configuration of n tokens in R^d.

    The tokens are stored as the rows of an (n, d) read-only array.

    Attributes:
        tokens: The (n, d) array of token values.
    """

    tokens: np.ndarray

    def __post_init__(self):
        """Validates and freezes the token array."""
        tokens = np.array(self.tokens, dtype=np.float64)
        if tokens.ndim != 2 or tokens.shape[0] < 1 or tokens.shape[1] < 1:
            raise DimensionMismatchError(
                "Tokens must form a nonempty (n, d) array, got shape "
                f"{tokens.shape}."
            )
        if not np.all(np.isfinite(tokens)):
            raise InvalidParameterError("Token values must be finite.")
        object.__setattr__(self, "tokens", _readonly(tokens))

    @classmethod
    def from_points(
        cls, points: Sequence[Iterable[float]]
    ) -> "TokenConfiguration":
        """Builds a configuration from a sequence of points.

        Args:
            points: The token values, all of the same dimension.

        Returns:
            The configuration holding the points as rows.

        Raises:
            DimensionMismatchError: The points differ in dimension.
        """
        rows = [as_point(p) for p in points]
        if not rows:
            raise DimensionMismatchError("At least one token is required.")
        if len({row.size for row in rows}) != 1:
            raise DimensionMismatchError("All tokens must share dimension d.")
        return cls(np.vstack(rows))

    @property
    def n(self) -> int:
        """int: The number of tokens."""
        return self.tokens.shape[0]

    @property
    def dimension(self) -> int:
        """int: The embedding dimension d."""
        return self.tokens.shape[1]

    def __len__(self) -> int:
        return self.n

    def point(self, i: int) -> Point:
        """Returns the value of token ``i`` as a read-only vector."""
        return self.tokens[i]

    def permuted(self, order: Sequence[int]) -> "TokenConfiguration":
        """Returns the configuration with tokens reordered.

        Args:
            order: ``order[k]`` is the old index of the new token ``k``.

        Returns:
            The reordered configuration.
        """
        return TokenConfiguration(self.tokens[list(order)])


@dataclasses.dataclass(frozen=True, eq=False)
class SpdMatrix:
    """A symmetric positive definite matrix with a factor A = B^T B.

    Instances are produced by ``factorize_spd``; direct construction
    re-validates symmetry and the reconstruction of A from B.

    Attributes:
        entries: The symmetric (d, d) matrix A.
        factor: The invertible upper triangular (d, d) matrix B.
    """

    entries: np.ndarray
    factor: np.ndarray

    def __post_init__(self):
        """Validates symmetry and the factorization."""
        entries = np.array(self.entries, dtype=np.float64)
        factor = np.array(self.factor, dtype=np.float64)
        d = entries.shape[0] if entries.ndim == 2 else -1
        if entries.shape != (d, d) or factor.shape != (d, d) or d < 1:
            raise DimensionMismatchError(
                "A and B must be square matrices of the same size."
            )
        if not np.array_equal(entries, entries.T):
            raise NotSymmetricError("Stored A must be exactly symmetric.")
        scale = float(np.max(np.abs(entries)))
        error = float(np.max(np.abs(factor.T @ factor - entries)))
        if error > _RECONSTRUCTION_TOL * scale:
            raise InvalidParameterError(
                f"B^T B differs from A by {error:.3e}."
            )
        object.__setattr__(self, "entries", _readonly(entries))
        object.__setattr__(self, "factor", _readonly(factor))

    @classmethod
    def identity(cls, dimension: int) -> "SpdMatrix":
        """Returns the identity matrix of the given dimension."""
        eye = np.eye(dimension)
        return cls(entries=eye, factor=eye)

    @property
    def dimension(self) -> int:
        """int: The size d of the matrix."""
        return self.entries.shape[0]

    @property
    def is_identity(self) -> bool:
        """bool: Whether A is exactly the identity."""
        return bool(np.array_equal(self.entries, np.eye(self.dimension)))


@dataclasses.dataclass(frozen=True)
class Hardmax:
    """Hardmax attention: uniform weights over the argmax set.

    Attributes:
        tie_tol: Relative tolerance for membership in the argmax set.
    """

    tie_tol: float = DEFAULT_TIE_TOL

    def __post_init__(self):
        """Validates the tie tolerance."""
        _check_positive("tie_tol", self.tie_tol)


@dataclasses.dataclass(frozen=True)
class Softmax:
    """Softmax attention with temperature ``tau``.

    Attributes:
        tau: The temperature; hardmax is recovered as tau -> 0.
    """

    tau: float

    def __post_init__(self):
        """Validates the temperature."""
        _check_positive("tau", self.tau)


AttentionMode = Hardmax | Softmax


@dataclasses.dataclass(frozen=True, eq=False)
class AttentionSpec:
    """Parameters of one transformer layer.

    Attributes:
        a: The attention matrix A.
        alpha: The step size; the value matrix is V = alpha I.
        mode: The similarity rule, hardmax or softmax.
    """

    a: SpdMatrix
    alpha: float
    mode: AttentionMode = dataclasses.field(default_factory=Hardmax)

    def __post_init__(self):
        """Validates the step size and mode."""
        _check_positive("alpha", self.alpha)
        if not isinstance(self.mode, (Hardmax, Softmax)):
            raise InvalidParameterError(f"Unknown mode {self.mode!r}.")

    @property
    def is_hardmax(self) -> bool:
        """bool: Whether the layer uses hardmax attention."""
        return isinstance(self.mode, Hardmax)

    @property
    def step_fraction(self) -> float:
        """float: The fraction alpha / (1 + alpha) moved per layer."""
        return self.alpha / (1.0 + self.alpha)

    def with_mode(self, mode: AttentionMode) -> "AttentionSpec":
        """Returns a copy of the spec with another similarity rule."""
        return dataclasses.replace(self, mode=mode)


@dataclasses.dataclass(frozen=True)
class AttentionSet:
    """The tokens attracting one token under hardmax attention.

    Attributes:
        owner: Index of the attending token.
        members: Sorted indices attaining the maximal score.
    """

    owner: int
    members: tuple[int, ...]

    def __post_init__(self):
        """Validates that the set is nonempty."""
        if not self.members:
            raise InvalidParameterError("Attention sets are never empty.")

    @property
    def is_self(self) -> bool:
        """bool: Whether the owner attends only to itself."""
        return self.members == (self.owner,)


def _check_dimension(a: SpdMatrix, d: int) -> None:
    if a.dimension != d:
        raise DimensionMismatchError(
            f"A is {a.dimension}x{a.dimension} but tokens have d = {d}."
        )


def a_inner(a: SpdMatrix, x: Iterable[float], y: Iterable[float]) -> float:
    """Evaluates the bilinear form <A x, y>.

    Args:
        a: The SPD matrix A.
        x: First vector.
        y: Second vector.

    Returns:
        The value x^T A y.

    Raises:
        DimensionMismatchError: The vectors do not match A.
    """
    x, y = as_point(x), as_point(y)
    if x.size != y.size:
        raise DimensionMismatchError("x and y differ in dimension.")
    _check_dimension(a, x.size)
    return float(x @ a.entries @ y)


def scores(config: TokenConfiguration, a: SpdMatrix) -> np.ndarray:
    """Computes all pairwise scores <A z_i, z_j>.

    Args:
        config: The token configuration.
        a: The SPD matrix A.

    Returns:
        The (n, n) matrix whose row i holds <A z_i, z_j> for every j.
    """
    _check_dimension(a, config.dimension)
    tokens = config.tokens
    return (tokens @ a.entries) @ tokens.T


def _membership(score: np.ndarray, tie_tol: float) -> np.ndarray:
    row_max = score.max(axis=1)
    window = row_max - tie_tol * np.maximum(1.0, np.abs(row_max))
    own = np.diag(score)
    # A token inside its own tie window only follows tokens it scores
    # at least as high as itself.
    floor = np.where(own >= window, own, window)
    return score >= floor[:, None]


def _require_hardmax(spec: AttentionSpec) -> Hardmax:
    if not spec.is_hardmax:
        raise InvalidParameterError("Attention sets need hardmax mode.")
    return spec.mode


def attention_sets(
    config: TokenConfiguration, spec: AttentionSpec
) -> tuple[AttentionSet, ...]:
    """Computes the hardmax attention set of every token.

    Args:
        config: The token configuration Z.
        spec: A hardmax attention spec.

    Returns:
        One AttentionSet per token, in token order.

    Raises:
        InvalidParameterError: The spec is not in hardmax mode.
    """
    mode = _require_hardmax(spec)
    mask = _membership(scores(config, spec.a), mode.tie_tol)
    return tuple(
        AttentionSet(owner=i, members=tuple(np.flatnonzero(row).tolist()))
        for i, row in enumerate(mask)
    )


def attention_set(
    config: TokenConfiguration, i: int, spec: AttentionSpec
) -> AttentionSet:
    """Computes the hardmax attention set of token ``i``.

    Members are the indices j with <A z_i, z_j> >= m - tie_tol *
    max(1, |m|), m being the exact row maximum. When token i lies in
    that window itself, only tokens scoring at least <A z_i, z_i> are
    kept.

    Args:
        config: The token configuration Z.
        i: Index of the attending token.
        spec: A hardmax attention spec.

    Returns:
        The attention set of token i.

    Raises:
        IndexError: ``i`` is not a token index.
        InvalidParameterError: The spec is not in hardmax mode.
    """
    if not 0 <= i < config.n:
        raise IndexError(f"Token index {i} out of range [0, {config.n}).")
    return attention_sets(config, spec)[i]


def runner_up_gap(
    config: TokenConfiguration, spec: AttentionSpec
) -> np.ndarray:
    """Measures how clearly each hardmax attention set is decided.

    Args:
        config: The token configuration Z.
        spec: A hardmax attention spec.

    Returns:
        Per row, the row maximum minus the best score outside the
        attention set; ``inf`` when every token is a member.
    """
    mode = _require_hardmax(spec)
    score = scores(config, spec.a)
    mask = _membership(score, mode.tie_tol)
    outside = np.where(mask, -np.inf, score)
    return score.max(axis=1) - outside.max(axis=1)


def near_tie_tokens(
    config: TokenConfiguration, spec: AttentionSpec
) -> tuple[int, ...]:
    """Lists tokens whose attention decision depends on the tolerance.

    A token is flagged when its attention set holds several members or
    when the best excluded score lies within ``NEAR_TIE_FACTOR`` times
    the tie window of the maximum.

    Args:
        config: The token configuration Z.
        spec: A hardmax attention spec.

    Returns:
        The sorted indices of the flagged tokens.
    """
    mode = _require_hardmax(spec)
    score = scores(config, spec.a)
    scale = np.maximum(1.0, np.abs(score.max(axis=1)))
    gap = runner_up_gap(config, spec)
    sizes = _membership(score, mode.tie_tol).sum(axis=1)
    flagged = (sizes > 1) | (gap <= NEAR_TIE_FACTOR * mode.tie_tol * scale)
    return tuple(np.flatnonzero(flagged).tolist())


def similarity_matrix(
    config: TokenConfiguration, spec: AttentionSpec
) -> np.ndarray:
    """Computes the row-stochastic similarity matrix of a layer.

    In hardmax mode row i is uniform on the attention set of token i.
    In softmax mode row i is the softmax of <A z_i, z_j> / tau, computed
    with the row maximum subtracted.

    Args:
        config: The token configuration Z.
        spec: The attention spec.

    Returns:
        The (n, n) similarity matrix.
    """
    score = scores(config, spec.a)
    if isinstance(spec.mode, Hardmax):
        mask = _membership(score, spec.mode.tie_tol).astype(np.float64)
        return mask / mask.sum(axis=1, keepdims=True)
    shifted = score / spec.mode.tau
    shifted -= shifted.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=1, keepdims=True)


def factorize_spd(matrix: Sequence[Sequence[float]]) -> SpdMatrix:
    """Factorizes a symmetric positive definite matrix as A = B^T B.

    The upper triangle of the input is mirrored into a stored matrix
    that is exactly symmetric, then a Cholesky sweep computes the lower
    factor L; B is its transpose.

    Args:
        matrix: A square matrix, symmetric up to a relative 1e-12.

    Returns:
        The validated SpdMatrix.

    Raises:
        DimensionMismatchError: The matrix is not square.
        InvalidParameterError: An entry is NaN or infinite.
        NotSymmetricError: The matrix is not symmetric.
        NotPositiveDefiniteError: A pivot is not above
            1e-12 * trace(A) / d.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DimensionMismatchError(f"A must be square, got {a.shape}.")
    if not np.all(np.isfinite(a)):
        raise InvalidParameterError("A must have finite entries.")
    scale = float(np.max(np.abs(a)))
    if float(np.max(np.abs(a - a.T))) > _SYMMETRY_TOL * scale:
        raise NotSymmetricError("A is not symmetric.")
    a = np.triu(a) + np.triu(a, 1).T

    d = a.shape[0]
    threshold = max(_PIVOT_TOL * float(np.trace(a)) / d, 0.0)
    lower = np.zeros_like(a)
    for i in range(d):
        for j in range(i + 1):
            s = a[i, j] - float(lower[i, :j] @ lower[j, :j])
            if i == j:
                if s <= threshold:
                    raise NotPositiveDefiniteError(
                        f"Pivot {i} of A is {s:.3e}; A is not positive "
                        "definite."
                    )
                lower[i, i] = math.sqrt(s)
            else:
                lower[i, j] = s / lower[j, j]
    return SpdMatrix(entries=a, factor=lower.T.copy())


def _as_square(b: Sequence[Sequence[float]], d: int) -> np.ndarray:
    b = np.array(b, dtype=np.float64)
    if b.shape != (d, d):
        raise DimensionMismatchError(
            f"B must be {d}x{d} to act on the tokens, got {b.shape}."
        )
    return b


def transform_configuration(
    config: TokenConfiguration, b: Sequence[Sequence[float]]
) -> TokenConfiguration:
    """Applies the change of variables z -> B z to every token.

    Running the dynamics with A on Z is equivalent to running them with
    the identity on B Z when A = B^T B.

    Args:
        config: The token configuration.
        b: An invertible (d, d) matrix.

    Returns:
        The configuration {B z_i}.

    Raises:
        DimensionMismatchError: B does not match the tokens.
        SingularMatrixError: B is singular.
    """
    b = _as_square(b, config.dimension)
    if np.linalg.matrix_rank(b) < config.dimension:
        raise SingularMatrixError("B must be invertible.")
    return TokenConfiguration(config.tokens @ b.T)


def untransform_configuration(
    config: TokenConfiguration, b: Sequence[Sequence[float]]
) -> TokenConfiguration:
    """Undoes ``transform_configuration`` by solving B x = z per token.

    Args:
        config: The transformed configuration.
        b: The invertible (d, d) matrix used for the transform.

    Returns:
        The configuration {B^{-1} z_i}.

    Raises:
        DimensionMismatchError: B does not match the tokens.
        SingularMatrixError: B is singular.
    """
    b = _as_square(b, config.dimension)
    try:
        return TokenConfiguration(np.linalg.solve(b, config.tokens.T).T)
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError(f"B must be invertible: {e}") from e


def _cross(
    o: tuple[float, float], p: tuple[float, float], q: tuple[float, float]
) -> float:
    return (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])


def convex_hull_2d(points: Iterable[Iterable[float]]) -> list[Point]:
    """Computes the convex hull of planar points by monotone chain.

    Args:
        points: At least one point of R^2.

    Returns:
        The hull vertices in counterclockwise order, starting from the
        lexicographically smallest; collinear boundary points are
        dropped. A single vertex is returned for identical points.

    Raises:
        DimensionMismatchError: A point is not two-dimensional or no
            point is given.
    """
    unique = set()
    for p in points:
        p = as_point(p)
        if p.size != 2:
            raise DimensionMismatchError("Hulls are computed in 2-D only.")
        unique.add((float(p[0]), float(p[1])))
    if not unique:
        raise DimensionMismatchError("A hull needs at least one point.")
    ordered = sorted(unique)
    if len(ordered) <= 2:
        return [as_point(p) for p in ordered]

    lower: list[tuple[float, float]] = []
    for p in ordered:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(ordered):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return [as_point(p) for p in lower[:-1] + upper[:-1]]


def hull_contains(
    hull: Sequence[Iterable[float]],
    point: Iterable[float],
    slack: float = 1e-10,
) -> bool:
    """Tests whether a point lies in a counterclockwise planar hull.

    Args:
        hull: Vertices as returned by ``convex_hull_2d``.
        point: The query point.
        slack: Allowed distance outside the hull.

    Returns:
        True if the point is inside or within ``slack`` of the hull.
    """
    vertices = [tuple(as_point(v)) for v in hull]
    p = tuple(as_point(point))
    if len(vertices) == 1:
        return math.dist(vertices[0], p) <= slack
    if len(vertices) == 2:
        a, b = vertices
        length = math.dist(a, b)
        along = ((p[0] - a[0]) * (b[0] - a[0])
                 + (p[1] - a[1]) * (b[1] - a[1])) / length
        return (abs(_cross(a, b, p)) <= slack * length
                and -slack <= along <= length + slack)
    for a, b in zip(vertices, vertices[1:] + vertices[:1]):
        if _cross(a, b, p) < -slack * math.dist(a, b):
            return False
    return True
