"""Cluster analysis of converged hardmax trajectories.

This module extracts the leaders of a trajectory (tokens whose attention
set becomes their own singleton), groups the final token values into
cluster points, and checks the three claims of the clustering theorem:

1. every token converges to a cluster point,
2. leaders converge to pairwise distinct vertices, one per cluster,
3. every other cluster point is the A-projection of the origin onto a
   face spanned by leader limits.

Claim 3 is certified by solving the optimality system of the projection,
M beta + 1 lambda = 0 and 1^T beta = 1 with M_ij = <A v_i, v_j>.
Verdicts are reported, never raised.

Raises:
    NotConvergedError: Clusters are requested for a non-converged run.
    PersistenceViolationError: A leader stopped attending to itself.
    AmbiguousClusteringError: Cluster points are too close for the radius.
    SingularSystemError: A face has affinely dependent vertices.
"""

from collections.abc import Iterable
from collections.abc import Iterator
from collections.abc import Sequence
import dataclasses
import enum
import itertools
import logging
import math

import numpy as np

from .config import DEFAULT_CLUSTER_RADIUS
from .dynamics import TrajectoryRecord
from .errors import AmbiguousClusteringError
from .errors import DimensionMismatchError
from .errors import InvalidParameterError
from .errors import NotConvergedError
from .errors import PersistenceViolationError
from .errors import SingularSystemError
from .geometry import as_point
from .geometry import AttentionSet
from .geometry import near_tie_tokens
from .geometry import Point
from .geometry import SpdMatrix


logger = logging.getLogger(__name__)

PROJECTION_TOL = 1e-6
_WEIGHT_SUM_TOL = 1e-10
_MAX_CONDITION = 1e12


class ClusterKind(enum.Enum):
    """How a cluster point arises."""

    VERTEX = "vertex"
    FACE_PROJECTION = "face_projection"


@dataclasses.dataclass(frozen=True, eq=False)
class LeaderRecord:
    """A token that attends only to itself from some layer on.

    Attributes:
        token_index: Index of the token.
        detected_at_step: First recorded layer with C_i = {i}.
        limit_point: The final value of the token.
    """

    token_index: int
    detected_at_step: int
    limit_point: Point


@dataclasses.dataclass(frozen=True, eq=False)
class ProjectionCertificate:
    """Solution of the projection optimality system of a face.

    Attributes:
        vertex_indices: Leader token indices spanning the face.
        weights: Convex weights beta of the face vertices.
        multiplier: The Lagrange multiplier lambda = -||s||_A^2.
        residual: Point residual plus system residual (max norms).
    """

    vertex_indices: tuple[int, ...]
    weights: np.ndarray
    multiplier: float
    residual: float

    @property
    def is_interior(self) -> bool:
        """bool: Whether the weights are a strict convex combination."""
        return bool(
            np.all(self.weights > 0)
            and np.all(self.weights < 1)
            and abs(float(self.weights.sum()) - 1.0) <= _WEIGHT_SUM_TOL
        )


@dataclasses.dataclass(frozen=True, eq=False)
class ClusterPoint:
    """A limit point shared by a group of tokens.

    Attributes:
        position: The cluster point.
        kind: Vertex (reached by a leader) or face projection.
        member_tokens: Sorted indices of the tokens converging here.
        leader_index: The leader defining a vertex cluster.
        certificate: The certificate of a face-projection cluster, once
            verified.
    """

    position: Point
    kind: ClusterKind
    member_tokens: tuple[int, ...]
    leader_index: int | None = None
    certificate: ProjectionCertificate | None = None


@dataclasses.dataclass(frozen=True)
class TheoremVerdicts:
    """Outcome of checking the three clustering claims.

    Attributes:
        every_token_clustered: Claim (i).
        leaders_distinct_vertices: Claim (ii).
        non_vertices_are_projections: Claim (iii).
    """

    every_token_clustered: bool
    leaders_distinct_vertices: bool
    non_vertices_are_projections: bool

    @property
    def all_true(self) -> bool:
        """bool: Whether every claim holds."""
        return (self.every_token_clustered
                and self.leaders_distinct_vertices
                and self.non_vertices_are_projections)


@dataclasses.dataclass(frozen=True, eq=False)
class ClusterReport:
    """Leaders, clusters and verdicts of one trajectory.

    Attributes:
        leaders: The detected leaders.
        clusters: The cluster points, certified where possible.
        verdicts: The three theorem verdicts.
        cluster_radius: Radius used for grouping.
        steps_taken: Layers applied by the run.
        zero_initial_tokens: Tokens that start at the origin.
        near_tie_tokens: Tokens whose initial attention set was decided
            by the tie tolerance.
        alpha: Step size of the run.
        a: Attention matrix of the run.
    """

    leaders: tuple[LeaderRecord, ...]
    clusters: tuple[ClusterPoint, ...]
    verdicts: TheoremVerdicts
    cluster_radius: float
    steps_taken: int
    zero_initial_tokens: tuple[int, ...]
    near_tie_tokens: tuple[int, ...]
    alpha: float
    a: np.ndarray

    def to_dict(self) -> dict:
        """Converts the report into JSON-compatible types."""
        return {
            "leaders": [
                {
                    "token": leader.token_index,
                    "detectedAtStep": leader.detected_at_step,
                    "limitPoint": leader.limit_point.tolist(),
                }
                for leader in self.leaders
            ],
            "clusters": [_cluster_to_dict(c) for c in self.clusters],
            "verdicts": {
                "everyTokenClustered": self.verdicts.every_token_clustered,
                "leadersDistinctVertices":
                    self.verdicts.leaders_distinct_vertices,
                "nonVerticesAreProjections":
                    self.verdicts.non_vertices_are_projections,
            },
            "parameters": {
                "clusterRadius": self.cluster_radius,
                "alpha": self.alpha,
                "A": self.a.tolist(),
                "stepsTaken": self.steps_taken,
            },
            "zeroInitialTokens": list(self.zero_initial_tokens),
            "nearTieTokens": list(self.near_tie_tokens),
        }


def _cluster_to_dict(cluster: ClusterPoint) -> dict:
    certificate = None
    if cluster.certificate is not None:
        cert = cluster.certificate
        certificate = {
            "vertices": list(cert.vertex_indices),
            "weights": cert.weights.tolist(),
            "lambda": cert.multiplier,
            "residual": cert.residual,
        }
    return {
        "position": cluster.position.tolist(),
        "kind": cluster.kind.value,
        "leader": cluster.leader_index,
        "members": list(cluster.member_tokens),
        "certificate": certificate,
    }


def _recorded_sets(
    trajectory: TrajectoryRecord,
) -> Iterator[tuple[int, tuple[AttentionSet, ...]]]:
    for outcome in trajectory.steps:
        yield outcome.step, outcome.attention_sets
    yield trajectory.steps_taken, trajectory.final_attention_sets()


def detect_leaders(trajectory: TrajectoryRecord) -> list[LeaderRecord]:
    """Finds every token whose attention set becomes its own singleton.

    Args:
        trajectory: A hardmax trajectory.

    Returns:
        The leaders in token order, each with its earliest recorded
        detection step and its final value.

    Raises:
        InvalidParameterError: The trajectory is not in hardmax mode.
        PersistenceViolationError: A leader's set changes afterwards.
    """
    if not trajectory.spec.is_hardmax:
        raise InvalidParameterError("Leaders are defined for hardmax runs.")
    detected: dict[int, int] = {}
    for step, sets in _recorded_sets(trajectory):
        for attention in sets:
            i = attention.owner
            if attention.is_self:
                detected.setdefault(i, step)
            elif i in detected:
                raise PersistenceViolationError(i, step)
    final = trajectory.final
    return [
        LeaderRecord(
            token_index=i,
            detected_at_step=detected[i],
            limit_point=final.point(i),
        )
        for i in sorted(detected)
    ]


def _centroid(rows: np.ndarray) -> Point:
    return as_point([math.fsum(col) / len(rows) for col in rows.T])


def extract_clusters(
    trajectory: TrajectoryRecord,
    cluster_radius: float = DEFAULT_CLUSTER_RADIUS,
    leaders: Sequence[LeaderRecord] | None = None,
) -> list[ClusterPoint]:
    """Groups the final token values into cluster points.

    Tokens are grouped greedily in index order: a token joins the first
    group whose first member lies within ``cluster_radius``, so every
    group has diameter at most twice the radius. A group holding a
    leader is a vertex cluster located at that leader; any other group
    is located at its centroid and still needs certification.

    Args:
        trajectory: A converged hardmax trajectory.
        cluster_radius: Grouping radius.
        leaders: Leaders of the trajectory; detected when omitted.

    Returns:
        Disjoint clusters covering all tokens, ordered by first member.

    Raises:
        NotConvergedError: The trajectory did not converge.
        InvalidParameterError: The radius is not positive.
        AmbiguousClusteringError: Two cluster points lie within four
            radii of each other.
    """
    if not trajectory.converged:
        raise NotConvergedError(
            "Clusters can only be extracted from a converged run."
        )
    if not (math.isfinite(cluster_radius) and cluster_radius > 0):
        raise InvalidParameterError("cluster_radius must be positive.")
    if leaders is None:
        leaders = detect_leaders(trajectory)
    leader_points = {leader.token_index: leader for leader in leaders}

    final = trajectory.final.tokens
    groups: list[list[int]] = []
    for i, value in enumerate(final):
        for group in groups:
            if np.linalg.norm(value - final[group[0]]) <= cluster_radius:
                group.append(i)
                break
        else:
            groups.append([i])

    clusters = []
    for group in groups:
        members = tuple(group)
        in_group = [i for i in members if i in leader_points]
        if in_group:
            head = leader_points[in_group[0]]
            clusters.append(ClusterPoint(
                position=head.limit_point,
                kind=ClusterKind.VERTEX,
                member_tokens=members,
                leader_index=head.token_index,
            ))
        else:
            clusters.append(ClusterPoint(
                position=_centroid(final[list(members)]),
                kind=ClusterKind.FACE_PROJECTION,
                member_tokens=members,
            ))

    for first, second in itertools.combinations(clusters, 2):
        distance = np.linalg.norm(first.position - second.position)
        if distance <= 4 * cluster_radius:
            raise AmbiguousClusteringError(
                f"Cluster points {first.position} and {second.position} "
                f"are {distance:.3e} apart; choose a smaller radius."
            )
    logger.info(f"Extracted {len(clusters)} clusters from {len(final)} "
                "tokens")
    return clusters


def check_projection(
    s: Iterable[float],
    vertices: Sequence[Iterable[float]],
    a: SpdMatrix,
    vertex_indices: Sequence[int] | None = None,
) -> ProjectionCertificate:
    """Certifies a point as the A-projection of the origin onto a face.

    Solves the bordered system [[M, 1], [1^T, 0]] (beta, lambda) =
    (0, 1) with M_ij = <A v_i, v_j>. The residual adds
    ||sum_j beta_j v_j - s||_inf to the residual of the system, so a
    small residual together with interior weights certifies s.

    Args:
        s: The candidate cluster point.
        vertices: At least two vertices spanning the face.
        a: The SPD matrix defining the norm.
        vertex_indices: Labels stored in the certificate; positions in
            ``vertices`` when omitted.

    Returns:
        The certificate of the face.

    Raises:
        InvalidParameterError: Fewer than two vertices are given.
        DimensionMismatchError: Points do not match A.
        SingularSystemError: The vertices are affinely dependent.
    """
    s = as_point(s)
    if len(vertices) < 2:
        raise InvalidParameterError("A face needs at least two vertices.")
    v = np.vstack([as_point(p) for p in vertices])
    if v.shape[1] != s.size or a.dimension != s.size:
        raise DimensionMismatchError("Face vertices must match s and A.")
    r = v.shape[0]

    m = v @ a.entries @ v.T
    system = np.zeros((r + 1, r + 1))
    system[:r, :r] = m
    system[:r, r] = 1.0
    system[r, :r] = 1.0
    rhs = np.zeros(r + 1)
    rhs[r] = 1.0
    if not np.linalg.cond(system) < _MAX_CONDITION:
        raise SingularSystemError("The face vertices are affinely dependent.")
    try:
        solution = np.linalg.solve(system, rhs)
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"Singular face system: {e}") from e

    weights, multiplier = solution[:r], float(solution[r])
    system_residual = max(
        float(np.max(np.abs(m @ weights + multiplier))),
        abs(float(weights.sum()) - 1.0),
    )
    point_residual = float(np.max(np.abs(weights @ v - s)))
    weights.flags.writeable = False
    return ProjectionCertificate(
        vertex_indices=tuple(vertex_indices or range(r)),
        weights=weights,
        multiplier=multiplier,
        residual=point_residual + system_residual,
    )


def _find_face(
    position: Point,
    leaders: Sequence[LeaderRecord],
    a: SpdMatrix,
    tolerance: float,
) -> ProjectionCertificate | None:
    largest = min(len(leaders), a.dimension + 1)
    for size in range(2, largest + 1):
        for face in itertools.combinations(leaders, size):
            try:
                certificate = check_projection(
                    position,
                    [leader.limit_point for leader in face],
                    a,
                    vertex_indices=[leader.token_index for leader in face],
                )
            except SingularSystemError:
                continue
            if certificate.residual <= tolerance and certificate.is_interior:
                return certificate
    return None


def verify_theorem1(
    trajectory: TrajectoryRecord,
    leaders: Sequence[LeaderRecord],
    clusters: Sequence[ClusterPoint],
    a: SpdMatrix,
    cluster_radius: float = DEFAULT_CLUSTER_RADIUS,
    tolerance: float = PROJECTION_TOL,
) -> ClusterReport:
    """Checks the three clustering claims on one trajectory.

    Tokens that start at the origin are flagged: they are left out of
    the leader claim, and a cluster resting at the origin that holds
    one of them counts as a cluster point even without a certificate.

    Args:
        trajectory: The analyzed trajectory.
        leaders: Its leaders.
        clusters: Its clusters.
        a: The attention matrix of the run.
        cluster_radius: Radius used for grouping.
        tolerance: Largest accepted certificate residual.

    Returns:
        The report, with certificates attached to face projections.
    """
    n = trajectory.initial.n
    initial = trajectory.initial.tokens
    zero_tokens = tuple(
        int(i) for i in np.flatnonzero(~initial.any(axis=1))
    )

    counts = np.zeros(n, dtype=int)
    for cluster in clusters:
        counts[list(cluster.member_tokens)] += 1
    every_token_clustered = trajectory.converged and bool(np.all(counts == 1))

    eligible = [lead for lead in leaders if lead.token_index not in
                zero_tokens]
    distinct = all(
        np.linalg.norm(p.limit_point - q.limit_point) > 2 * cluster_radius
        for p, q in itertools.combinations(eligible, 2)
    )
    leader_ids = {lead.token_index for lead in eligible}
    alone = all(
        cluster.kind is ClusterKind.VERTEX
        and len(leader_ids.intersection(cluster.member_tokens)) == 1
        for cluster in clusters
        if leader_ids.intersection(cluster.member_tokens)
    )
    vertex_count = sum(c.kind is ClusterKind.VERTEX for c in clusters)
    leaders_distinct_vertices = (
        bool(leaders) and distinct and alone
        and vertex_count == len(leaders)
    )

    certified = []
    projections_ok = True
    for cluster in clusters:
        if cluster.kind is ClusterKind.VERTEX:
            certified.append(cluster)
            continue
        certificate = _find_face(cluster.position, leaders, a, tolerance)
        if certificate is not None:
            certified.append(
                dataclasses.replace(cluster, certificate=certificate)
            )
            continue
        certified.append(cluster)
        at_origin = np.linalg.norm(cluster.position) <= cluster_radius
        if not (at_origin and set(zero_tokens) & set(cluster.member_tokens)):
            logger.warning(
                f"Cluster at {cluster.position} is not a projection of the "
                "origin onto a face of leaders"
            )
            projections_ok = False

    flagged = ()
    if trajectory.spec.is_hardmax:
        flagged = near_tie_tokens(trajectory.initial, trajectory.spec)
    if zero_tokens:
        logger.warning(f"Tokens {list(zero_tokens)} start at the origin")
    return ClusterReport(
        leaders=tuple(leaders),
        clusters=tuple(certified),
        verdicts=TheoremVerdicts(
            every_token_clustered=every_token_clustered,
            leaders_distinct_vertices=leaders_distinct_vertices,
            non_vertices_are_projections=projections_ok,
        ),
        cluster_radius=cluster_radius,
        steps_taken=trajectory.steps_taken,
        zero_initial_tokens=zero_tokens,
        near_tie_tokens=flagged,
        alpha=trajectory.spec.alpha,
        a=a.entries,
    )


def analyze_trajectory(
    trajectory: TrajectoryRecord,
    cluster_radius: float = DEFAULT_CLUSTER_RADIUS,
) -> ClusterReport:
    """Runs leader detection, clustering and verification in turn.

    Args:
        trajectory: A converged hardmax trajectory.
        cluster_radius: Grouping radius.

    Returns:
        The cluster report.

    Raises:
        NotConvergedError: The trajectory did not converge.
        PersistenceViolationError: A leader's set changed.
        AmbiguousClusteringError: The radius is too coarse.
    """
    leaders = detect_leaders(trajectory)
    clusters = extract_clusters(trajectory, cluster_radius, leaders)
    report = verify_theorem1(
        trajectory, leaders, clusters, trajectory.spec.a, cluster_radius
    )
    logger.info(
        f"{len(leaders)} leaders, {len(clusters)} clusters, verdicts "
        f"{'all true' if report.verdicts.all_true else 'not all true'}"
    )
    return report
