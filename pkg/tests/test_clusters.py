"""Tests for the hardformer.clusters module."""

import itertools
import json

import numpy as np
import pytest

from hardformer.clusters import analyze_trajectory
from hardformer.clusters import check_projection
from hardformer.clusters import ClusterKind
from hardformer.clusters import detect_leaders
from hardformer.clusters import extract_clusters
from hardformer.clusters import verify_theorem1
from hardformer.config import RunConfig
from hardformer.dynamics import run
from hardformer.dynamics import StepOutcome
from hardformer.dynamics import StopReason
from hardformer.dynamics import TrajectoryRecord
from hardformer.errors import AmbiguousClusteringError
from hardformer.errors import InvalidParameterError
from hardformer.errors import NotConvergedError
from hardformer.errors import PersistenceViolationError
from hardformer.errors import SingularSystemError
from hardformer.geometry import a_inner
from hardformer.geometry import AttentionSet
from hardformer.geometry import AttentionSpec
from hardformer.geometry import convex_hull_2d
from hardformer.geometry import factorize_spd
from hardformer.geometry import runner_up_gap
from hardformer.geometry import Softmax
from hardformer.geometry import SpdMatrix
from hardformer.geometry import TokenConfiguration
from hardformer.geometry import transform_configuration


def hardmax_spec(d: int, alpha: float = 0.5) -> AttentionSpec:
    """Returns a hardmax spec with A = I."""
    return AttentionSpec(a=SpdMatrix.identity(d), alpha=alpha)


@pytest.fixture
def line_run() -> TrajectoryRecord:
    """Converged run of five symmetric tokens on the line."""
    config = TokenConfiguration.from_points([[-1], [-0.5], [0], [0.5], [1]])
    return run(config, hardmax_spec(1))


@pytest.fixture
def example_run() -> TrajectoryRecord:
    """Converged run of the three-token configuration."""
    config = TokenConfiguration.from_points([(-1, 1), (0, 3), (12, 4)])
    return run(config, hardmax_spec(2))


@pytest.fixture
def face_run() -> TrajectoryRecord:
    """Four leaders with two followers pulled onto edge midpoints.

    Tokens 4 and 5 sit on the symmetry axis and tie exactly between the
    top and the bottom pair of leaders; tokens 6 and 7 follow a single
    leader each.
    """
    config = TokenConfiguration.from_points([
        (-1, 1.2), (1, 1.2), (-1, -0.8), (1, -0.8),
        (0, 0.5), (0, -0.3), (-0.5, 0.3), (0.5, -0.2),
    ])
    return run(config, hardmax_spec(2))


def test_detect_leaders_example(example_run):
    """Tests the late leader of the three-token configuration."""
    leaders = detect_leaders(example_run)
    assert [(lead.token_index, lead.detected_at_step) for lead in leaders] \
        == [(0, 1), (2, 0)]
    np.testing.assert_allclose(leaders[0].limit_point, (-2 / 3, 5 / 3),
                               atol=1e-12)


def test_detect_leaders_single_token():
    """Tests that a lone token is a leader from the start."""
    trajectory = run(TokenConfiguration.from_points([(0.5, 0.5)]),
                     hardmax_spec(2))
    leaders = detect_leaders(trajectory)
    assert [(lead.token_index, lead.detected_at_step) for lead in leaders] \
        == [(0, 0)]


def test_detect_leaders_line_excludes_zero_token(line_run):
    """Tests that the middle token ties with everyone and never leads."""
    leaders = detect_leaders(line_run)
    assert [(lead.token_index, lead.detected_at_step) for lead in leaders] \
        == [(0, 0), (4, 0)]


def test_detect_leaders_requires_hardmax():
    """Tests that softmax runs have no leaders."""
    config = TokenConfiguration.from_points([(1, 0), (0, 1)])
    spec = hardmax_spec(2).with_mode(Softmax(tau=0.1))
    trajectory = run(config, spec, RunConfig(max_steps=5))
    with pytest.raises(InvalidParameterError):
        detect_leaders(trajectory)


def test_detect_leaders_persistence_violation():
    """Tests that a leader losing its singleton set is reported."""
    config = TokenConfiguration.from_points([(1, 0), (0.5, 0)])
    spec = hardmax_spec(2)
    outcomes = (
        StepOutcome(step=0, next=config, max_displacement=0.0,
                    attention_sets=(AttentionSet(0, (0,)),
                                    AttentionSet(1, (0,)))),
        StepOutcome(step=1, next=config, max_displacement=0.0,
                    attention_sets=(AttentionSet(0, (0, 1)),
                                    AttentionSet(1, (0,)))),
    )
    trajectory = TrajectoryRecord(
        initial=config, spec=spec, steps=outcomes, converged=True,
        stop_reason=StopReason.CONVERGED, steps_taken=2,
    )
    with pytest.raises(PersistenceViolationError) as excinfo:
        detect_leaders(trajectory)
    assert excinfo.value.token_index == 0
    assert excinfo.value.step == 1


def test_extract_clusters_line(line_run):
    """Tests the three clusters of the symmetric line."""
    clusters = extract_clusters(line_run, cluster_radius=1e-4)
    assert [c.member_tokens for c in clusters] == [(0, 1), (2,), (3, 4)]
    assert [c.kind for c in clusters] == [
        ClusterKind.VERTEX, ClusterKind.FACE_PROJECTION, ClusterKind.VERTEX
    ]
    np.testing.assert_allclose([c.position[0] for c in clusters],
                               [-1, 0, 1], atol=1e-6)
    assert clusters[0].leader_index == 0
    assert clusters[2].leader_index == 4


def test_extract_clusters_single_basin():
    """Tests tokens that all follow one leader."""
    config = TokenConfiguration.from_points([(1, 0), (0.9, 0.01),
                                             (0.8, -0.01)])
    clusters = extract_clusters(run(config, hardmax_spec(2)))
    assert len(clusters) == 1
    assert clusters[0].member_tokens == (0, 1, 2)
    assert clusters[0].leader_index == 0


def test_extract_clusters_single_token():
    """Tests the one-token cluster."""
    trajectory = run(TokenConfiguration.from_points([(0.1,)]),
                     hardmax_spec(1))
    clusters = extract_clusters(trajectory)
    assert [c.member_tokens for c in clusters] == [(0,)]


def test_extract_clusters_requires_convergence():
    """Tests that truncated runs are refused."""
    config = TokenConfiguration.from_points([[-1], [-0.5], [0.5], [1]])
    trajectory = run(config, hardmax_spec(1), RunConfig(max_steps=3))
    with pytest.raises(NotConvergedError):
        extract_clusters(trajectory)


def test_extract_clusters_ambiguous_radius(line_run):
    """Tests that a coarse radius is rejected."""
    with pytest.raises(AmbiguousClusteringError):
        extract_clusters(line_run, cluster_radius=0.3)


def test_extract_clusters_invalid_radius(line_run):
    """Tests that the radius must be positive."""
    with pytest.raises(InvalidParameterError):
        extract_clusters(line_run, cluster_radius=0.0)


def test_check_projection_segment_on_line():
    """Tests the projection of the origin onto [-1, 1]."""
    certificate = check_projection([0.0], [[-1.0], [1.0]],
                                   SpdMatrix.identity(1))
    np.testing.assert_allclose(certificate.weights, [0.5, 0.5], atol=1e-15)
    assert certificate.multiplier == pytest.approx(0.0, abs=1e-15)
    assert certificate.residual == pytest.approx(0.0, abs=1e-15)
    assert certificate.is_interior


def test_check_projection_diagonal_segment():
    """Tests the projection of the origin onto a symmetric segment."""
    certificate = check_projection((0.5, 0.5), [(1, 0), (0, 1)],
                                   SpdMatrix.identity(2), [3, 7])
    np.testing.assert_allclose(certificate.weights, [0.5, 0.5], atol=1e-12)
    assert certificate.multiplier == pytest.approx(-0.5, abs=1e-12)
    assert certificate.residual <= 1e-12
    assert certificate.vertex_indices == (3, 7)


def test_check_projection_wrong_point_has_residual():
    """Tests that a point off the projection is not certified."""
    certificate = check_projection((0.9, 0.1), [(1, 0), (0, 1)],
                                   SpdMatrix.identity(2))
    assert certificate.residual > 0.3


def test_check_projection_needs_two_vertices():
    """Tests that a single vertex is not a face."""
    with pytest.raises(InvalidParameterError):
        check_projection((1, 0), [(1, 0)], SpdMatrix.identity(2))


def test_check_projection_degenerate_face():
    """Tests that repeated vertices make the system singular."""
    with pytest.raises(SingularSystemError):
        check_projection((1, 0), [(1, 0), (1, 0)], SpdMatrix.identity(2))


def test_check_projection_invariant_under_change_of_variables():
    """Tests that certificates agree for A and for B-transformed points."""
    rng = np.random.default_rng(41)
    for _ in range(10):
        m = rng.normal(size=(3, 3))
        a = factorize_spd(m @ m.T + 3 * np.eye(3))
        vertices = TokenConfiguration(rng.uniform(-1, 1, size=(3, 3)))
        moved = transform_configuration(vertices, a.factor)
        direct = check_projection(vertices.point(0), vertices.tokens, a)
        plain = check_projection(moved.point(0), moved.tokens,
                                 SpdMatrix.identity(3))
        np.testing.assert_allclose(direct.weights, plain.weights, atol=1e-9)
        assert direct.multiplier == pytest.approx(plain.multiplier,
                                                  abs=1e-9)


def test_analyze_line_certifies_middle(line_run):
    """Tests the full analysis of the symmetric line."""
    report = analyze_trajectory(line_run)
    assert report.verdicts.all_true
    faces = [c for c in report.clusters
             if c.kind is ClusterKind.FACE_PROJECTION]
    assert len(faces) == 1
    certificate = faces[0].certificate
    assert certificate.vertex_indices == (0, 4)
    np.testing.assert_allclose(certificate.weights, [0.5, 0.5], atol=1e-10)
    assert certificate.multiplier == pytest.approx(0.0, abs=1e-10)
    assert report.near_tie_tokens == (2,)
    assert report.zero_initial_tokens == (2,)


def test_analyze_example(example_run):
    """Tests that the late-leader run satisfies every claim."""
    report = analyze_trajectory(example_run)
    assert report.verdicts.all_true
    assert len(report.clusters) == 2
    assert {c.kind for c in report.clusters} == {ClusterKind.VERTEX}


def test_analyze_face_projections(face_run):
    """Tests that followers on the axis settle on edge midpoints."""
    report = analyze_trajectory(face_run)
    assert report.verdicts.all_true
    assert [lead.token_index for lead in report.leaders] == [0, 1, 2, 3]
    faces = {c.member_tokens: c for c in report.clusters
             if c.kind is ClusterKind.FACE_PROJECTION}
    assert set(faces) == {(4,), (5,)}
    top, bottom = faces[(4,)], faces[(5,)]
    np.testing.assert_allclose(top.position, (0, 1.2), atol=1e-8)
    np.testing.assert_allclose(bottom.position, (0, -0.8), atol=1e-8)
    assert top.certificate.vertex_indices == (0, 1)
    assert bottom.certificate.vertex_indices == (2, 3)
    for face in (top, bottom):
        assert face.certificate.residual <= 1e-6
        np.testing.assert_allclose(face.certificate.weights, [0.5, 0.5],
                                   atol=1e-10)
    members = {c.member_tokens for c in report.clusters}
    assert {(0, 6), (3, 7)} <= members


def test_analyze_flags_zero_token():
    """Tests that a token starting at the origin is reported."""
    config = TokenConfiguration.from_points([(1, 0), (0, 0), (-0.5, 0.2)])
    report = analyze_trajectory(run(config, hardmax_spec(2)))
    assert report.zero_initial_tokens == (1,)
    assert report.verdicts.all_true


def test_verify_reports_false_projection(line_run):
    """Tests that an uncertifiable cluster gives a false verdict."""
    leaders = detect_leaders(line_run)
    clusters = extract_clusters(line_run, 1e-4, leaders)
    moved = [c if c.kind is ClusterKind.VERTEX else
             type(c)(position=np.array([0.5]), kind=c.kind,
                     member_tokens=c.member_tokens)
             for c in clusters]
    report = verify_theorem1(line_run, leaders, moved, SpdMatrix.identity(1))
    assert not report.verdicts.non_vertices_are_projections
    assert report.verdicts.every_token_clustered


def test_report_json_round_trip(line_run):
    """Tests that the report dictionary survives JSON encoding."""
    document = analyze_trajectory(line_run).to_dict()
    assert json.loads(json.dumps(document)) == document
    assert document["verdicts"] == {
        "everyTokenClustered": True,
        "leadersDistinctVertices": True,
        "nonVerticesAreProjections": True,
    }
    assert document["parameters"]["A"] == [[1.0]]
    assert [c["kind"] for c in document["clusters"]] == [
        "vertex", "face_projection", "vertex"
    ]


def _random_tokens(
    rng: np.random.Generator, d: int = 2
) -> TokenConfiguration:
    while True:
        tokens = rng.uniform(-1, 1, size=(int(rng.integers(2, 21)), d))
        norms = np.sort(np.linalg.norm(tokens, axis=1))
        gaps = [np.linalg.norm(p - q)
                for p, q in itertools.combinations(tokens, 2)]
        if norms[0] > 1e-3 and norms[-1] - norms[-2] > 1e-6 \
                and min(gaps) > 1e-4:
            return TokenConfiguration(tokens)


@pytest.mark.slow
def test_clustering_claims_on_random_planar_runs():
    """Tests all verdicts and the leader-vertex correspondence."""
    rng = np.random.default_rng(7)
    for _ in range(200):
        config = _random_tokens(rng)
        spec = hardmax_spec(2, float(rng.uniform(0.1, 2.0)))
        trajectory = run(config, spec)
        report = analyze_trajectory(trajectory)
        assert report.verdicts.all_true

        limits = [lead.limit_point for lead in report.leaders]
        hull = convex_hull_2d(trajectory.final.tokens)
        for vertex in hull:
            assert min(np.linalg.norm(vertex - p) for p in limits) <= 1e-8
        for p in limits:
            assert min(np.linalg.norm(vertex - p) for vertex in hull) <= 1e-8
        assert len(report.clusters) <= 2 ** len(report.leaders) - 1

        points = [c.position for c in report.clusters]
        for s, t in itertools.permutations(points, 2):
            if a_inner(spec.a, t, t) <= a_inner(spec.a, s, s):
                assert a_inner(spec.a, t, s) < a_inner(spec.a, s, s) + 1e-9


@pytest.mark.slow
def test_clustering_verdicts_up_to_four_dimensions():
    """Tests the verdicts for d = 1..4 with identity and general A."""
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 200:
        d = int(rng.integers(1, 5))
        config = _random_tokens(rng, d)
        if checked % 2:
            m = rng.normal(size=(d, d))
            a = factorize_spd(m @ m.T + d * np.eye(d))
        else:
            a = SpdMatrix.identity(d)
        spec = AttentionSpec(a=a, alpha=float(rng.uniform(0.1, 2.0)))
        if runner_up_gap(config, spec).min() < 1e-6:
            continue
        trajectory = run(config, spec)
        assert trajectory.converged
        report = analyze_trajectory(trajectory)
        assert report.verdicts.all_true
        assert sum(len(c.member_tokens) for c in report.clusters) == config.n
        checked += 1
