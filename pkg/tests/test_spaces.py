import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wiggly.spaces import (
    MetricError,
    MetricSpace,
    PolygonalPath,
    ball_members,
    cover_distance,
    kuratowski_embed,
    norm_dist,
    segment_distances,
    space_from_doc,
    space_to_doc,
    subarc_deviation,
    validate_metric,
)


def line_space(step=0.1, count=11):
    return MetricSpace.from_coords(np.arange(count) * step, "euclidean")


def test_ball_members_open_strict():
    # eleven points 0.0 .. 1.0; open ball of radius 0.25 about 0.5
    # contains exactly {0.3, 0.4, 0.5, 0.6, 0.7}: indices 3..7
    sp = line_space()
    b = ball_members(sp, 5, 0.25)
    assert b.members.tolist() == [3, 4, 5, 6, 7]
    # radius equal to a realized distance is excluded by strictness
    sp2 = MetricSpace.from_coords(np.array([0.0, 1.0, 2.0]), "euclidean")
    assert ball_members(sp2, 1, 1.0).members.tolist() == [1]
    assert ball_members(sp2, 1, 1.0 + 1e-9).members.tolist() == [0, 1, 2]


def test_ball_members_monotone_in_radius():
    rng = np.random.default_rng(7)
    sp = MetricSpace.from_coords(rng.normal(size=(60, 3)), "euclidean")
    radii = np.sort(rng.uniform(0.05, 3.0, 20))
    prev = set()
    for r in radii:
        cur = set(ball_members(sp, 11, r).members.tolist())
        assert prev <= cur
        prev = cur


def test_ball_rejects_bad_inputs():
    sp = line_space()
    with pytest.raises(ValueError):
        ball_members(sp, -1, 0.5)
    with pytest.raises(ValueError):
        ball_members(sp, 3, 0.0)


def test_norm_dist_values():
    d = np.array([3.0, -4.0])
    assert norm_dist(d, "sup") == 4.0
    assert norm_dist(d, "euclidean") == 5.0
    assert norm_dist(d, "l1") == 7.0
    with pytest.raises(ValueError):
        norm_dist(d, "linf")


def test_diameter_strategies_agree():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(300, 2))
    for norm in ("sup", "euclidean", "l1"):
        sp = MetricSpace.from_coords(pts, norm)
        brute = norm_dist(pts[:, None, :] - pts[None, :, :], norm).max()
        assert sp.diameter() == pytest.approx(brute, abs=1e-12)


def test_diameter_hull_3d():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(500, 3))
    sp = MetricSpace.from_coords(pts, "euclidean")
    brute = norm_dist(pts[:, None, :] - pts[None, :, :], "euclidean").max()
    assert sp.diameter() == pytest.approx(brute, abs=1e-12)


def test_matrix_space_roundtrip_and_validation():
    m = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.5], [2.0, 1.5, 0.0]])
    sp = MetricSpace.from_matrix(m)
    assert sp.dist(0, 2) == 2.0
    doc = space_to_doc(sp)
    sp2 = space_from_doc(doc)
    assert np.array_equal(sp2.full_matrix(), m)


def test_validate_metric_catches_triangle_violation():
    m = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]])
    with pytest.raises(MetricError) as err:
        MetricSpace.from_matrix(m)
    assert err.value.triple is not None
    i, j, k = err.value.triple
    assert m[i, j] > m[i, k] + m[k, j]


def test_validate_metric_catches_asymmetry_and_diagonal():
    m = np.array([[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(MetricError):
        MetricSpace.from_matrix(m)
    m2 = np.array([[0.5, 1.0], [1.0, 0.0]])
    with pytest.raises(MetricError):
        MetricSpace.from_matrix(m2)


def test_validate_metric_sampled_path():
    rng = np.random.default_rng(11)
    pts = rng.normal(size=(400, 2))
    m = norm_dist(pts[:, None, :] - pts[None, :, :], "euclidean")
    sp = MetricSpace(matrix=m)
    assert validate_metric(sp)
    # corrupt one entry enough that samples should hit it is not
    # guaranteed; instead corrupt a whole row stripe
    m2 = m.copy()
    m2[7, :] *= 3.0
    m2[:, 7] *= 3.0
    m2[7, 7] = 0.0
    sp2 = MetricSpace(matrix=m2)
    with pytest.raises(MetricError):
        validate_metric(sp2)


def test_exactly_one_of_points_or_matrix():
    with pytest.raises(ValueError):
        MetricSpace(coords=np.zeros((2, 1)), matrix=np.zeros((2, 2)), norm="sup")
    with pytest.raises(ValueError):
        MetricSpace()
    with pytest.raises(ValueError):
        space_from_doc({"metric": "euclidean"})
    with pytest.raises(ValueError):
        space_from_doc(
            {"metric": "euclidean", "points": [[0.0]], "matrix": [[0.0]]}
        )


def test_path_length_gap_deviation():
    # right angle: (0,0) -> (1,0) -> (1,1)
    p = PolygonalPath(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]), "euclidean")
    assert p.length == pytest.approx(2.0)
    assert p.gap == pytest.approx(np.sqrt(2.0))
    assert p.deviation == pytest.approx(2.0 - np.sqrt(2.0))
    assert subarc_deviation(p, 0, 1) == pytest.approx(0.0)
    assert subarc_deviation(p, 0, 2) == pytest.approx(2.0 - np.sqrt(2.0))


def test_subarc_deviation_rejects_bad_range():
    p = PolygonalPath(np.array([[0.0], [1.0], [2.0]]), "euclidean")
    for i, j in [(1, 1), (2, 1), (-1, 1), (0, 3)]:
        with pytest.raises(ValueError):
            subarc_deviation(p, i, j)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(-10, 10, allow_nan=False), st.floats(-10, 10, allow_nan=False)
        ),
        min_size=3,
        max_size=12,
    ),
    st.data(),
)
def test_subarc_deviation_monotone_under_extension(vertex_list, data):
    # widening the subrange can only add vertices, never decrease deviation
    verts = np.array(vertex_list)
    p = PolygonalPath(verts, "euclidean")
    k = len(verts)
    i = data.draw(st.integers(0, k - 2))
    j = data.draw(st.integers(i + 1, k - 1))
    inner = subarc_deviation(p, i, j)
    if i > 0:
        assert subarc_deviation(p, i - 1, j) >= inner - 1e-9
    if j < k - 1:
        assert subarc_deviation(p, i, j + 1) >= inner - 1e-9


def test_segment_distances_euclidean_closed_form():
    a = np.array([0.0, 0.0])
    b = np.array([2.0, 0.0])
    pts = np.array([[1.0, 1.0], [-1.0, 0.0], [3.0, 4.0], [0.5, 0.0]])
    d = segment_distances(pts, a, b, "euclidean")
    assert d == pytest.approx([1.0, 1.0, np.sqrt(17.0), 0.0], abs=1e-12)


def test_segment_distances_golden_matches_euclidean():
    # golden-section under the euclidean norm must agree with the
    # closed form, which certifies the search machinery
    rng = np.random.default_rng(2)
    a = rng.normal(size=2)
    b = rng.normal(size=2)
    pts = rng.normal(size=(40, 2))
    from wiggly.spaces import _segment_dist_golden

    exact = segment_distances(pts, a, b, "euclidean")
    golden = _segment_dist_golden(pts, a, b, "euclidean")
    assert np.abs(exact - golden).max() < 1e-8


def test_segment_distances_sup_norm_value():
    # distance from (0, 1) to segment (0,0)-(2,0) in sup norm is 1 at t=0
    d = segment_distances(np.array([[0.0, 1.0]]), np.array([0.0, 0.0]), np.array([2.0, 0.0]), "sup")
    assert d[0] == pytest.approx(1.0, abs=1e-8)
    # distance from (1, 3) is min over t of max(|1-2t|, 3) = 3
    d2 = segment_distances(np.array([[1.0, 3.0]]), np.array([0.0, 0.0]), np.array([2.0, 0.0]), "sup")
    assert d2[0] == pytest.approx(3.0, abs=1e-8)


def test_cover_distance_basics():
    path = PolygonalPath(np.array([[0.0, 0.0], [1.0, 0.0]]), "euclidean")
    pts = np.array([[0.5, 0.2], [1.0, 0.5], [-0.3, 0.0]])
    assert cover_distance(pts, path, "euclidean") == pytest.approx(0.5)
    # points on the path cover at distance zero
    on = np.array([[0.25, 0.0], [1.0, 0.0]])
    assert cover_distance(on, path, "euclidean") == pytest.approx(0.0, abs=1e-12)
    assert cover_distance(np.empty((0, 2)), path, "euclidean") == 0.0


def test_kuratowski_embedding_is_isometry():
    m = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.5], [2.0, 1.5, 0.0]])
    sp = MetricSpace.from_matrix(m)
    emb = kuratowski_embed(sp)
    assert emb.norm == "sup"
    assert np.array_equal(emb.coords, m)
    for i in range(3):
        for j in range(3):
            assert emb.dist(i, j) == pytest.approx(m[i, j], abs=1e-12)


def test_kuratowski_embedding_isometry_random():
    rng = np.random.default_rng(9)
    pts = rng.normal(size=(25, 4))
    sp0 = MetricSpace.from_coords(pts, "euclidean")
    emb = kuratowski_embed(MetricSpace(matrix=sp0.full_matrix()))
    err = np.abs(emb.full_matrix() - sp0.full_matrix()).max()
    assert err < 1e-12


def test_labels_roundtrip():
    sp = MetricSpace.from_coords([[0.0], [1.0]], "euclidean", labels=["a", "b"])
    doc = space_to_doc(sp)
    assert doc["labels"] == ["a", "b"]
    sp2 = space_from_doc(doc)
    assert sp2.labels == ("a", "b")
