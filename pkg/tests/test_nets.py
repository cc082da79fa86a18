import numpy as np
import pytest

from wiggly.generators import generate_antenna, generate_named
from wiggly.nets import (
    build_cores,
    build_net_hierarchy,
    cube_tree_from_doc,
    cube_tree_to_doc,
    derive_paper_constants,
    verify_core_properties,
)
from wiggly.spaces import MetricSpace


def test_net_hand_run_quarter_scale():
    # 101 uniform points on [0,1], scale 1/4: greedy from index 0 picks
    # 0, 1, 0.5, 0.25, 0.75 and stops
    sp = generate_named("segment", resolution=101).space
    h = build_net_hierarchy(sp, 2.0, 2, 2)
    pts = sp.coords[h.level(2), 0]
    assert pts.tolist() == [0.0, 1.0, 0.5, 0.25, 0.75]


def test_net_single_point_when_scale_exceeds_diam():
    sp = generate_named("segment", resolution=11).space
    h = build_net_hierarchy(sp, 2.0, -3, -1)
    for n in (-3, -2, -1):
        assert h.level(n).tolist() == [0]


def test_net_one_point_space():
    sp = MetricSpace.from_coords([[0.0, 0.0]], "euclidean")
    h = build_net_hierarchy(sp, 4.0, 0, 3)
    for n in range(0, 4):
        assert h.level(n).tolist() == [0]


def test_net_rejects_bad_args():
    sp = generate_named("segment", resolution=11).space
    with pytest.raises(ValueError):
        build_net_hierarchy(sp, 1.0, 0, 2)
    with pytest.raises(ValueError):
        build_net_hierarchy(sp, 2.0, 3, 1)


@pytest.mark.parametrize("M", [2.0, 4.0, 8.0])
@pytest.mark.parametrize(
    "gen",
    [
        lambda: generate_named("segment", resolution=101).space,
        lambda: generate_antenna(0.25, 4).space,
        lambda: generate_named("zigzag", {"teeth": 4}, resolution=120).space,
    ],
)
def test_net_invariants(gen, M):
    sp = gen()
    h = build_net_hierarchy(sp, M, 0, 4)
    prev = None
    for n in h.level_range():
        idx = h.level(n)
        r = h.radius(n)
        # separation
        if len(idx) > 1:
            d = sp.pairwise(idx)
            np.fill_diagonal(d, np.inf)
            assert d.min() >= r - 1e-12
        # maximality
        mind = np.full(sp.n, np.inf)
        for x in idx:
            np.minimum(mind, sp.dist_row(int(x)), out=mind)
        assert mind.max() <= r
        # nesting
        if prev is not None:
            assert set(prev.tolist()) <= set(idx.tolist())
        prev = idx


def test_two_far_points_make_disjoint_singleton_cubes():
    sp = MetricSpace.from_coords([[0.0], [1.0]], "euclidean")
    h = build_net_hierarchy(sp, 10.0, 0, 2)
    tree = build_cores(h, 0.1)
    top = tree.by_level(0)
    assert len(top) == 2
    a, b = top
    assert set(a.members.tolist()).isdisjoint(b.members.tolist())
    report = verify_core_properties(tree, sp)
    assert report["violations"] == []


@pytest.mark.parametrize("M,c", [(4.0, 0.1), (8.0, 1.0 / 16.0)])
def test_core_properties_on_generators(M, c):
    for space in (
        generate_named("segment", resolution=151).space,
        generate_antenna(0.25, 4).space,
    ):
        h = build_net_hierarchy(space, M, 0, 4)
        tree = build_cores(h, c)
        report = verify_core_properties(tree, space)
        assert report["violations"] == []
        assert report["cubes"] == sum(len(h.level(n)) for n in h.level_range())


def test_core_trace_contains_center():
    sp = generate_antenna(0.25, 3).space
    h = build_net_hierarchy(sp, 4.0, 0, 3)
    tree = build_cores(h, 0.1)
    for q in tree.cubes:
        assert q.center in q.members.tolist()


def test_parent_links_are_containments():
    sp = generate_antenna(0.25, 4).space
    h = build_net_hierarchy(sp, 4.0, 0, 4)
    tree = build_cores(h, 0.1)
    for q in tree.cubes:
        if q.parent is not None:
            parent = tree.cubes[q.parent]
            assert parent.level < q.level
            assert set(q.members.tolist()) <= set(parent.members.tolist())
    for q in tree.cubes:
        for ch in q.children:
            assert tree.cubes[ch].parent == q.id


def test_corrupted_tree_reports_violation():
    sp = generate_named("segment", resolution=401).space
    h = build_net_hierarchy(sp, 4.0, 0, 3)
    tree = build_cores(h, 0.1)
    clean = verify_core_properties(tree, sp)
    assert clean["violations"] == []
    # move one member of a mid-level cube far away
    victim = next(q for q in tree.cubes if q.level == 2 and len(q.members) > 1)
    other = next(
        q for q in tree.cubes if q.level == 2 and set(q.members.tolist()).isdisjoint(victim.members.tolist())
    )
    tampered = victim.members.copy()
    tampered[-1] = other.members[0]
    victim.members = tampered
    report = verify_core_properties(tree, sp)
    kinds = {v["kind"] for v in report["violations"]}
    assert "same-level-overlap" in kinds or "partial-overlap" in kinds
    witnesses = [v for v in report["violations"] if v["kind"] == "same-level-overlap"]
    if witnesses:
        assert victim.id in witnesses[0]["cubes"] or other.id in witnesses[0]["cubes"]


def test_build_cores_rejects_large_fraction():
    sp = generate_named("segment", resolution=11).space
    h = build_net_hierarchy(sp, 4.0, 0, 1)
    with pytest.raises(ValueError):
        build_cores(h, 0.125)
    with pytest.raises(ValueError):
        build_cores(h, 0.0)


def test_cube_tree_json_roundtrip():
    sp = generate_antenna(0.25, 3).space
    h = build_net_hierarchy(sp, 4.0, 0, 3)
    tree = build_cores(h, 0.1)
    doc = cube_tree_to_doc(tree)
    back = cube_tree_from_doc(doc)
    assert cube_tree_to_doc(back) == doc
    assert doc["M"] == 4.0 and doc["c"] == 0.1
    for rec in doc["cubes"]:
        assert set(rec) == {"id", "level", "center", "parent", "children", "members", "diam"}


def test_paper_constants_formulas():
    pc = derive_paper_constants(1.0 / 356.0, 1e-5, 1e-4, 1e-3)
    assert pc.delta == pytest.approx(1e-4 * 1e-3 * 1e-5 / 80.0, rel=1e-15)
    assert pc.kappa == pytest.approx(pc.delta / 16.0, rel=1e-15)
    assert pc.M == pytest.approx(8.0 / (1e-5 * pc.beta), rel=1e-15)
    assert pc.n0 >= 1
    assert pc.M > 4.0


def test_paper_constants_extremal_kappa():
    scale = 1.0 - 1e-9
    pc = derive_paper_constants(
        1.0 / 356.0, scale / 12288.0, scale / 4096.0, scale / 64.0
    )
    target = 2.0**-41
    assert target / 4.0 <= pc.kappa <= target * 4.0
    assert pc.feasible


def test_paper_constants_rejects_out_of_range():
    good = dict(beta=1.0 / 356.0, eps=1e-5, K=1e-4, c=1e-3)
    for key, bad in [
        ("beta", 0.0),
        ("beta", 1.0 / 300.0),
        ("eps", 1.0 / 12288.0),
        ("K", 1.0 / 4096.0),
        ("c", 1.0 / 64.0),
    ]:
        kw = dict(good)
        kw[key] = bad
        with pytest.raises(ValueError):
            derive_paper_constants(**kw)
