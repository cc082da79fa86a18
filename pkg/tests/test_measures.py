import json
import math
from fractions import Fraction

import numpy as np
import pytest

from wiggly.generators import generate_antenna, generate_named
from wiggly.measures import (
    ContentEstimate,
    FrostmannFit,
    box_dimension,
    build_frostmann,
    dump_measure,
    dump_report,
    frostmann_exponent,
    hausdorff_content_estimate,
    mark_bad_cubes,
    martingale_weights,
    measure_to_doc,
)
from wiggly.nets import Cube, CubeTree, build_cores, build_net_hierarchy
from wiggly.spaces import MetricSpace
from wiggly.trees import TreeEdge, TreeGraph, build_tree


def _segment(resolution):
    return generate_named("segment", resolution=resolution).space


# -- content estimates -------------------------------------------------


def test_content_segment():
    sp = _segment(201)
    est = hausdorff_content_estimate(sp, delta=0.01)
    assert est.lower == pytest.approx(1.0, abs=1e-12)
    assert abs(est.upper - 1.0) <= 0.05
    assert est.resolution == 0.01


def test_content_two_far_segments():
    coords = np.r_[np.linspace(0.0, 0.4, 21), np.linspace(0.8, 1.0, 11)]
    sp = MetricSpace.from_coords(coords.reshape(-1, 1), "euclidean")
    est = hausdorff_content_estimate(sp, delta=0.05)
    assert est.lower == pytest.approx(0.6, abs=1e-12)
    assert 0.6 <= est.upper <= 0.85


def test_content_tripod_bracket():
    sp = generate_named("tripod", {"variant": "path"}, resolution=256).space
    est = hausdorff_content_estimate(sp, delta=0.01)
    assert est.lower == pytest.approx(2.0, abs=1e-12)
    assert 2.8 <= est.upper <= 3.2


def test_content_empty_and_errors():
    sp = _segment(11)
    est = hausdorff_content_estimate(sp, members=np.array([], dtype=int), delta=0.1)
    assert (est.lower, est.upper) == (0.0, 0.0)
    single = hausdorff_content_estimate(sp, members=np.array([4]), delta=0.1)
    assert (single.lower, single.upper) == (0.0, 0.0)
    with pytest.raises(ValueError, match="positive"):
        hausdorff_content_estimate(sp, delta=0.0)


def test_content_edges_connect_across_gap():
    # the same far clusters, but declared connected through an edge:
    # one component, so the lower bound drops to the overall diameter
    coords = np.r_[np.linspace(0.0, 0.4, 21), np.linspace(0.8, 1.0, 11)]
    sp = MetricSpace.from_coords(coords.reshape(-1, 1), "euclidean")
    est = hausdorff_content_estimate(sp, delta=0.05, edges=[(20, 21)])
    assert est.lower == pytest.approx(1.0, abs=1e-12)


# -- bad cubes ---------------------------------------------------------


def _two_strand_instance():
    xs = np.linspace(0.0, 1.0, 51)
    coords = np.r_[
        np.column_stack([xs, np.zeros(51)]),
        np.column_stack([xs, np.full(51, 0.12)]),
    ]
    sp = MetricSpace.from_coords(coords, "euclidean")
    edges = [TreeEdge(i, i + 1, 0.02, 0.04) for i in range(50)]
    edges += [TreeEdge(51 + i, 52 + i, 0.02, 0.04) for i in range(50)]
    tree = TreeGraph(
        n0=0,
        nodes=np.arange(102),
        edges=edges,
        total_length=sum(e.detour_length for e in edges),
        edge_bound=1.0,
        space=sp,
    )
    cube = Cube(id=0, level=0, center=0, members=np.arange(102), diam=float(sp.diameter()))
    ct = CubeTree(M=2.0, c=0.1, cubes=[cube], n_min=0, n_max=0)
    return sp, tree, ct


def test_mark_bad_two_strands():
    _, tree, ct = _two_strand_instance()
    marks = mark_bad_cubes(ct, tree, K=0.2, beta=0.5)
    row = marks["by_cube"][0]
    assert row["lower"] == pytest.approx(2.0, abs=1e-9)
    assert marks["bad_ids"] == {0}
    assert row["margin"] > 0.0


def test_mark_bad_large_factor_clears():
    _, tree, ct = _two_strand_instance()
    marks = mark_bad_cubes(ct, tree, K=4.0, beta=0.5)
    assert marks["bad_ids"] == set()
    with pytest.raises(ValueError, match="positive"):
        mark_bad_cubes(ct, tree, K=0.0, beta=0.5)


def test_mark_bad_segment_none():
    sp = _segment(101)
    h = build_net_hierarchy(sp, 2, 0, 5)
    ct = build_cores(h, 0.1)
    tree = build_tree(sp, h, 5)
    marks = mark_bad_cubes(ct, tree, K=0.2, beta=0.5)
    assert marks["bad_ids"] == set()
    assert all(r["margin"] < 0.0 for r in marks["rows"] if r["diam"] > 0.0)


# -- martingale weights ------------------------------------------------


def _hand_marks(ct, bad, lowers, tree_length, K, beta):
    rows = []
    for q in ct.cubes:
        rows.append(
            {
                "cube": q.id,
                "level": q.level,
                "trace_size": len(q.members),
                "lower": lowers.get(q.id, 0.0),
                "diam": q.diam,
                "threshold": (1.0 + K * beta) * q.diam,
                "margin": lowers.get(q.id, 0.0) - (1.0 + K * beta) * q.diam,
                "bad": q.id in bad,
            }
        )
    return {
        "rows": rows,
        "by_cube": {r["cube"]: r for r in rows},
        "bad_ids": set(bad),
        "K": K,
        "beta": beta,
        "tree_length": tree_length,
    }


def _root_two_children(d1=0.3, d2=0.2):
    root = Cube(id=0, level=0, center=0, members=np.arange(10), diam=1.0)
    s1 = Cube(id=1, level=1, center=0, members=np.arange(3), parent=0, diam=d1)
    s2 = Cube(id=2, level=1, center=5, members=np.arange(3), parent=0, diam=d2)
    root.children = [1, 2]
    return CubeTree(M=2.0, c=0.1, cubes=[root, s1, s2], n_min=0, n_max=1)


def test_martingale_split_formula():
    # bad root of diameter 1 with child diameters 0.3 and 0.2 and good
    # length 0.6: children receive diam * d_i / (d1 + d2 + g)
    ct = _root_two_children()
    K, beta = 0.1, 0.5
    marks = _hand_marks(ct, bad={0}, lowers={0: 1.1}, tree_length=3.0, K=K, beta=beta)
    rep = martingale_weights(ct, marks, beta=beta, K=K)
    by_region = {(r["region"], r["cube"]): r for r in rep["regions"]}
    denom = 0.3 + 0.2 + 0.6
    assert by_region[("terminal", 1)]["mass"] == pytest.approx(1.0 * 0.3 / denom, abs=1e-12)
    assert by_region[("terminal", 2)]["mass"] == pytest.approx(1.0 * 0.2 / denom, abs=1e-12)
    assert by_region[("good", 0)]["mass"] == pytest.approx(1.0 * 0.6 / denom, abs=1e-12)
    assert rep["mass_out"] == pytest.approx(rep["mass_in"], abs=1e-12)
    assert rep["bounds_ok"]
    for r in rep["regions"]:
        assert r["k"] == 1
        assert r["density"] <= (1.0 + K * beta) ** (-1) * (1.0 + 1e-9)
    assert rep["packing"]["ok"]


def test_martingale_no_bad_cubes():
    ct = _root_two_children()
    marks = _hand_marks(ct, bad=set(), lowers={}, tree_length=3.0, K=0.1, beta=0.5)
    rep = martingale_weights(ct, marks, beta=0.5, K=0.1)
    assert len(rep["regions"]) == 1
    region = rep["regions"][0]
    assert region["region"] == "terminal"
    assert region["cube"] == 0
    assert region["mass"] == 1.0
    assert region["density"] == 1.0
    assert region["k"] == 0
    assert rep["packing"]["sum"] == 0.0


def test_martingale_degenerate_denominator():
    root = Cube(id=0, level=0, center=0, members=np.arange(4), diam=1.0)
    s1 = Cube(id=1, level=1, center=0, members=np.arange(1), parent=0, diam=0.0)
    root.children = [1]
    ct = CubeTree(M=2.0, c=0.1, cubes=[root, s1], n_min=0, n_max=1)
    marks = _hand_marks(ct, bad={0}, lowers={0: 0.0}, tree_length=1.0, K=0.1, beta=0.5)
    rep = martingale_weights(ct, marks, beta=0.5, K=0.1)
    assert rep["degenerate"] == [0]
    assert rep["regions"][0]["region"] == "terminal"


@pytest.fixture(scope="module")
def antenna_stack():
    sp = generate_antenna(0.25, 5).space
    h = build_net_hierarchy(sp, 2, 0, 5)
    ct = build_cores(h, 0.1)
    tree = build_tree(sp, h, 5)
    return sp, h, ct, tree


def test_martingale_antenna_end_to_end(antenna_stack):
    _, _, ct, tree = antenna_stack
    for K, beta in ((0.2, 0.5), (0.1, 0.5)):
        marks = mark_bad_cubes(ct, tree, K=K, beta=beta)
        rep = martingale_weights(ct, marks, beta=beta, K=K)
        assert rep["bounds_ok"]
        assert rep["packing"]["ok"]
        assert rep["mass_out"] == pytest.approx(rep["mass_in"], rel=1e-9)


# -- Frostmann measures ------------------------------------------------


def _quad_tree(depth=3, arity=4):
    cubes = []

    def add(level, parent):
        q = Cube(
            id=len(cubes),
            level=level,
            center=0,
            members=np.arange(1),
            parent=parent,
            diam=2.0**-level,
        )
        cubes.append(q)
        if parent is not None:
            cubes[parent].children.append(q.id)
        return q.id

    frontier = [add(0, None)]
    for level in range(1, depth + 1):
        frontier = [add(level, p) for p in frontier for _ in range(arity)]
    return CubeTree(M=2.0, c=0.1, cubes=cubes, n_min=0, n_max=depth)


def test_frostmann_quad_tree_exact():
    ct = _quad_tree()
    m = build_frostmann(ct, 1)
    assert [len(g) for g in m.generations] == [1, 4, 16, 64]
    for k, gen in enumerate(m.generations):
        assert all(m.masses[qid] == Fraction(1, 4**k) for qid in gen)
        assert sum(m.masses[qid] for qid in gen) == Fraction(1)
    assert m.flags == []
    # every-other-level sampling also splits exactly
    m2 = build_frostmann(ct, 2)
    assert [len(g) for g in m2.generations] == [1, 16]
    assert all(m2.masses[qid] == Fraction(1, 16) for qid in m2.generations[1])


def test_frostmann_truncated_branch_flagged():
    ct = _quad_tree(depth=2)
    orphan = ct.cubes[1]
    for cid in orphan.children:
        ct.cubes[cid].parent = None
    orphan.children = []
    m = build_frostmann(ct, 1)
    assert len(m.flags) == 1
    assert m.flags[0]["cube"] == orphan.id
    assert sum(m.masses[qid] for qid in m.generations[-1]) == Fraction(3, 4)


def test_frostmann_shallow_rejected():
    ct = _quad_tree(depth=1)
    with pytest.raises(ValueError, match="deeper generation"):
        build_frostmann(ct, 2)
    with pytest.raises(ValueError, match="positive"):
        build_frostmann(ct, 0)


def test_measure_doc_roundtrip(tmp_path):
    ct = _quad_tree(depth=2)
    m = build_frostmann(ct, 1)
    doc = measure_to_doc(m)
    assert set(doc) == {"n0", "cubes"}
    assert all(set(c) == {"id", "mass", "generation"} for c in doc["cubes"])
    total = sum(c["mass"] for c in doc["cubes"] if c["generation"] == 2)
    assert total == pytest.approx(1.0, abs=1e-12)
    path = tmp_path / "measure.json"
    dump_measure(m, path)
    text = path.read_text()
    assert text.endswith("\n")
    assert json.loads(text) == doc


def test_frostmann_exponent_segment():
    # wide equal splits (~32 children) keep grid-phase noise in the
    # child counts small against the slope
    sp = _segment(1025)
    h = build_net_hierarchy(sp, 2, 0, 10)
    ct = build_cores(h, 0.1)
    m = build_frostmann(ct, 5)
    for gen in m.generations:
        assert sum(m.masses[qid] for qid in gen) == Fraction(1)
    fit = frostmann_exponent(m, sp, samples=40, seed=0, budget=4.0)
    assert fit.warning is None
    assert 0.95 <= fit.s <= 1.05
    assert fit.C <= 4.0


def test_frostmann_exponent_antenna():
    sp = generate_antenna(0.25, 6).space
    h = build_net_hierarchy(sp, 4, 0, 4)
    ct = build_cores(h, 0.1)
    m = build_frostmann(ct, 2)
    for gen in m.generations:
        assert sum(m.masses[qid] for qid in gen) == Fraction(1)
        assert all(m.masses[qid] > 0 for qid in gen)
    fit = frostmann_exponent(m, sp, samples=40, seed=0, budget=100.0)
    assert fit.s >= 1.05
    assert fit.C <= 100.0


def test_frostmann_exponent_degenerate():
    sp = _segment(17)
    root = Cube(id=0, level=0, center=0, members=np.arange(17), diam=1.0)
    child = Cube(id=1, level=1, center=8, members=np.arange(17), parent=0, diam=0.5)
    root.children = [1]
    ct = CubeTree(M=2.0, c=0.1, cubes=[root, child], n_min=0, n_max=1)
    m = build_frostmann(ct, 1)
    fit = frostmann_exponent(m, sp, samples=10, seed=0)
    assert fit.warning is not None
    with pytest.raises(ValueError, match="decades"):
        frostmann_exponent(m, sp, radii=np.array([0.5, 0.2, 0.1, 0.05]))


# -- box dimension -----------------------------------------------------


def test_box_dimension_segment():
    sp = _segment(2001)
    rep = box_dimension(sp)
    assert rep["method"] == "box-count"
    assert abs(rep["estimate"] - 1.0) <= 0.02
    # net counts move in integer jumps, so the log-log cloud carries a
    # visible staircase even when the slope is clean
    assert rep["residual"] < 0.25
    assert len(rep["scales"]) == 8
    counts = [row["count"] for row in rep["scales"]]
    assert counts == sorted(counts)


def test_box_dimension_errors(tmp_path):
    sp = _segment(201)
    with pytest.raises(ValueError, match="4 scales"):
        box_dimension(sp, scales=[0.3, 0.1, 0.003])
    with pytest.raises(ValueError, match="decades"):
        box_dimension(sp, scales=[0.25, 0.1, 0.04, 0.02])
    rep = box_dimension(sp, scales=[0.4, 0.1, 0.04, 0.01])
    path = tmp_path / "dim.json"
    dump_report(rep, path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"method", "estimate", "residual", "scales"}
