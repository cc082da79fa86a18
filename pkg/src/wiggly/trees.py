"""Spanning-tree skeletons over finest nets and their traversals.

build_tree attaches net points greedily (closest point to the attached
set), modeling each edge as an out-of-plane arc of length twice the
edge; the arcs' interiors leave every core ball, so tour membership in
a cube changes only at nodes.  euler_tour doubles every edge; the
flattening replaces maximal in-cube node runs by metric chords, whose
length excess telescopes across levels into the tour length.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TreeEdge:
    u: int
    v: int
    length: float
    detour_length: float


@dataclass
class TreeGraph:
    """Greedy spanning tree of a net level; lengths carry the arcs."""

    n0: int
    nodes: np.ndarray
    edges: list
    total_length: float
    edge_bound: float
    space: object
    apexes: list | None = None
    diagnostics: list = field(default_factory=list)

    def adjacency(self):
        """children in attach order plus the reverse links."""
        adj = {int(v): [] for v in self.nodes}
        for e in self.edges:
            adj[e.u].append(e)
        return adj


def build_tree(space, hierarchy, n0, strict=True, materialize_arcs=False):
    """Greedy (Prim) spanning tree over the level-n0 net.

    Every edge connects the attached set to its closest outside net
    point, so for a connected set each edge is at most twice the net
    radius; on a finite sample that bound picks up an additive
    sample-pitch slop, so edges in (2, 4] * M^-n0 are recorded as
    sampling-density diagnostics while the per-arc invariant
    detour_length <= 8 * M^-n0 stays hard (rejected when strict).
    """
    net = np.asarray(hierarchy.level(n0), dtype=int)
    if len(net) == 0:
        raise ValueError(f"no net at level {n0}")
    radius = hierarchy.radius(n0)
    bound = 2.0 * radius
    diagnostics = []
    diam = space.diameter()
    if not 4.0 * radius < diam / 4.0:
        diagnostics.append(
            {
                "kind": "scale-vs-diameter",
                "detail": f"4*M^-n0 = {4 * radius:g} not below diam/4 = {diam / 4:g}",
            }
        )
    order = [0]
    edges = []
    if len(net) > 1:
        mind = space.cross(net, net[[0]])[:, 0].copy()
        nearest = np.zeros(len(net), dtype=int)
        attached = np.zeros(len(net), dtype=bool)
        attached[0] = True
        mind[0] = np.inf
        for _ in range(len(net) - 1):
            j = int(np.argmin(mind))
            u, v, d = int(net[nearest[j]]), int(net[j]), float(mind[j])
            edges.append(TreeEdge(u=u, v=v, length=d, detour_length=2.0 * d))
            order.append(j)
            attached[j] = True
            row = space.cross(net, net[[j]])[:, 0]
            better = row < mind
            nearest[better] = j
            np.minimum(mind, row, out=mind)
            mind[attached] = np.inf
    slack = [e for e in edges if e.length > bound * (1.0 + 1e-12)]
    bad = [e for e in slack if e.length > 2.0 * bound * (1.0 + 1e-12)]
    if bad:
        worst = max(bad, key=lambda e: e.length)
        msg = (
            f"{len(bad)} tree edges exceed 4*M^-n0 = {2 * bound:g}, breaking the "
            f"8*M^-n0 arc bound (worst {worst.length:g} between {worst.u} and "
            f"{worst.v}); the level-n0 sample is too sparse to connect"
        )
        if strict:
            raise ValueError(msg)
        diagnostics.append({"kind": "edge-bound", "detail": msg})
    elif slack:
        worst = max(slack, key=lambda e: e.length)
        diagnostics.append(
            {
                "kind": "edge-slack",
                "detail": (
                    f"{len(slack)} tree edges exceed 2*M^-n0 = {bound:g} but stay "
                    f"within 4*M^-n0 (worst {worst.length:g}); consistent with a "
                    "connected set sampled at finite pitch"
                ),
            }
        )
    apexes = None
    if materialize_arcs and space.has_coords:
        # one lifted midpoint per edge: out-and-back through the apex
        # has length exactly 2 * edge length
        apexes = []
        for e in edges:
            mid = (space.coords[e.u] + space.coords[e.v]) / 2.0
            h = e.length * math.sqrt(3.0) / 2.0
            apexes.append(np.concatenate([mid, [h]]))
    return TreeGraph(
        n0=n0,
        nodes=net[order],
        edges=edges,
        total_length=float(sum(e.detour_length for e in edges)),
        edge_bound=bound,
        space=space,
        apexes=apexes,
        diagnostics=diagnostics,
    )


@dataclass
class Traversal:
    """Euler tour: node visit sequence with per-step arc lengths."""

    nodes: list
    step_lengths: list
    multiplicities: dict
    length: float
    space: object

    def params(self):
        return np.concatenate([[0.0], np.cumsum(self.step_lengths)])


def euler_tour(tree):
    """Depth-first double traversal; every edge crossed exactly twice."""
    children = {}
    parent_edge = {}
    for e in tree.edges:
        children.setdefault(e.u, []).append(e)
        parent_edge[e.v] = e
    root = int(tree.nodes[0])
    seq = [root]
    steps = []
    mult = {}
    stack = [(root, list(children.get(root, ())))]
    while stack:
        node, todo = stack[-1]
        if todo:
            e = todo.pop(0)
            key = (min(e.u, e.v), max(e.u, e.v))
            mult[key] = mult.get(key, 0) + 1
            seq.append(e.v)
            steps.append(e.detour_length)
            stack.append((e.v, list(children.get(e.v, ()))))
        else:
            stack.pop()
            if stack:
                e = parent_edge[node]
                key = (min(e.u, e.v), max(e.u, e.v))
                mult[key] = mult.get(key, 0) + 1
                seq.append(e.u)
                steps.append(e.detour_length)
    visited = set(seq)
    missing = [int(v) for v in tree.nodes if int(v) not in visited]
    if missing:
        raise ValueError(f"tree is not connected: unreachable nodes {missing[:5]}")
    return Traversal(
        nodes=seq,
        step_lengths=steps,
        multiplicities=mult,
        length=float(sum(steps)),
        space=tree.space,
    )


def _point_cube_map(cube_tree, level):
    out = {}
    for cube in cube_tree.by_level(level):
        for p in cube.members:
            out[int(p)] = cube.id
    return out


def _runs(assign):
    """Maximal constant non-None runs as (start, end, value), inclusive."""
    runs = []
    i = 0
    while i < len(assign):
        if assign[i] is None:
            i += 1
            continue
        j = i
        while j + 1 < len(assign) and assign[j + 1] == assign[i]:
            j += 1
        runs.append((i, j, assign[i]))
        i = j + 1
    return runs


def flatten_and_excess(traversal, cube_tree, n):
    """Per-cube length excess of the level-(n+1) flattening over level n.

    A cube's tour components are maximal runs of consecutive tour nodes
    lying in it (arc interiors belong to no cube).  The level-n
    flattening replaces each run by the metric chord of its endpoints;
    the finer flattening keeps chords only over level-(n+1) sub-runs.
    The excess d(Q) is nonnegative by the triangle inequality.
    """
    space = traversal.space
    seq = traversal.nodes
    steps = traversal.step_lengths
    map_n = _point_cube_map(cube_tree, n)
    map_n1 = _point_cube_map(cube_tree, n + 1)
    assign_n = [map_n.get(v) for v in seq]
    assign_n1 = [map_n1.get(v) for v in seq]
    per_cube = {}
    for i, j, cube_id in _runs(assign_n):
        chord = float(space.dist(seq[i], seq[j])) if j > i else 0.0
        tour_len = float(sum(steps[i:j]))
        covered = np.zeros(max(j - i, 0), dtype=bool)
        finer = 0.0
        for a, b, _ in _runs(assign_n1[i : j + 1]):
            if b > a:
                finer += float(space.dist(seq[i + a], seq[i + b]))
                covered[a:b] = True
        finer += float(sum(s for s, c in zip(steps[i:j], covered) if not c))
        row = per_cube.setdefault(
            cube_id,
            {
                "cube": cube_id,
                "level": n,
                "components": 0,
                "tour_length": 0.0,
                "flat_length": 0.0,
                "finer_length": 0.0,
                "excess": 0.0,
            },
        )
        row["components"] += 1
        row["tour_length"] += tour_len
        row["flat_length"] += chord
        row["finer_length"] += finer
        row["excess"] += finer - chord
    rows = [per_cube[k] for k in sorted(per_cube)]
    return {
        "level": n,
        "rows": rows,
        "excess_total": float(sum(r["excess"] for r in rows)),
    }


def total_excess(traversal, cube_tree):
    """Sum of d(Q) over every level of the cube tree."""
    out = 0.0
    for n in range(cube_tree.n_min, cube_tree.n_max + 1):
        out += flatten_and_excess(traversal, cube_tree, n)["excess_total"]
    return out


# -- beta sums ---------------------------------------------------------


@dataclass
class BetaSumReport:
    total: float
    diam: float
    kind: str
    A: float
    M: float
    levels: list


def beta_sum(space, hierarchy, A, kind="jones", cfg=None, threads=None, allow_any_M=False):
    """diam + sum over levels and net points of beta(x, A*M^-n)^2 * M^-n.

    The hierarchy base M is pinned to 2 unless explicitly overridden;
    per-level partial sums come back alongside the total.
    """
    from .betas import multiscale_profile

    if not A > 1.0:
        raise ValueError("A must exceed 1")
    if hierarchy.M != 2.0 and not allow_any_M:
        raise ValueError(f"beta sums expect M = 2, got M = {hierarchy.M}; pass allow_any_M")
    prof = multiscale_profile(space, hierarchy, A, (kind,), cfg, threads)
    levels = []
    by_level = {}
    for row in prof.rows:
        by_level.setdefault(row["level"], []).append(row["value"])
    for n in sorted(by_level):
        vals = np.asarray(by_level[n])
        partial = float((vals**2).sum() * hierarchy.M ** (-n))
        levels.append({"level": n, "count": len(vals), "partial_sum": partial})
    diam = float(space.diameter())
    return BetaSumReport(
        total=diam + float(sum(r["partial_sum"] for r in levels)),
        diam=diam,
        kind=kind,
        A=float(A),
        M=hierarchy.M,
        levels=levels,
    )


def beta_sum_to_csv(report, path):
    with open(path, "w", newline="") as fh:
        fh.write("level,count,partial_sum\n")
        for row in report.levels:
            fh.write("%d,%d,%.12g\n" % (row["level"], row["count"], row["partial_sum"]))


# -- counting inequalities ---------------------------------------------


def length_points_check(tree, hierarchy, x, r):
    """Tree length in a half-ball against 8 M^-n0 times the point count.

    Arcs stay within twice the net radius of their endpoints, so arcs
    meeting B(x, r/2) have an endpoint in the slightly enlarged ball;
    their total length is compared to the net-point count in B(x, r).
    """
    net = np.asarray(hierarchy.level(tree.n0), dtype=int)
    if int(x) not in set(int(v) for v in net):
        raise ValueError(f"{x} is not a level-{tree.n0} net point")
    space = tree.space
    mn0 = hierarchy.radius(tree.n0)
    diam = space.diameter()
    if not 4.0 * mn0 < r < diam / 4.0:
        raise ValueError(
            f"r must lie in (4*M^-n0, diam/4) = ({4 * mn0:g}, {diam / 4:g}), got {r:g}"
        )
    d = space.cross(net, np.asarray([int(x)]))[:, 0]
    dist_x = {int(v): float(dv) for v, dv in zip(net, d)}
    reach = r / 2.0 + 2.0 * mn0
    h1 = sum(
        e.detour_length
        for e in tree.edges
        if dist_x[e.u] < reach or dist_x[e.v] < reach
    )
    count = int((d < r).sum())
    bound = 8.0 * mn0 * count
    return {
        "x": int(x),
        "r": float(r),
        "h1_half_ball": float(h1),
        "count": count,
        "bound": float(bound),
        "passed": bool(h1 <= bound + 1e-12),
        "margin": float(bound - h1),
    }


def count_growth_check(hierarchy, x0, n, n0=None, kappa_beta_sq=0.0, c_prime=1.0, paper=None):
    """Measured net-count growth exponent against 1 + kappa*beta^2.

    Desk mode takes explicit n0 / kappa_beta_sq / c_prime overrides;
    paper mode reads all three from a PaperConstants and only reports
    both sides (its n0 dwarfs any desk hierarchy).  The two modes never
    mix.
    """
    if paper is not None:
        if n0 is not None or kappa_beta_sq != 0.0 or c_prime != 1.0:
            raise ValueError("pass either paper constants or desk overrides, not both")
        n0 = paper.n0
        kappa_beta_sq = paper.kappa * paper.beta**2
        c_prime = paper.c_prime
    if n0 is None or n0 < 1:
        raise ValueError("n0 must be a positive integer")
    level = hierarchy.level(n)
    if int(x0) not in set(int(v) for v in level):
        raise ValueError(f"{x0} is not a level-{n} net point")
    rhs = 1.0 + kappa_beta_sq
    report = {
        "mode": "paper" if paper is not None else "desk",
        "x0": int(x0),
        "n": n,
        "n0": int(n0),
        "rhs_exponent": rhs,
        "radius": float(c_prime * hierarchy.M ** (-n)),
    }
    fine_level = n + n0
    if fine_level > hierarchy.n_max:
        report["e"] = None
        report["diagnostic"] = (
            f"hierarchy stops at level {hierarchy.n_max}, below n + n0 = {fine_level}"
        )
        return report
    fine = np.asarray(hierarchy.level(fine_level), dtype=int)
    space = hierarchy.space
    d = space.cross(fine, np.asarray([int(x0)]))[:, 0]
    count = int((d < report["radius"]).sum())
    report["count"] = count
    report["count_cap_exponent"] = math.log(len(fine), hierarchy.M) / n0 if len(fine) else 0.0
    if count == 0:
        report["e"] = -math.inf
        report["diagnostic"] = "no finer net points inside the ball"
        report["passes"] = False
        return report
    report["e"] = math.log(count, hierarchy.M) / n0
    report["passes"] = bool(report["e"] >= rhs)
    return report


# -- serialization -----------------------------------------------------


def tree_to_doc(tree):
    return {
        "n0": int(tree.n0),
        "nodes": [int(v) for v in tree.nodes],
        "edges": [
            {
                "u": e.u,
                "v": e.v,
                "length": e.length,
                "detour_length": e.detour_length,
            }
            for e in tree.edges
        ],
    }


def tree_from_doc(doc, space, edge_bound=None):
    edges = [
        TreeEdge(
            u=int(e["u"]),
            v=int(e["v"]),
            length=float(e["length"]),
            detour_length=float(e["detour_length"]),
        )
        for e in doc["edges"]
    ]
    if edge_bound is None:
        edge_bound = max((e.length for e in edges), default=0.0)
    return TreeGraph(
        n0=int(doc["n0"]),
        nodes=np.asarray(doc["nodes"], dtype=int),
        edges=edges,
        total_length=float(sum(e.detour_length for e in edges)),
        edge_bound=float(edge_bound),
        space=space,
    )


def dump_tree(tree, path):
    with open(path, "w") as fh:
        json.dump(tree_to_doc(tree), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
