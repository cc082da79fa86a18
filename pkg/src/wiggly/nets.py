"""Nested net hierarchies, chained-core cube trees, and the constant ledger.

Level n carries scale M**-n, so larger n is finer.  Nets are built by
farthest-point greedy insertion, each level seeded with the previous
one, which gives separation, maximality, and nesting by construction.
Cubes are connected components of scaled net balls chained through
shared sample points, taken over all levels at or below a given scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .spaces import MetricSpace

BETA0 = 1.0 / 356.0
EPS_MAX = 1.0 / 12288.0
K_MAX = 1.0 / 4096.0
C_MAX = 1.0 / 64.0


# -- net hierarchies ---------------------------------------------------


@dataclass
class NetHierarchy:
    space: MetricSpace
    M: float
    n_min: int
    n_max: int
    levels: dict
    seed: int = 0

    def radius(self, n):
        return float(self.M) ** (-n)

    def level(self, n):
        return self.levels[n]

    def level_range(self):
        return range(self.n_min, self.n_max + 1)


def _extend_net(space, net, mindist, radius):
    """Grow a net greedily until no point is at distance >= radius."""
    while True:
        far = int(np.argmax(mindist))
        if mindist[far] < radius:
            return
        net.append(far)
        np.minimum(mindist, space.dist_row(far), out=mindist)


def build_net_hierarchy(space, M, n_min, n_max, seed=0):
    """Farthest-point nets at scales M**-n for n in [n_min, n_max].

    The coarsest level starts from the lowest point index; each finer
    level starts from the coarser net and extends it, so nets nest.
    """
    if M <= 1:
        raise ValueError(f"M must exceed 1, got {M}")
    if n_min > n_max:
        raise ValueError(f"need n_min <= n_max, got ({n_min}, {n_max})")
    levels = {}
    net = [0]
    mindist = space.dist_row(0).copy()
    for n in range(n_min, n_max + 1):
        _extend_net(space, net, mindist, float(M) ** (-n))
        levels[n] = np.array(net, dtype=int)
    return NetHierarchy(space=space, M=float(M), n_min=n_min, n_max=n_max, levels=levels, seed=seed)


def hierarchy_to_doc(h):
    return {
        "M": h.M,
        "n_min": h.n_min,
        "n_max": h.n_max,
        "seed": h.seed,
        "levels": [h.levels[n].tolist() for n in h.level_range()],
    }


# -- cube trees --------------------------------------------------------


@dataclass
class Cube:
    id: int
    level: int
    center: int
    members: np.ndarray
    parent: int | None = None
    children: list = field(default_factory=list)
    diam: float = 0.0


@dataclass
class CubeTree:
    M: float
    c: float
    cubes: list
    n_min: int = 0
    n_max: int = 0
    desk_scale: bool = True
    chain_edges: list = field(default_factory=list)
    ball_levels: list = field(default_factory=list)
    ball_diams: list = field(default_factory=list)
    cube_ball_ids: list = field(default_factory=list)
    space: object = None

    def by_level(self, n):
        return [q for q in self.cubes if q.level == n]

    def roots(self):
        return [q for q in self.cubes if q.parent is None]


class _UnionFind:
    def __init__(self):
        self.parent = []

    def add(self):
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, a):
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)
            return True
        return False


def _subset_diameter(space, idx):
    if len(idx) < 2:
        return 0.0
    if space.has_coords and len(idx) > 2048:
        return MetricSpace.from_coords(space.coords[idx], space.norm).diameter()
    return float(space.pairwise(idx).max())


def build_cores(hierarchy, c):
    """Cube tree from chained scaled net balls.

    For a net point x at level n the cube is the union of traces of
    all balls c * M**-m (m >= n) connected to c * B(x, M**-n) through
    chains of balls sharing sample points.  Levels are processed finest
    first over a union-find, so the component of a ball at stage n is
    exactly its chain closure over levels >= n.  Parents are the
    nearest coarser cubes whose closure absorbed the ball.
    """
    if not 0.0 < c < 0.125:
        raise ValueError(f"core fraction must lie in (0, 1/8), got {c}")
    space = hierarchy.space
    M = hierarchy.M
    uf = _UnionFind()
    ball_center = []
    ball_level = []
    ball_trace = []
    ball_diam = []
    merge_edges = []
    point_rep = np.full(space.n, -1, dtype=int)
    cubes = []
    cube_ball_ids = []
    # cubes still waiting for a containing coarser cube
    open_cubes = []

    for n in range(hierarchy.n_max, hierarchy.n_min - 1, -1):
        r_core = c * M ** (-n)
        level_ball_of_center = {}
        for x in hierarchy.level(n):
            x = int(x)
            b = uf.add()
            trace = np.flatnonzero(space.dist_row(x) < r_core)
            ball_center.append(x)
            ball_level.append(n)
            ball_trace.append(trace)
            ball_diam.append(2.0 * c * M ** (-n))
            level_ball_of_center[x] = b
            for p in trace:
                q = point_rep[p]
                if q < 0:
                    point_rep[p] = b
                else:
                    if uf.union(b, q):
                        merge_edges.append((b, int(q), int(p)))
        # group every ball seen so far by component
        comp_members = {}
        comp_balls = {}
        for b in range(len(ball_center)):
            r = uf.find(b)
            comp_balls.setdefault(r, []).append(b)
        for root, bs in comp_balls.items():
            comp_members[root] = np.unique(np.concatenate([ball_trace[b] for b in bs]))
        # one cube per level-n net point
        root_to_cube = {}
        for x in hierarchy.level(n):
            x = int(x)
            root = uf.find(level_ball_of_center[x])
            members = comp_members[root]
            q = Cube(
                id=len(cubes),
                level=n,
                center=x,
                members=members,
                diam=_subset_diameter(space, members),
            )
            cubes.append(q)
            cube_ball_ids.append(level_ball_of_center[x])
            if root not in root_to_cube:
                root_to_cube[root] = q.id
        # attach any finer cube whose component now reaches level n
        still_open = []
        for qid in open_cubes:
            root = uf.find(cube_ball_ids[qid])
            if root in root_to_cube:
                pid = root_to_cube[root]
                cubes[qid].parent = pid
                cubes[pid].children.append(qid)
            else:
                still_open.append(qid)
        open_cubes = still_open + [q.id for q in cubes if q.level == n]

    return CubeTree(
        M=M,
        c=c,
        cubes=cubes,
        n_min=hierarchy.n_min,
        n_max=hierarchy.n_max,
        desk_scale=(M < 8.0 / (EPS_MAX * BETA0)) or (c >= C_MAX),
        chain_edges=merge_edges,
        ball_levels=ball_level,
        ball_diams=ball_diam,
        cube_ball_ids=cube_ball_ids,
        space=space,
    )


# -- verification ------------------------------------------------------


def _max_chain_sum(adj, weights, nodes):
    """Max node-weight sum over simple paths in a forest component."""
    nodes = set(nodes)
    best = max(weights[v] for v in nodes)
    seen = set()
    for start in nodes:
        if start in seen:
            continue
        # iterative DFS computing, per node, the best downward path sum
        order = []
        stack = [(start, -1)]
        parent = {start: -1}
        while stack:
            v, pv = stack.pop()
            order.append(v)
            seen.add(v)
            for w in adj.get(v, ()):
                if w != pv and w in nodes and w not in parent:
                    parent[w] = v
                    stack.append((w, v))
        down = {v: weights[v] for v in order}
        for v in reversed(order):
            tops = sorted(
                (down[w] for w in adj.get(v, ()) if parent.get(w, None) == v),
                reverse=True,
            )
            if tops:
                down[v] = weights[v] + tops[0]
            through = weights[v] + sum(tops[:2])
            best = max(best, down[v], through)
    return best


def verify_core_properties(tree, space=None):
    """Check disjoint-or-nested, roundness, coverage, and chain sums.

    Returns a dict report with counts and a list of violations, each a
    dict naming the failed property and the witnessing cubes/points.
    """
    violations = []
    levels = sorted({q.level for q in tree.cubes})
    by_level = {n: [q for q in tree.cubes if q.level == n] for n in levels}
    n_points = 1 + max((int(q.members.max()) for q in tree.cubes if len(q.members)), default=0)
    if space is not None:
        n_points = space.n

    # same-level cubes must be pairwise disjoint or identical
    point_to_cube = {}
    pairs_checked = 0
    for n in levels:
        owner = np.full(n_points, -1, dtype=int)
        for q in by_level[n]:
            prev = np.unique(owner[q.members])
            pairs_checked += 1
            mine = prev[prev >= 0]
            if len(mine):
                for other in mine:
                    if not np.array_equal(tree.cubes[int(other)].members, q.members):
                        violations.append(
                            {
                                "kind": "same-level-overlap",
                                "cubes": [int(other), q.id],
                            }
                        )
            fresh = q.members[owner[q.members] < 0]
            owner[fresh] = q.id
        point_to_cube[n] = owner

    # cross-level: a finer cube must sit inside one coarser cube, contain
    # every coarser cube it touches, or touch none at all
    for q in tree.cubes:
        mine = set(q.members.tolist())
        for n in levels:
            if n >= q.level:
                break
            owners = np.unique(point_to_cube[n][q.members])
            owners = owners[owners >= 0]
            pairs_checked += 1
            fully_inside = len(owners) == 1 and (point_to_cube[n][q.members] >= 0).all()
            if fully_inside or len(owners) == 0:
                continue
            for o in owners:
                if not set(tree.cubes[int(o)].members.tolist()) <= mine:
                    violations.append(
                        {
                            "kind": "partial-overlap",
                            "cube": q.id,
                            "coarse_level": n,
                            "owners": owners.tolist(),
                        }
                    )
                    break

    # roundness: core trace inside members inside the inflated core ball
    roundness_checked = 0
    if space is not None:
        factor = (1.0 + 8.0 / tree.M) * tree.c
        for q in tree.cubes:
            row = space.dist_row(q.center)
            r_core = tree.c * tree.M ** (-q.level)
            core = np.flatnonzero(row < r_core)
            roundness_checked += 1
            if not np.isin(core, q.members).all():
                violations.append({"kind": "core-not-inside", "cube": q.id})
            bound = factor * tree.M ** (-q.level)
            worst = float(row[q.members].max()) if len(q.members) else 0.0
            if worst >= bound * (1.0 + 1e-12):
                violations.append(
                    {"kind": "roundness", "cube": q.id, "max_dist": worst, "bound": bound}
                )

    # coverage: every point within M**-n of some level-n cube center
    coverage_checked = 0
    if space is not None:
        for n in levels:
            centers = np.array([q.center for q in by_level[n]], dtype=int)
            mind = np.full(space.n, np.inf)
            for x in centers:
                np.minimum(mind, space.dist_row(int(x)), out=mind)
            coverage_checked += space.n
            bad = np.flatnonzero(mind > tree.M ** (-n) * (1.0 + 1e-12))
            for p in bad:
                violations.append({"kind": "coverage", "level": n, "point": int(p)})

    # chain bound: max path sum of ball diameters vs the geometric cap
    chains_checked = 0
    if tree.M > 2.0 and tree.chain_edges:
        cap_factor = 1.0 / (1.0 - 2.0 / tree.M)
        adj = {}
        for a, b, _ in tree.chain_edges:
            adj.setdefault(a, []).append(b)
            adj.setdefault(b, []).append(a)
        comp_of = {}
        for a in adj:
            if a in comp_of:
                continue
            stack, comp = [a], []
            comp_of[a] = a
            while stack:
                v = stack.pop()
                comp.append(v)
                for w in adj[v]:
                    if w not in comp_of:
                        comp_of[w] = a
                        stack.append(w)
            chains_checked += 1
            weights = {v: tree.ball_diams[v] for v in comp}
            path_sum = _max_chain_sum(adj, weights, comp)
            cap = cap_factor * max(weights.values())
            if path_sum > cap * (1.0 + 1e-12):
                violations.append(
                    {"kind": "chain-sum", "component": comp, "sum": path_sum, "cap": cap}
                )

    return {
        "cubes": len(tree.cubes),
        "levels": len(levels),
        "pairs_checked": pairs_checked,
        "roundness_checked": roundness_checked,
        "coverage_points_checked": coverage_checked,
        "chain_components_checked": chains_checked,
        "violations": violations,
    }


# -- serialization -----------------------------------------------------


def cube_tree_to_doc(tree):
    return {
        "M": tree.M,
        "c": tree.c,
        "cubes": [
            {
                "id": q.id,
                "level": q.level,
                "center": q.center,
                "parent": q.parent,
                "children": list(q.children),
                "members": q.members.tolist(),
                "diam": q.diam,
            }
            for q in tree.cubes
        ],
    }


def cube_tree_from_doc(doc):
    cubes = [
        Cube(
            id=d["id"],
            level=d["level"],
            center=d["center"],
            members=np.asarray(d["members"], dtype=int),
            parent=d["parent"],
            children=list(d["children"]),
            diam=d["diam"],
        )
        for d in doc["cubes"]
    ]
    levels = [q.level for q in cubes] or [0]
    return CubeTree(
        M=doc["M"], c=doc["c"], cubes=cubes, n_min=min(levels), n_max=max(levels)
    )


def dump_cube_tree(tree, path):
    with open(path, "w") as fh:
        json.dump(cube_tree_to_doc(tree), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


# -- the constant ledger -----------------------------------------------


@dataclass(frozen=True)
class PaperConstants:
    """Derived constant chain for the asymptotic regime.

    All fields follow from (beta, eps, K, c) by the fixed formulas;
    kappa is the net dimension-gain rate and stays above 2**-41 / 4
    throughout the admissible box.
    """

    beta: float
    eps: float
    K: float
    c: float
    beta0: float
    M: float
    delta: float
    kappa: float
    n0: int
    c_prime: float
    feasible: bool


def derive_paper_constants(beta, eps, K, c):
    """Constant chain M, delta, kappa, n0 from the base parameters.

    Bounds: 0 < beta <= beta0 = 1/356, eps < 1/12288, K < 1/4096,
    c < 1/64, all positive.  n0 is computed in exact rational
    arithmetic before the ceiling.
    """
    if not 0.0 < beta <= BETA0:
        raise ValueError(f"beta must lie in (0, {BETA0}], got {beta}")
    if not 0.0 < eps < EPS_MAX:
        raise ValueError(f"eps must lie in (0, 1/12288), got {eps}")
    if not 0.0 < K < K_MAX:
        raise ValueError(f"K must lie in (0, 1/4096), got {K}")
    if not 0.0 < c < C_MAX:
        raise ValueError(f"c must lie in (0, 1/64), got {c}")
    delta = K * c * eps / 80.0
    kappa = delta / 16.0
    M = 8.0 / (eps * beta)
    d_exact = Fraction(K) * Fraction(c) * Fraction(eps) / 80
    n0_exact = Fraction(8) / (d_exact * Fraction(beta) ** 2 * Fraction(eps))
    n0 = int(math.ceil(n0_exact))
    c_prime = 0.125 * (1.0 - 1e-9)
    if not c < c_prime / 4.0:
        raise ValueError("core fraction must stay below a quarter of c'")
    return PaperConstants(
        beta=beta,
        eps=eps,
        K=K,
        c=c,
        beta0=BETA0,
        M=M,
        delta=delta,
        kappa=kappa,
        n0=n0,
        c_prime=c_prime,
        feasible=bool(kappa >= 2.0**-41 / 4.0),
    )
