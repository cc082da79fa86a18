"""Length-content estimates, cube marking, mass machinery, dimension.

Content is estimated at a stated resolution: covers may only use sets
of that diameter or smaller, so components farther apart than the
resolution contribute additively.  Bad-cube marking feeds on the
certified lower bound only; the martingale weights then implement the
diameter-proportional split with the good-part remainder, and the
Frostmann construction equal-splits mass along cube-tree generations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


@dataclass
class ContentEstimate:
    lower: float
    upper: float
    resolution: float


class _Forest:
    def __init__(self, items):
        self.parent = {int(v): int(v) for v in items}

    def find(self, a):
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]
            a = p[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def hausdorff_content_estimate(space, members=None, delta=0.01, edges=None):
    """Two-sided content estimate of a sampled trace at resolution delta.

    Components are joined through the supplied edges and through any
    sample pair closer than delta; since a cover set of diameter at
    most delta cannot bridge two components, their diameters add up
    into a certified lower bound.  The upper bound is a greedy ball
    cover priced at twice the covering radius.
    """
    if delta <= 0.0:
        raise ValueError(f"resolution must be positive, got {delta}")
    if members is None:
        members = np.arange(space.n)
    members = np.asarray(members, dtype=int)
    if len(members) == 0:
        return ContentEstimate(lower=0.0, upper=0.0, resolution=float(delta))
    D = space.pairwise(members)
    forest = _Forest(range(len(members)))
    pos = {int(v): i for i, v in enumerate(members)}
    if edges is not None:
        for u, v in edges:
            if int(u) in pos and int(v) in pos:
                forest.union(pos[int(u)], pos[int(v)])
    close = np.argwhere(D < delta)
    for i, j in close:
        if i < j:
            forest.union(int(i), int(j))
    comps = {}
    for i in range(len(members)):
        comps.setdefault(forest.find(i), []).append(i)
    lower = 0.0
    for idx in comps.values():
        if len(idx) > 1:
            lower += float(D[np.ix_(idx, idx)].max())
    # greedy ball covers priced at subset diameter plus one sampling
    # pitch per set: the trace between adjacent samples is otherwise
    # invisible, and the inflation keeps each set within delta
    if len(members) > 1:
        off = D + np.where(np.eye(len(members), dtype=bool), np.inf, 0.0)
        pitch = float(off.min(axis=1).max())
    else:
        pitch = 0.0
    rho0 = max((delta - pitch) / 2.0, delta / 4.0)
    upper = math.inf
    for k in range(4):
        rho = rho0 / 2.0**k
        cost = 0.0
        covered = np.zeros(len(members), dtype=bool)
        while not covered.all():
            i = int(np.argmin(covered))
            sub = np.flatnonzero(D[i] <= rho)
            cost += float(D[np.ix_(sub, sub)].max()) + pitch if len(sub) > 1 else pitch
            covered[sub] = True
        upper = min(upper, cost)
    if len(members) == 1:
        upper = 0.0
    return ContentEstimate(lower=lower, upper=float(upper), resolution=float(delta))


# -- bad cubes and martingale weights ----------------------------------


def mark_bad_cubes(cube_tree, tree, K, beta, threads=None):
    """Cubes whose in-cube trace packs more length than their diameter.

    The trace of the spanning tree inside cube R is its node set with
    the induced edges; R is marked bad when the certified content
    lower bound at the child-core resolution reaches (1 + K*beta)
    times diam R.
    """
    from .parallel import pmap

    if K <= 0.0 or beta <= 0.0:
        raise ValueError("K and beta must be positive")
    space = tree.space
    nodes = np.asarray(sorted(int(v) for v in tree.nodes), dtype=int)
    edge_u = np.asarray([e.u for e in tree.edges], dtype=int)
    edge_v = np.asarray([e.v for e in tree.edges], dtype=int)

    def run(cube):
        trace = np.intersect1d(cube.members, nodes)
        delta = 2.0 * cube_tree.c * cube_tree.M ** (-(cube.level + 1))
        if len(trace) < 2:
            lower = 0.0
        else:
            inside = set(int(v) for v in trace)
            induced = [
                (int(u), int(v))
                for u, v in zip(edge_u, edge_v)
                if int(u) in inside and int(v) in inside
            ]
            est = hausdorff_content_estimate(space, trace, delta, edges=induced)
            lower = est.lower
        threshold = (1.0 + K * beta) * cube.diam
        bad = bool(cube.diam > 0.0 and lower >= threshold)
        return {
            "cube": cube.id,
            "level": cube.level,
            "trace_size": int(len(trace)),
            "lower": float(lower),
            "diam": float(cube.diam),
            "threshold": float(threshold),
            "margin": float(lower - threshold),
            "bad": bad,
        }

    rows = pmap(run, cube_tree.cubes, threads)
    return {
        "rows": rows,
        "by_cube": {r["cube"]: r for r in rows},
        "bad_ids": set(r["cube"] for r in rows if r["bad"]),
        "K": float(K),
        "beta": float(beta),
        "tree_length": float(tree.total_length),
    }


def martingale_weights(cube_tree, marks, beta, K):
    """Diameter-proportional mass split below bad cubes, with checks.

    Each root region starts at density one (mass = diam).  A bad cube
    R splits its mass over child cubes and its good remainder in
    proportion to diameter/length; every split divides the density by
    at least (1 + K*beta), which is verified per region, along with
    the packing bound on the marked cubes.
    """
    by_id = {q.id: q for q in cube_tree.cubes}
    bad_ids = marks["bad_ids"]
    regions = []
    degenerate = []
    factor = 1.0 + K * beta

    def emit(kind, cube, mass, size, k):
        density = mass / size if size > 0.0 else (math.inf if mass > 0.0 else 0.0)
        bound = factor ** (-k)
        regions.append(
            {
                "region": kind,
                "cube": cube.id,
                "level": cube.level,
                "mass": float(mass),
                "size": float(size),
                "density": float(density),
                "k": k,
                "bound": float(bound),
                "ok": bool(density <= bound * (1.0 + 1e-9)),
            }
        )

    stack = []
    total_in = 0.0
    for q in cube_tree.roots():
        if q.diam > 0.0:
            stack.append((q, float(q.diam), 0))
            total_in += float(q.diam)
    while stack:
        cube, mass, k = stack.pop()
        children = [by_id[c] for c in cube.children]
        if cube.id not in bad_ids or not children:
            emit("terminal", cube, mass, cube.diam, k)
            continue
        row = marks["by_cube"].get(cube.id)
        lower = row["lower"] if row else 0.0
        child_sum = sum(c.diam for c in children)
        good = max(0.0, lower - child_sum)
        denom = child_sum + good
        if denom <= 0.0:
            degenerate.append(cube.id)
            emit("terminal", cube, mass, cube.diam, k)
            continue
        for c in children:
            share = mass * c.diam / denom
            if share > 0.0:
                stack.append((c, share, k + 1))
        if good > 0.0:
            emit("good", cube, mass * good / denom, good, k + 1)
    total_out = sum(r["mass"] for r in regions)
    packing_sum = sum(beta * by_id[i].diam for i in bad_ids)
    packing_bound = (2.0 / K) * marks["tree_length"]
    return {
        "regions": regions,
        "degenerate": degenerate,
        "bounds_ok": all(r["ok"] for r in regions),
        "mass_in": float(total_in),
        "mass_out": float(total_out),
        "packing": {
            "sum": float(packing_sum),
            "bound": float(packing_bound),
            "ok": bool(packing_sum <= packing_bound * (1.0 + 1e-9)),
            "bad_count": len(bad_ids),
        },
    }


# -- Frostmann mass ----------------------------------------------------


@dataclass
class MassDistribution:
    """Equal-split probability mass over every n0-th cube-tree level."""

    n0: int
    root: int
    masses: dict
    generations: list
    flags: list = field(default_factory=list)
    cube_tree: object = None


def _descendants_at(by_id, cube, level):
    out = []
    frontier = [cube]
    while frontier:
        nxt = []
        for q in frontier:
            for cid in q.children:
                child = by_id[cid]
                if child.level == level:
                    out.append(child)
                elif child.level < level:
                    nxt.append(child)
        frontier = nxt
    return out


def build_frostmann(cube_tree, n0, root=None):
    """Probability measure splitting equally along cube generations.

    Generations live every n0 levels below the root.  When the tree
    carries its sample space, a generation cube chains to the nearest
    previous-generation cube whose covering ball (the c^-1 inflation
    of its core, radius M^-level) absorbs its center.  Covering balls
    blanket the space at every level, so deep generations do too; the
    strict member-containment chains thin out far too fast at small
    n0 for the mass to see more than one branch.  Trees built by hand
    without a space chain by their declared child links instead.
    Arithmetic is exact (rational), so conservation is not a tolerance
    statement.
    """
    if n0 < 1:
        raise ValueError("n0 must be a positive integer")
    by_id = {q.id: q for q in cube_tree.cubes}
    if root is None:
        tops = cube_tree.by_level(cube_tree.n_min)
        if not tops:
            raise ValueError(f"no cubes at level {cube_tree.n_min}")
        root_cube = max(tops, key=lambda q: (len(q.children) > 0, len(q.members), -q.id))
    else:
        root_cube = by_id[root]
    if root_cube.level + n0 > cube_tree.n_max:
        raise ValueError(
            f"tree stops at level {cube_tree.n_max}; root level {root_cube.level} "
            f"plus n0 = {n0} needs at least one deeper generation"
        )
    space = cube_tree.space
    masses = {root_cube.id: Fraction(1)}
    generations = [[root_cube.id]]
    flags = []
    level = root_cube.level
    while level + n0 <= cube_tree.n_max:
        level += n0
        cur = generations[-1]
        if space is not None:
            cand = cube_tree.by_level(level)
            reach = float(cube_tree.M) ** (-(level - n0)) * (1.0 + 1e-12)
            D = space.cross(
                [q.center for q in cand], [by_id[qid].center for qid in cur]
            )
            kids = {qid: [] for qid in cur}
            if len(cand):
                nearest = np.argmin(D, axis=1)
                for i, q in enumerate(cand):
                    j = int(nearest[i])
                    if D[i, j] < reach:
                        kids[cur[j]].append(q.id)
        else:
            kids = {
                qid: [q.id for q in _descendants_at(by_id, by_id[qid], level)]
                for qid in cur
            }
        nxt = []
        for qid in cur:
            ids = kids[qid]
            if not ids:
                flags.append(
                    {"cube": qid, "detail": f"no generation-{level} descendants; branch truncated"}
                )
                continue
            share = masses[qid] / len(ids)
            for cid in ids:
                masses[cid] = masses.get(cid, Fraction(0)) + share
                nxt.append(cid)
        if not nxt:
            raise ValueError(f"no cube reached level {level}; hierarchy too shallow")
        generations.append(sorted(set(nxt)))
    return MassDistribution(
        n0=n0,
        root=root_cube.id,
        masses=masses,
        generations=generations,
        flags=flags,
        cube_tree=cube_tree,
    )


def measure_to_doc(measure):
    by_gen = {}
    for g, ids in enumerate(measure.generations):
        for qid in ids:
            by_gen[qid] = g
    return {
        "n0": measure.n0,
        "cubes": [
            {"id": qid, "mass": float(measure.masses[qid]), "generation": by_gen[qid]}
            for qid in sorted(by_gen)
        ],
    }


def dump_measure(measure, path):
    with open(path, "w") as fh:
        json.dump(measure_to_doc(measure), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


@dataclass
class FrostmannFit:
    s: float
    C: float
    n_samples: int
    warning: str | None = None


def frostmann_exponent(measure, space, samples=40, radii=None, seed=0, budget=100.0):
    """Largest exponent certified by the sampled mass-vs-radius cloud.

    mu(B(x, r)) sums deepest-generation cubes whose core center falls
    in the ball.  The returned s is the largest value (bisection to
    1e-3) whose global sup ratio max mu / r**s stays within the given
    constant budget; the reported C is that sup ratio, so (s, C) is a
    valid uniform bound on every sampled pair.  The pair should be
    read against the budget: a looser budget certifies a larger s at
    a larger constant.
    """
    deepest = measure.generations[-1]
    by_id = {q.id: q for q in measure.cube_tree.cubes}
    centers = np.asarray([by_id[qid].center for qid in deepest], dtype=int)
    mass = np.asarray([float(measure.masses[qid]) for qid in deepest])
    diam = space.diameter()
    if radii is None:
        # balls above diam/4 saturate; the window still spans the two
        # decades the fit needs on desk-size hierarchies
        radii = diam / 4.0 * 10 ** np.linspace(0.0, -2.05, 24)
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    if radii[0] / radii[-1] < 100.0 * (1.0 - 1e-9):
        raise ValueError("radius span must cover at least two decades")
    rng = np.random.default_rng(seed)
    xs = rng.integers(0, space.n, size=samples)
    # probe the heaviest cubes as well: the sup that prices C lives
    # where mass concentrates, and random points can miss it
    heavy = centers[np.argsort(mass, kind="stable")[::-1][:samples]]
    xs = np.concatenate([heavy, xs])
    D = space.cross(centers, xs)
    logr, logmu = [], []
    for r in radii:
        mus = mass @ (D < r)
        for m in mus:
            if m > 0.0:
                logr.append(math.log(r))
                logmu.append(math.log(m))
    if not logr:
        return FrostmannFit(s=0.0, C=0.0, n_samples=0, warning="no positive-mass samples")
    logr = np.asarray(logr)
    logmu = np.asarray(logmu)
    log_budget = math.log(budget)

    def feasible(s):
        return float((logmu - s * logr).max()) <= log_budget

    if len(deepest) == 1 or feasible(4.0):
        ratio = logmu - 4.0 * logr
        return FrostmannFit(
            s=4.0,
            C=float(math.exp(ratio.max())),
            n_samples=int(len(logr)),
            warning=f"measure has {len(deepest)} deepest cubes; exponent unconstrained by data",
        )
    if not feasible(0.0):
        return FrostmannFit(
            s=0.0,
            C=float(math.exp(logmu.max())),
            n_samples=int(len(logr)),
            warning="no exponent meets the constant budget",
        )
    lo, hi = 0.0, 4.0
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    ratio = logmu - lo * logr
    return FrostmannFit(s=float(lo), C=float(math.exp(ratio.max())), n_samples=int(len(logr)))


# -- box dimension -----------------------------------------------------


def _fps_insertion_radii(space, stop_below):
    mind = space.dist_row(0).copy()
    radii = [math.inf]
    for _ in range(space.n - 1):
        far = int(np.argmax(mind))
        if mind[far] < stop_below:
            break
        radii.append(float(mind[far]))
        np.minimum(mind, space.dist_row(far), out=mind)
    return np.asarray(radii)


def box_dimension(space, scales=None):
    """Least-squares slope of log net-size against log inverse scale.

    N(eps) is the size of the greedy maximal eps-net, read off the
    farthest-point insertion radii.
    """
    diam = space.diameter()
    if diam <= 0.0:
        raise ValueError("space is a single point")
    if scales is None:
        scales = diam / 4.0 * 10 ** (-np.linspace(0.0, 1.8, 8))
    scales = np.sort(np.asarray(scales, dtype=float))[::-1]
    if len(scales) < 4:
        raise ValueError(f"need at least 4 scales, got {len(scales)}")
    if scales[0] / scales[-1] < 10**1.5 * (1.0 - 1e-9):
        raise ValueError("scales must span at least 1.5 decades")
    radii = _fps_insertion_radii(space, stop_below=scales[-1])
    counts = np.array([int((radii >= eps).sum()) for eps in scales])
    x = np.log(1.0 / scales)
    y = np.log(counts)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return {
        "method": "box-count",
        "estimate": float(slope),
        "residual": residual,
        "scales": [{"eps": float(e), "count": int(c)} for e, c in zip(scales, counts)],
    }


def dump_report(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
