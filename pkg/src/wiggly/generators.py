"""Deterministic example-space generators.

Antenna-type self-similar sets from four planar similarities, straight
and branching calibration spaces (segment, tripod, geodesic arc given
by its exact distance matrix), recursive curves (koch, zigzag), the
snowflake distortion d -> d^gamma, and the Moran similarity-dimension
solver used as an oracle by the dimension tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spaces import MetricSpace, validate_metric

NAMED = ("segment", "tripod", "l1_geodesic", "koch", "zigzag")

_ANTENNA_DEPTH_CAP = 9
_DEDUP_DECIMALS = 12


@dataclass(frozen=True)
class GeneratorOutput:
    """A generated space plus the record needed to regenerate it."""

    space: MetricSpace
    name: str
    params: dict = field(default_factory=dict)

    @property
    def provenance(self):
        return {"generator": self.name, "parameters": dict(self.params)}


def _dedup_lex(z):
    """Deduplicate complex points at 1e-12 and sort (re, im) lexicographically."""
    keys = np.round(z.real, _DEDUP_DECIMALS) + 1j * np.round(z.imag, _DEDUP_DECIMALS)
    _, first = np.unique(keys, return_index=True)
    kept = z[np.sort(first)]
    order = np.lexsort((kept.imag, kept.real))
    return kept[order]


def generate_antenna(alpha, depth):
    """Orbit of {0, 1} under depth-fold compositions of the antenna maps.

    The four maps are z/2, (z+1)/2, i*alpha*z + 1/2, -i*alpha*z + 1/2
    + i*alpha: two halves of the base segment plus an alpha-scaled
    perpendicular branch attached at the midpoint from both sides.
    """
    if not 0.0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha}")
    if not 0 <= depth <= _ANTENNA_DEPTH_CAP:
        raise ValueError(f"depth must lie in [0, {_ANTENNA_DEPTH_CAP}], got {depth}")
    a = complex(alpha)
    z = np.array([0.0 + 0.0j, 1.0 + 0.0j])
    for _ in range(depth):
        z = np.concatenate(
            [
                z / 2.0,
                (z + 1.0) / 2.0,
                1j * a * z + 0.5,
                -1j * a * z + 0.5 + 1j * a,
            ]
        )
        z = _dedup_lex(z)
    coords = np.column_stack([z.real, z.imag])
    space = MetricSpace.from_coords(coords, "euclidean")
    return GeneratorOutput(space=space, name="antenna", params={"alpha": alpha, "depth": depth})


def _koch_vertices(depth, angle):
    """Generalized Koch polyline corner vertices at a refinement depth.

    Each segment p -> q is replaced by four pieces of relative length
    a = 1 / (2 (1 + cos angle)); at 60 degrees this is the classic
    ratio-1/3 curve.
    """
    a = 1.0 / (2.0 * (1.0 + np.cos(angle)))
    rot = np.exp(1j * angle)
    pts = np.array([0.0 + 0.0j, 1.0 + 0.0j])
    for _ in range(depth):
        p = pts[:-1]
        v = np.diff(pts)
        stages = [p, p + a * v, p + a * v * (1.0 + rot), pts[1:] - a * v]
        out = np.empty(4 * len(p) + 1, dtype=complex)
        for k, s in enumerate(stages):
            out[k::4][: len(p)] = s
        out[-1] = pts[-1]
        pts = out
    return pts


def _zigzag_vertices(teeth, angle):
    """Sawtooth corner list on [0, 1]: 2*teeth segments at +-angle slope."""
    k = 2 * teeth
    x = np.arange(k + 1) / k
    h = np.tan(angle) / k
    y = np.where(np.arange(k + 1) % 2 == 1, h, 0.0)
    return np.column_stack([x, y])


def _sample_polyline(verts, count):
    """count points uniformly in arclength along a polyline, corners kept."""
    seg = np.sqrt((np.diff(verts, axis=0) ** 2).sum(axis=1))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, cum[-1], count)
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(seg) - 1)
    t = (targets - cum[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0)
    pts = verts[idx] + t[:, None] * (verts[idx + 1] - verts[idx])
    # snap corner vertices into the sample so the corner geometry
    # survives coarse resolutions; corners first so their exact
    # coordinates win the dedup over near-equal samples
    merged = np.vstack([verts, pts])
    z = merged[:, 0] + 1j * merged[:, 1]
    z = _dedup_lex(z)
    return np.column_stack([z.real, z.imag])


def generate_named(name, params=None, resolution=64):
    """Named calibration spaces; see NAMED for the accepted names."""
    params = dict(params or {})
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    if name == "segment":
        coords = np.linspace(0.0, 1.0, resolution)
        space = MetricSpace.from_coords(coords[:, None], "euclidean")
    elif name == "tripod":
        variant = params.setdefault("variant", "euclidean")
        per_leg = np.linspace(0.0, 1.0, resolution)[1:]
        if variant == "euclidean":
            legs = [np.zeros((1, 3))]
            for axis in range(3):
                pts = np.zeros((len(per_leg), 3))
                pts[:, axis] = per_leg
                legs.append(pts)
            space = MetricSpace.from_coords(np.vstack(legs), "euclidean")
        elif variant == "path":
            # tree path metric: through the origin unless on one leg
            leg_id = np.concatenate([[-1], np.repeat([0, 1, 2], len(per_leg))])
            t = np.concatenate([[0.0], np.tile(per_leg, 3)])
            same = leg_id[:, None] == leg_id[None, :]
            m = np.where(same, np.abs(t[:, None] - t[None, :]), t[:, None] + t[None, :])
            np.fill_diagonal(m, 0.0)
            space = MetricSpace.from_matrix(m)
        else:
            raise ValueError(f"unknown tripod variant {variant!r}")
    elif name == "l1_geodesic":
        t = np.linspace(0.0, 1.0, resolution)
        grid = params.get("embedded_grid")
        if grid is None:
            m = np.abs(t[:, None] - t[None, :])
            space = MetricSpace.from_matrix(m)
        else:
            # indicator of [0, t] sampled on an m-grid, l1-normalized:
            # a coordinate picture whose l1 metric quantizes |s - t|
            grid = int(grid)
            edges = (np.arange(grid) + 1.0) / grid
            coords = (t[:, None] >= edges[None, :]).astype(float) / grid
            space = MetricSpace.from_coords(coords, "l1")
            params["embedded_grid"] = grid
    elif name == "koch":
        angle = float(params.setdefault("angle", np.pi / 3.0))
        depth = params.get("depth")
        if depth is None:
            depth = 0
            while 4**depth + 1 < resolution and depth < 8:
                depth += 1
        params["depth"] = int(depth)
        verts = _koch_vertices(int(depth), angle)
        coords = np.column_stack([verts.real, verts.imag])
        space = MetricSpace.from_coords(coords, "euclidean")
    elif name == "zigzag":
        angle = float(params.setdefault("angle", np.pi / 4.0))
        teeth = int(params.setdefault("teeth", 8))
        if teeth < 1:
            raise ValueError("zigzag needs at least one tooth")
        verts = _zigzag_vertices(teeth, angle)
        space = MetricSpace.from_coords(_sample_polyline(verts, resolution), "euclidean")
    else:
        raise ValueError(f"unknown generator name {name!r}; expected one of {NAMED}")
    params["resolution"] = resolution
    return GeneratorOutput(space=space, name=name, params=params)


def snowflake(space, gamma):
    """Distance-matrix space with d' = d**gamma.

    Valid metric for gamma in (0, 1] since t -> t**gamma is concave
    and subadditive; gamma > 1 is rejected because the power of a
    metric need not satisfy the triangle inequality.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    m = space.full_matrix() ** gamma
    np.fill_diagonal(m, 0.0)
    out = MetricSpace(matrix=m, labels=space.labels)
    validate_metric(out)
    return out


def moran_dimension(ratios, tol=1e-10):
    """Unique s >= 0 with sum(r**s) = 1, by bisection.

    The map s -> sum(r**s) is strictly decreasing for ratios in (0,1),
    equals the count at s = 0, and tends to 0, so a root exists exactly
    when there are at least two ratios; one ratio gives s = 0.
    """
    r = np.asarray(ratios, dtype=float)
    if r.size == 0:
        raise ValueError("need at least one ratio")
    if np.any((r <= 0) | (r >= 1)):
        raise ValueError("ratios must lie in (0, 1)")
    if r.size == 1:
        return 0.0
    lo, hi = 0.0, 1.0
    while (r**hi).sum() > 1.0:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("Moran exponent out of range")
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if (r**mid).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2.0


def regenerate(provenance):
    """Rebuild a space from a GeneratorOutput provenance record."""
    name = provenance["generator"]
    params = dict(provenance.get("parameters", {}))
    if name == "antenna":
        return generate_antenna(params["alpha"], params["depth"])
    resolution = params.pop("resolution", 64)
    return generate_named(name, params, resolution)
