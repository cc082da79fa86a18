"""Finite metric spaces, balls, and polygonal paths.

A space either carries ambient coordinates under a named norm (sup,
euclidean, l1) or an explicit distance matrix.  Everything downstream
(nets, cubes, flatness searches, trees) consumes this interface and
never assumes coordinates unless it says so.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

NORMS = ("sup", "euclidean", "l1")

# Guard for materializing full N x N distance matrices.
MATRIX_CAP = 8192

_TRIANGLE_EXHAUSTIVE_CAP = 300
_TRIANGLE_SAMPLES = 100_000
_AGREE_TOL = 1e-12


class MetricError(ValueError):
    """A distance matrix failed a metric axiom.  Carries a witness."""

    def __init__(self, message, triple=None):
        super().__init__(message)
        self.triple = triple


def norm_dist(diff, norm, axis=-1):
    """Length of difference vectors under a named norm."""
    diff = np.asarray(diff, dtype=float)
    if norm == "sup":
        return np.abs(diff).max(axis=axis)
    if norm == "euclidean":
        return np.sqrt((diff * diff).sum(axis=axis))
    if norm == "l1":
        return np.abs(diff).sum(axis=axis)
    raise ValueError(f"unknown norm {norm!r}")


class MetricSpace:
    """Finite metric space from coordinates + norm or an explicit matrix.

    Distance rows are computed on demand; the full matrix is only
    materialized for small spaces.  Instances are treated as immutable.
    """

    def __init__(self, coords=None, norm=None, matrix=None, labels=None):
        if (coords is None) == (matrix is None):
            raise ValueError("exactly one of coords or matrix is required")
        if coords is not None:
            coords = np.asarray(coords, dtype=float)
            if coords.ndim == 1:
                coords = coords[:, None]
            if norm not in NORMS:
                raise ValueError(f"norm must be one of {NORMS}, got {norm!r}")
            self.n = coords.shape[0]
        else:
            matrix = np.asarray(matrix, dtype=float)
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise ValueError("matrix must be square")
            if norm is not None:
                raise ValueError("norm applies only to coordinate spaces")
            self.n = matrix.shape[0]
        self.coords = coords
        self.norm = norm
        self._matrix = matrix
        self.labels = tuple(labels) if labels is not None else None
        if self.labels is not None and len(self.labels) != self.n:
            raise ValueError("labels length mismatch")
        if self.n == 0:
            raise ValueError("empty space")
        self._diam = None

    # -- construction -------------------------------------------------

    @classmethod
    def from_coords(cls, coords, norm, labels=None):
        return cls(coords=coords, norm=norm, labels=labels)

    @classmethod
    def from_matrix(cls, matrix, labels=None, validate=True):
        sp = cls(matrix=matrix, labels=labels)
        if validate:
            validate_metric(sp)
        return sp

    def __len__(self):
        return self.n

    # -- distances -----------------------------------------------------

    @property
    def has_coords(self):
        return self.coords is not None

    def dist_row(self, i):
        """Distances from point i to every point, shape (n,)."""
        if self._matrix is not None:
            return self._matrix[i]
        return norm_dist(self.coords - self.coords[i], self.norm)

    def dist(self, i, j):
        if self._matrix is not None:
            return float(self._matrix[i, j])
        return float(norm_dist(self.coords[i] - self.coords[j], self.norm))

    def pairwise(self, idx):
        """Distance submatrix over an index array."""
        idx = np.asarray(idx, dtype=int)
        if self._matrix is not None:
            return self._matrix[np.ix_(idx, idx)]
        pts = self.coords[idx]
        return norm_dist(pts[:, None, :] - pts[None, :, :], self.norm)

    def cross(self, idx_a, idx_b):
        """Distances between two index arrays, shape (len(a), len(b))."""
        idx_a = np.asarray(idx_a, dtype=int)
        idx_b = np.asarray(idx_b, dtype=int)
        if self._matrix is not None:
            return self._matrix[np.ix_(idx_a, idx_b)]
        a = self.coords[idx_a]
        b = self.coords[idx_b]
        return norm_dist(a[:, None, :] - b[None, :, :], self.norm)

    def full_matrix(self):
        if self._matrix is None:
            if self.n > MATRIX_CAP:
                raise ValueError(
                    f"refusing to materialize {self.n} x {self.n} distance matrix"
                )
            self._matrix = norm_dist(
                self.coords[:, None, :] - self.coords[None, :, :], self.norm
            )
        return self._matrix

    def diameter(self):
        if self._diam is not None:
            return self._diam
        if self._matrix is not None:
            d = float(self._matrix.max())
        elif self.norm == "sup":
            # sup-norm diameter is the largest per-coordinate range
            d = float((self.coords.max(axis=0) - self.coords.min(axis=0)).max())
        elif self.norm == "l1" and self.coords.shape[1] == 2:
            # rotate 45 degrees: l1 in the plane is sup in (x+y, x-y)
            u = self.coords[:, 0] + self.coords[:, 1]
            v = self.coords[:, 0] - self.coords[:, 1]
            d = float(max(u.max() - u.min(), v.max() - v.min()))
        elif self.norm == "euclidean" and self.coords.shape[1] in (2, 3) and self.n > 64:
            d = _euclidean_diameter_hull(self.coords)
        elif self.n <= MATRIX_CAP:
            d = float(self.full_matrix().max())
        else:
            raise ValueError("diameter unsupported for this size and norm")
        self._diam = d
        return d


def _euclidean_diameter_hull(coords):
    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(coords)
        pts = coords[hull.vertices]
    except QhullError:
        # degenerate (collinear / coplanar) input: fall back to raw points
        pts = coords
    d = norm_dist(pts[:, None, :] - pts[None, :, :], "euclidean")
    return float(d.max())


# -- validation --------------------------------------------------------


def validate_metric(space, rng_seed=0):
    """Check symmetry, zero diagonal, nonnegativity, triangle inequality.

    Exhaustive over all triples for n <= 300, otherwise at least 1e5
    uniformly sampled triples.  Raises MetricError with an offending
    triple on failure.  Coordinate spaces additionally get their matrix
    view checked against direct norm evaluation when small.
    """
    n = space.n
    if space._matrix is not None:
        m = space._matrix
        if not np.all(np.isfinite(m)):
            raise MetricError("non-finite distance entries")
        ij = np.unravel_index(np.argmax(np.abs(m - m.T)), m.shape)
        if abs(m[ij] - m.T[ij]) > _AGREE_TOL:
            raise MetricError(f"asymmetry at {ij}", triple=(int(ij[0]), int(ij[1]), -1))
        if np.any(np.abs(np.diag(m)) > 0):
            k = int(np.argmax(np.abs(np.diag(m))))
            raise MetricError(f"nonzero diagonal at {k}", triple=(k, k, k))
        if np.any(m < 0):
            ij = np.unravel_index(np.argmin(m), m.shape)
            raise MetricError(f"negative distance at {ij}")
        if n <= _TRIANGLE_EXHAUSTIVE_CAP:
            for k in range(n):
                viol = m - (m[:, k][:, None] + m[None, k, :])
                worst = np.unravel_index(np.argmax(viol), viol.shape)
                if viol[worst] > 1e-9:
                    raise MetricError(
                        f"triangle violation d({worst[0]},{worst[1]}) > "
                        f"d(.,{k}) + d({k},.) by {viol[worst]:.3e}",
                        triple=(int(worst[0]), int(worst[1]), k),
                    )
        else:
            rng = np.random.default_rng(rng_seed)
            ii = rng.integers(0, n, _TRIANGLE_SAMPLES)
            jj = rng.integers(0, n, _TRIANGLE_SAMPLES)
            kk = rng.integers(0, n, _TRIANGLE_SAMPLES)
            gap = m[ii, jj] - m[ii, kk] - m[kk, jj]
            w = int(np.argmax(gap))
            if gap[w] > 1e-9:
                raise MetricError(
                    "triangle violation (sampled)",
                    triple=(int(ii[w]), int(jj[w]), int(kk[w])),
                )
    else:
        if not np.all(np.isfinite(space.coords)):
            raise MetricError("non-finite coordinates")
        if n <= _TRIANGLE_EXHAUSTIVE_CAP:
            m = space.full_matrix()
            direct = norm_dist(space.coords[:, None, :] - space.coords[None, :, :], space.norm)
            if np.abs(m - direct).max() > _AGREE_TOL:
                raise MetricError("matrix view disagrees with norm evaluation")
        # norms satisfy the axioms identically; nothing further to check
    return True


# -- balls -------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    """Open metric ball: center index, radius, sorted member indices."""

    center: int
    radius: float
    members: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "members", np.asarray(self.members, dtype=int))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    def __len__(self):
        return len(self.members)


def ball_members(space, center, r):
    """Open ball around a point index: strict inequality d < r."""
    if not 0 <= center < space.n:
        raise ValueError(f"center index {center} out of range")
    if r <= 0:
        raise ValueError("radius must be positive")
    row = space.dist_row(center)
    members = np.flatnonzero(row < r)
    return Ball(center=int(center), radius=float(r), members=members)


# -- polygonal paths ---------------------------------------------------


@dataclass(frozen=True)
class PolygonalPath:
    """Finitely many vertices joined by segments, measured in one norm."""

    vertices: np.ndarray
    norm: str

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        object.__setattr__(self, "vertices", v)
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}")
        if len(v) < 1:
            raise ValueError("path needs at least one vertex")

    @property
    def length(self):
        if len(self.vertices) < 2:
            return 0.0
        return float(norm_dist(np.diff(self.vertices, axis=0), self.norm).sum())

    @property
    def gap(self):
        if len(self.vertices) < 2:
            return 0.0
        return float(norm_dist(self.vertices[-1] - self.vertices[0], self.norm))

    @property
    def deviation(self):
        return self.length - self.gap


def subarc_deviation(path, i, j):
    """Deviation of the vertex subrange [i..j]; needs 0 <= i < j < len."""
    k = len(path.vertices)
    if not (0 <= i < j < k):
        raise ValueError(f"need 0 <= i < j < {k}, got ({i}, {j})")
    sub = PolygonalPath(path.vertices[i : j + 1], path.norm)
    return sub.deviation


# -- point-to-segment distances ---------------------------------------

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def _segment_dist_golden(points, a, b, norm, tol=1e-10):
    """Distance from each point to segment [a, b] by golden-section.

    The map t -> ||p - (a + t(b-a))|| is convex on [0, 1] for every
    norm, so golden-section converges; vectorized over the point batch.
    """
    points = np.atleast_2d(points)
    lo = np.zeros(len(points))
    hi = np.ones(len(points))
    ab = b - a

    def f(t):
        pos = a[None, :] + t[:, None] * ab[None, :]
        return norm_dist(points - pos, norm)

    while (hi - lo).max() > tol:
        c = hi - _INVPHI * (hi - lo)
        d = lo + _INVPHI * (hi - lo)
        take_c = f(c) < f(d)
        hi = np.where(take_c, d, hi)
        lo = np.where(take_c, lo, c)
    t = (lo + hi) / 2.0
    return np.minimum(f(t), np.minimum(f(np.zeros_like(t)), f(np.ones_like(t))))


def _segment_dist_euclidean(points, a, b):
    points = np.atleast_2d(points)
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return norm_dist(points - a, "euclidean")
    t = np.clip(((points - a) @ ab) / denom, 0.0, 1.0)
    pos = a[None, :] + t[:, None] * ab[None, :]
    return norm_dist(points - pos, "euclidean")


def segment_distances(points, a, b, norm):
    """Distances from a point batch to the segment [a, b] under a norm."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if norm == "euclidean":
        return _segment_dist_euclidean(points, a, b)
    return _segment_dist_golden(points, a, b, norm)


def cover_distance(points, path, norm):
    """max over points of min distance to the path's segments.

    Empty point set gives 0; a single-vertex path measures distance to
    that vertex.  Points may be an array of coordinates.
    """
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return 0.0
    points = np.atleast_2d(points)
    verts = path.vertices
    if len(verts) == 1:
        return float(norm_dist(points - verts[0], norm).max())
    # prune: d(p, seg) >= d(p, endpoint) - |seg|, so skip segments that
    # cannot beat the best found so far
    vert_d = norm_dist(points[:, None, :] - verts[None, :, :], norm)
    best = vert_d.min(axis=1)
    seg_len = norm_dist(np.diff(verts, axis=0), norm)
    for s in range(len(verts) - 1):
        lower = np.minimum(vert_d[:, s], vert_d[:, s + 1]) - seg_len[s]
        mask = lower < best
        if not mask.any():
            continue
        ds = segment_distances(points[mask], verts[s], verts[s + 1], norm)
        best[mask] = np.minimum(best[mask], ds)
    return float(best.max())


# -- embedding ---------------------------------------------------------


def kuratowski_embed(space):
    """Embed into sup-norm coordinates by distance rows.

    For a finite space this is an exact isometry: the sup distance of
    rows i and j equals d(i, j).  The metric is validated first and a
    MetricError with an offending triple propagates on failure.
    """
    validate_metric(space)
    m = space.full_matrix()
    return MetricSpace(coords=m.copy(), norm="sup", labels=space.labels)


# -- serialization -----------------------------------------------------


def space_to_doc(space):
    if space.has_coords:
        doc = {"metric": space.norm, "points": space.coords.tolist()}
    else:
        doc = {"metric": "matrix", "matrix": space.full_matrix().tolist()}
    if space.labels is not None:
        doc["labels"] = list(space.labels)
    return doc


def space_from_doc(doc):
    if not isinstance(doc, dict):
        raise ValueError("point-set document must be an object")
    metric = doc.get("metric")
    has_points = "points" in doc
    has_matrix = "matrix" in doc
    if has_points == has_matrix:
        raise ValueError("exactly one of 'points' or 'matrix' is required")
    labels = doc.get("labels")
    if metric == "matrix":
        if not has_matrix:
            raise ValueError("metric 'matrix' requires a 'matrix' payload")
        return MetricSpace.from_matrix(np.asarray(doc["matrix"], dtype=float), labels=labels)
    if metric not in NORMS:
        raise ValueError(f"field 'metric' must be one of {NORMS + ('matrix',)}, got {metric!r}")
    if not has_points:
        raise ValueError(f"metric {metric!r} requires a 'points' payload")
    return MetricSpace.from_coords(np.asarray(doc["points"], dtype=float), metric, labels=labels)


def dump_space(space, path):
    with open(path, "w") as fh:
        json.dump(space_to_doc(space), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_space(path):
    with open(path) as fh:
        return space_from_doc(json.load(fh))
