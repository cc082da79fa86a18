"""Flatness numbers on balls: jones, hat, prime, double_prime.

jones is the classical scale-normalized minimax line-fit width.  The
hat number searches ordered point sequences for small (path length -
endpoint gap + covering radius) / gap; prime re-scores polygonal paths
with segment-based cover; double_prime takes the square root of the
normalized deviation before adding the cover term.  hat and prime are
infima over infinite families, so except on exhaustively searched
small balls the returned values are certified upper bounds with
re-scorable witnesses.  The antenna detector certifies tripod
constants from shortest-path legs in a unit-scale neighborhood graph.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .spaces import (
    Ball,
    MetricSpace,
    cover_distance,
    kuratowski_embed,
    norm_dist,
)

_DP_CAP = 12


@dataclass(frozen=True)
class SearchConfig:
    candidate_source: str = "net_points"
    max_sequence_length: int = 12
    exhaustive_threshold: int = 10
    local_search_iters: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.exhaustive_threshold > _DP_CAP:
            raise ValueError(f"exhaustive_threshold capped at {_DP_CAP}")
        if self.candidate_source not in ("net_points", "all_ball_points"):
            raise ValueError(f"unknown candidate_source {self.candidate_source!r}")


DEFAULT_CONFIG = SearchConfig()


@dataclass
class BetaValue:
    kind: str
    value: float
    bound: str
    witness: dict = field(default_factory=dict)


def _degenerate(kind):
    return BetaValue(kind=kind, value=0.0, bound="exact", witness={"degenerate": True})


# -- jones (minimax line) ----------------------------------------------


def _line_distances(pts, point, direction):
    direction = direction / np.sqrt(direction @ direction)
    rel = pts - point
    proj = rel - np.outer(rel @ direction, direction)
    return np.sqrt((proj * proj).sum(axis=1))


def _minimax_line_2d(pts):
    """Exact minimal-width strip: one side supports a hull edge."""
    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(pts)
        hv = pts[hull.vertices]
    except QhullError:
        # collinear: zero width along the farthest-pair direction
        span = pts.max(axis=0) - pts.min(axis=0)
        direction = span if span.any() else np.array([1.0, 0.0])
        return 0.0, pts[0], direction
    best = (np.inf, None, None)
    k = len(hv)
    for e in range(k):
        a, b = hv[e], hv[(e + 1) % k]
        d = b - a
        if not d.any():
            continue
        normal = np.array([-d[1], d[0]])
        normal = normal / np.sqrt(normal @ normal)
        signed = (hv - a) @ normal
        if signed.min() < -1e-15 * max(1.0, np.abs(signed).max()):
            normal, signed = -normal, -signed
        width = signed.max()
        if width < best[0]:
            # midline of the supporting strip
            best = (width, a + normal * (width / 2.0), d)
    width, mid, d = best
    return width / 2.0, mid, d


def _minimax_line_nd(pts, tol=1e-9, iters=300):
    """PCA direction + Chebyshev re-centering of the normal residuals."""
    center = pts.mean(axis=0)
    rel = pts - center
    _, _, vt = np.linalg.svd(rel, full_matrices=False)
    direction = vt[0]
    resid = rel - np.outer(rel @ direction, direction)
    u = np.zeros(pts.shape[1])
    best = np.sqrt(((resid - u) ** 2).sum(axis=1)).max()
    best_u = u
    for k in range(1, iters + 1):
        offsets = resid - u
        d2 = (offsets * offsets).sum(axis=1)
        far = int(np.argmax(d2))
        u = u + (resid[far] - u) / (k + 1.0)
        u = u - (u @ direction) * direction
        cur = np.sqrt(((resid - u) ** 2).sum(axis=1)).max()
        stop = best - cur < tol and k > 8
        if cur < best:
            best, best_u = cur, u
        if stop:
            break
    return best, center + best_u, direction


def _minimax_line_3pt(pts):
    """Closed form: strip between the longest side and the far vertex."""
    sides = [(1, 2, 0), (0, 2, 1), (0, 1, 2)]
    lens = [np.linalg.norm(pts[j] - pts[i]) for i, j, _ in sides]
    i, j, k = sides[int(np.argmax(lens))]
    a, b = pts[j] - pts[i], pts[k] - pts[i]
    gram = (a @ a) * (b @ b) - (a @ b) ** 2
    area2 = np.sqrt(max(gram, 0.0))  # twice the triangle area
    longest = max(lens)
    if longest <= 0.0:
        return 0.0, pts[0], np.eye(len(pts[0]))[0]
    h = area2 / longest
    normal = b - (a @ b) / (a @ a) * a
    nn = np.linalg.norm(normal)
    point = pts[i] + normal / nn * (h / 2.0) if nn > 0 else pts[i]
    return h / 2.0, point, a


def jones_beta(ball, space):
    """Scale-normalized minimax line fit on a euclidean ball.

    The value is exact in the plane (hull-edge strips); in higher
    dimension it is a certified upper bound except for the 2- and
    3-point closed forms.  The bound flag marks only those closed
    forms exact.
    """
    if not space.has_coords or space.norm != "euclidean":
        raise ValueError("jones needs euclidean coordinates")
    members = ball.members
    if len(members) < 2:
        return _degenerate("jones")
    pts = space.coords[members]
    if pts.shape[1] == 1:
        pts = np.column_stack([pts[:, 0], np.zeros(len(pts))])
    bound = "exact" if len(members) <= 3 else "upper"
    if len(members) == 2:
        d = pts[1] - pts[0]
        value, point, direction = 0.0, pts[0], d
    elif len(members) == 3:
        value, point, direction = _minimax_line_3pt(pts)
    elif pts.shape[1] == 2:
        value, point, direction = _minimax_line_2d(pts)
    else:
        value, point, direction = _minimax_line_nd(pts)
    direction = np.asarray(direction, dtype=float)
    dn = np.sqrt(direction @ direction)
    if dn <= 0.0:
        direction = np.zeros_like(direction)
        direction[0] = 1.0
    else:
        direction = direction / dn
    return BetaValue(
        kind="jones",
        value=float(value) / ball.radius,
        bound=bound,
        witness={"line": {"point": point.tolist(), "direction": direction.tolist()}},
    )


def rescore_line(space, ball, line):
    """Re-evaluate a jones line witness: max member distance over r."""
    pts = space.coords[ball.members]
    if pts.shape[1] == 1:
        pts = np.column_stack([pts[:, 0], np.zeros(len(pts))])
    point = np.asarray(line["point"], dtype=float)
    direction = np.asarray(line["direction"], dtype=float)
    return float(_line_distances(pts, point, direction).max()) / ball.radius


# -- hat (ordered sequences) -------------------------------------------


def _fps_order(space, members, start, cap):
    """Farthest-point order of a member set from a start index."""
    members = np.asarray(members, dtype=int)
    pos = int(np.flatnonzero(members == start)[0]) if start in members else 0
    chosen = [pos]
    mind = space.cross(members, members[[pos]])[:, 0].copy()
    while len(chosen) < min(cap, len(members)):
        far = int(np.argmax(mind))
        if mind[far] <= 0:
            break
        chosen.append(far)
        np.minimum(mind, space.cross(members, members[[far]])[:, 0], out=mind)
    return members[chosen]


def _mask_covers(cd, k):
    """cover[mask] = max_z min_{i in mask} cd[z, i], all masks up to 2^k."""
    n_masks = 1 << k
    out = np.empty(n_masks)
    out[0] = np.inf
    if n_masks * cd.shape[0] <= 20_000_000:
        minrow = np.empty((n_masks, cd.shape[0]))
        for mask in range(1, n_masks):
            low = mask & (-mask)
            i = low.bit_length() - 1
            rest = mask ^ low
            minrow[mask] = np.minimum(minrow[rest], cd[:, i]) if rest else cd[:, i]
            out[mask] = minrow[mask].max()
    else:
        for mask in range(1, n_masks):
            bits = [i for i in range(k) if mask >> i & 1]
            out[mask] = cd[:, bits].min(axis=1).max()
    return out


def _hat_dp(D, cd, max_len):
    """Exact hat search over a candidate pool by subset path DP.

    D: pool distance matrix, cd: cover distances (ball member -> pool
    column).  Returns (value, order) with order a list of pool-local
    indices; all starts handled in one vectorized table.
    """
    k = len(D)
    n_masks = 1 << k
    covers = _mask_covers(cd, k)
    dp = np.full((n_masks, k, k), np.inf)
    for a in range(k):
        dp[1 << a, a, a] = 0.0
    best = (np.inf, 0, 0, 0)
    popcount = np.array([bin(m).count("1") for m in range(n_masks)])
    for mask in range(1, n_masks):
        pc = popcount[mask]
        if pc > max_len or not np.isfinite(dp[mask]).any():
            continue
        if pc >= 2:
            plen = dp[mask]
            with np.errstate(invalid="ignore", divide="ignore"):
                val = (plen - D + covers[mask]) / D
            val = np.where((D > 0.0) & np.isfinite(plen), val, np.inf)
            amin = np.unravel_index(np.argmin(val), val.shape)
            if val[amin] < best[0]:
                best = (float(val[amin]), mask, int(amin[0]), int(amin[1]))
        if pc >= max_len:
            continue
        in_mask = [i for i in range(k) if mask >> i & 1]
        base = dp[mask][:, in_mask]
        for j in range(k):
            if mask >> j & 1:
                continue
            ext = (base + D[in_mask, j][None, :]).min(axis=1)
            nm = mask | (1 << j)
            np.minimum(dp[nm][:, j], ext, out=dp[nm][:, j])
    value, mask, a, j = best
    order = _reconstruct_path(D, dp, mask, a, j)
    return value, order


def _reconstruct_path(D, dp, mask, a, j):
    if mask == 0:
        return []
    order = [j]
    cur, m = j, mask
    while m != (1 << a) and len(order) < 64:
        m_prev = m ^ (1 << cur)
        candidates = [i for i in range(len(D)) if m_prev >> i & 1]
        target = dp[m, a, cur]
        nxt = min(
            candidates,
            key=lambda i: abs(dp[m_prev, a, i] + D[i, cur] - target),
        )
        order.append(nxt)
        cur, m = nxt, m_prev
    return order[::-1]


def _seq_stats(D, order):
    o = np.asarray(order, dtype=int)
    plen = float(D[o[:-1], o[1:]].sum()) if len(o) > 1 else 0.0
    gap = float(D[o[0], o[-1]])
    return plen, gap


def _seq_value(D, cd, order):
    plen, gap = _seq_stats(D, order)
    if gap <= 0.0:
        return np.inf
    cover = float(cd[:, order].min(axis=1).max())
    return (plen - gap + cover) / gap


def _two_point_best(D, cd):
    """Best pair sequence: value = cover({i,j}) / d(i,j), vectorized."""
    k = len(D)
    best = (np.inf, [0, 1 if k > 1 else 0])
    chunk = max(1, int(2e6 // (k * k)) or 1)
    cov = np.zeros((k, k))
    for s in range(0, cd.shape[0], max(chunk, 1)):
        block = cd[s : s + chunk]
        pairmin = np.minimum(block[:, :, None], block[:, None, :])
        np.maximum(cov, pairmin.max(axis=0), out=cov)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.where(D > 0.0, cov / D, np.inf)
    ij = np.unravel_index(np.argmin(val), val.shape)
    if val[ij] < best[0]:
        best = (float(val[ij]), [int(ij[0]), int(ij[1])])
    return best


def _two_opt(D, order, iters):
    """Interior reversals improving raw path length; O(1) delta eval."""
    order = list(order)
    k = len(order)
    for _ in range(iters):
        improved = False
        for i in range(1, k - 1):
            for j in range(i + 1, k - 1):
                a, b = order[i - 1], order[i]
                c, d = order[j], order[j + 1]
                delta = D[a, c] + D[b, d] - D[a, b] - D[c, d]
                if delta < -1e-15:
                    order[i : j + 1] = order[i : j + 1][::-1]
                    improved = True
        if not improved:
            break
    return order


def _or_opt(D, cd, order, iters):
    """Relocate single vertices anywhere in the path if value improves."""
    order = list(order)
    best = _seq_value(D, cd, order)
    for _ in range(iters):
        improved = False
        for i in range(len(order)):
            v = order[i]
            rest = order[:i] + order[i + 1 :]
            for pos in range(len(rest) + 1):
                cand = rest[:pos] + [v] + rest[pos:]
                if cand == order:
                    continue
                val = _seq_value(D, cd, cand)
                if val < best - 1e-15:
                    order, best = cand, val
                    improved = True
                    break
            if improved:
                break
        if not improved:
            break
    return order, best


def _nearest_insertion(D, a, b):
    """Open path from a to b inserting remaining points cheapest-first."""
    k = len(D)
    order = [a, b]
    remaining = [i for i in range(k) if i not in (a, b)]
    while remaining:
        rem = np.asarray(remaining)
        head = np.asarray(order[:-1])
        tail = np.asarray(order[1:])
        # interior rows: replace edge (head, tail); last row: append
        deltas = D[head][:, rem] + D[rem][:, tail].T - D[head, tail][:, None]
        deltas = np.vstack([deltas, D[order[-1], rem][None, :]])
        pos, vi = np.unravel_index(np.argmin(deltas), deltas.shape)
        order.insert(int(pos) + 1, int(rem[vi]))
        remaining.remove(int(rem[vi]))
    return order


def _eliminate(D, cd, order, value, pair_removal, max_passes=None):
    """Drop vertices (and adjacent pairs for small pools) greedily."""
    order = list(order)
    improved = True
    passes = 0
    while improved and len(order) > 2:
        passes += 1
        if max_passes is not None and passes > max_passes:
            break
        improved = False
        candidates = []
        for i in range(len(order)):
            candidates.append(order[:i] + order[i + 1 :])
        if pair_removal and len(order) > 3:
            for i in range(len(order) - 1):
                candidates.append(order[:i] + order[i + 2 :])
        for cand in candidates:
            if len(cand) < 2:
                continue
            val = _seq_value(D, cd, cand)
            if val < value - 1e-15:
                order, value = cand, val
                improved = True
                break
    return order, value


def _heuristic_orders(D, cd, iters):
    """Candidate orderings over the full pool, best-first exploration."""
    k = len(D)
    far = np.unravel_index(np.argmax(D), D.shape)
    a, b = int(far[0]), int(far[1])
    iters = min(iters, 8) if k > 200 else iters
    out = []
    by_dist = sorted(range(k), key=lambda i: (D[a, i], i))
    out.append(_two_opt(D, by_dist, iters))
    out.append(_two_opt(D, _nearest_insertion(D, a, b), iters))
    return out


def _pool_search(D, cd, cfg):
    """Best hat sequence over one candidate pool; pool-local indices."""
    k = len(D)
    if k <= _DP_CAP:
        value, order = _hat_dp(D, cd, min(cfg.max_sequence_length, k))
        return value, order
    best_value, best_order = np.inf, None
    # relocation sweeps are quadratic in pool size; gate them, and cap
    # elimination passes so large pools stay near-linear
    max_passes = None if k <= 120 else 15
    for order in _heuristic_orders(D, cd, cfg.local_search_iters):
        value = _seq_value(D, cd, order)
        if k <= 40:
            order, value = _or_opt(D, cd, order, 2)
        order, value = _eliminate(D, cd, order, value, k <= 12, max_passes)
        if value < best_value:
            best_value, best_order = value, order
    pair_value, pair = _two_point_best(D, cd)
    if pair_value < best_value:
        best_value, best_order = pair_value, pair
    return best_value, best_order


_HEURISTIC_POOL_CAP = 400


def _build_pool(space, ball, cfg, pool):
    if pool is not None:
        return np.asarray(pool, dtype=int)
    members = ball.members
    if cfg.candidate_source == "all_ball_points" and len(members) <= _HEURISTIC_POOL_CAP:
        return members
    cap = (
        _HEURISTIC_POOL_CAP
        if cfg.candidate_source == "all_ball_points"
        else 6 * max(cfg.exhaustive_threshold, _DP_CAP // 2)
    )
    return _fps_order(space, members, ball.center, cap)


def beta_hat(ball, space, cfg=None, pool=None):
    """Hat flatness number of a ball.

    Exhaustive (bound "exact") when the whole ball fits under the
    exhaustive threshold; otherwise a pool search returning a certified
    upper bound.  pool overrides the candidate set (space indices).
    """
    cfg = cfg or DEFAULT_CONFIG
    members = ball.members
    if len(members) < 2:
        return _degenerate("hat")
    exhaustive = len(members) <= cfg.exhaustive_threshold
    if exhaustive:
        chosen = members
    else:
        chosen = _build_pool(space, ball, cfg, pool)
    if len(chosen) < 2:
        raise ValueError("degenerate ball: all pairwise distances zero")
    D = space.pairwise(chosen)
    if D.max() <= 0.0:
        raise ValueError("degenerate ball: all pairwise distances zero")
    cd = space.cross(members, chosen)
    value, order = _pool_search(D, cd, cfg)
    extra_pool = None
    if not exhaustive and cfg.candidate_source == "all_ball_points" and pool is None:
        # also score the net-point pool so enlarging the source can
        # only improve the bound
        extra_pool = _fps_order(
            space, members, ball.center, 6 * max(cfg.exhaustive_threshold, _DP_CAP // 2)
        )
        D2 = space.pairwise(extra_pool)
        cd2 = space.cross(members, extra_pool)
        v2, o2 = _pool_search(D2, cd2, cfg)
        if v2 < value:
            value, order, chosen = v2, o2, extra_pool
    seq = [int(chosen[i]) for i in order]
    return BetaValue(
        kind="hat",
        value=float(value),
        bound="exact" if exhaustive else "upper",
        witness={"sequence": seq},
    )


def rescore_hat(space, ball, sequence):
    """Re-evaluate a hat witness sequence against the ball's members."""
    seq = np.asarray(sequence, dtype=int)
    D = space.pairwise(seq)
    plen = float(D[np.arange(len(seq) - 1), np.arange(1, len(seq))].sum())
    gap = float(D[0, -1])
    cover = float(space.cross(ball.members, seq).min(axis=1).max())
    return (plen - gap + cover) / gap


# -- prime and double_prime (polygonal curves) -------------------------


def _coordinate_view(space):
    """Coordinates to run curve candidates in; embeds matrix spaces."""
    if space.has_coords:
        return space, False
    cached = getattr(space, "_kuratowski_view", None)
    if cached is None:
        cached = kuratowski_embed(space)
        space._kuratowski_view = cached
    return cached, True


def _unit_in_norm(vec, norm):
    n = norm_dist(vec, norm)
    if n <= 0.0:
        vec = np.zeros_like(vec)
        vec[0] = 1.0
        return vec
    return vec / n


def _path_stats(verts, norm):
    if len(verts) < 2:
        return 0.0, 0.0
    plen = float(norm_dist(np.diff(verts, axis=0), norm).sum())
    gap = float(norm_dist(verts[-1] - verts[0], norm))
    return plen, gap


def _prime_objective(dev, gap, cover, sqrt_dev):
    if gap <= 0.0:
        return np.inf
    if sqrt_dev:
        return float(np.sqrt(max(dev, 0.0) / gap) + cover / gap)
    return float((dev - 0.0 + cover) / gap)


def _score_path(pts, verts, norm, sqrt_dev):
    plen, gap = _path_stats(verts, norm)
    if gap <= 0.0:
        return np.inf
    # points already on vertices cover for free
    from .spaces import PolygonalPath

    cover = cover_distance(pts, PolygonalPath(verts, norm), norm)
    dev = plen - gap
    return _prime_objective(dev, gap, cover, sqrt_dev)


def _smooth_path(pts, verts, norm, sqrt_dev, iters):
    """Replace interior vertices by neighbor midpoints when it helps."""
    best = _score_path(pts, verts, norm, sqrt_dev)
    verts = verts.copy()
    for _ in range(iters):
        improved = False
        for i in range(1, len(verts) - 1):
            cand = verts.copy()
            cand[i] = (verts[i - 1] + verts[i + 1]) / 2.0
            val = _score_path(pts, cand, norm, sqrt_dev)
            if val < best - 1e-15:
                verts, best = cand, val
                improved = True
        if not improved:
            break
    return verts, best


def _curve_beta(ball, space, cfg, sqrt_dev, kind):
    cfg = cfg or DEFAULT_CONFIG
    members = ball.members
    if len(members) < 2:
        return _degenerate(kind)
    view, embedded = _coordinate_view(space)
    pts = view.coords[members]
    center = view.coords[ball.center]
    r = ball.radius
    candidates = []

    # (a) center segment of length 2r: cover < r, so value < 1/2
    if view.norm == "euclidean" and len(members) >= 3 and pts.shape[1] == 2:
        _, _, direction = _minimax_line_2d(pts)
        direction = np.asarray(direction, dtype=float)
    else:
        far = pts[int(np.argmax(norm_dist(pts - center, view.norm)))]
        direction = far - center
    d_unit = _unit_in_norm(direction, view.norm)
    candidates.append(np.vstack([center - r * d_unit, center + r * d_unit]))

    # (b) hat witness sequence as a polygonal path
    hat = beta_hat(ball, space, cfg)
    if "sequence" in hat.witness and len(hat.witness["sequence"]) >= 2:
        candidates.append(view.coords[np.asarray(hat.witness["sequence"], dtype=int)])

    # full member sweep in farthest-endpoint order for larger balls
    if len(members) > cfg.exhaustive_threshold:
        pool = _fps_order(space, members, ball.center, _HEURISTIC_POOL_CAP)
        Dp = space.pairwise(pool)
        far = np.unravel_index(np.argmax(Dp), Dp.shape)
        a = int(far[0])
        by_dist = np.argsort(Dp[a], kind="stable")
        candidates.append(view.coords[pool[by_dist]])

    best_value, best_verts = np.inf, None
    for verts in candidates:
        val = _score_path(pts, verts, view.norm, sqrt_dev)
        if val < best_value:
            best_value, best_verts = val, verts
    # (c) local smoothing of the winner
    if best_verts is not None and len(best_verts) > 2:
        sm, val = _smooth_path(pts, best_verts, view.norm, sqrt_dev, cfg.local_search_iters)
        if val < best_value:
            best_value, best_verts = val, sm
    witness = {"path": np.asarray(best_verts).tolist()}
    if embedded:
        witness["embedding"] = "kuratowski"
    return BetaValue(kind=kind, value=float(best_value), bound="upper", witness=witness)


def beta_prime_upper(ball, space, cfg=None):
    """Certified upper bound for the curve flatness number."""
    return _curve_beta(ball, space, cfg, sqrt_dev=False, kind="prime")


def beta_double_prime(ball, space, cfg=None):
    """Square-root deviation variant; euclidean coordinates required."""
    if not space.has_coords or space.norm != "euclidean":
        raise ValueError("double_prime needs euclidean coordinates")
    bv = _curve_beta(ball, space, cfg, sqrt_dev=True, kind="double_prime")
    line = double_prime_line_candidate(ball, space)
    if line.value < bv.value:
        bv = replace(line, kind="double_prime")
    return bv


def double_prime_line_candidate(ball, space):
    """Chord through the center parallel to the minimax line.

    Every ball point projects inside the full-diameter chord and sits
    within (line residual + center offset) of it, both at most the
    jones width, so the score never exceeds jones beta by more than
    float error.
    """
    if not space.has_coords or space.norm != "euclidean":
        raise ValueError("line candidate needs euclidean coordinates")
    members = ball.members
    if len(members) < 2:
        return _degenerate("double_prime_line")
    pts = space.coords[members]
    if pts.shape[1] == 1:
        pts = np.column_stack([pts[:, 0], np.zeros(len(pts))])
    center = pts[int(np.flatnonzero(ball.members == ball.center)[0])]
    if len(members) == 2:
        direction = pts[1] - pts[0]
    elif pts.shape[1] == 2:
        _, _, direction = _minimax_line_2d(pts)
    else:
        _, _, direction = _minimax_line_nd(pts)
    d_unit = _unit_in_norm(np.asarray(direction, dtype=float), "euclidean")
    r = ball.radius
    verts = np.vstack([center - r * d_unit, center + r * d_unit])
    val = _score_path(pts, verts, "euclidean", sqrt_dev=True)
    return BetaValue(
        kind="double_prime_line",
        value=float(val),
        bound="upper",
        witness={"path": verts.tolist()},
    )


def rescore_curve(space, ball, path_vertices, sqrt_dev=False):
    """Re-evaluate a prime/double_prime witness path."""
    view, _ = _coordinate_view(space)
    pts = view.coords[ball.members]
    return _score_path(pts, np.asarray(path_vertices, dtype=float), view.norm, sqrt_dev)


# -- multiscale profile ------------------------------------------------


@dataclass
class BetaProfile:
    rows: list
    A: float
    M: float
    kinds: tuple


def multiscale_profile(space, hierarchy, A, kinds, cfg=None, threads=None):
    """Requested flatness kinds on B(x, A * M**-n) for every net point.

    Rows come back keyed (level, point, kind) in deterministic order.
    With candidate_source "net_points" the hat/prime pool for a level-n
    ball is the level-n net restricted to the ball.
    """
    from .parallel import pmap
    from .spaces import ball_members

    if A < 1.0:
        raise ValueError("A must be at least 1")
    cfg = cfg or DEFAULT_CONFIG
    kinds = tuple(kinds)
    euclid = space.has_coords and space.norm == "euclidean"
    for kind in kinds:
        if kind in ("jones", "double_prime") and not euclid:
            raise ValueError(f"{kind} needs euclidean coordinates")

    finest = hierarchy.level(hierarchy.n_max)
    tasks = []
    for n in hierarchy.level_range():
        r = A * hierarchy.radius(n)
        for x in hierarchy.level(n):
            tasks.append((n, int(x), r))

    def run(task):
        n, x, r = task
        ball = ball_members(space, x, r)
        net_pool = np.intersect1d(ball.members, finest)
        out = []
        for kind in kinds:
            if len(ball.members) < 2:
                bv = _degenerate(kind)
            elif kind == "jones":
                bv = jones_beta(ball, space)
            elif kind == "hat":
                pool = net_pool if cfg.candidate_source == "net_points" else None
                if pool is not None and len(pool) < 2:
                    pool = None
                bv = beta_hat(ball, space, cfg, pool=pool)
                if cfg.candidate_source == "all_ball_points" and len(net_pool) >= 2:
                    alt = beta_hat(ball, space, cfg, pool=net_pool)
                    if alt.value < bv.value:
                        bv = BetaValue(kind=alt.kind, value=alt.value, bound=bv.bound, witness=alt.witness)
            elif kind == "prime":
                bv = beta_prime_upper(ball, space, cfg)
            elif kind == "double_prime":
                bv = beta_double_prime(ball, space, cfg)
            else:
                raise ValueError(f"unknown kind {kind!r}")
            out.append(
                {
                    "level": n,
                    "point_index": x,
                    "radius": r,
                    "kind": kind,
                    "value": bv.value,
                    "bound": bv.bound,
                    "witness_json": json.dumps(bv.witness, sort_keys=True),
                }
            )
        return out

    rows = [row for group in pmap(run, tasks, threads) for row in group]
    return BetaProfile(rows=rows, A=float(A), M=hierarchy.M, kinds=kinds)


def profile_to_csv(profile, path):
    import csv

    cols = ["level", "point_index", "radius", "kind", "value", "bound", "witness_json"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in profile.rows:
            w.writerow(
                [
                    row["level"],
                    row["point_index"],
                    "%.12g" % row["radius"],
                    row["kind"],
                    "%.12g" % row["value"],
                    row["bound"],
                    row["witness_json"],
                ]
            )


# -- antenna detection -------------------------------------------------


@dataclass
class AntennaWitness:
    c: float
    tips: list
    legs: list
    r: float
    branch: int | None = None
    graph_scale: float = 0.0


_POOL_CAP = 1200
_TIP_CANDIDATES = 12
_BRANCH_CANDIDATES = 8


def connected_graph_scale(space, ball):
    """Smallest edge scale making the ball's neighborhood graph connected.

    Equals the bottleneck (largest) edge of a minimum spanning tree of
    the member set, nudged up by a relative epsilon.
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import minimum_spanning_tree

    members = ball.members
    if len(members) < 2:
        return 0.0
    if len(members) > _POOL_CAP:
        members = _fps_order(space, members, ball.center, _POOL_CAP)
    D = space.pairwise(members)
    mst = minimum_spanning_tree(csr_matrix(D))
    return float(mst.max()) * (1.0 + 1e-9)


def antenna_constant(ball, space, graph_scale):
    """Certify the largest tripod constant found in a ball.

    Searches spread tip candidates against near-center branch
    candidates; legs are shortest paths in the graph with edges at
    distance <= graph_scale.  Certified c is the minimum over tip
    permutations of dist(tip, other two legs) / r; c = 0 with empty
    legs when no vertex-disjoint tripod exists.
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components, dijkstra

    members = ball.members
    if len(members) < 4:
        return AntennaWitness(c=0.0, tips=[], legs=[], r=ball.radius, graph_scale=graph_scale)
    pool = members
    if len(pool) > _POOL_CAP:
        pool = _fps_order(space, members, ball.center, _POOL_CAP)
    D = space.pairwise(pool)
    adj = np.where(D <= graph_scale, D, 0.0)
    graph = csr_matrix(adj)
    n_comp, labels = connected_components(graph, directed=False)
    if n_comp > 1:
        sizes = np.bincount(labels)
        raise ValueError(
            f"neighborhood graph disconnected at scale {graph_scale}: "
            f"{n_comp} components with sizes {sizes.tolist()}"
        )

    order = _fps_order_local(D)
    tips = order[: min(_TIP_CANDIDATES, len(pool))]
    ecc = D.max(axis=1)
    branches = np.argsort(ecc, kind="stable")[: min(_BRANCH_CANDIDATES, len(pool))]

    dist_mat, pred = dijkstra(graph, directed=False, indices=branches, return_predecessors=True)
    best = AntennaWitness(c=0.0, tips=[], legs=[], r=ball.radius, graph_scale=graph_scale)
    from itertools import combinations

    for bi, b in enumerate(branches):
        for t1, t2, t3 in combinations(tips, 3):
            if b in (t1, t2, t3):
                continue
            legs = []
            ok = True
            for t in (t1, t2, t3):
                if not np.isfinite(dist_mat[bi, t]):
                    ok = False
                    break
                leg = _walk_predecessors(pred[bi], int(b), int(t))
                if leg is None:
                    ok = False
                    break
                legs.append(leg)
            if not ok:
                continue
            sets = [set(l) for l in legs]
            if (sets[0] & sets[1]) != {int(b)} or (sets[0] & sets[2]) != {int(b)} or (
                sets[1] & sets[2]
            ) != {int(b)}:
                continue
            c = np.inf
            trip = (int(t1), int(t2), int(t3))
            for i in range(3):
                others = sorted((sets[(i + 1) % 3] | sets[(i + 2) % 3]) - {trip[i]})
                c = min(c, float(D[trip[i], others].min()))
            c /= ball.radius
            if c > best.c:
                best = AntennaWitness(
                    c=float(c),
                    tips=[int(pool[t]) for t in trip],
                    legs=[[int(pool[v]) for v in leg] for leg in legs],
                    r=ball.radius,
                    branch=int(pool[b]),
                    graph_scale=graph_scale,
                )
    return best


def _fps_order_local(D):
    """Farthest-point order over a precomputed distance matrix."""
    k = len(D)
    chosen = [0]
    mind = D[0].copy()
    while len(chosen) < k:
        far = int(np.argmax(mind))
        if mind[far] <= 0:
            break
        chosen.append(far)
        np.minimum(mind, D[far], out=mind)
    return np.array(chosen, dtype=int)


def _walk_predecessors(pred_row, source, target):
    path = [int(target)]
    cur = int(target)
    while cur != source:
        cur = int(pred_row[cur])
        if cur < 0 or len(path) > len(pred_row):
            return None
        path.append(cur)
    return path[::-1]


def certify_tripod(space, witness):
    """Recompute a tripod witness's constant from raw distances.

    Checks the legs really are paths at the witness's graph scale
    meeting only at the branch, then returns the re-derived c.
    """
    if not witness.legs:
        return 0.0
    b = witness.branch
    sets = [set(leg) for leg in witness.legs]
    for leg, tip in zip(witness.legs, witness.tips):
        if leg[0] != b or leg[-1] != tip:
            raise ValueError("leg endpoints disagree with branch/tip")
        for u, v in zip(leg[:-1], leg[1:]):
            if space.dist(u, v) > witness.graph_scale * (1.0 + 1e-9):
                raise ValueError("leg edge exceeds the graph scale")
    for i in range(3):
        for j in range(i + 1, 3):
            if sets[i] & sets[j] != {b}:
                raise ValueError("legs overlap beyond the branch point")
    c = np.inf
    for i in range(3):
        tip = witness.tips[i]
        others = sorted((sets[(i + 1) % 3] | sets[(i + 2) % 3]) - {tip})
        d = space.cross([tip], others)[0]
        c = min(c, float(d.min()))
    return c / witness.r
