"""Self-contained SVG report panels.

A tiny fixed-precision writer instead of a plotting dependency: every
pixel coordinate prints with two decimals and every label with %.4g,
so identical inputs produce identical bytes.  Three panel kinds cover
the reporting surface: flatness-versus-scale scatter, per-level sum
bars, and the log-log net-count fit with its slope annotation.
"""

import math

PANEL_W = 380.0
PANEL_H = 280.0

_ML = 58.0
_MR = 16.0
_MT = 30.0
_MB = 46.0
_GAP = 14.0

_KIND_COLORS = {
    "jones": "#31688e",
    "hat": "#b5431f",
    "prime": "#35845a",
    "double_prime": "#7b4f9e",
}
_FALLBACK_COLOR = "#666666"
_TICKS = 5


def _n(x):
    s = "%.2f" % float(x)
    return "0.00" if s == "-0.00" else s


def _lab(x):
    s = "%.4g" % float(x)
    return "0" if s == "-0" else s


def _esc(text):
    return str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _expand(lo, hi, frac=0.06):
    lo, hi = float(lo), float(hi)
    if not hi > lo:
        return lo - 0.5, lo + 0.5
    pad = (hi - lo) * frac
    return lo - pad, hi + pad


class _Frame:
    """Data-to-pixel map for one panel's plot box at offset (ox, oy)."""

    def __init__(self, ox, oy, xlim, ylim):
        self.ox = float(ox)
        self.oy = float(oy)
        self.xmin, self.xmax = _expand(*xlim)
        self.ymin, self.ymax = _expand(*ylim)
        self.x0 = self.ox + _ML
        self.y0 = self.oy + _MT
        self.w = PANEL_W - _ML - _MR
        self.h = PANEL_H - _MT - _MB

    def px(self, x):
        return self.x0 + (float(x) - self.xmin) / (self.xmax - self.xmin) * self.w

    def py(self, y):
        return self.y0 + self.h - (float(y) - self.ymin) / (self.ymax - self.ymin) * self.h


def _axes(frame, title, xlabel, ylabel):
    f = frame
    parts = [
        '<rect x="%s" y="%s" width="%s" height="%s" fill="none" stroke="#222222" stroke-width="1"/>'
        % (_n(f.x0), _n(f.y0), _n(f.w), _n(f.h))
    ]
    base = f.y0 + f.h
    for i in range(_TICKS):
        t = i / (_TICKS - 1.0)
        xv = f.xmin + t * (f.xmax - f.xmin)
        yv = f.ymin + t * (f.ymax - f.ymin)
        xp, yp = f.px(xv), f.py(yv)
        parts.append(
            '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#222222" stroke-width="1"/>'
            % (_n(xp), _n(base), _n(xp), _n(base + 4.0))
        )
        parts.append(
            '<text x="%s" y="%s" text-anchor="middle" font-size="9">%s</text>'
            % (_n(xp), _n(base + 15.0), _esc(_lab(xv)))
        )
        parts.append(
            '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#222222" stroke-width="1"/>'
            % (_n(f.x0 - 4.0), _n(yp), _n(f.x0), _n(yp))
        )
        parts.append(
            '<text x="%s" y="%s" text-anchor="end" font-size="9">%s</text>'
            % (_n(f.x0 - 6.0), _n(yp + 3.0), _esc(_lab(yv)))
        )
    parts.append(
        '<text x="%s" y="%s" text-anchor="middle" font-size="12">%s</text>'
        % (_n(f.ox + PANEL_W / 2.0), _n(f.oy + 18.0), _esc(title))
    )
    parts.append(
        '<text x="%s" y="%s" text-anchor="middle" font-size="10">%s</text>'
        % (_n(f.x0 + f.w / 2.0), _n(f.oy + PANEL_H - 8.0), _esc(xlabel))
    )
    parts.append(
        '<text x="%s" y="%s" text-anchor="middle" font-size="10" transform="rotate(-90 %s %s)">%s</text>'
        % (
            _n(f.ox + 14.0),
            _n(f.y0 + f.h / 2.0),
            _n(f.ox + 14.0),
            _n(f.y0 + f.h / 2.0),
            _esc(ylabel),
        )
    )
    return parts


def _no_data(frame, parts):
    parts.append(
        '<text x="%s" y="%s" text-anchor="middle" font-size="12" fill="#888888">no data</text>'
        % (_n(frame.x0 + frame.w / 2.0), _n(frame.y0 + frame.h / 2.0))
    )
    return parts


def beta_scatter_panel(rows, ox=0.0, oy=0.0):
    """Flatness value against log10 radius, one dot per profile row."""
    pts = []
    for row in rows:
        r = float(row["radius"])
        if r > 0.0:
            pts.append((math.log10(r), float(row["value"]), str(row.get("kind", ""))))
    if not pts:
        frame = _Frame(ox, oy, (0.0, 1.0), (0.0, 1.0))
        return _no_data(frame, _axes(frame, "flatness vs scale", "log10 r", "value"))
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    # an all-zero profile keeps its dots on the y = 0 gridline
    top = max(ys)
    frame = _Frame(ox, oy, (min(xs), max(xs)), (min(0.0, min(ys)), top if top > 0.0 else 1.0))
    parts = _axes(frame, "flatness vs scale", "log10 r", "value")
    for x, y, kind in pts:
        parts.append(
            '<circle cx="%s" cy="%s" r="2.40" fill="%s" fill-opacity="0.75"/>'
            % (_n(frame.px(x)), _n(frame.py(y)), _KIND_COLORS.get(kind, _FALLBACK_COLOR))
        )
    for i, kind in enumerate(sorted({p[2] for p in pts})):
        lx = frame.x0 + frame.w - 86.0
        ly = frame.y0 + 10.0 + 13.0 * i
        parts.append(
            '<rect x="%s" y="%s" width="8.00" height="8.00" fill="%s"/>'
            % (_n(lx), _n(ly - 7.0), _KIND_COLORS.get(kind, _FALLBACK_COLOR))
        )
        parts.append(
            '<text x="%s" y="%s" font-size="9">%s</text>' % (_n(lx + 12.0), _n(ly), _esc(kind))
        )
    return parts


def level_bars_panel(rows, ox=0.0, oy=0.0):
    """Per-level partial sums as bars on an integer level axis."""
    rows = sorted(rows, key=lambda r: int(r["level"]))
    if not rows:
        frame = _Frame(ox, oy, (0.0, 1.0), (0.0, 1.0))
        return _no_data(frame, _axes(frame, "per-level sums", "level", "partial sum"))
    levels = [int(r["level"]) for r in rows]
    sums = [float(r["partial_sum"]) for r in rows]
    top = max(sums)
    frame = _Frame(
        ox, oy, (min(levels) - 0.6, max(levels) + 0.6), (0.0, top if top > 0.0 else 1.0)
    )
    parts = _axes(frame, "per-level sums", "level", "partial sum")
    floor = frame.py(0.0)
    for lv, s in zip(levels, sums):
        x1 = frame.px(lv - 0.35)
        x2 = frame.px(lv + 0.35)
        y1 = frame.py(s)
        parts.append(
            '<rect x="%s" y="%s" width="%s" height="%s" fill="#31688e" fill-opacity="0.85"/>'
            % (_n(x1), _n(y1), _n(x2 - x1), _n(max(floor - y1, 0.0)))
        )
    return parts


def dim_fit_panel(doc, ox=0.0, oy=0.0):
    """Log-log net counts with the fitted line and slope annotation."""
    pts = [
        (math.log10(1.0 / row["eps"]), math.log10(row["count"]))
        for row in doc.get("scales", [])
        if float(row["eps"]) > 0.0 and int(row["count"]) > 0
    ]
    if not pts:
        frame = _Frame(ox, oy, (0.0, 1.0), (0.0, 1.0))
        return _no_data(frame, _axes(frame, "net-count fit", "log10 1/eps", "log10 N"))
    slope = float(doc["estimate"])
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    # slope is base-invariant; re-anchor the intercept in log10 units
    b = sum(ys) / len(ys) - slope * (sum(xs) / len(xs))
    frame = _Frame(ox, oy, (min(xs), max(xs)), (min(ys), max(ys)))
    parts = _axes(frame, "net-count fit", "log10 1/eps", "log10 N")
    parts.append(
        '<line x1="%s" y1="%s" x2="%s" y2="%s" stroke="#b5431f" stroke-width="1.5"/>'
        % (
            _n(frame.px(min(xs))),
            _n(frame.py(slope * min(xs) + b)),
            _n(frame.px(max(xs))),
            _n(frame.py(slope * max(xs) + b)),
        )
    )
    for x, y in pts:
        parts.append(
            '<circle cx="%s" cy="%s" r="2.80" fill="#31688e"/>' % (_n(frame.px(x)), _n(frame.py(y)))
        )
    parts.append(
        '<text x="%s" y="%s" font-size="11" fill="#b5431f">slope %s</text>'
        % (_n(frame.x0 + 8.0), _n(frame.y0 + 16.0), _esc("%.3f" % slope))
    )
    return parts


def render_report(profile_rows=None, sum_rows=None, dim_doc=None, comment=None):
    """Compose the provided panels into one SVG document string.

    Panels appear left to right in the argument order above; with no
    inputs at all, a single empty scatter panel is emitted so the
    document is still valid SVG.
    """
    builders = []
    if profile_rows is not None:
        builders.append(lambda ox: beta_scatter_panel(profile_rows, ox, _GAP))
    if sum_rows is not None:
        builders.append(lambda ox: level_bars_panel(sum_rows, ox, _GAP))
    if dim_doc is not None:
        builders.append(lambda ox: dim_fit_panel(dim_doc, ox, _GAP))
    if not builders:
        builders.append(lambda ox: beta_scatter_panel([], ox, _GAP))

    width = _GAP + len(builders) * (PANEL_W + _GAP)
    height = PANEL_H + 2.0 * _GAP
    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%s" height="%s" viewBox="0 0 %s %s">'
        % (_n(width), _n(height), _n(width), _n(height))
    ]
    if comment:
        parts.append("<!-- %s -->" % str(comment).replace("--", "- -"))
    parts.append('<rect x="0" y="0" width="%s" height="%s" fill="#ffffff"/>' % (_n(width), _n(height)))
    parts.append('<g font-family="Menlo, Consolas, monospace" fill="#222222">')
    for i, build in enumerate(builders):
        parts.extend(build(_GAP + i * (PANEL_W + _GAP)))
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(text, path):
    with open(path, "w") as fh:
        fh.write(text)
