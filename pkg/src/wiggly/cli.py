"""Command-line orchestration: generate, analyze, certify, report.

Subcommands wrap the library operations one-to-one and own the file
formats.  Settings resolve as flags > --config JSON > defaults; every
output carries a provenance block (resolved config, its sha256, and
package versions) so identical configurations reproduce identical
bytes.  Thread count is deliberately excluded from provenance: worker
parallelism must not change output bytes.

Exit codes: 0 success, 1 validation failure (machine-readable error
JSON on stderr), 2 usage error.
"""

import argparse
import csv
import hashlib
import json
import os
import sys

import numpy as np
import scipy

from . import __version__
from .betas import SearchConfig, multiscale_profile, profile_to_csv
from .generators import generate_antenna, generate_named, snowflake
from .measures import box_dimension, mark_bad_cubes, martingale_weights
from .nets import build_cores, build_net_hierarchy, cube_tree_to_doc, hierarchy_to_doc, verify_core_properties
from .spaces import ball_members, load_space, space_to_doc
from .svg import render_report, write_svg
from .trees import beta_sum, beta_sum_to_csv, build_tree, tree_to_doc

FRACTALS = ("antenna", "segment", "tripod", "l1-geodesic", "koch", "zigzag")
KINDS = ("jones", "hat", "prime", "double_prime")
PROFILE_COLS = ("level", "point_index", "radius", "kind", "value", "bound", "witness_json")
SUM_COLS = ("level", "count", "partial_sum")

# settings that must never influence output bytes or the config hash
_PRIVATE = ("config", "threads")
_ALIASES = {"in_path": "in"}


class _UsageError(Exception):
    pass


# -- config resolution -------------------------------------------------


def _resolve(args, defaults):
    """One settings dict: flag value, else config-file value, else default."""
    loaded = {}
    path = getattr(args, "config", None)
    if path:
        with open(path) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValueError(f"config file {path!r} must hold a JSON object")
        loaded = {str(k).replace("-", "_"): v for k, v in doc.items()}
    out = {"config": path}
    for name, default in defaults.items():
        val = getattr(args, name, None)
        if val is None:
            alias = _ALIASES.get(name)
            if name in loaded:
                val = loaded[name]
            elif alias is not None and alias in loaded:
                val = loaded[alias]
        out[name] = default if val is None else val
    if "threads" in defaults and out.get("threads") is None:
        env = os.environ.get("WIGGLY_THREADS")
        if env:
            out["threads"] = int(env)
    return out


def _require(cfg, *names):
    for name in names:
        if cfg.get(name) is None:
            flag = _ALIASES.get(name, name).replace("_", "-")
            raise ValueError(f"missing required setting '--{flag}' (flag or config file)")


def _provenance(command, cfg):
    public = {
        _ALIASES.get(k, k): v for k, v in cfg.items() if k not in _PRIVATE and v is not None
    }
    blob = json.dumps(public, sort_keys=True, separators=(",", ":"))
    return {
        "command": command,
        "config": public,
        "config_sha256": hashlib.sha256(blob.encode("utf-8")).hexdigest(),
        "versions": {
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "wiggly": __version__,
        },
    }


# -- output helpers ----------------------------------------------------


def _write_json(doc, path):
    text = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _append_comment(path, tag, doc):
    # trailing comment lines carry provenance without breaking the
    # declared CSV schema; readers here skip lines starting with '#'
    with open(path, "a") as fh:
        fh.write("# %s %s\n" % (tag, json.dumps(doc, sort_keys=True, separators=(",", ":"))))


def _read_csv_rows(path, required):
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path} has no header row")
    header = next(csv.reader([lines[0]]))
    for col in required:
        if col not in header:
            raise ValueError(f"{path} missing column '{col}'")
    return [dict(zip(header, rec)) for rec in csv.reader(lines[1:])]


def _load_input(cfg):
    _require(cfg, "in_path")
    return load_space(cfg["in_path"])


def _hierarchy(space, cfg):
    return build_net_hierarchy(
        space, float(cfg["M"]), int(cfg["n_min"]), int(cfg["n_max"]), int(cfg["seed"])
    )


# -- subcommands -------------------------------------------------------


def _cmd_gen(args):
    cfg = _resolve(
        args,
        {
            "fractal": None,
            "alpha": 0.25,
            "depth": 5,
            "resolution": 64,
            "gamma": None,
            "out": None,
        },
    )
    _require(cfg, "fractal", "out")
    fractal = str(cfg["fractal"])
    if fractal not in FRACTALS:
        raise ValueError(f"fractal must be one of {FRACTALS}, got {fractal!r}")
    if fractal == "antenna":
        made = generate_antenna(float(cfg["alpha"]), int(cfg["depth"]))
    else:
        params = {"depth": int(cfg["depth"])} if fractal == "koch" else None
        made = generate_named(fractal.replace("-", "_"), params, int(cfg["resolution"]))
    space = made.space
    generator = made.provenance
    if cfg["gamma"] is not None:
        space = snowflake(space, float(cfg["gamma"]))
        generator["parameters"]["gamma"] = float(cfg["gamma"])
    doc = space_to_doc(space)
    doc["provenance"] = _provenance("gen", cfg)
    doc["provenance"]["generator"] = generator
    _write_json(doc, cfg["out"])
    return 0


def _cmd_nets(args):
    cfg = _resolve(
        args, {"in_path": None, "M": 2.0, "n_min": 0, "n_max": 5, "seed": 0, "out": None}
    )
    _require(cfg, "out")
    space = _load_input(cfg)
    doc = hierarchy_to_doc(_hierarchy(space, cfg))
    doc["provenance"] = _provenance("nets", cfg)
    _write_json(doc, cfg["out"])
    return 0


def _cmd_cubes(args):
    cfg = _resolve(
        args,
        {
            "in_path": None,
            "M": 2.0,
            "n_min": 0,
            "n_max": 5,
            "c": 0.1,
            "seed": 0,
            "verify": False,
            "out": None,
        },
    )
    _require(cfg, "out")
    space = _load_input(cfg)
    tree = build_cores(_hierarchy(space, cfg), float(cfg["c"]))
    doc = cube_tree_to_doc(tree)
    if cfg["verify"]:
        report = verify_core_properties(tree, space)
        if report["violations"]:
            first = report["violations"][0]
            raise ValueError(
                "core verification found %d violations; first: %s"
                % (len(report["violations"]), json.dumps(first, sort_keys=True, default=str))
            )
        doc["verification"] = report
    doc["provenance"] = _provenance("cubes", cfg)
    _write_json(doc, cfg["out"])
    return 0


def _parse_kinds(raw):
    kinds = tuple(s.strip() for s in raw.split(",")) if isinstance(raw, str) else tuple(raw)
    for kind in kinds:
        if kind not in KINDS:
            raise ValueError(f"unknown kind {kind!r}; expected a subset of {KINDS}")
    if not kinds:
        raise ValueError("kinds must name at least one flatness kind")
    return kinds


def _cmd_beta(args):
    cfg = _resolve(
        args,
        {
            "in_path": None,
            "kinds": "hat,prime",
            "A": 1.5,
            "M": 2.0,
            "n_min": 0,
            "n_max": 5,
            "seed": 0,
            "candidate_source": "all_ball_points",
            "threads": None,
            "out": None,
        },
    )
    _require(cfg, "out")
    space = _load_input(cfg)
    kinds = _parse_kinds(cfg["kinds"])
    search = SearchConfig(candidate_source=str(cfg["candidate_source"]), seed=int(cfg["seed"]))
    profile = multiscale_profile(
        space, _hierarchy(space, cfg), float(cfg["A"]), kinds, search, threads=cfg["threads"]
    )
    profile_to_csv(profile, cfg["out"])
    _append_comment(cfg["out"], "provenance", _provenance("beta", cfg))
    return 0


def _cmd_tree(args):
    cfg = _resolve(
        args,
        {"in_path": None, "M": 2.0, "n_min": 0, "n_max": 5, "n0": None, "seed": 0, "out": None},
    )
    _require(cfg, "out")
    space = _load_input(cfg)
    hierarchy = _hierarchy(space, cfg)
    n0 = int(cfg["n0"]) if cfg["n0"] is not None else hierarchy.n_max
    cfg["n0"] = n0
    tree = build_tree(space, hierarchy, n0)
    doc = tree_to_doc(tree)
    doc["total_length"] = float(tree.total_length)
    doc["edge_bound"] = float(tree.edge_bound)
    doc["provenance"] = _provenance("tree", cfg)
    _write_json(doc, cfg["out"])
    return 0


def _cmd_tst(args):
    cfg = _resolve(
        args,
        {
            "in_path": None,
            "A": 1.5,
            "kind": "jones",
            "n_min": 0,
            "n_max": 5,
            "seed": 0,
            "threads": None,
            "out": None,
        },
    )
    _require(cfg, "out")
    space = _load_input(cfg)
    # the square-sum contract pins the scale base at 2
    hierarchy = build_net_hierarchy(space, 2.0, int(cfg["n_min"]), int(cfg["n_max"]), int(cfg["seed"]))
    report = beta_sum(space, hierarchy, float(cfg["A"]), str(cfg["kind"]), threads=cfg["threads"])
    beta_sum_to_csv(report, cfg["out"])
    _append_comment(
        cfg["out"],
        "report",
        {"total": report.total, "diam": report.diam, "kind": report.kind, "A": report.A, "M": report.M},
    )
    _append_comment(cfg["out"], "provenance", _provenance("tst", cfg))
    return 0


def _cmd_dim(args):
    cfg = _resolve(args, {"in_path": None, "method": "boxcount", "scales": None, "out": None})
    space = _load_input(cfg)
    if cfg["method"] != "boxcount":
        raise ValueError(f"unknown method {cfg['method']!r}; expected 'boxcount'")
    scales = cfg["scales"]
    if isinstance(scales, str):
        scales = [float(s) for s in scales.split(",")]
    doc = box_dimension(space, scales)
    doc["provenance"] = _provenance("dim", cfg)
    _write_json(doc, cfg["out"])
    return 0


def _cmd_antenna(args):
    from .betas import antenna_constant, connected_graph_scale

    cfg = _resolve(
        args,
        {
            "in_path": None,
            "samples": 20,
            "seed": 0,
            "r_min": 0.125,
            "r_max": 0.5,
            "c_floor": 0.1,
            "out": None,
        },
    )
    space = _load_input(cfg)
    samples = int(cfg["samples"])
    if samples < 1:
        raise ValueError("samples must be positive")
    r_min, r_max = float(cfg["r_min"]), float(cfg["r_max"])
    if not 0.0 < r_min <= r_max <= 0.5:
        raise ValueError("radius fractions must satisfy 0 < r-min <= r-max <= 1/2")
    diam = space.diameter()
    rng = np.random.default_rng(int(cfg["seed"]))
    rows = []
    for i in range(samples):
        center = int(rng.integers(0, space.n))
        radius = float(rng.uniform(r_min, r_max)) * diam
        ball = ball_members(space, center, radius)
        witness = antenna_constant(ball, space, connected_graph_scale(space, ball))
        rows.append(
            {
                "index": i,
                "center": center,
                "radius": radius,
                "c": float(witness.c),
                "graph_scale": float(witness.graph_scale),
                "branch": witness.branch,
                "tips": [int(t) for t in witness.tips],
            }
        )
    cs = [row["c"] for row in rows]
    floor = float(cfg["c_floor"])
    doc = {
        "balls": rows,
        "count": samples,
        "min_c": min(cs),
        "mean_c": sum(cs) / len(cs),
        "c_floor": floor,
        "count_ge_floor": sum(1 for v in cs if v >= floor),
        "provenance": _provenance("antenna", cfg),
    }
    _write_json(doc, cfg["out"])
    return 0


def _cmd_martingale(args):
    cfg = _resolve(
        args,
        {
            "in_path": None,
            "M": 2.0,
            "n_min": 0,
            "n_max": 5,
            "c": 0.1,
            "n0": None,
            "K": 0.1,
            "beta": 0.5,
            "seed": 0,
            "threads": None,
            "out": None,
        },
    )
    space = _load_input(cfg)
    hierarchy = _hierarchy(space, cfg)
    n0 = int(cfg["n0"]) if cfg["n0"] is not None else hierarchy.n_max
    cfg["n0"] = n0
    cube_tree = build_cores(hierarchy, float(cfg["c"]))
    tree = build_tree(space, hierarchy, n0)
    marks = mark_bad_cubes(cube_tree, tree, float(cfg["K"]), float(cfg["beta"]), cfg["threads"])
    weights = martingale_weights(cube_tree, marks, float(cfg["beta"]), float(cfg["K"]))
    doc = {
        "K": float(cfg["K"]),
        "beta": float(cfg["beta"]),
        "bad_ids": sorted(int(b) for b in marks["bad_ids"]),
        "bad_count": len(marks["bad_ids"]),
        "tree_length": marks["tree_length"],
        "regions": len(weights["regions"]),
        "bounds_ok": weights["bounds_ok"],
        "mass_in": weights["mass_in"],
        "mass_out": weights["mass_out"],
        "packing": weights["packing"],
        "degenerate": [int(d) for d in weights["degenerate"]],
        "provenance": _provenance("martingale", cfg),
    }
    _write_json(doc, cfg["out"])
    return 0


def _cmd_report(args):
    cfg = _resolve(args, {"profile": None, "sums": None, "dim": None, "out": None})
    _require(cfg, "out")
    if cfg["profile"] is None and cfg["sums"] is None and cfg["dim"] is None:
        raise _UsageError("report needs at least one of --profile, --sums, --dim")
    profile_rows = sum_rows = dim_doc = None
    if cfg["profile"] is not None:
        profile_rows = _read_csv_rows(cfg["profile"], PROFILE_COLS)
    if cfg["sums"] is not None:
        sum_rows = _read_csv_rows(cfg["sums"], SUM_COLS)
    if cfg["dim"] is not None:
        with open(cfg["dim"]) as fh:
            dim_doc = json.load(fh)
        for field in ("estimate", "scales"):
            if field not in dim_doc:
                raise ValueError(f"{cfg['dim']} missing column '{field}'")
    prov = _provenance("report", cfg)
    comment = "provenance " + json.dumps(prov, sort_keys=True, separators=(",", ":"))
    write_svg(render_report(profile_rows, sum_rows, dim_doc, comment=comment), cfg["out"])
    return 0


# -- parser ------------------------------------------------------------


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file mirroring flag names")
    common.add_argument("--threads", type=int, help="worker cap; default WIGGLY_THREADS")
    common.add_argument("--out", help="output file path")

    def io_flags(p, M=True):
        p.add_argument("--in", dest="in_path", help="point-set JSON input")
        if M:
            p.add_argument("--M", type=float)
        p.add_argument("--n-min", dest="n_min", type=int)
        p.add_argument("--n-max", dest="n_max", type=int)
        p.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(
        prog="wiggly", description="flatness analysis of finite metric spaces"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate a calibration space")
    p.add_argument("--fractal", choices=FRACTALS)
    p.add_argument("--alpha", type=float)
    p.add_argument("--depth", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--gamma", type=float, help="optional snowflake exponent")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("nets", parents=[common], help="farthest-point net hierarchy")
    io_flags(p)
    p.set_defaults(func=_cmd_nets)

    p = sub.add_parser("cubes", parents=[common], help="chain-closure cube tree")
    io_flags(p)
    p.add_argument("--c", type=float)
    p.add_argument("--verify", action="store_const", const=True)
    p.set_defaults(func=_cmd_cubes)

    p = sub.add_parser("beta", parents=[common], help="multiscale flatness profile")
    io_flags(p)
    p.add_argument("--kinds", help="comma list from %s" % (KINDS,))
    p.add_argument("--A", type=float)
    p.add_argument(
        "--candidate-source",
        dest="candidate_source",
        choices=("net_points", "all_ball_points"),
    )
    p.set_defaults(func=_cmd_beta)

    p = sub.add_parser("tree", parents=[common], help="spanning tree of a net level")
    io_flags(p)
    p.add_argument("--n0", type=int)
    p.set_defaults(func=_cmd_tree)

    p = sub.add_parser("tst", parents=[common], help="square-sum report over levels")
    io_flags(p, M=False)
    p.add_argument("--A", type=float)
    p.add_argument("--kind", choices=KINDS)
    p.set_defaults(func=_cmd_tst)

    p = sub.add_parser("dim", parents=[common], help="box-counting dimension estimate")
    p.add_argument("--in", dest="in_path")
    p.add_argument("--method", choices=("boxcount",))
    p.add_argument("--scales", help="comma list of scales, coarse to fine")
    p.set_defaults(func=_cmd_dim)

    p = sub.add_parser("antenna", parents=[common], help="certify tripod constants on random balls")
    p.add_argument("--in", dest="in_path")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--r-min", dest="r_min", type=float, help="radius floor, fraction of diam")
    p.add_argument("--r-max", dest="r_max", type=float, help="radius cap, fraction of diam")
    p.add_argument("--c-floor", dest="c_floor", type=float)
    p.set_defaults(func=_cmd_antenna)

    p = sub.add_parser("martingale", parents=[common], help="bad-cube marks and mass splits")
    io_flags(p)
    p.add_argument("--c", type=float)
    p.add_argument("--n0", type=int)
    p.add_argument("--K", type=float)
    p.add_argument("--beta", type=float)
    p.set_defaults(func=_cmd_martingale)

    p = sub.add_parser("report", parents=[common], help="render SVG panels from outputs")
    p.add_argument("--profile", help="flatness profile CSV")
    p.add_argument("--sums", help="square-sum report CSV")
    p.add_argument("--dim", help="dimension report JSON")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return int(args.func(args) or 0)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        payload = {
            "command": getattr(args, "command", None),
            "error": type(exc).__name__,
            "detail": str(exc) or type(exc).__name__,
        }
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
