"""Command-line frontend for the patch-fitting pipeline.

Subcommands: ``fit`` a patchwork to a mesh over a curve network, ``refine``
until a deviation tolerance holds, ``tessellate`` a saved patchwork into
OBJ meshes, ``deviate`` a patchwork against a mesh into a colored PLY plus
stats, ``offset`` a patchwork by a distance, and ``synth`` to generate the
built-in demo fixtures.  Every intentional failure exits with code 2 and a
machine-readable JSON error report on stderr; stats files are deterministic
for identical inputs and configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import IPatchError, SchemaError, UnsupportedOffset
from .fitting import FitConfig, surface_kind
from .implicit import offset_patch
from .mesh import TriMesh, load_mesh
from .meshio import export_colored, export_mesh, write_obj
from .network import BOUNDING_MODES, load_network
from .patchwork import load_patchwork, save_patchwork
from .primitives import cube_network, ellipsoid, ellipsoid_band_network, icosphere
from .refine import fit_patchwork, measure_patch, refine_until
from .report import render_report
from .tessellate import (
    deviation_map,
    marching_cubes,
    merge_meshes,
    patch_grid,
    tessellate_patch,
)

__all__ = ["main"]

# flag defaults, also accepted via --config JSON (flags win over the file)
DEFAULTS = {
    "tolerance": 0.3,
    "omega": 5.0,
    "resolution": 64,
    "max_iter": 5,
    "optimize": True,
    "bounding": "planar",
}


def _fail(category: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": category, "message": message}) + "\n")
    return 2


def _prepare_out(path) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(doc: dict, path) -> None:
    _prepare_out(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _stats_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".stats.json")


def _load_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read config file {path}: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise SchemaError(f"{path}: config must be a JSON object")
    unknown = set(cfg) - set(DEFAULTS) - {"mesh", "network", "out", "report_dir"}
    if unknown:
        raise SchemaError(f"{path}: unknown config keys {sorted(unknown)}")
    return cfg


def _settings(args) -> dict:
    """Effective run settings: defaults, then config file, then flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(_load_config_file(args.config))
    for key in ("mesh", "network", "out", "report_dir", "tolerance", "omega",
                "resolution", "max_iter", "bounding"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if getattr(args, "no_optimize", False):
        cfg["optimize"] = False
    if cfg["bounding"] not in BOUNDING_MODES:
        raise SchemaError(
            f"unknown bounding mode {cfg['bounding']!r}; use one of {BOUNDING_MODES}"
        )
    if not float(cfg["tolerance"]) > 0.0:
        raise SchemaError("tolerance must be positive")
    if float(cfg["omega"]) < 1.0:
        raise SchemaError("omega must be >= 1")
    for key in ("mesh", "network", "out"):
        if cfg.get(key) in (None, ""):
            raise SchemaError(f"missing required setting: --{key}")
    return cfg


def _fit_config(cfg: dict) -> FitConfig:
    return FitConfig(omega=float(cfg["omega"]), optimize=bool(cfg["optimize"]))


def _global_stats(measures: dict) -> dict:
    counts = np.array([m.samples for m in measures.values()], dtype=np.float64)
    avgs = np.array([m.avg_pct for m in measures.values()])
    return {
        "avg_pct": float((avgs * counts).sum() / counts.sum()),
        "max_pct": float(max(m.max_pct for m in measures.values())),
    }


def _patch_stats(pw) -> list:
    return [
        {
            "id": fp.face_id,
            "sides": len(fp.patch.sides),
            "rms": fp.rms,
            "max": fp.max_dev,
            "ribbon_kinds": [surface_kind(rib) for rib, _ in fp.patch.sides],
        }
        for fp in pw
    ]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    cfg = _settings(args)
    mesh = load_mesh(cfg["mesh"])
    net = load_network(cfg["network"], mesh, cfg["bounding"])
    pw = fit_patchwork(net, _fit_config(cfg))
    save_patchwork(pw, _prepare_out(cfg["out"]))
    measures = {
        fp.face_id: measure_patch(net, fp, int(cfg["resolution"])) for fp in pw
    }
    stats = {"patches": _patch_stats(pw), "global": _global_stats(measures)}
    _write_json(stats, _stats_path(cfg["out"]))
    print(f"fit: {len(pw)} patches -> {cfg['out']}")
    print(
        "deviation: avg {avg_pct:.4f}%  max {max_pct:.4f}% of bbox diagonal".format(
            **stats["global"]
        )
    )
    if cfg.get("report_dir"):
        for p in render_report(cfg["report_dir"], patchwork=pw, measures=measures):
            print(f"report: {p}")
    return 0


def cmd_refine(args) -> int:
    cfg = _settings(args)
    mesh = load_mesh(cfg["mesh"])
    net = load_network(cfg["network"], mesh, cfg["bounding"])
    result = refine_until(
        net,
        tol_pct=float(cfg["tolerance"]),
        config=_fit_config(cfg),
        max_iter=int(cfg["max_iter"]),
        resolution=int(cfg["resolution"]),
    )
    save_patchwork(result.patchwork, _prepare_out(cfg["out"]))
    stats = {
        "patches": _patch_stats(result.patchwork),
        "global": _global_stats(result.measures),
        "report": list(result.report),
        "converged": result.converged,
    }
    _write_json(stats, _stats_path(cfg["out"]))
    print("iteration  patches  avg%      max%")
    for row in result.report:
        print(
            f"{row['iteration']:>9}  {row['patch_count']:>7}  "
            f"{row['avg_pct']:<8.4f}  {row['max_pct']:<8.4f}"
        )
    print(f"converged: {result.converged} -> {cfg['out']}")
    if cfg.get("report_dir"):
        for p in render_report(
            cfg["report_dir"],
            rows=result.report,
            patchwork=result.patchwork,
            measures=result.measures,
        ):
            print(f"report: {p}")
    return 0


def _per_patch_path(out, face_id: int) -> Path:
    out = Path(out)
    return out.with_name(f"{out.stem}_face{face_id}{out.suffix or '.obj'}")


def cmd_tessellate(args) -> int:
    pw = load_patchwork(args.patchwork)
    resolution = args.resolution if args.resolution is not None else DEFAULTS["resolution"]
    _prepare_out(args.out)
    parts = []
    for fp in pw:
        if args.no_clip:
            verts, faces = marching_cubes(
                fp.patch, patch_grid(fp.patch, resolution), clip=False
            )
            tess = TriMesh(verts, faces)
        else:
            tess = tessellate_patch(fp.patch, resolution=resolution)
        parts.append(tess)
        path = _per_patch_path(args.out, fp.face_id)
        export_mesh(tess, path)
        print(f"face {fp.face_id}: {len(tess.faces)} triangles -> {path}")
    merged = merge_meshes(parts)
    write_obj(args.out, merged.vertices, merged.faces)
    print(f"merged: {len(merged.faces)} triangles -> {args.out}")
    return 0


def cmd_deviate(args) -> int:
    pw = load_patchwork(args.patchwork)
    mesh = load_mesh(args.mesh)
    resolution = args.resolution if args.resolution is not None else DEFAULTS["resolution"]
    merged = merge_meshes(
        tessellate_patch(fp.patch, resolution=resolution) for fp in pw
    )
    dev = deviation_map(merged.vertices, mesh)
    export_colored(merged, dev, _prepare_out(args.out))
    diag = mesh.scale
    stats = {
        "global": {
            "avg": float(dev.mean()),
            "max": float(dev.max()),
            "avg_pct": 100.0 * float(dev.mean()) / diag,
            "max_pct": 100.0 * float(dev.max()) / diag,
            "samples": int(len(dev)),
        }
    }
    _write_json(stats, _stats_path(args.out))
    print(
        "deviation: avg {avg_pct:.4f}%  max {max_pct:.4f}% of bbox diagonal".format(
            **stats["global"]
        )
    )
    print(f"colored mesh -> {args.out}")
    if args.report_dir:
        for p in render_report(args.report_dir, deviations=dev):
            print(f"report: {p}")
    return 0


def cmd_offset(args) -> int:
    pw = load_patchwork(args.patchwork)
    resolution = args.resolution if args.resolution is not None else DEFAULTS["resolution"]
    _prepare_out(args.out)
    parts = []
    for fp in pw:
        try:
            shifted = offset_patch(fp.patch, args.distance)
        except UnsupportedOffset as exc:
            raise UnsupportedOffset(f"patch {fp.face_id}: {exc}") from exc
        tess = tessellate_patch(shifted, resolution=resolution)
        parts.append(tess)
        path = _per_patch_path(args.out, fp.face_id)
        export_mesh(tess, path)
        print(f"face {fp.face_id}: offset {args.distance:+g} -> {path}")
    merged = merge_meshes(parts)
    write_obj(args.out, merged.vertices, merged.faces)
    print(f"merged: {len(merged.faces)} triangles -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.shape == "sphere":
        mesh = icosphere(subdivisions=args.subdivisions)
        network = cube_network()
    else:
        axes = tuple(args.axes)
        mesh = ellipsoid(axes, subdivisions=args.subdivisions)
        network = ellipsoid_band_network(axes, lat_deg=args.lat_deg)
    mesh_path = out_dir / f"{args.shape}.obj"
    net_path = out_dir / f"{args.shape}_network.json"
    write_obj(mesh_path, mesh.vertices, mesh.faces)
    _write_json(network, net_path)
    print(f"mesh: {len(mesh.faces)} triangles -> {mesh_path}")
    print(f"network: {len(network['faces'])} faces -> {net_path}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipatch",
        description="Approximate triangle meshes with networks of implicit patches.",
    )
    parser.add_argument("--verbose", action="store_true",
                        help="show per-step diagnostics (polish reports etc.)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("--mesh", help="target mesh file (.obj/.ply/.stl)")
        p.add_argument("--network", help="curve network JSON file")
        p.add_argument("--out", help="output patchwork JSON path")
        p.add_argument("--tolerance", type=float, default=None,
                       help="deviation tolerance in %% of bbox diagonal (default 0.3)")
        p.add_argument("--omega", type=float, default=None,
                       help="blend-weight ratio cap (default 5)")
        p.add_argument("--resolution", type=int, default=None,
                       help="tessellation grid resolution (default 64)")
        p.add_argument("--max-iter", type=int, default=None,
                       help="refinement round budget (default 5)")
        p.add_argument("--no-optimize", action="store_true",
                       help="skip weight optimization, keep default weights")
        p.add_argument("--bounding", choices=BOUNDING_MODES, default=None,
                       help="bounding surface construction mode (default planar)")
        p.add_argument("--config", help="JSON file with any of the flags; flags override")
        p.add_argument("--report-dir", dest="report_dir", default=None,
                       help="directory for CSV report and rendered figures")

    p_fit = sub.add_parser("fit", help="fit one patch per network face")
    add_run_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_refine = sub.add_parser("refine", help="fit, then split until within tolerance")
    add_run_flags(p_refine)
    p_refine.set_defaults(func=cmd_refine)

    p_tess = sub.add_parser("tessellate", help="patchwork -> OBJ per patch + merged OBJ")
    p_tess.add_argument("--patchwork", required=True, help="patchwork JSON path")
    p_tess.add_argument("--resolution", type=int, default=None)
    p_tess.add_argument("--no-clip", action="store_true",
                        help="keep the whole isosurface, no domain clipping")
    p_tess.add_argument("--out", required=True, help="merged OBJ path")
    p_tess.set_defaults(func=cmd_tessellate)

    p_dev = sub.add_parser("deviate", help="color a patchwork by deviation from a mesh")
    p_dev.add_argument("--patchwork", required=True)
    p_dev.add_argument("--mesh", required=True)
    p_dev.add_argument("--resolution", type=int, default=None)
    p_dev.add_argument("--out", required=True, help="colored PLY path")
    p_dev.add_argument("--report-dir", dest="report_dir", default=None)
    p_dev.set_defaults(func=cmd_deviate)

    p_off = sub.add_parser("offset", help="offset every patch by a distance")
    p_off.add_argument("--patchwork", required=True)
    p_off.add_argument("--distance", type=float, required=True)
    p_off.add_argument("--resolution", type=int, default=None)
    p_off.add_argument("--out", required=True, help="merged OBJ path")
    p_off.set_defaults(func=cmd_offset)

    p_synth = sub.add_parser("synth", help="write demo fixture mesh + network files")
    p_synth.add_argument("--shape", choices=("sphere", "ellipsoid"), default="sphere")
    p_synth.add_argument("--subdivisions", type=int, default=3)
    p_synth.add_argument("--axes", type=float, nargs=3, default=(1.0, 0.9, 0.8),
                         help="ellipsoid semi-axes")
    p_synth.add_argument("--lat-deg", dest="lat_deg", type=float, default=30.0,
                         help="band network ring latitude in degrees")
    p_synth.add_argument("--out-dir", dest="out_dir", default=".")
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR)
    try:
        return args.func(args)
    except IPatchError as exc:
        return _fail(exc.category, str(exc))
    except ValueError as exc:
        return _fail("SchemaError", str(exc))
    except OSError as exc:
        return _fail("IoError", str(exc))


if __name__ == "__main__":
    sys.exit(main())
