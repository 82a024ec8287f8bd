"""Saving and loading fitted patchworks.

The on-disk format is a single JSON document: a format tag, provenance
(a hash of the curve-network input plus the fitting configuration), and
one record per patch with its surfaces, weights and fit statistics.
Surfaces are type-tagged dictionaries.  Floats survive the round trip
exactly (shortest-repr encoding), so a reloaded patch evaluates to the
bit-identical field.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IoError, SchemaError
from .fitting import FitConfig, FittedPatch
from .implicit import ILoft, IPatch, LimingSurface, Negated, Plane

__all__ = [
    "Patchwork",
    "surface_to_dict",
    "surface_from_dict",
    "save_patchwork",
    "load_patchwork",
    "patchwork_to_dict",
    "patchwork_from_dict",
    "provenance_for",
]

FORMAT_NAME = "ipatch-patchwork"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Patchwork:
    patches: tuple          # FittedPatch records, in face-id order
    provenance: dict

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(self.patches))

    def __len__(self):
        return len(self.patches)

    def __iter__(self):
        return iter(self.patches)


def provenance_for(network_source: str, config: FitConfig, **extra) -> dict:
    digest = hashlib.sha256(network_source.encode("utf-8")).hexdigest()
    prov = {
        "network_sha256": digest,
        "config": {
            "omega": config.omega,
            "max_eval": config.max_eval,
            "tol_f": config.tol_f,
            "optimize": config.optimize,
        },
    }
    prov.update(extra)
    return prov


# ---------------------------------------------------------------------------
# Surface <-> dict
# ---------------------------------------------------------------------------

def _vec(x) -> list:
    return [float(v) for v in np.asarray(x).reshape(-1)]


def surface_to_dict(s) -> dict:
    if isinstance(s, Plane):
        return {"type": "plane", "normal": _vec(s.normal), "offset": float(s.offset)}
    if isinstance(s, LimingSurface):
        return {
            "type": "liming",
            "pi1": surface_to_dict(s.pi1),
            "pi2": surface_to_dict(s.pi2),
            "cut": surface_to_dict(s.cut),
            "fullness": float(s.fullness),
        }
    if isinstance(s, ILoft):
        return {
            "type": "iloft",
            "pi1": surface_to_dict(s.pi1),
            "pi2": surface_to_dict(s.pi2),
            "b1": surface_to_dict(s.b1),
            "b2": surface_to_dict(s.b2),
            "w1": float(s.w1),
            "w2": float(s.w2),
        }
    if isinstance(s, Negated):
        return {"type": "negated", "inner": surface_to_dict(s.inner)}
    raise SchemaError(f"cannot serialize surface of type {type(s).__name__}")


def _require(d: dict, *keys):
    for k in keys:
        if k not in d:
            raise SchemaError(f"surface record {d.get('type', '?')!r} misses key {k!r}")


def surface_from_dict(d) -> object:
    if not isinstance(d, dict) or "type" not in d:
        raise SchemaError(f"not a surface record: {d!r}")
    kind = d["type"]
    try:
        if kind == "plane":
            _require(d, "normal", "offset")
            return Plane.from_normalized(
                np.asarray(d["normal"], dtype=np.float64), float(d["offset"])
            )
        if kind == "liming":
            _require(d, "pi1", "pi2", "cut", "fullness")
            return LimingSurface(
                surface_from_dict(d["pi1"]),
                surface_from_dict(d["pi2"]),
                surface_from_dict(d["cut"]),
                float(d["fullness"]),
            )
        if kind == "iloft":
            _require(d, "pi1", "pi2", "b1", "b2", "w1", "w2")
            return ILoft(
                surface_from_dict(d["pi1"]),
                surface_from_dict(d["pi2"]),
                surface_from_dict(d["b1"]),
                surface_from_dict(d["b2"]),
                float(d["w1"]),
                float(d["w2"]),
            )
        if kind == "negated":
            _require(d, "inner")
            return Negated(surface_from_dict(d["inner"]))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"bad {kind!r} surface record: {exc}") from exc
    raise SchemaError(f"unknown surface type {kind!r}")


# ---------------------------------------------------------------------------
# Patch <-> dict
# ---------------------------------------------------------------------------

def _patch_to_dict(fp: FittedPatch) -> dict:
    return {
        "face_id": int(fp.face_id),
        "sides": [
            {"ribbon": surface_to_dict(r), "bounding": surface_to_dict(b)}
            for r, b in fp.patch.sides
        ],
        "weights": _vec(fp.patch.weights),
        "corners": [_vec(c) for c in fp.patch.corners],
        "center": _vec(fp.center),
        "rms": float(fp.rms),
        "max_dev": float(fp.max_dev),
        "rms_default": float(fp.rms_default),
    }


def _patch_from_dict(d: dict) -> FittedPatch:
    for key in ("face_id", "sides", "weights", "corners", "center", "rms", "max_dev"):
        if key not in d:
            raise SchemaError(f"patch record misses key {key!r}")
    try:
        sides = tuple(
            (surface_from_dict(s["ribbon"]), surface_from_dict(s["bounding"]))
            for s in d["sides"]
        )
        patch = IPatch(
            sides,
            np.asarray(d["weights"], dtype=np.float64),
            np.asarray(d["corners"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad patch record: {exc}") from exc
    return FittedPatch(
        face_id=int(d["face_id"]),
        patch=patch,
        center=np.asarray(d["center"], dtype=np.float64),
        points=np.empty((0, 3)),
        rms=float(d["rms"]),
        max_dev=float(d["max_dev"]),
        rms_default=float(d.get("rms_default", d["rms"])),
    )


# ---------------------------------------------------------------------------
# Whole patchworks
# ---------------------------------------------------------------------------

def patchwork_to_dict(pw: Patchwork) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "provenance": pw.provenance,
        "patches": [_patch_to_dict(p) for p in pw.patches],
    }


def patchwork_from_dict(data) -> Patchwork:
    if not isinstance(data, dict):
        raise SchemaError("patchwork document must be a JSON object")
    if data.get("format") != FORMAT_NAME:
        raise SchemaError(
            f"not a patchwork document (format tag {data.get('format')!r})"
        )
    if data.get("version") != FORMAT_VERSION:
        raise SchemaError(f"unsupported patchwork version {data.get('version')!r}")
    patches = [_patch_from_dict(p) for p in data.get("patches", [])]
    return Patchwork(tuple(patches), dict(data.get("provenance", {})))


def save_patchwork(pw: Patchwork, path) -> None:
    text = json.dumps(patchwork_to_dict(pw), indent=2, sort_keys=True) + "\n"
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_patchwork(path) -> Patchwork:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    return patchwork_from_dict(data)
