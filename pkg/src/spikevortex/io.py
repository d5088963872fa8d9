"""CSV/JSON persistence for profiles, fields, and run records.

All numeric output is written with shortest round-trip formatting so that
re-running an identical configuration reproduces artifacts byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .mesh import RadialMesh, SectorMesh
from .planar import PlanarField
from .profiles import ProfileKind, RadialProfile


def _fmt(x):
    return repr(float(x))


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]


def write_profile_csv(path, profile: RadialProfile):
    """Two-column CSV (r, value) under a JSON header line with the metadata."""
    header = {
        "kind": profile.kind.value,
        "degree": profile.degree,
        "decay_coeff": profile.decay_coeff,
        "mesh": profile.mesh.to_config(),
    }
    lines = ["# " + canonical_json(header), "r,value"]
    for r, v in zip(profile.mesh.nodes, profile.values):
        lines.append(f"{_fmt(r)},{_fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_profile_csv(path) -> RadialProfile:
    text = Path(path).read_text().strip().splitlines()
    if not text or not text[0].startswith("# "):
        raise ConfigError(f"{path} lacks the JSON header line")
    header = json.loads(text[0][2:])
    data = np.array([[float(x) for x in line.split(",")] for line in text[2:]])
    mesh_cfg = header.get("mesh", {})
    mesh = RadialMesh(
        data[:, 0],
        h_core=mesh_cfg.get("h_core", float(data[1, 0] - data[0, 0])),
        ratio=mesh_cfg.get("ratio", 1.0),
        core_extent=mesh_cfg.get("core_extent", float(data[-1, 0])),
    )
    return RadialProfile(
        mesh,
        data[:, 1],
        ProfileKind(header["kind"]),
        degree=int(header.get("degree", 0)),
        decay_coeff=header.get("decay_coeff"),
    )


def write_field_csv(path, field: PlanarField, extra: dict | None = None):
    """Sector samples as (r, theta, u, v1, v2) under a JSON header."""
    header = {"k": field.k, "d": field.d, "mesh": field.mesh.to_config()}
    header.update(extra or {})
    lines = ["# " + canonical_json(header), "r,theta,u,v1,v2"]
    r = field.mesh.radial.nodes
    t = field.mesh.thetas
    for i in range(r.size):
        for j in range(t.size):
            lines.append(
                ",".join(
                    [
                        _fmt(r[i]),
                        _fmt(t[j]),
                        _fmt(field.u[i, j]),
                        _fmt(field.v1[i, j]),
                        _fmt(field.v2[i, j]),
                    ]
                )
            )
    Path(path).write_text("\n".join(lines) + "\n")


def read_field_csv(path) -> PlanarField:
    text = Path(path).read_text().strip().splitlines()
    if not text or not text[0].startswith("# "):
        raise ConfigError(f"{path} lacks the JSON header line")
    header = json.loads(text[0][2:])
    mesh = SectorMesh.from_config(header["mesh"])
    n_r, m = mesh.shape
    data = np.array([[float(x) for x in line.split(",")] for line in text[2:]])
    if data.shape[0] != n_r * m:
        raise ConfigError(f"{path}: row count does not match the mesh")
    u = data[:, 2].reshape(n_r, m)
    v1 = data[:, 3].reshape(n_r, m)
    v2 = data[:, 4].reshape(n_r, m)
    return PlanarField(mesh, u, v1, v2, int(header["d"]))


def write_reduce_csv(path, records):
    lines = ["l,I1,I2,c"]
    for rf in sorted(records, key=lambda r: r.l):
        lines.append(
            ",".join([_fmt(rf.l), _fmt(rf.I1), _fmt(rf.I2), _fmt(rf.c_of_l)])
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, payload: dict):
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
