"""Binary containers for fields, trajectories and atlases.

Layout: one JSON header line (sorted keys) followed by .npy blobs in a fixed
order.  No timestamps are written, so equal data gives equal bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy import sparse

from ..dynamics.trajectory import Trajectory
from ..spectral.grid import Field, Grid

MAGIC = "dlab-container"
VERSION = 1


class ContainerError(ValueError):
    pass


def _grid_meta(grid: Grid) -> dict:
    return {"dim": grid.dim, "box_length": grid.box_length, "points": grid.points_per_axis}


def _grid_from(meta: dict) -> Grid:
    return Grid(int(meta["dim"]), float(meta["box_length"]), int(meta["points"]))


def _write(path, kind: str, meta: dict, arrays: list[np.ndarray]) -> Path:
    path = Path(path)
    head = {"magic": MAGIC, "version": VERSION, "kind": kind, "meta": meta, "arrays": len(arrays)}
    with open(path, "wb") as fh:
        fh.write((json.dumps(head, sort_keys=True) + "\n").encode("utf-8"))
        for arr in arrays:
            np.lib.format.write_array(fh, np.ascontiguousarray(arr), allow_pickle=False)
    return path


def _read(path, kind: str):
    with open(path, "rb") as fh:
        try:
            head = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ContainerError(f"{path} is not a dlab container") from exc
        if head.get("magic") != MAGIC:
            raise ContainerError(f"{path} is not a dlab container")
        if head.get("kind") != kind:
            raise ContainerError(f"{path} holds a {head.get('kind')}, expected {kind}")
        arrays = [np.lib.format.read_array(fh, allow_pickle=False) for _ in range(head["arrays"])]
    return head["meta"], arrays


def save_field(path, field: Field) -> Path:
    return _write(path, "field", {"grid": _grid_meta(field.grid)}, [field.values.astype(np.complex128)])


def load_field(path) -> Field:
    meta, (vals,) = _read(path, "field")
    return Field(_grid_from(meta["grid"]), vals)


def save_trajectory(path, traj: Trajectory) -> Path:
    meta = {
        "grid": _grid_meta(traj.grid),
        "dt": float(traj.dt),
        "adaptive": bool(traj.adaptive),
        "metadata": {k: v for k, v in traj.metadata.items() if isinstance(v, (int, float, str, bool, type(None)))},
    }
    return _write(path, "trajectory", meta, [traj.times.astype(np.float64), traj.states.astype(np.complex128)])


def load_trajectory(path) -> Trajectory:
    meta, (times, states) = _read(path, "trajectory")
    return Trajectory(_grid_from(meta["grid"]), times, states, meta["dt"], dict(meta["metadata"]), meta["adaptive"])


def save_atlas(path, atlas) -> Path:
    """Atlas pieces as CSC arrays; the key index and bookkeeping go in the header."""
    mat = sparse.csc_matrix(atlas.matrix)
    meta = atlas.manifest()
    meta["shape"] = list(mat.shape)
    arrays = [
        mat.data.astype(np.complex128),
        mat.indices.astype(np.int64),
        mat.indptr.astype(np.int64),
        atlas.datum.values.astype(np.complex128),
    ]
    return _write(path, "atlas", meta, arrays)


def load_atlas(path):
    from ..randomization import DecompositionAtlas, Truncation

    meta, (data, indices, indptr, datum) = _read(path, "atlas")
    grid = _grid_from(meta["grid"])
    mat = sparse.csc_matrix((data, indices, indptr), shape=tuple(meta["shape"]))
    keys = [(e["M"], tuple(e["i"]), tuple(e["j"]), e["k"], e["l"]) for e in meta["index"]]
    tr = meta["truncation"]
    return DecompositionAtlas(
        grid=grid,
        truncation=Truncation(tr["m_min"], tr["m_max"], tr["k_max"], tr["j_radius"]),
        d_param=meta["d_param"],
        keys=keys,
        matrix=mat,
        datum=Field(grid, datum),
        shells=list(meta["shells"]),
        residual=meta["residual"],
        angular_residual=meta["angular_residual"],
        dropped_norm=meta["dropped_norm"],
        datum_norm=meta["datum_norm"],
        piece_norms=np.array([e["norm"] for e in meta["index"]]),
    )
