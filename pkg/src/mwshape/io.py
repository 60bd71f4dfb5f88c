"""Result files: tab-separated tables, .npy maps and a digest manifest."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Sequence

import numpy as np

OBSERVABLE_COLUMNS = ("t_us", "norm", "mean_x_um", "dx_um", "mean_p_cm_s", "Ekin_uK")
MANIFEST = "manifest.json"


def write_table(path: Path, columns: Sequence[str], rows, fmt: str = "%.12g") -> Path:
    path = Path(path)
    arr = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in arr:
            fh.write("\t".join(fmt % v for v in row) + "\n")
    return path


def read_table(path: Path) -> dict:
    """Columns of a table written by :func:`write_table`, keyed by header name."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        data = np.loadtxt(fh, delimiter="\t", ndmin=2)
    if data.size == 0:
        data = np.zeros((0, len(header)))
    if data.shape[1] != len(header):
        raise ValueError(f"{path}: {data.shape[1]} columns for header {header}")
    return {name: data[:, i] for i, name in enumerate(header)}


def write_observables(path: Path, trajectory) -> Path:
    rows = [
        (t, o.norm, o.mean_x, o.width_dx, o.mean_p, o.kinetic_energy)
        for t, o in zip(trajectory.times, trajectory.observables)
    ]
    return write_table(path, OBSERVABLE_COLUMNS, rows)


def read_observables(path: Path) -> dict:
    table = read_table(path)
    if tuple(table) != OBSERVABLE_COLUMNS:
        raise ValueError(f"{path}: expected columns {OBSERVABLE_COLUMNS}, found {tuple(table)}")
    return table


def write_json(path: Path, payload) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def read_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: Path, files: Sequence[Path], config: dict, version: str, timing: dict) -> Path:
    out_dir = Path(out_dir)
    inventory = {Path(f).name: {"sha256": sha256(f), "bytes": Path(f).stat().st_size} for f in files}
    payload = {"config": config, "version": version, "timing": timing, "files": inventory}
    return write_json(out_dir / MANIFEST, payload)


def verify_manifest(out_dir: Path) -> list:
    """Names of files whose digest no longer matches the manifest."""
    out_dir = Path(out_dir)
    manifest = read_json(out_dir / MANIFEST)
    return [name for name, meta in manifest["files"].items() if sha256(out_dir / name) != meta["sha256"]]


def block_mean(a: np.ndarray, factor: int, axis: int = -1) -> np.ndarray:
    """Average non-overlapping blocks of ``factor`` samples along ``axis``."""
    a = np.moveaxis(np.asarray(a), axis, -1)
    n = (a.shape[-1] // factor) * factor
    out = a[..., :n].reshape(a.shape[:-1] + (n // factor, factor)).mean(axis=-1)
    return np.moveaxis(out, -1, axis)


def coarsening_factor(n: int, max_cells: int) -> int:
    """Smallest power of two bringing ``n`` samples to at most ``max_cells``."""
    f = 1
    while -(-n // f) > max_cells:
        f *= 2
    return f
