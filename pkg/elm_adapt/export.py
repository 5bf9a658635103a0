#!/usr/bin/env python3
"""
Export - Snapshot and table writers

Legacy ASCII VTK for 2D fields, whitespace columns for 1D fields, and
CSV tables for per-step indicators, studies and trace diagnostics.
"""

import csv
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Union

import numpy as np

from .mesh import Mesh

PathLike = Union[str, Path]

VTK_LINE = 3
VTK_TRIANGLE = 5


def write_vtk(path: PathLike, mesh: Mesh, point_data: Optional[Dict[str, np.ndarray]] = None,
              title: str = "elm-adapt snapshot") -> Path:
    """Write the mesh (and nodal scalars) as a legacy ASCII unstructured grid."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n, d = mesh.vertices.shape
    points = np.zeros((n, 3))
    points[:, :d] = mesh.vertices
    nodes = mesh.elements.shape[1]
    cell_type = VTK_LINE if mesh.dimension == 1 else VTK_TRIANGLE
    cells = np.hstack([np.full((mesh.num_elements, 1), nodes), mesh.elements])

    with open(path, "w") as f:
        f.write("# vtk DataFile Version 2.0\n")
        f.write(f"{title}\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {n} double\n")
        np.savetxt(f, points, fmt="%.17g")
        f.write(f"CELLS {mesh.num_elements} {cells.size}\n")
        np.savetxt(f, cells, fmt="%d")
        f.write(f"CELL_TYPES {mesh.num_elements}\n")
        np.savetxt(f, np.full(mesh.num_elements, cell_type), fmt="%d")
        if point_data:
            f.write(f"POINT_DATA {n}\n")
            for name, values in point_data.items():
                values = np.asarray(values, dtype=float).reshape(-1)
                if len(values) != n:
                    raise ValueError(f"point data '{name}' has {len(values)} values for {n} points")
                f.write(f"SCALARS {name} double 1\n")
                f.write("LOOKUP_TABLE default\n")
                np.savetxt(f, values, fmt="%.17g")
    return path


def write_text_1d(path: PathLike, mesh: Mesh, columns: Dict[str, np.ndarray]) -> Path:
    """x and one column per nodal field, sorted by x."""
    if mesh.dimension != 1:
        raise ValueError("text snapshots are for 1D meshes")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    x = mesh.vertices[:, 0]
    order = np.argsort(x, kind="stable")
    table = np.column_stack([x[order]] + [np.asarray(v, dtype=float)[order] for v in columns.values()])
    np.savetxt(path, table, fmt="%.17g", header=" ".join(["x", *columns]))
    return path


def write_snapshot(directory: PathLike, index: int, mesh: Mesh, fields: Dict[str, np.ndarray]) -> Path:
    """snapshot_XXXX.vtk in 2D, snapshot_XXXX.txt in 1D."""
    directory = Path(directory)
    if mesh.dimension == 1:
        return write_text_1d(directory / f"snapshot_{index:04d}.txt", mesh, fields)
    return write_vtk(directory / f"snapshot_{index:04d}.vtk", mesh, fields)


def write_csv(path: PathLike, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)
    return path


class CsvLog:
    """Append-as-you-go CSV file (header written on open)."""

    def __init__(self, path: PathLike, columns: Sequence[str]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, "w", newline="")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(columns)
        self.rows = 0

    def write(self, row: Sequence):
        self._writer.writerow(row)
        self._file.flush()
        self.rows += 1

    def close(self):
        if not self._file.closed:
            self._file.close()

    def __enter__(self) -> "CsvLog":
        return self

    def __exit__(self, *exc):
        self.close()
