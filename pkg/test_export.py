#!/usr/bin/env python3
"""
Export tests - VTK snapshots, 1D text columns, CSV logs
"""

import csv

import numpy as np
import pytest

from elm_adapt.export import CsvLog, write_csv, write_snapshot, write_text_1d, write_vtk
from elm_adapt.mesh import interval_mesh, refine


def test_vtk_layout(tmp_path, unit_square):
    values = unit_square.vertices[:, 0]
    path = write_vtk(tmp_path / "mesh.vtk", unit_square, {"u": values})
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 2.0"
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"
    assert lines[4] == f"POINTS {unit_square.num_vertices} double"
    assert f"CELLS {unit_square.num_elements} {4 * unit_square.num_elements}" in lines
    types = lines.index(f"CELL_TYPES {unit_square.num_elements}")
    assert lines[types + 1] == "5"
    assert f"POINT_DATA {unit_square.num_vertices}" in lines
    assert "SCALARS u double 1" in lines
    # points carry a zero z coordinate
    assert lines[5].split()[2] == "0"


def test_vtk_rejects_mismatched_point_data(tmp_path, unit_square):
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "bad.vtk", unit_square, {"u": np.zeros(3)})


def test_text_snapshot_is_sorted_by_x(tmp_path):
    mesh = refine(interval_mesh(0.0, 1.0, 4), [1, 2])
    u = mesh.vertices[:, 0] ** 2
    path = write_text_1d(tmp_path / "u.txt", mesh, {"u": u})
    table = np.loadtxt(path)
    assert np.all(np.diff(table[:, 0]) > 0)
    assert np.allclose(table[:, 1], table[:, 0] ** 2)
    assert path.read_text().startswith("# x u")


def test_snapshot_format_follows_dimension(tmp_path, unit_interval, unit_square):
    assert write_snapshot(tmp_path, 3, unit_interval, {"u": np.zeros(17)}).name == "snapshot_0003.txt"
    assert write_snapshot(tmp_path, 12, unit_square, {"u": np.zeros(25)}).name == "snapshot_0012.vtk"
    with pytest.raises(ValueError):
        write_text_1d(tmp_path / "no.txt", unit_square, {"u": np.zeros(25)})


def test_csv_writers(tmp_path):
    path = write_csv(tmp_path / "table.csv", ("a", "b"), [(1, 2.5), (3, "")])
    assert path.read_text() == "a,b\n1,2.5\n3,\n"

    with CsvLog(tmp_path / "log" / "steps.csv", ("n", "k")) as log:
        log.write([1, 0.1])
        log.write([2, 0.2])
        # rows are flushed as they are written
        with open(log.path) as f:
            assert len(list(csv.reader(f))) == 3
    assert log.rows == 2
    assert log._file.closed
