"""Legacy ASCII VTK output for nodal Q-tensor fields and boundary controls."""
import os
from pathlib import Path

import numpy as np

from . import qtensor as qt

# VTK cell type ids
VTK_LINE = 3
VTK_TRIANGLE = 5
VTK_TETRA = 10


def _atomic_write(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _fmt(a):
    return "\n".join(" ".join(f"{v:.16g}" for v in row) for row in np.atleast_2d(a))


def _grid(points, cells, cell_type, title):
    pts = np.zeros((len(points), 3))
    pts[:, : points.shape[1]] = points
    k = cells.shape[1]
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(pts)} double", _fmt(pts),
             f"CELLS {len(cells)} {len(cells) * (k + 1)}",
             _fmt(np.column_stack([np.full(len(cells), k), cells]).astype(int)),
             f"CELL_TYPES {len(cells)}",
             "\n".join(str(cell_type) for _ in range(len(cells)))]
    return lines


def _tensor_arrays(q, lines):
    """Append Q coefficients and the derived eigen/biaxiality arrays."""
    m = q.shape[1]
    lam, vec = qt.eig_max(q)
    if vec.shape[1] == 2:
        vec = np.column_stack([vec, np.zeros(len(vec))])
    lines += [f"SCALARS Q double {m}", "LOOKUP_TABLE default", _fmt(q),
              "SCALARS lambda1 double 1", "LOOKUP_TABLE default", _fmt(lam[:, None]),
              "VECTORS director double", _fmt(vec),
              "SCALARS biaxiality double 1", "LOOKUP_TABLE default",
              _fmt(qt.biaxiality(q)[:, None])]


def field_vtk(mesh, Q, title="Q-tensor field"):
    """Text of a VTK file with ``Q`` as point data on the volume mesh."""
    Q = np.asarray(Q, dtype=float)
    if Q.shape[0] != mesh.n_vertices:
        raise ValueError("field does not match the mesh")
    ctype = VTK_TRIANGLE if mesh.dim == 2 else VTK_TETRA
    lines = _grid(mesh.vertices, mesh.cells, ctype, title)
    lines.append(f"POINT_DATA {mesh.n_vertices}")
    _tensor_arrays(Q, lines)
    return "\n".join(lines) + "\n"


def boundary_vtk(mesh, U, title="boundary control"):
    """Text of a VTK file with the face-wise control ``U`` as cell data on the boundary."""
    U = np.asarray(U, dtype=float)
    if U.shape[0] != mesh.n_faces:
        raise ValueError("control does not match the boundary faces")
    ctype = VTK_LINE if mesh.dim == 2 else VTK_TRIANGLE
    lines = _grid(mesh.vertices, mesh.boundary_faces, ctype, title)
    lines.append(f"CELL_DATA {mesh.n_faces}")
    _tensor_arrays(U, lines)
    return "\n".join(lines) + "\n"


def write_field(path, mesh, Q, title="Q-tensor field"):
    _atomic_write(path, field_vtk(mesh, Q, title))


def write_boundary(path, mesh, U, title="boundary control"):
    _atomic_write(path, boundary_vtk(mesh, U, title))


def read_vtk(path):
    """Minimal structural reader for the files written here (used for checks).

    Returns a dict with ``points``, ``cells``, ``cell_types`` and a mapping
    ``data`` from array name to array.
    """
    tok = Path(path).read_text().split("\n")
    out = dict(data={})
    i = 0
    while i < len(tok):
        line = tok[i].split()
        if not line:
            i += 1
            continue
        key = line[0]
        if key == "POINTS":
            n = int(line[1])
            out["points"] = np.loadtxt(tok[i + 1: i + 1 + n], ndmin=2)
            i += 1 + n
        elif key == "CELLS":
            n = int(line[1])
            out["cells"] = np.loadtxt(tok[i + 1: i + 1 + n], dtype=int, ndmin=2)[:, 1:]
            i += 1 + n
        elif key == "CELL_TYPES":
            n = int(line[1])
            out["cell_types"] = np.array([int(t) for t in tok[i + 1: i + 1 + n]])
            i += 1 + n
        elif key in ("POINT_DATA", "CELL_DATA"):
            out["n_data"] = int(line[1])
            out["location"] = key
            i += 1
        elif key == "SCALARS":
            n = out["n_data"]
            out["data"][line[1]] = np.loadtxt(tok[i + 2: i + 2 + n], ndmin=2)
            i += 2 + n
        elif key == "VECTORS":
            n = out["n_data"]
            out["data"][line[1]] = np.loadtxt(tok[i + 1: i + 1 + n], ndmin=2)
            i += 1 + n
        else:
            i += 1
    return out
