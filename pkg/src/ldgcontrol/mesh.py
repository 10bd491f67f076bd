"""Structured simplicial meshes of the unit square and unit cube."""
from dataclasses import dataclass, field
from functools import cached_property
from itertools import permutations
from math import factorial

import numpy as np

from .errors import ConfigError


@dataclass(eq=False)
class Mesh:
    dim: int
    n_per_side: int
    vertices: np.ndarray        # (N_v, d)
    cells: np.ndarray           # (N_c, d+1), positively oriented
    boundary_faces: np.ndarray  # (N_f, d), outward oriented
    boundary_cells: np.ndarray = field(repr=False)  # owning cell of each boundary face

    def __post_init__(self):
        for a in (self.vertices, self.cells, self.boundary_faces, self.boundary_cells):
            a.setflags(write=False)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_faces(self):
        return len(self.boundary_faces)

    @cached_property
    def cell_jacobians(self):
        x = self.vertices[self.cells]
        return np.swapaxes(x[:, 1:] - x[:, :1], 1, 2)  # columns are edge vectors

    @cached_property
    def cell_volumes(self):
        return np.linalg.det(self.cell_jacobians) / factorial(self.dim)

    @cached_property
    def face_measures(self):
        x = self.vertices[self.boundary_faces]
        if self.dim == 2:
            return np.linalg.norm(x[:, 1] - x[:, 0], axis=1)
        return 0.5 * np.linalg.norm(np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), axis=1)

    @cached_property
    def face_normals(self):
        x = self.vertices[self.boundary_faces]
        if self.dim == 2:
            t = x[:, 1] - x[:, 0]
            nrm = np.stack([t[:, 1], -t[:, 0]], axis=1)
        else:
            nrm = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
        return nrm / np.linalg.norm(nrm, axis=1)[:, None]

    @cached_property
    def cell_centroids(self):
        return self.vertices[self.cells].mean(axis=1)

    @cached_property
    def face_centroids(self):
        return self.vertices[self.boundary_faces].mean(axis=1)

    @cached_property
    def h(self):
        x = self.vertices[self.cells]
        diam = np.zeros(self.n_cells)
        for a in range(self.dim + 1):
            for b in range(a + 1, self.dim + 1):
                diam = np.maximum(diam, np.linalg.norm(x[:, a] - x[:, b], axis=1))
        return float(diam.max())

    @cached_property
    def edges(self):
        """Unique vertex pairs ``(i, j)`` with ``i < j`` joined by a cell edge."""
        pairs = [self.cells[:, [a, b]] for a in range(self.dim + 1)
                 for b in range(a + 1, self.dim + 1)]
        e = np.sort(np.concatenate(pairs), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def boundary_vertices(self):
        return np.unique(self.boundary_faces)


def _grid_index(n, *ijk):
    idx = 0
    for axis, i in enumerate(ijk):
        idx = idx + i * (n + 1) ** axis
    return idx


def build_unit_mesh(dim, n_per_side):
    """Unit square (fixed diagonal) or unit cube (Kuhn, 6 tetrahedra per cube)."""
    if dim not in (2, 3):
        raise ConfigError(f"dim must be 2 or 3, got {dim}")
    n = int(n_per_side)
    if n < 2:
        raise ConfigError(f"n_per_side must be >= 2, got {n_per_side}")

    axes = [np.arange(n + 1) / n] * dim
    grid = np.meshgrid(*axes, indexing="ij")
    # vertex index i + (n+1) j [+ (n+1)^2 k]: x varies fastest
    vertices = np.stack([g.ravel(order="F") for g in grid], axis=1)

    lo = np.meshgrid(*[np.arange(n)] * dim, indexing="ij")
    lo = [g.ravel(order="F") for g in lo]
    if dim == 2:
        i, j = lo
        v00 = _grid_index(n, i, j)
        v10 = _grid_index(n, i + 1, j)
        v01 = _grid_index(n, i, j + 1)
        v11 = _grid_index(n, i + 1, j + 1)
        cells = np.concatenate([np.stack([v00, v10, v11], 1), np.stack([v00, v11, v01], 1)])
    else:
        i, j, k = lo
        tets = []
        for perm in permutations(range(3)):
            path = [np.zeros(3, dtype=int)]
            for ax in perm:
                step = path[-1].copy()
                step[ax] += 1
                path.append(step)
            tets.append(np.stack([_grid_index(n, i + o[0], j + o[1], k + o[2]) for o in path], 1))
        cells = np.concatenate(tets)

    cells = _orient(vertices, cells)
    faces, owners = _boundary_facets(vertices, cells)
    return Mesh(dim, n, vertices, cells, faces, owners)


def _orient(vertices, cells):
    x = vertices[cells]
    det = np.linalg.det(np.swapaxes(x[:, 1:] - x[:, :1], 1, 2))
    cells = cells.copy()
    neg = det < 0
    cells[neg, 0], cells[neg, 1] = cells[neg, 1], cells[neg, 0].copy()
    return cells


def _boundary_facets(vertices, cells):
    nv = cells.shape[1]
    local = [[b for b in range(nv) if b != a] for a in range(nv)]
    facets = np.concatenate([cells[:, lf] for lf in local])
    opposite = np.concatenate([cells[:, a] for a in range(nv)])
    owner = np.tile(np.arange(len(cells)), nv)
    key = np.sort(facets, axis=1)
    _, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inverse = np.asarray(inverse).ravel()
    if counts.max() > 2:
        raise ValueError("non-conforming mesh: facet shared by more than two cells")
    on_bdry = counts[inverse] == 1
    faces, opp, owner = facets[on_bdry], opposite[on_bdry], owner[on_bdry]

    x = vertices[faces]
    if vertices.shape[1] == 2:
        t = x[:, 1] - x[:, 0]
        nrm = np.stack([t[:, 1], -t[:, 0]], axis=1)
    else:
        nrm = np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
    inward = np.einsum("ij,ij->i", nrm, vertices[opp] - x[:, 0]) > 0
    faces = faces.copy()
    faces[inward, 0], faces[inward, 1] = faces[inward, 1], faces[inward, 0].copy()

    order = np.lexsort(np.sort(faces, axis=1).T[::-1])
    return faces[order], owner[order]


def boundary_trace_map(mesh):
    """Boundary face -> its ``d`` vertex indices."""
    return mesh.boundary_faces
