"""Defect localization from the largest-eigenvalue field of a P1 Q-tensor field.

A point defect melts the nematic order, so ``lambda_1(Q)`` has a pronounced
local minimum at its core.  Minima are detected on mesh vertices and refined
by a least-squares quadratic over the vertex star.
"""
import json
from dataclasses import dataclass, field

import numpy as np

from . import qtensor as qt


@dataclass
class DefectReport:
    """Local minima of ``lambda_1`` below ``threshold``.

    ``points`` holds ``(position, lambda_1)`` pairs sorted by ``lambda_1``.
    For three-dimensional fields ``polyline`` lists one point per vertex
    slice ``x3 = const`` (slices without a defect are skipped).
    """

    dim: int
    threshold: float
    points: list = field(default_factory=list)
    polyline: np.ndarray = None

    @property
    def positions(self):
        return np.array([p for p, _ in self.points]).reshape(-1, self.dim)

    def __len__(self):
        return len(self.points)

    def to_dict(self):
        out = dict(dim=self.dim, threshold=self.threshold,
                   defects=[dict(position=[float(c) for c in p], lambda1=float(v))
                            for p, v in self.points])
        if self.polyline is not None:
            out["polyline"] = np.asarray(self.polyline).tolist()
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def default_threshold(bulk, dim):
    """Half of ``lambda_1`` of the uniaxial minimizer, ``s* (d - 1) / (2 d)``."""
    return 0.5 * qt.uniaxial_order(bulk, dim) * (dim - 1) / dim


def _neighbors(n_vertices, edges):
    nbr = [[] for _ in range(n_vertices)]
    for a, b in edges:
        nbr[a].append(b)
        nbr[b].append(a)
    return nbr


def _strict_minima(values, nbr, candidates, threshold):
    out = []
    for v in candidates:
        if values[v] >= threshold or not nbr[v]:
            continue
        if values[v] < values[nbr[v]].min():
            out.append(v)
    return out


def _refine(xy, values, v, nbr, h):
    """Stationary point of a quadratic fitted over the star of ``v``; vertex if unusable."""
    star = np.concatenate([[v], nbr[v]])
    if len(star) < 6:
        return xy[v]
    d = xy[star] - xy[v]
    A = np.column_stack([np.ones(len(star)), d[:, 0], d[:, 1],
                         d[:, 0] ** 2, d[:, 0] * d[:, 1], d[:, 1] ** 2])
    coef, *_ = np.linalg.lstsq(A, values[star], rcond=None)
    H = np.array([[2 * coef[3], coef[4]], [coef[4], 2 * coef[5]]])
    if np.any(np.linalg.eigvalsh(H) <= 0):
        return xy[v]
    shift = np.linalg.solve(H, -coef[1:3])
    if np.linalg.norm(shift) > h:
        return xy[v]
    return xy[v] + shift


def locate_defects(mesh, Q, threshold=None, bulk=None):
    """Return a ``DefectReport`` for the nodal field ``Q``.

    The default threshold is half of ``lambda_1`` of the bulk uniaxial state
    (needs ``bulk``); pass ``threshold`` to override.
    """
    Q = np.asarray(Q, dtype=float)
    if not np.all(np.isfinite(Q)):
        raise ValueError("field is not finite")
    if threshold is None:
        if bulk is None:
            bulk = qt.BULK_2D if mesh.dim == 2 else qt.BULK_3D
        threshold = default_threshold(bulk, mesh.dim)
    lam = qt.eigenvalues(Q)[:, 0]
    X = mesh.vertices
    report = DefectReport(mesh.dim, float(threshold))
    h = 1.0 / mesh.n_per_side
    if mesh.dim == 2:
        nbr = _neighbors(mesh.n_vertices, mesh.edges)
        for v in _strict_minima(lam, nbr, range(mesh.n_vertices), threshold):
            report.points.append((_refine(X, lam, v, nbr, h), float(lam[v])))
    else:
        # restrict the vertex graph to horizontal slices
        E = mesh.edges
        flat = np.isclose(X[E[:, 0], 2], X[E[:, 1], 2])
        nbr = _neighbors(mesh.n_vertices, E[flat])
        z = np.round(X[:, 2] * mesh.n_per_side).astype(int)
        line = []
        for k in range(mesh.n_per_side + 1):
            verts = np.flatnonzero(z == k)
            mins = _strict_minima(lam, nbr, verts, threshold)
            found = []
            for v in mins:
                p = np.append(_refine(X[:, :2], lam, v, nbr, h), X[v, 2])
                found.append((p, float(lam[v])))
            report.points.extend(found)
            if found:
                line.append(min(found, key=lambda t: t[1])[0])
        report.polyline = np.array(line).reshape(-1, 3)
    report.points.sort(key=lambda t: t[1])
    return report
