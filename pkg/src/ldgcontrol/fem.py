"""P1/P0 finite element operators for the tensor-valued Allen-Cahn step.

Fields are arrays of shape ``(N_v, m)``: one row of Q-coefficients per mesh
vertex.  Scalar operators (mass, stiffness, boundary mass) act channel-wise,
``M @ Q``.  Coupled systems (the Newton Jacobian) use the channel-major
vector ``Q.T.ravel()`` with block index ``i * N_v + vertex``.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from . import qtensor as qt
from .errors import ConfigError, PreconditionError
from .quadrature import simplex_rule


@dataclass(frozen=True)
class ModelParams:
    """Physical and time-stepping parameters of the state equation."""

    bulk: qt.BulkParams
    eta_dw: float = 0.2
    eta_gamma: float = 100.0
    lambda_omega: float = 0.0
    dt: float = 0.004
    tf: float = 0.4

    def __post_init__(self):
        if self.dt <= 0 or self.tf <= 0:
            raise ConfigError("dt and tf must be positive")
        if self.eta_dw <= 0 or self.eta_gamma < 0 or self.lambda_omega < 0:
            raise ConfigError("need eta_dw > 0, eta_gamma >= 0, lambda_omega >= 0")
        k = round(self.tf / self.dt)
        if k < 1 or abs(k * self.dt - self.tf) > 1e-12 * max(1.0, self.tf):
            raise ConfigError(f"dt={self.dt} does not divide tf={self.tf}")

    @property
    def n_steps(self):
        return int(round(self.tf / self.dt))

    def time_weights(self):
        """Trapezoid weights ``w_0 .. w_K`` on the uniform time grid."""
        w = np.full(self.n_steps + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w


def to_vec(Q):
    return np.ascontiguousarray(Q.T).ravel()


def from_vec(v, m):
    return v.reshape(m, -1).T


class Operators:
    """Assembled matrices and the quadrature machinery for the bulk term.

    Attributes
    ----------
    M, K, B : csr_matrix (N_v, N_v)
        P1 mass, stiffness and boundary mass; all share one sparsity pattern.
    C_gamma : csr_matrix (N_v, N_f)
        ``int_F phi_a`` coupling P1 test functions to P0 boundary data.
    C_omega : csr_matrix (N_v, N_c)
        ``int_T phi_a`` coupling P1 test functions to P0 cell data.
    face_measures, cell_volumes : ndarray
        Diagonals of the P0 mass matrices.
    """

    def __init__(self, mesh, quad_degree=4):
        self.mesh = mesh
        self.dim = mesh.dim
        self.m = qt.ncoeffs(mesh.dim)
        self.quad_degree = quad_degree
        self.bary, self.qweights = simplex_rule(mesh.dim, quad_degree)
        self.cell_volumes = mesh.cell_volumes
        self.face_measures = mesh.face_measures
        self._build_pattern()
        self._assemble_linear()

    @property
    def n_vertices(self):
        return self.mesh.n_vertices

    # -- sparsity and scatter maps ---------------------------------------
    def _build_pattern(self):
        mesh = self.mesh
        nv, cells = mesh.n_vertices, mesh.cells
        nl = mesh.dim + 1
        rows = np.repeat(cells, nl, axis=1).ravel()
        cols = np.tile(cells, (1, nl)).ravel()
        S = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(nv, nv))
        S.sum_duplicates()
        S.sort_indices()
        self.pattern = S
        srow = np.repeat(np.arange(nv), np.diff(S.indptr))
        keys = srow * nv + S.indices
        self._scalar_pos = np.searchsorted(keys, rows * nv + cols).reshape(len(cells), nl, nl)

        m, nnz = self.m, S.nnz
        rowlen = np.diff(S.indptr)
        # block CSR of kron(ones(m, m), S)
        blk_rowlen = np.tile(m * rowlen, m)
        self.blk_indptr = np.concatenate([[0], np.cumsum(blk_rowlen)])
        e = np.arange(nnz)
        row_block = np.empty(m * nnz, dtype=S.indices.dtype)
        for j in range(m):
            row_block[m * S.indptr[srow] + j * rowlen[srow] + (e - S.indptr[srow])] = S.indices + j * nv
        self.blk_indices = np.tile(row_block, m)
        self.blk_nnz = m * m * nnz

        # position of scalar entry e in block (i, j)
        def block_pos(i, j, e=e):
            r = srow[e]
            return i * m * nnz + m * S.indptr[r] + j * rowlen[r] + (e - S.indptr[r])

        self._diag_pos = np.stack([block_pos(i, i) for i in range(m)])
        pos = self._scalar_pos  # (Nc, nl, nl)
        cpos = np.empty(pos.shape + (m, m), dtype=np.int64)
        for i in range(m):
            for j in range(m):
                cpos[..., i, j] = block_pos(i, j, pos)
        self._cell_block_pos = cpos.ravel()

    def _scatter_scalar(self, local):
        """Sum cell-local (Nc, nl, nl) matrices into the shared scalar pattern."""
        S = self.pattern
        data = np.bincount(self._scalar_pos.ravel(), weights=local.ravel(), minlength=S.nnz)
        return sp.csr_matrix((data, S.indices.copy(), S.indptr.copy()), shape=S.shape)

    # -- linear forms ------------------------------------------------------
    def _assemble_linear(self):
        mesh = self.mesh
        d, nl = mesh.dim, mesh.dim + 1
        vol = self.cell_volumes

        mloc = (np.ones((nl, nl)) + np.eye(nl)) / (nl * (nl + 1))
        self.M = self._scatter_scalar(vol[:, None, None] * mloc)

        Jinv = np.linalg.inv(mesh.cell_jacobians)  # rows: gradients of bary 1..d
        grads = np.concatenate([-Jinv.sum(axis=1, keepdims=True), Jinv], axis=1)
        self.bary_grads = grads  # (Nc, nl, d)
        self.K = self._scatter_scalar(vol[:, None, None] * np.einsum("cak,cbk->cab", grads, grads))

        faces, area = mesh.boundary_faces, self.face_measures
        nf = d  # vertices per face
        bloc = (np.ones((nf, nf)) + np.eye(nf)) / (nf * (nf + 1))
        rows = np.repeat(faces, nf, axis=1).ravel()
        cols = np.tile(faces, (1, nf)).ravel()
        vals = (area[:, None, None] * bloc).ravel()
        nv = mesh.n_vertices
        keys = np.repeat(np.arange(nv), np.diff(self.pattern.indptr)) * nv + self.pattern.indices
        bpos = np.searchsorted(keys, rows * nv + cols)
        data = np.bincount(bpos, weights=vals, minlength=self.pattern.nnz)
        self.B = sp.csr_matrix((data, self.pattern.indices.copy(), self.pattern.indptr.copy()),
                               shape=self.pattern.shape)

        self.C_gamma = sp.csr_matrix(
            (np.repeat(area / nf, nf), (faces.ravel(), np.repeat(np.arange(len(faces)), nf))),
            shape=(nv, len(faces)))
        self.C_omega = sp.csr_matrix(
            (np.repeat(vol / nl, nl), (mesh.cells.ravel(), np.repeat(np.arange(mesh.n_cells), nl))),
            shape=(nv, mesh.n_cells))

    # -- block helpers -----------------------------------------------------
    def block_from_scalar(self, A):
        """``kron(I_m, A)`` laid out in the shared block pattern; ``A`` uses ``pattern``."""
        data = np.zeros(self.blk_nnz)
        for i in range(self.m):
            data[self._diag_pos[i]] = A.data
        return data

    def block_matrix(self, data):
        n = self.m * self.n_vertices
        return sp.csr_matrix((data, self.blk_indices, self.blk_indptr), shape=(n, n))

    # -- nonlinear bulk term ----------------------------------------------
    def quad_values(self, Q):
        """Field values at quadrature points, shape (Nc, nq, m)."""
        return np.einsum("qa,cam->cqm", self.bary, Q[self.mesh.cells], optimize=True)

    def bulk_load(self, Q, bulk):
        """Vector ``N(Q)_a = int psi'(Q) phi_a`` per vertex, shape (N_v, m)."""
        g = qt.psi_grad(self.quad_values(Q), bulk)
        wphi = self.qweights[:, None] * self.bary  # (nq, nl)
        local = np.einsum("qa,cqm->cam", wphi, g, optimize=True) * self.cell_volumes[:, None, None]
        out = np.zeros((self.n_vertices, self.m))
        cells = self.mesh.cells.ravel()
        for i in range(self.m):
            out[:, i] = np.bincount(cells, weights=local[..., i].ravel(), minlength=self.n_vertices)
        return out

    def bulk_hessian_data(self, Q, bulk):
        """Block-pattern data of ``int psi''(Q) : phi_a E^i phi_b E^j``."""
        H = qt.psi_hess(self.quad_values(Q), bulk)  # (Nc, nq, m, m)
        nc, nq, m, _ = H.shape
        nl = self.dim + 1
        phi2 = (self.qweights[:, None, None] * self.bary[:, :, None] * self.bary[:, None, :]).reshape(nq, nl * nl)
        local = np.matmul(phi2.T[None], H.reshape(nc, nq, m * m))  # (Nc, nl*nl, m*m)
        local *= self.cell_volumes[:, None, None]
        return np.bincount(self._cell_block_pos, weights=local.ravel(), minlength=self.blk_nnz)

    def bulk_energy(self, Q, bulk):
        vals = qt.psi(self.quad_values(Q), bulk)
        return float(np.sum(vals @ self.qweights * self.cell_volumes))

    @cached_property
    def lumped_mass(self):
        return np.asarray(self.M.sum(axis=1)).ravel()


def assemble(mesh, quad_degree=4):
    return Operators(mesh, quad_degree)


def interpolate(mesh, f):
    """Nodal (Lagrange) interpolant of ``f``: coordinates (N, d) -> coefficients (N, m)."""
    vals = np.asarray(f(mesh.vertices), dtype=float)
    if vals.ndim == 1:
        vals = np.broadcast_to(vals, (mesh.n_vertices, vals.shape[0])).copy()
    if vals.shape[0] != mesh.n_vertices:
        raise PreconditionError("interpolated function returned the wrong number of rows")
    if not np.all(np.isfinite(vals)):
        raise PreconditionError("interpolated function is not finite at some vertex")
    return vals


def l2_error(ops, Q, f, degree=6):
    """``||Q_h - f||_{L^2}`` by a high-order rule on every cell."""
    from .quadrature import collapsed_rule

    bary, w = collapsed_rule(ops.dim, degree)
    mesh = ops.mesh
    xq = np.einsum("qa,cad->cqd", bary, mesh.vertices[mesh.cells])
    qh = np.einsum("qa,cam->cqm", bary, Q[mesh.cells])
    fx = np.asarray(f(xq.reshape(-1, ops.dim))).reshape(qh.shape)
    err = np.sum((qh - fx) ** 2, axis=-1)
    return float(np.sqrt(np.sum(err @ w * ops.cell_volumes)))


def linear_data(ops, params):
    """Block data of ``M/dt + K + eta_gamma B`` (constant over all steps)."""
    # all three share ``pattern`` so the data arrays align entry by entry
    data = ops.M.data / params.dt + ops.K.data + params.eta_gamma * ops.B.data
    return ops.block_from_scalar(sp.csr_matrix((data, ops.pattern.indices, ops.pattern.indptr),
                                               shape=ops.pattern.shape))


def control_source(ops, params, u_gamma, u_omega):
    """``eta_gamma C_gamma u_gamma + lambda_omega C_omega u_omega`` as a field."""
    src = np.zeros((ops.n_vertices, ops.m))
    if u_gamma is not None and params.eta_gamma:
        src += params.eta_gamma * (ops.C_gamma @ u_gamma)
    if u_omega is not None and params.lambda_omega:
        src += params.lambda_omega * (ops.C_omega @ u_omega)
    return src


def nonlinear_residual(Q_new, Q_old, source, ops, params):
    F = (ops.M @ (Q_new - Q_old)) / params.dt + ops.K @ Q_new + params.eta_gamma * (ops.B @ Q_new)
    F += ops.bulk_load(Q_new, params.bulk) / params.eta_dw**2
    F -= source
    return F


def step_functional(Q_new, Q_old, source, ops, params):
    """Incremental functional of one implicit Euler step; its gradient is ``nonlinear_residual``.

    ``E(Q) + |Q - Q_old|_M^2 / (2 dt) - <source, Q>`` with the control-free part of ``E``.
    """
    D = Q_new - Q_old
    val = 0.5 * float(np.sum(Q_new * (ops.K @ Q_new)))
    val += 0.5 * params.eta_gamma * float(np.sum(Q_new * (ops.B @ Q_new)))
    val += ops.bulk_energy(Q_new, params.bulk) / params.eta_dw**2
    val += 0.5 * float(np.sum(D * (ops.M @ D))) / params.dt
    return val - float(np.sum(source * Q_new))


def jacobian(Q_new, ops, params, lin_data=None):
    if lin_data is None:
        lin_data = linear_data(ops, params)
    data = lin_data + ops.bulk_hessian_data(Q_new, params.bulk) / params.eta_dw**2
    return ops.block_matrix(data)


def nonlinear_residual_jacobian(Q_new, Q_old, u_gamma, u_omega, ops, params):
    """Residual field of one implicit Euler step and its (symmetric) Jacobian."""
    src = control_source(ops, params, u_gamma, u_omega)
    return nonlinear_residual(Q_new, Q_old, src, ops, params), jacobian(Q_new, ops, params)


def energy(Q, ops, params, u_gamma=None, u_omega=None):
    """Discrete free energy: elastic + bulk/eta^2 + anchoring - external field."""
    E = 0.5 * float(np.sum(Q * (ops.K @ Q)))
    E += ops.bulk_energy(Q, params.bulk) / params.eta_dw**2
    if params.eta_gamma:
        anch = float(np.sum(Q * (ops.B @ Q)))
        if u_gamma is not None:
            anch += -2.0 * float(np.sum(Q * (ops.C_gamma @ u_gamma)))
            anch += float(np.sum(ops.face_measures[:, None] * u_gamma**2))
        E += 0.5 * params.eta_gamma * anch
    if u_omega is not None and params.lambda_omega:
        E -= params.lambda_omega * float(np.sum(Q * (ops.C_omega @ u_omega)))
    return E
