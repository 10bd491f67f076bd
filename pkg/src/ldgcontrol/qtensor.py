"""Symmetric traceless tensors in coefficient form and the Landau-de Gennes bulk potential.

A Q-tensor is stored as its coefficient vector ``c`` in a fixed orthonormal
basis ``{E^i}`` of symmetric traceless ``d x d`` matrices (2 coefficients for
``d = 2``, 5 for ``d = 3``).  Orthonormality makes the Frobenius inner
product the Euclidean one, so gradients of scalar functions of ``Q`` taken
in coefficient space are automatically the traceless symmetric part.

All functions broadcast over leading axes: ``q`` may have shape ``(m,)`` or
``(..., m)``.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import PreconditionError

SQ2 = np.sqrt(2.0)
SQ6 = np.sqrt(6.0)


@dataclass(frozen=True)
class Basis:
    dim: int
    mats: np.ndarray  # (m, d, d)

    @property
    def size(self):
        return self.mats.shape[0]


@lru_cache(maxsize=None)
def basis(dim):
    """Orthonormal basis of symmetric traceless matrices for ``dim`` 2 or 3."""
    if dim == 2:
        mats = np.array([
            [[1.0, 0.0], [0.0, -1.0]],
            [[0.0, 1.0], [1.0, 0.0]],
        ]) / SQ2
    elif dim == 3:
        mats = np.zeros((5, 3, 3))
        mats[0] = np.diag([1.0, -1.0, 0.0]) / SQ2
        mats[1] = np.diag([1.0, 1.0, -2.0]) / SQ6
        for k, (i, j) in enumerate([(0, 1), (0, 2), (1, 2)]):
            mats[2 + k, i, j] = mats[2 + k, j, i] = 1.0 / SQ2
    else:
        raise PreconditionError(f"dimension must be 2 or 3, got {dim}")
    mats.setflags(write=False)
    return Basis(dim, mats)


def ncoeffs(dim):
    return 2 if dim == 2 else 5


def dim_of(q):
    m = np.shape(q)[-1]
    if m == 2:
        return 2
    if m == 5:
        return 3
    raise PreconditionError(f"coefficient vectors have length 2 or 5, got {m}")


@lru_cache(maxsize=None)
def cubic_tensor(dim):
    """T[i,j,k] = tr(E^i E^j E^k); fully symmetric because the E^i are."""
    E = basis(dim).mats
    T = np.einsum("iab,jbc,kca->ijk", E, E, E)
    T[np.abs(T) < 1e-15] = 0.0
    T.setflags(write=False)
    return T


def to_matrix(q):
    q = np.asarray(q, dtype=float)
    return np.einsum("...i,iab->...ab", q, basis(dim_of(q)).mats)


def from_matrix(M, tol=1e-10):
    M = np.asarray(M, dtype=float)
    d = M.shape[-1]
    if M.shape[-2] != d:
        raise PreconditionError("matrix must be square")
    if np.any(np.abs(np.trace(M, axis1=-2, axis2=-1)) >= tol):
        raise PreconditionError("matrix is not traceless")
    if np.any(np.abs(M - np.swapaxes(M, -1, -2)) >= tol):
        raise PreconditionError("matrix is not symmetric")
    return np.einsum("...ab,iab->...i", M, basis(d).mats)


def tr2(q):
    q = np.asarray(q, dtype=float)
    return np.einsum("...i,...i->...", q, q)


def _cubic_parts(q):
    """``(Tqq, tr3)`` with ``Tqq[..., i] = T[i, j, k] q_j q_k``; ``None`` in 2D."""
    m = q.shape[-1]
    if m == 2:
        return None, np.zeros(q.shape[:-1])
    T = cubic_tensor(3)
    qq = (q[..., :, None] * q[..., None, :]).reshape(q.shape[:-1] + (m * m,))
    Tqq = qq @ T.reshape(m, m * m).T
    return Tqq, np.sum(Tqq * q, axis=-1)


def _cubic_matrix(q):
    """``T[i, j, k] q_k`` as a ``(..., m, m)`` array."""
    m = q.shape[-1]
    T = cubic_tensor(3)
    return (q @ T.reshape(m * m, m).T).reshape(q.shape[:-1] + (m, m))


def tr3(q):
    q = np.asarray(q, dtype=float)
    dim_of(q)
    return _cubic_parts(q)[1]


@dataclass(frozen=True)
class BulkParams:
    """Double-well coefficients and the cutoff window ``b1 <= tr(Q^2) <= b2``."""

    a0: float
    a2: float
    a3: float
    a4: float
    b1: float = 1.0
    b2: float = 2.0

    def __post_init__(self):
        if not (self.a0 > 0 and self.a2 > 0 and self.a4 > 0 and self.a3 >= 0):
            raise PreconditionError("need a0, a2, a4 > 0 and a3 >= 0")
        if not (1.0 <= self.b1 < self.b2):
            raise PreconditionError("need 1 <= b1 < b2")

    @property
    def d2(self):
        """Stabilization constant of the convex split (see ``convex_split``)."""
        return convex_split_constant(self)


# Presets of the two- and three-dimensional experiments.
BULK_2D = BulkParams(a0=1.0, a2=16.32653061225, a3=0.0, a4=66.63890045814)
BULK_3D = BulkParams(a0=1.0, a2=7.5021037403, a3=60.975813166, a4=66.519068908)


def cutoff_rho(r, b1=1.0, b2=2.0):
    """Quintic smoothstep cutoff in ``r = tr(Q^2)``; returns ``(rho, rho', rho'')``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise PreconditionError("cutoff argument must be non-negative")
    if np.all(r <= b1):
        return np.ones_like(r), np.zeros_like(r), np.zeros_like(r)
    w = b2 - b1
    t = np.clip((r - b1) / w, 0.0, 1.0)
    inside = (r > b1) & (r < b2)
    rho = 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)
    d1 = np.where(inside, -30.0 * t**2 * (1.0 - t) ** 2 / w, 0.0)
    d2 = np.where(inside, -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / w**2, 0.0)
    return rho, d1, d2


class _Local:
    """Pointwise intermediates shared by the potential, its gradient and Hessian."""

    def __init__(self, q, p):
        self.q = q = np.asarray(q, dtype=float)
        dim_of(q)
        self.p = p
        self.r = tr2(q)
        cubic = p.a3 != 0.0 and q.shape[-1] == 5
        if cubic:
            self.Tqq, self.t3 = _cubic_parts(q)
        else:
            self.Tqq = None
            self.t3 = np.zeros_like(self.r)
        self.rho, self.dr, self.ddr = cutoff_rho(self.r, p.b1, p.b2)
        self.window = bool(np.any(self.dr) or np.any(self.ddr) or np.any(self.rho != 1.0))

    def f(self):
        p, r = self.p, self.r
        return p.a0 - 0.5 * p.a2 * r - p.a3 / 3.0 * self.t3 + 0.25 * p.a4 * r**2

    def grad_tilde(self):
        p, q = self.p, self.q
        g = (p.a4 * self.r - p.a2)[..., None] * q
        if self.Tqq is not None:
            g = g - p.a3 * self.Tqq
        return g

    def hess_tilde(self):
        p, q = self.p, self.q
        m = q.shape[-1]
        H = (2.0 * p.a4) * (q[..., :, None] * q[..., None, :])
        if self.Tqq is not None:
            H -= (2.0 * p.a3) * _cubic_matrix(q)
        diag = H.reshape(H.shape[:-2] + (m * m,))[..., :: m + 1]
        diag += (p.a4 * self.r - p.a2)[..., None]
        return H


def psi_tilde(q, p):
    return _Local(q, p).f()


def _psi_tilde_grad(q, p):
    return _Local(q, p).grad_tilde()


def _psi_tilde_hess(q, p):
    return _Local(q, p).hess_tilde()


def psi(q, p):
    """Modified bulk potential: the double well blended into ``a4**2 tr(Q^2)``."""
    L = _Local(q, p)
    if not L.window:
        return L.f()
    return L.f() * L.rho + p.a4**2 * L.r * (1.0 - L.rho)


def psi_grad(q, p):
    L = _Local(q, p)
    gt = L.grad_tilde()
    if not L.window:
        return gt
    # derivative of the tail g(r) = a4^2 r (1 - rho) with respect to r
    dg = p.a4**2 * (1.0 - L.rho - L.r * L.dr)
    scal = (2.0 * (L.f() * L.dr + dg))[..., None]
    return L.rho[..., None] * gt + scal * L.q


def psi_hess(q, p):
    """Full Hessian in coefficient space, shape ``(..., m, m)``."""
    L = _Local(q, p)
    H = L.hess_tilde()
    if not L.window:
        return H
    q, r, rho, dr, ddr = L.q, L.r, L.rho, L.dr, L.ddr
    m = q.shape[-1]
    f = L.f()
    gf = L.grad_tilde()
    dg = p.a4**2 * (1.0 - rho - r * dr)
    ddg = -p.a4**2 * (2.0 * dr + r * ddr)
    qq = q[..., :, None] * q[..., None, :]
    cross = gf[..., :, None] * q[..., None, :]
    cross = cross + np.swapaxes(cross, -1, -2)
    ex = lambda a: a[..., None, None]  # noqa: E731
    return (ex(rho) * H
            + 2.0 * ex(dr) * cross
            + 4.0 * ex(f * ddr + ddg) * qq
            + 2.0 * ex(f * dr + dg) * np.eye(m))


def psi_hess_apply(q, direction, p):
    return np.einsum("...ij,...j->...i", psi_hess(q, p), np.asarray(direction, dtype=float))


def convex_split_constant(p):
    """Upper bound on the negative curvature of ``psi`` over all Q-tensors.

    Every term of ``psi_hess`` is bounded at ``tr(Q^2) = b2`` using
    ``|rho'| <= 15/(8 w)`` and ``|rho''| <= 10/(sqrt(3) w^2)``, ``w = b2 - b1``.
    The cutoff window dominates: with the ``a4**2`` tail the double-well bound
    ``a2 + a3 sqrt(b2) + 3 a4 b2`` alone is far too small there.
    """
    r = p.b2
    w = p.b2 - p.b1
    d1 = 15.0 / (8.0 * w)
    dd = 10.0 / (np.sqrt(3.0) * w**2)
    f = p.a0 + 0.5 * p.a2 * r + p.a3 * r**1.5 / 3.0 + 0.25 * p.a4 * r**2
    gf = p.a2 * np.sqrt(r) + p.a3 * r + p.a4 * r**1.5
    hf = p.a2 + 2.0 * p.a3 * np.sqrt(r) + 3.0 * p.a4 * r
    g1 = p.a4**2 * (1.0 + r * d1)
    g2 = p.a4**2 * (2.0 * d1 + r * dd)
    bound = hf + 4.0 * d1 * gf * np.sqrt(r) + 4.0 * (f * dd + g2) * r + 2.0 * (f * d1 + g1)
    return 2.0 * float(bound)


def convex_split(q, p, d2=None):
    """Return ``(psi_c, psi_e)`` with ``psi = psi_c - psi_e`` and ``psi_e = d2/2 tr(Q^2)``."""
    if d2 is None:
        d2 = convex_split_constant(p)
    pe = 0.5 * d2 * tr2(q)
    return psi(q, p) + pe, pe


def uniaxial(s, n, dim=None):
    """Coefficients of ``s (n (x) n - I/d)``; ``n`` has shape ``(..., d)``."""
    n = np.asarray(n, dtype=float)
    d = n.shape[-1] if dim is None else dim
    if n.shape[-1] != d:
        raise PreconditionError("director length does not match dimension")
    if np.any(np.abs(np.linalg.norm(n, axis=-1) - 1.0) > 1e-12):
        raise PreconditionError("director must be a unit vector")
    E = basis(d).mats
    # E^i are traceless, so the identity part drops out of the projection
    c = np.einsum("...a,iab,...b->...i", n, E, n)
    return np.asarray(s, dtype=float)[..., None] * c


def eigenvalues(q):
    """Eigenvalues sorted in descending order, closed form."""
    q = np.asarray(q, dtype=float)
    d = dim_of(q)
    if d == 2:
        lam = np.sqrt(tr2(q) / 2.0)
        return np.stack([lam, -lam], axis=-1)
    # traceless cubic: lambda^3 - (tr Q^2 / 2) lambda - det Q = 0
    r = tr2(q)
    det = tr3(q) / 3.0
    pp = np.sqrt(r / 6.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        arg = np.where(pp > 0, det / (2.0 * np.where(pp > 0, pp, 1.0) ** 3), 0.0)
    phi = np.arccos(np.clip(arg, -1.0, 1.0)) / 3.0
    l1 = 2.0 * pp * np.cos(phi)
    l3 = 2.0 * pp * np.cos(phi + 2.0 * np.pi / 3.0)
    return np.stack([l1, -l1 - l3, l3], axis=-1)


def _normalize_sign(v):
    # first component with |v_i| > tiny is made positive
    idx = np.argmax(np.abs(v) > 1e-12, axis=-1)
    lead = np.take_along_axis(v, idx[..., None], axis=-1)
    return np.where(lead < 0, -v, v)


def eig_max(q):
    """Largest eigenvalue and its unit eigenvector (first nonzero component positive)."""
    q = np.asarray(q, dtype=float)
    d = dim_of(q)
    if d == 2:
        lam = np.sqrt(tr2(q) / 2.0)
        half = 0.5 * np.arctan2(q[..., 1], q[..., 0])
        v = np.stack([np.cos(half), np.sin(half)], axis=-1)
        return lam, _normalize_sign(v)
    lam = eigenvalues(q)[..., 0]
    A = to_matrix(q) - lam[..., None, None] * np.eye(3)
    rows = [A[..., 0, :], A[..., 1, :], A[..., 2, :]]
    cands = np.stack([np.cross(rows[0], rows[1]), np.cross(rows[0], rows[2]),
                      np.cross(rows[1], rows[2])], axis=-2)
    norms = np.linalg.norm(cands, axis=-1)
    best = np.argmax(norms, axis=-1)
    v = np.take_along_axis(cands, best[..., None, None], axis=-2)[..., 0, :]
    nv = np.take_along_axis(norms, best[..., None], axis=-1)[..., 0]
    scale = np.max(np.abs(A), axis=(-1, -2))
    bad = nv <= 1e-10 * np.maximum(scale, 1e-300) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        v = v / np.where(nv > 0, nv, 1.0)[..., None]
    if np.any(bad):
        # repeated top eigenvalue (or Q = 0): any vector of the eigenspace will do
        _, vecs = np.linalg.eigh(to_matrix(q[bad]))
        v[bad] = vecs[..., :, -1]
    return lam, _normalize_sign(v)


def biaxiality(q):
    """``1 - 6 (tr Q^3)^2 / (tr Q^2)^3``, zero at ``Q = 0``.

    In two dimensions every Q-tensor is uniaxial and the measure is 0.
    """
    q = np.asarray(q, dtype=float)
    r = tr2(q)
    if dim_of(q) == 2:
        return np.zeros_like(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        b = 1.0 - 6.0 * tr3(q) ** 2 / r**3
    b = np.where(r > 1e-24, b, 0.0)
    # rounding only; the exact value lies in [0, 1]
    return np.clip(b, 0.0, 1.0)


def uniaxial_order(p, dim):
    """Positive ``s`` at which the uniaxial family is stationary for the double well."""
    # With c = n(x)n - I/d: tr(c^2) = (d-1)/d, tr(c^3) = (d-1)(d-2)/d^2.
    k2 = (dim - 1) / dim
    k3 = (dim - 1) * (dim - 2) / dim**2
    # d/ds psi_tilde(s c) = s (-a2 k2 - a3 k3 s + a4 k2^2 s^2) = 0
    roots = np.roots([p.a4 * k2**2, -p.a3 * k3, -p.a2 * k2])
    roots = roots[np.isreal(roots)].real
    return float(roots[roots > 0].max())
