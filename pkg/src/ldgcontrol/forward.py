"""Implicit Euler + Newton integration of the discrete Q-tensor gradient flow."""
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from . import fem
from .errors import LinearSolveError, NewtonError, PreconditionError
from .linalg import pcg

log = logging.getLogger(__name__)

MAGIC = b"LDGQSTEP"
_HEADER = struct.Struct("<8sqqq")  # magic, dim, N_v, step: 32 bytes


@dataclass(frozen=True)
class SolverOptions:
    newton_rtol: float = 1e-10
    newton_maxiter: int = 25
    max_halvings: int = 8
    linear_solver: str = "cg"  # "cg" (Jacobi PCG) or "direct"
    cg_rtol: float = 1e-10
    # the backward sweep feeds the gradient directly, so it is solved tighter
    adjoint_cg_rtol: float = 1e-13
    # sparse LU when CG meets negative curvature (J is indefinite once
    # dt * |psi''| / eta_dw^2 exceeds the mass term, e.g. near Q = 0)
    indefinite_fallback: bool = True


def _direct(A, b, step):
    x = spla.spsolve(A.tocsc(), b)
    if not np.all(np.isfinite(x)):
        raise LinearSolveError("singular Newton/adjoint system", step=step)
    return x, 1


def linear_solve(A, b, opts, step=None):
    if opts.linear_solver == "direct":
        return _direct(A, b, step)
    try:
        return pcg(A, b, rtol=opts.cg_rtol, maxiter=10 * A.shape[0])
    except LinearSolveError as exc:
        exc.step = step
        if exc.indefinite and opts.indefinite_fallback:
            log.debug("step %s: indefinite system, switching to sparse LU", step)
            return _direct(A, b, step)
        raise


# -- checkpoint files ------------------------------------------------------
def write_state(path, Q, dim, step):
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, dim, Q.shape[0], step))
        fh.write(np.ascontiguousarray(Q, dtype="<f8").tobytes())
    os.replace(tmp, path)


def read_state(path):
    """Return ``(Q, dim, step)`` from a checkpoint file."""
    raw = Path(path).read_bytes()
    magic, dim, nv, step = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise PreconditionError(f"{path}: not a state checkpoint")
    m = 2 if dim == 2 else 5
    Q = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if Q.size != nv * m:
        raise PreconditionError(f"{path}: truncated checkpoint")
    return Q.reshape(nv, m).copy(), dim, step


@dataclass
class Trajectory:
    """States ``Q^0 .. Q^K`` kept in memory or as one checkpoint file per step."""

    dt: float
    states: list = field(default_factory=list)
    directory: Path = None
    dim: int = 2
    _count: int = 0

    def append(self, Q):
        if self.directory is None:
            self.states.append(Q)
        else:
            write_state(self.step_path(self._count), Q, self.dim, self._count)
        self._count += 1

    def step_path(self, k):
        return Path(self.directory) / f"state_{k:06d}.bin"

    def __len__(self):
        return self._count

    def __getitem__(self, k):
        if k < 0:
            k += self._count
        if not 0 <= k < self._count:
            raise IndexError(k)
        if self.directory is None:
            return self.states[k]
        return read_state(self.step_path(k))[0]

    def __iter__(self):
        return (self[k] for k in range(self._count))

    @property
    def n_steps(self):
        return self._count - 1

    @property
    def tf(self):
        return self.n_steps * self.dt

    def final(self):
        return self[self._count - 1]

    def as_array(self):
        return np.stack(list(self))


@dataclass
class NewtonReport:
    iterations: list = field(default_factory=list)
    residuals: list = field(default_factory=list)

    @property
    def total_iterations(self):
        return int(sum(self.iterations))


def newton_step(Q_old, source, ops, params, opts, lin_data=None, step=None):
    """Solve one implicit Euler step; returns ``(Q_new, iterations, ||F||)``.

    The step residual is the gradient of ``fem.step_functional``, which serves
    as the line-search merit: a trial is accepted on Armijo decrease of that
    functional, halving up to ``max_halvings`` times.  Where the Jacobian is
    indefinite and the Newton direction is not a descent direction, the
    direction falls back to ``-(M/dt + K + eta_gamma B)^{-1} F``.
    """
    if lin_data is None:
        lin_data = fem.linear_data(ops, params)
    Q = Q_old.copy()
    F = fem.nonlinear_residual(Q, Q_old, source, ops, params)
    nF = np.linalg.norm(F)
    phi = fem.step_functional(Q, Q_old, source, ops, params)
    tol = opts.newton_rtol * (1.0 + nF)
    for it in range(opts.newton_maxiter + 1):
        if nF <= tol:
            return Q, it, nF
        if it == opts.newton_maxiter:
            break
        f = fem.to_vec(F)
        d, _ = linear_solve(fem.jacobian(Q, ops, params, lin_data), -f, opts, step)
        slope = f @ d
        if not slope < 0:
            d, _ = linear_solve(ops.block_matrix(lin_data), -f, opts, step)
            slope = f @ d
        d = fem.from_vec(d, ops.m)
        t = 1.0
        for _ in range(opts.max_halvings + 1):
            Qt = Q + t * d
            phit = fem.step_functional(Qt, Q_old, source, ops, params)
            Ft = fem.nonlinear_residual(Qt, Q_old, source, ops, params)
            nFt = np.linalg.norm(Ft)
            if phit <= phi + 1e-4 * t * slope:
                break
            # decrease below the rounding level of the functional: use ||F|| instead
            if abs(t * slope) <= 1e-12 * (1.0 + abs(phi)) and nFt < nF:
                break
            t *= 0.5
        Q, F, nF, phi = Qt, Ft, nFt, phit
        if not np.isfinite(nF):
            break
    raise NewtonError(
        f"Newton did not converge at step {step} (|F|={nF:.3e}, tol={tol:.3e}); "
        "the time step is likely too large for eta_dw", step=step, residual=nF)


def solve_forward(Q0, controls, ops, params, opts=None, checkpoint_dir=None):
    """Integrate from ``Q0`` to ``tf``; returns ``(Trajectory, NewtonReport)``.

    ``controls`` provides ``u_gamma`` (faces x m, time independent, or None)
    and ``u_omega`` (K+1 x cells x m, or None); step ``k -> k+1`` uses
    ``u_omega[k+1]``.
    """
    opts = opts or SolverOptions()
    Q0 = np.asarray(Q0, dtype=float)
    if Q0.shape != (ops.n_vertices, ops.m):
        raise PreconditionError(f"initial state has shape {Q0.shape}, expected {(ops.n_vertices, ops.m)}")
    if not np.all(np.isfinite(Q0)):
        raise PreconditionError("initial state is not finite")
    u_gamma = getattr(controls, "u_gamma", None)
    u_omega = getattr(controls, "u_omega", None)
    K = params.n_steps
    if u_gamma is not None and u_gamma.shape != (ops.mesh.n_faces, ops.m):
        raise PreconditionError("boundary control has the wrong shape")
    if u_omega is not None and u_omega.shape != (K + 1, ops.mesh.n_cells, ops.m):
        raise PreconditionError("domain control has the wrong shape")

    if checkpoint_dir is not None:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
    traj = Trajectory(params.dt, directory=checkpoint_dir, dim=ops.dim)
    report = NewtonReport()
    lin_data = fem.linear_data(ops, params)
    traj.append(Q0.copy())
    Q = Q0.copy()
    for k in range(K):
        src = fem.control_source(ops, params, u_gamma, None if u_omega is None else u_omega[k + 1])
        Q, its, res = newton_step(Q, src, ops, params, opts, lin_data, step=k + 1)
        report.iterations.append(its)
        report.residuals.append(res)
        traj.append(Q)
    log.debug("forward solve: %d steps, %d Newton iterations", K, report.total_iterations)
    return traj, report
