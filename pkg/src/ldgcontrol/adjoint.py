"""Discrete adjoint of the implicit Euler scheme.

With step equations ``F_k(Q^{k+1}, Q^k) = 0`` and Jacobians
``J_k = M/dt + K + eta_gamma B + H(Q^k)/eta_dw^2`` the exact transpose of
the linearized scheme gives, for ``R^k = lambda^k / dt``,

    dt J_K R^K = g_K
    dt J_k R^k = g_k + M R^{k+1},     k = K-1, ..., 0

where ``g_k`` is the derivative of the trapezoid-discretized tracking terms
with respect to ``Q^k``.  ``J_k`` is symmetric, so no transpose is formed.
``R`` approximates the continuous adjoint state pointwise in time.
"""
from dataclasses import dataclass, replace

import numpy as np

from . import fem
from .errors import LinearSolveError
from .forward import SolverOptions, linear_solve


@dataclass
class AdjointTrajectory:
    states: np.ndarray  # (K+1, N_v, m)
    dt: float

    def __getitem__(self, k):
        return self.states[k]

    def __len__(self):
        return len(self.states)


def tracking_source(traj, targets, ops, params, k):
    """``dJ/dQ^k`` of the tracking terms (dual vector as a field)."""
    w = params.time_weights()[k]
    Q = traj[k]
    g = np.zeros_like(Q)
    if targets.beta_omega:
        g += w * targets.beta_omega * (ops.M @ (Q - targets.omega_at(k)))
    if targets.beta_gamma:
        g += w * targets.beta_gamma * (ops.B @ (Q - targets.gamma_at(k)))
    if k == params.n_steps and targets.beta_tf:
        g += targets.beta_tf * (ops.M @ (Q - targets.Q_tf))
    return g


def solve_adjoint(traj, targets, ops, params, opts=None):
    opts = opts or SolverOptions()
    opts = replace(opts, cg_rtol=opts.adjoint_cg_rtol)
    K = params.n_steps
    if len(traj) != K + 1:
        raise ValueError("trajectory does not match the time grid")
    lin_data = fem.linear_data(ops, params)
    R = np.zeros((K + 1, ops.n_vertices, ops.m))
    rhs = tracking_source(traj, targets, ops, params, K)
    for k in range(K, -1, -1):
        if k < K:
            rhs = tracking_source(traj, targets, ops, params, k) + ops.M @ R[k + 1]
        if not np.any(rhs):
            continue
        J = fem.jacobian(traj[k], ops, params, lin_data)
        try:
            x, _ = linear_solve(J * params.dt, fem.to_vec(rhs), opts, step=k)
        except LinearSolveError as exc:
            exc.step = k
            raise
        R[k] = fem.from_vec(x, ops.m)
    return AdjointTrajectory(R, params.dt)
