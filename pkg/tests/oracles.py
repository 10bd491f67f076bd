"""Test-only reference computations independent of the adjoint code path."""
import numpy as np

from ldgcontrol import fem
from ldgcontrol.adjoint import tracking_source
from ldgcontrol.forward import SolverOptions, linear_solve


def linearized_response(traj, d_gamma, d_omega, ops, params):
    """States ``Xi^k`` of the implicit Euler scheme linearized along ``traj``.

    ``J(Q^{k+1}) Xi^{k+1} = M Xi^k / dt + eta_gamma C_gamma d_gamma + lambda_omega C_omega d_omega^{k+1}``
    with ``Xi^0 = 0``.
    """
    K = params.n_steps
    opts = SolverOptions(linear_solver="direct")
    lin = fem.linear_data(ops, params)
    Xi = np.zeros((K + 1, ops.n_vertices, ops.m))
    for k in range(K):
        rhs = ops.M @ Xi[k] / params.dt + fem.control_source(
            ops, params, d_gamma, None if d_omega is None else d_omega[k + 1])
        J = fem.jacobian(traj[k + 1], ops, params, lin)
        Xi[k + 1] = fem.from_vec(linear_solve(J, fem.to_vec(rhs), opts)[0], ops.m)
    return Xi


def tracking_derivative(traj, Xi, targets, ops, params):
    """Directional derivative of the tracking terms along the state response ``Xi``."""
    return sum(float(np.sum(tracking_source(traj, targets, ops, params, k) * Xi[k]))
               for k in range(params.n_steps + 1))


def adjoint_pairing(adj, d_gamma, d_omega, ops, params):
    """``sum_{k>=1} dt <R^k, source(d^k)>``: the same derivative through the adjoint."""
    s = 0.0
    for k in range(1, params.n_steps + 1):
        src = fem.control_source(ops, params, d_gamma, None if d_omega is None else d_omega[k])
        s += params.dt * float(np.sum(adj.states[k] * src))
    return s
