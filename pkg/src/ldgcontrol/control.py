"""Tracking objective, reduced gradient, projection and projected gradient descent.

Control spaces are P0: the boundary control ``u_gamma`` is one Q-coefficient
vector per boundary face (constant in time) and the domain control
``u_omega`` one per cell and time level.  Gradients are Riesz
representatives, in ``L^2(Gamma)`` for the boundary part and in the
trapezoid-weighted ``L^2(0, tf; L^2(Omega))`` for the domain part.
"""
import csv
import logging
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import qtensor as qt
from .adjoint import solve_adjoint
from .forward import SolverOptions, solve_forward

log = logging.getLogger(__name__)


@dataclass
class ControlSet:
    u_gamma: np.ndarray = None   # (N_f, m)
    u_omega: np.ndarray = None   # (K+1, N_c, m)
    bound_gamma: float = 1.0
    bound_omega: object = np.inf  # scalar or per-cell array

    def copy(self, **changes):
        new = replace(self, **changes)
        if "u_gamma" not in changes and new.u_gamma is not None:
            new.u_gamma = new.u_gamma.copy()
        if "u_omega" not in changes and new.u_omega is not None:
            new.u_omega = new.u_omega.copy()
        return new

    def feasible(self, tol=1e-12):
        ok = True
        if self.u_gamma is not None:
            ok &= bool(np.all(np.linalg.norm(self.u_gamma, axis=-1) <= self.bound_gamma + tol))
        if self.u_omega is not None:
            ok &= bool(np.all(np.linalg.norm(self.u_omega, axis=-1) <= np.asarray(self.bound_omega) + tol))
        return ok


@dataclass
class Targets:
    """Tracking targets and objective weights.

    ``Q_omega`` and ``Q_gamma`` are P1 fields, either one field used at every
    time level or an array with a leading time axis.
    """

    Q_omega: np.ndarray
    Q_tf: np.ndarray
    Q_gamma: np.ndarray = None
    beta_omega: float = 1.0
    beta_gamma: float = 0.0
    beta_tf: float = 1.0
    alpha_omega: float = 0.0
    alpha_gamma: float = 0.01

    def __post_init__(self):
        ws = [self.beta_omega, self.beta_gamma, self.beta_tf, self.alpha_omega, self.alpha_gamma]
        if min(ws) < 0:
            raise ValueError("objective weights must be non-negative")
        if self.Q_gamma is None:
            self.Q_gamma = np.zeros_like(self.Q_tf)

    def omega_at(self, k):
        return self.Q_omega[k] if self.Q_omega.ndim == 3 else self.Q_omega

    def gamma_at(self, k):
        return self.Q_gamma[k] if self.Q_gamma.ndim == 3 else self.Q_gamma


def _quad(ops, X, A):
    return float(np.sum(X * (A @ X)))


def objective(traj, ctrl, targets, ops, params):
    w = params.time_weights()
    J = 0.0
    for k in range(params.n_steps + 1):
        Q = traj[k]
        if targets.beta_omega:
            J += 0.5 * targets.beta_omega * w[k] * _quad(ops, Q - targets.omega_at(k), ops.M)
        if targets.beta_gamma:
            J += 0.5 * targets.beta_gamma * w[k] * _quad(ops, Q - targets.gamma_at(k), ops.B)
    if targets.beta_tf:
        J += 0.5 * targets.beta_tf * _quad(ops, traj.final() - targets.Q_tf, ops.M)
    if targets.alpha_omega and ctrl.u_omega is not None:
        sq = np.einsum("kcm,kcm,c->k", ctrl.u_omega, ctrl.u_omega, ops.cell_volumes)
        J += 0.5 * targets.alpha_omega * float(w @ sq)
    if targets.alpha_gamma and ctrl.u_gamma is not None:
        J += 0.5 * targets.alpha_gamma * params.tf * float(
            np.sum(ops.face_measures[:, None] * ctrl.u_gamma**2))
    return J


@dataclass
class Gradient:
    """Riesz representatives (``g_gamma``, ``g_omega``) of the reduced derivative."""

    g_gamma: np.ndarray = None
    g_omega: np.ndarray = None


def reduced_gradient(adj, ctrl, targets, ops, params):
    dt, K = params.dt, params.n_steps
    grad = Gradient()
    if ctrl.u_gamma is not None:
        # sum_{k>=1} dt R^k: the transpose of the implicit Euler control source
        Rint = dt * adj.states[1:].sum(axis=0)
        dual = params.eta_gamma * (ops.C_gamma.T @ Rint)
        grad.g_gamma = dual / ops.face_measures[:, None] + targets.alpha_gamma * params.tf * ctrl.u_gamma
    if ctrl.u_omega is not None:
        w = params.time_weights()
        g = targets.alpha_omega * ctrl.u_omega.copy()
        if params.lambda_omega:
            for k in range(1, K + 1):
                dual = params.lambda_omega * dt * (ops.C_omega.T @ adj.states[k])
                g[k] += dual / (w[k] * ops.cell_volumes[:, None])
        grad.g_omega = g
    return grad


# -- geometry of the control space -----------------------------------------
def inner(a, b, ops, params):
    """Control-space inner product of two ControlSet-like objects (or gradients)."""
    s = 0.0
    ag, bg = _parts(a), _parts(b)
    if ag[0] is not None and bg[0] is not None:
        s += float(np.sum(ops.face_measures[:, None] * ag[0] * bg[0]))
    if ag[1] is not None and bg[1] is not None:
        w = params.time_weights()
        s += float(np.einsum("k,c,kcm,kcm->", w, ops.cell_volumes, ag[1], bg[1]))
    return s


def _parts(x):
    if isinstance(x, Gradient):
        return x.g_gamma, x.g_omega
    return x.u_gamma, x.u_omega


def _clip(P, bound):
    nrm = np.linalg.norm(P, axis=-1, keepdims=True)
    bound = np.asarray(bound, dtype=float)
    if bound.ndim:
        bound = bound[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(nrm > bound, bound / np.where(nrm > 0, nrm, 1.0), 1.0)
    return P * scale


def project(ctrl):
    """Pointwise Frobenius-ball projection (exact L^2 projection for P0 data)."""
    out = ctrl.copy()
    if out.u_gamma is not None:
        out.u_gamma = _clip(out.u_gamma, ctrl.bound_gamma)
    if out.u_omega is not None:
        out.u_omega = _clip(out.u_omega, ctrl.bound_omega)
    return out


def step(ctrl, grad, sigma, active=("gamma", "omega")):
    new = ctrl.copy()
    if "gamma" in active and ctrl.u_gamma is not None:
        new.u_gamma = ctrl.u_gamma - sigma * grad.g_gamma
    if "omega" in active and ctrl.u_omega is not None:
        new.u_omega = ctrl.u_omega - sigma * grad.g_omega
    return project(new)


def residual(ctrl, grad, ops, params, active=("gamma", "omega")):
    """``|| u - Pi(u - g) ||`` over the active controls, mass-weighted."""
    r = step(ctrl, grad, 1.0, active)
    diff = ControlSet(
        u_gamma=None if ctrl.u_gamma is None else ctrl.u_gamma - r.u_gamma,
        u_omega=None if ctrl.u_omega is None else ctrl.u_omega - r.u_omega)
    return float(np.sqrt(inner(diff, diff, ops, params)))


def active_fraction(ctrl, rtol=1e-9):
    if ctrl.u_gamma is None:
        return 0.0
    nrm = np.linalg.norm(ctrl.u_gamma, axis=-1)
    return float(np.mean(nrm >= ctrl.bound_gamma * (1 - rtol)))


# -- problem wrapper and optimizer ------------------------------------------
class ControlProblem:
    """Reduced problem ``u -> J(S(u), u)`` on a fixed discretization."""

    def __init__(self, ops, params, Q0, targets, solver_opts=None, checkpoint_dir=None):
        self.ops = ops
        self.params = params
        self.Q0 = Q0
        self.targets = targets
        self.solver_opts = solver_opts or SolverOptions()
        self.checkpoint_dir = checkpoint_dir
        self.n_forward = 0
        self.n_adjoint = 0

    def forward(self, ctrl):
        self.n_forward += 1
        ckpt = None
        if self.checkpoint_dir is not None:
            # one directory per solve so a line-search trial cannot clobber the iterate
            ckpt = Path(self.checkpoint_dir) / f"forward_{self.n_forward:05d}"
        return solve_forward(self.Q0, ctrl, self.ops, self.params, self.solver_opts,
                             checkpoint_dir=ckpt)

    def discard(self, traj):
        """Free the checkpoint files of a trajectory that is no longer needed."""
        if traj is not None and getattr(traj, "directory", None) is not None:
            shutil.rmtree(traj.directory, ignore_errors=True)

    def evaluate(self, ctrl):
        """Returns ``(J, trajectory, newton_report)``."""
        traj, report = self.forward(ctrl)
        return objective(traj, ctrl, self.targets, self.ops, self.params), traj, report

    def objective(self, ctrl):
        return self.evaluate(ctrl)[0]

    def gradient(self, ctrl, traj=None):
        if traj is None:
            traj, _ = self.forward(ctrl)
        self.n_adjoint += 1
        adj = solve_adjoint(traj, self.targets, self.ops, self.params, self.solver_opts)
        return reduced_gradient(adj, ctrl, self.targets, self.ops, self.params)


@dataclass
class OptimizerOptions:
    max_iter: int = 200
    rtol: float = 1e-6
    atol: float = 0.0
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    sigma0: float = 1.0
    max_halvings: int = 30
    active: tuple = ("gamma",)


@dataclass
class OptimizerState:
    ctrl: ControlSet
    J: float
    residual: float
    sigma: float
    iteration: int
    status: str = "running"
    history: list = field(default_factory=list)
    trajectory: object = None


HISTORY_FIELDS = ["iter", "J", "residual", "step", "newton_iterations", "line_search_trials",
                  "active_fraction"]


def optimize(problem, init_ctrl, opts=None, callback=None):
    """Projected gradient descent with Armijo backtracking along the projection arc.

    Stops on ``residual <= atol + rtol (1 + residual_0)``, on ``max_iter`` or
    when the line search fails (status ``"line_search_failed"``, best iterate
    kept).  Returns the final ``OptimizerState``; ``state.history`` holds one
    dict per iteration with the keys of ``HISTORY_FIELDS``.
    """
    opts = opts or OptimizerOptions()
    ops, params = problem.ops, problem.params
    ctrl = project(init_ctrl)
    J, traj, rep = problem.evaluate(ctrl)
    grad = problem.gradient(ctrl, traj)
    res = residual(ctrl, grad, ops, params, opts.active)
    tol = opts.atol + opts.rtol * (1.0 + res)
    state = OptimizerState(ctrl, J, res, 0.0, 0, trajectory=traj)
    state.history.append(dict(iter=0, J=J, residual=res, step=0.0,
                              newton_iterations=rep.total_iterations, line_search_trials=0,
                              active_fraction=active_fraction(ctrl)))
    sigma = opts.sigma0
    log.info("iter %3d  J=%.6e  res=%.3e", 0, J, res)
    while True:
        if res <= tol:
            state.status = "converged"
            break
        if state.iteration >= opts.max_iter:
            state.status = "max_iter"
            break
        accepted = False
        for trial in range(1, opts.max_halvings + 2):
            cand = step(ctrl, grad, sigma, opts.active)
            diff = ControlSet(
                u_gamma=None if ctrl.u_gamma is None else cand.u_gamma - ctrl.u_gamma,
                u_omega=None if ctrl.u_omega is None else cand.u_omega - ctrl.u_omega)
            slope = inner(grad, diff, ops, params)
            Jc, trc, repc = problem.evaluate(cand)
            if Jc <= J + opts.armijo_c * slope and Jc <= J:
                accepted = True
                break
            problem.discard(trc)
            sigma *= opts.backtrack
        if not accepted:
            state.status = "line_search_failed"
            break
        problem.discard(traj)
        ctrl, J, traj = cand, Jc, trc
        grad = problem.gradient(ctrl, traj)
        res = residual(ctrl, grad, ops, params, opts.active)
        state.iteration += 1
        state.ctrl, state.J, state.residual, state.sigma, state.trajectory = ctrl, J, res, sigma, traj
        rec = dict(iter=state.iteration, J=J, residual=res, step=sigma,
                   newton_iterations=repc.total_iterations, line_search_trials=trial,
                   active_fraction=active_fraction(ctrl))
        state.history.append(rec)
        log.info("iter %3d  J=%.6e  res=%.3e  step=%.3e  trials=%d", state.iteration, J, res, sigma, trial)
        if callback is not None:
            callback(state)
        sigma *= 2.0
    return state


def write_history(path, history):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS)
        writer.writeheader()
        for rec in history:
            writer.writerow(rec)


def control_eigenvalues(ctrl):
    """Eigenvalues of the boundary control on each face, descending."""
    return qt.eigenvalues(ctrl.u_gamma)
