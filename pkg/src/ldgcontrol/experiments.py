"""Set up and run the three defect-control experiments from a ``ProblemConfig``."""
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

from . import fem, fields, vtkio
from .config import ProblemConfig
from .control import (ControlProblem, ControlSet, OptimizerOptions, Targets, control_eigenvalues,
                      optimize, write_history)
from .defects import locate_defects
from .forward import SolverOptions
from .mesh import build_unit_mesh

log = logging.getLogger(__name__)

# (initial state, target, initial boundary control) of each preset
_FIELDS = {
    1: (fields.exp1_initial, fields.exp1_target, fields.exp1_control),
    2: (fields.exp2_initial, fields.exp2_target, fields.exp2_control),
    3: (fields.exp3_initial, fields.exp3_target, fields.exp3_control),
}


@dataclass
class Setup:
    cfg: ProblemConfig
    mesh: object
    ops: fem.Operators
    params: fem.ModelParams
    problem: ControlProblem
    init_ctrl: ControlSet
    opt_opts: OptimizerOptions


def build(cfg, checkpoint_dir=None):
    """Mesh, operators, targets and initial control for ``cfg``."""
    mesh = build_unit_mesh(cfg.dim, cfg.n_per_side)
    ops = fem.assemble(mesh)
    params = fem.ModelParams(cfg.bulk, eta_dw=cfg.eta_dw, eta_gamma=cfg.eta_gamma,
                             lambda_omega=cfg.lambda_omega, dt=cfg.dt, tf=cfg.tf)
    # the melted-core width follows the correlation length
    delta = cfg.eta_dw / 4.0
    init_f, target_f, ctrl_f = _FIELDS[cfg.preset]
    Q0 = fem.interpolate(mesh, lambda x: init_f(x, delta=delta))
    target = fem.interpolate(mesh, lambda x: target_f(x, delta=delta))
    targets = Targets(Q_omega=target, Q_tf=target, beta_omega=cfg.beta_omega,
                      beta_gamma=cfg.beta_gamma, beta_tf=cfg.beta_tf,
                      alpha_omega=cfg.alpha_omega, alpha_gamma=cfg.alpha_gamma)
    xc = mesh.face_centroids
    u0 = ctrl_f(xc) if cfg.preset == 2 else ctrl_f(xc, delta=delta)
    init = ControlSet(u_gamma=u0, bound_gamma=cfg.bound_gamma, bound_omega=cfg.bound_omega)
    solver = SolverOptions(newton_rtol=cfg.newton_rtol, linear_solver=cfg.linear_solver)
    problem = ControlProblem(ops, params, Q0, targets, solver, checkpoint_dir=checkpoint_dir)
    opts = OptimizerOptions(max_iter=cfg.max_iter, rtol=cfg.rtol, armijo_c=cfg.armijo_c,
                            backtrack=cfg.backtrack, sigma0=cfg.sigma0,
                            max_halvings=cfg.max_halvings)
    return Setup(cfg, mesh, ops, params, problem, init, opts)


@dataclass
class RunResult:
    setup: Setup
    ctrl: ControlSet
    trajectory: object
    report: object
    state: object = None  # OptimizerState, None for forward-only runs
    files: dict = None


def _write_text(path, text):
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_json(path, obj):
    _write_text(path, json.dumps(obj, indent=2) + "\n")


def run_experiment(cfg, forward_only=False, callback=None):
    """Optimize (or just simulate) ``cfg`` and write the artifacts to ``cfg.out_dir``.

    Files: ``config.ini``, ``history.csv`` (optimization only), ``Q_t0.vtk``,
    ``Q_tf.vtk``, ``u_gamma.vtk``, ``defects.json`` and ``summary.json``.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / "checkpoints" if cfg.checkpoint else None
    setup = build(cfg, checkpoint_dir=ckpt)
    files = dict(config=out / "config.ini")
    _write_text(files["config"], cfg.to_ini())
    state = None
    if forward_only:
        ctrl = setup.init_ctrl
        traj, _ = setup.problem.forward(ctrl)
    else:
        state = optimize(setup.problem, setup.init_ctrl, setup.opt_opts, callback=callback)
        ctrl, traj = state.ctrl, state.trajectory
        files["history"] = out / "history.csv"
        write_history(files["history"], state.history)
    files["Q_t0"] = out / "Q_t0.vtk"
    files["Q_tf"] = out / "Q_tf.vtk"
    files["u_gamma"] = out / "u_gamma.vtk"
    files["defects"] = out / "defects.json"
    vtkio.write_field(files["Q_t0"], setup.mesh, traj[0], "Q at t = 0")
    vtkio.write_field(files["Q_tf"], setup.mesh, traj.final(), f"Q at t = {cfg.tf:g}")
    vtkio.write_boundary(files["u_gamma"], setup.mesh, ctrl.u_gamma, "boundary control")
    report = locate_defects(setup.mesh, traj.final(), bulk=cfg.bulk)
    _write_json(files["defects"], report.to_dict())
    lam = control_eigenvalues(ctrl)
    summary = dict(preset=cfg.preset, forward_only=forward_only,
                   n_defects=len(report), control_eigenvalue_range=[float(lam.min()), float(lam.max())],
                   forward_solves=setup.problem.n_forward, adjoint_solves=setup.problem.n_adjoint)
    if state is not None:
        summary.update(status=state.status, iterations=state.iteration, J=state.J,
                       J0=state.history[0]["J"], residual=state.residual,
                       residual0=state.history[0]["residual"])
    files["summary"] = out / "summary.json"
    _write_json(files["summary"], summary)
    log.info("wrote %s", ", ".join(str(p) for p in files.values()))
    return RunResult(setup, ctrl, traj, report, state, files)

