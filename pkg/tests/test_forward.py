import numpy as np
import pytest

from ldgcontrol import fem, fields, qtensor as qt
from ldgcontrol.control import ControlSet
from ldgcontrol.errors import NewtonError, PreconditionError
from ldgcontrol.forward import (SolverOptions, Trajectory, read_state, solve_forward,
                                write_state)
from ldgcontrol.mesh import build_unit_mesh


def test_constant_minimizer_is_a_fixed_point(ops2):
    p = fem.ModelParams(qt.BULK_2D, tf=0.04)
    q = qt.uniaxial(0.7, np.array([np.cos(0.3), np.sin(0.3)]))
    Q0 = np.tile(q, (ops2.n_vertices, 1))
    u = np.tile(q, (ops2.mesh.n_faces, 1))
    traj, rep = solve_forward(Q0, ControlSet(u_gamma=u), ops2, p)
    assert len(traj) == 11 and traj.tf == pytest.approx(0.04)
    assert max(np.abs(Q - Q0).max() for Q in traj) < 1e-9


def test_fixed_point_3d(ops3):
    p = fem.ModelParams(qt.BULK_3D, dt=0.006, tf=0.03)
    q = qt.uniaxial(qt.uniaxial_order(qt.BULK_3D, 3), np.array([0.0, 0.6, 0.8]))
    Q0 = np.tile(q, (ops3.n_vertices, 1))
    traj, _ = solve_forward(Q0, ControlSet(u_gamma=np.tile(q, (ops3.mesh.n_faces, 1))), ops3, p)
    assert max(np.abs(Q - Q0).max() for Q in traj) < 1e-9


def test_newton_tolerance_met(ops2):
    p = fem.ModelParams(qt.BULK_2D, tf=0.04)
    Q0 = fem.interpolate(ops2.mesh, fields.exp1_initial)
    traj, rep = solve_forward(Q0, ControlSet(u_gamma=fields.exp1_control(ops2.mesh.face_centroids)),
                              ops2, p)
    assert len(rep.iterations) == 10 and all(i >= 1 for i in rep.iterations)
    src = fem.control_source(ops2, p, fields.exp1_control(ops2.mesh.face_centroids), None)
    for k in range(10):
        F = fem.nonlinear_residual(traj[k + 1], traj[k], src, ops2, p)
        F0 = fem.nonlinear_residual(traj[k], traj[k], src, ops2, p)
        assert np.linalg.norm(F) <= 1e-10 * (1 + np.linalg.norm(F0))


def test_direct_and_cg_agree(ops2):
    p = fem.ModelParams(qt.BULK_2D, tf=0.02)
    Q0 = fem.interpolate(ops2.mesh, fields.exp1_initial)
    ctrl = ControlSet(u_gamma=fields.exp1_control(ops2.mesh.face_centroids))
    a, _ = solve_forward(Q0, ctrl, ops2, p)
    b, _ = solve_forward(Q0, ctrl, ops2, p, SolverOptions(linear_solver="direct"))
    assert np.abs(a.final() - b.final()).max() < 1e-9


def test_energy_decay_without_anchoring(rng):
    mesh = build_unit_mesh(2, 8)
    ops = fem.assemble(mesh)
    p = fem.ModelParams(qt.BULK_2D, eta_gamma=0.0, dt=0.004, tf=0.2)
    Q0 = rng.uniform(-0.5, 0.5, size=(mesh.n_vertices, 2))
    traj, _ = solve_forward(Q0, None, ops, p)
    E = [fem.energy(Q, ops, p) for Q in traj]
    assert np.all(np.diff(E) <= 1e-10)


def test_experiment1_states_stay_in_physical_ball():
    mesh = build_unit_mesh(2, 32)
    ops = fem.assemble(mesh)
    p = fem.ModelParams(qt.BULK_2D)
    Q0 = fem.interpolate(mesh, fields.exp1_initial)
    traj, _ = solve_forward(Q0, ControlSet(u_gamma=fields.exp1_control(mesh.face_centroids)), ops, p)
    assert np.abs(traj.final()).max() <= 1 + 1e-6
    assert np.linalg.norm(traj.final(), axis=1).max() <= 1 + 1e-6


def test_time_step_convergence_order():
    mesh = build_unit_mesh(2, 8)
    ops = fem.assemble(mesh)
    Q0 = fem.interpolate(mesh, fields.exp1_initial)
    ctrl = ControlSet(u_gamma=fields.exp1_control(mesh.face_centroids))

    def final(dt):
        p = fem.ModelParams(qt.BULK_2D, dt=dt, tf=0.04)
        return solve_forward(Q0, ctrl, ops, p)[0].final()

    ref = final(0.0000625)
    dts = [0.004, 0.002, 0.001]
    errs = [np.sqrt(np.sum((final(dt) - ref) * (ops.M @ (final(dt) - ref)))) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope >= 0.9


def test_step_index_on_newton_failure(ops2):
    p = fem.ModelParams(qt.BULK_2D, dt=0.004, tf=0.04)
    Q0 = fem.interpolate(ops2.mesh, fields.exp1_initial)
    with pytest.raises(NewtonError) as err:
        solve_forward(Q0, None, ops2, p, SolverOptions(newton_maxiter=1))
    assert err.value.step == 1 and err.value.residual > 0


def test_input_validation(ops2):
    p = fem.ModelParams(qt.BULK_2D, tf=0.04)
    with pytest.raises(PreconditionError):
        solve_forward(np.zeros((3, 2)), None, ops2, p)
    bad = np.zeros((ops2.n_vertices, 2))
    bad[0, 0] = np.inf
    with pytest.raises(PreconditionError):
        solve_forward(bad, None, ops2, p)
    with pytest.raises(PreconditionError):
        solve_forward(np.zeros((ops2.n_vertices, 2)), ControlSet(u_gamma=np.zeros((2, 2))), ops2, p)


def test_state_file_round_trip(tmp_path, rng):
    Q = rng.normal(size=(9, 5))
    path = tmp_path / "s.bin"
    write_state(path, Q, 3, 7)
    raw = path.read_bytes()
    assert len(raw) == 32 + Q.size * 8 and raw[:8] == b"LDGQSTEP"
    Q2, dim, step = read_state(path)
    assert np.array_equal(Q, Q2) and (dim, step) == (3, 7)
    path.write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(PreconditionError):
        read_state(path)
    path.write_bytes(raw[:-8])
    with pytest.raises(PreconditionError):
        read_state(path)


def test_disk_trajectory_matches_memory(ops2, tmp_path):
    p = fem.ModelParams(qt.BULK_2D, tf=0.02)
    Q0 = fem.interpolate(ops2.mesh, fields.exp1_initial)
    ctrl = ControlSet(u_gamma=fields.exp1_control(ops2.mesh.face_centroids))
    mem, _ = solve_forward(Q0, ctrl, ops2, p)
    disk, _ = solve_forward(Q0, ctrl, ops2, p, checkpoint_dir=tmp_path / "ck")
    assert len(list((tmp_path / "ck").glob("state_*.bin"))) == 6
    assert np.array_equal(mem.as_array(), disk.as_array())
    assert np.array_equal(disk[-1], mem.final())


def test_trajectory_indexing():
    t = Trajectory(0.1)
    for k in range(3):
        t.append(np.full((2, 2), k))
    assert t.n_steps == 2 and t.tf == pytest.approx(0.2)
    assert t[-1][0, 0] == 2
    with pytest.raises(IndexError):
        t[3]
