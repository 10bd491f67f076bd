import numpy as np
import pytest

from ldgcontrol import fem, fields, qtensor as qt
from ldgcontrol.control import ControlProblem, ControlSet, Targets
from ldgcontrol.mesh import build_unit_mesh


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def mesh2():
    return build_unit_mesh(2, 8)


@pytest.fixture(scope="session")
def ops2(mesh2):
    return fem.assemble(mesh2)


@pytest.fixture(scope="session")
def mesh3():
    return build_unit_mesh(3, 3)


@pytest.fixture(scope="session")
def ops3(mesh3):
    return fem.assemble(mesh3)


def random_feasible(rng, shape, bound=1.0):
    u = rng.normal(size=shape)
    return u * (bound * rng.uniform(0, 1, shape[0]) / np.linalg.norm(u, axis=1))[:, None]


def coarse_problem(n=8, tf=0.04, dt=0.004, **target_kw):
    """Experiment-1 setup on a coarse mesh and a short horizon."""
    mesh = build_unit_mesh(2, n)
    ops = fem.assemble(mesh)
    params = fem.ModelParams(qt.BULK_2D, dt=dt, tf=tf)
    Q0 = fem.interpolate(mesh, fields.exp1_initial)
    T = fem.interpolate(mesh, fields.exp1_target)
    targets = Targets(Q_omega=T, Q_tf=T, **target_kw)
    return ControlProblem(ops, params, Q0, targets)


def exp1_control(mesh):
    return ControlSet(u_gamma=fields.exp1_control(mesh.face_centroids))


# acceptance criteria outcomes, filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")
