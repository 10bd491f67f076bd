import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ldgcontrol import qtensor as qt
from ldgcontrol.errors import PreconditionError

P2, P3 = qt.BULK_2D, qt.BULK_3D
finite = st.floats(-3, 3, allow_nan=False)


def coeffs(m):
    return arrays(float, (m,), elements=finite)


def random_unit(rng, n, d):
    v = rng.normal(size=(n, d))
    return v / np.linalg.norm(v, axis=1)[:, None]


def fd_grad(f, q, eps=1e-6):
    m = q.shape[-1]
    return np.stack([(f(q + eps * e) - f(q - eps * e)) / (2 * eps) for e in np.eye(m)], axis=-1)


# -- basis ---------------------------------------------------------------
@pytest.mark.parametrize("dim", [2, 3])
def test_basis_symmetric_traceless_orthonormal(dim):
    E = qt.basis(dim).mats
    assert E.shape[0] == qt.ncoeffs(dim)
    assert np.all(np.trace(E, axis1=1, axis2=2) == 0)
    assert np.array_equal(E, np.swapaxes(E, 1, 2))
    gram = np.einsum("iab,jab->ij", E, E)
    assert np.allclose(gram, np.eye(len(E)), atol=1e-14)


def test_basis_rejects_other_dimensions():
    with pytest.raises(PreconditionError):
        qt.basis(4)


@pytest.mark.parametrize("dim", [2, 3])
def test_to_matrix_zero_and_unit_vectors(dim):
    m = qt.ncoeffs(dim)
    assert np.all(qt.to_matrix(np.zeros(m)) == 0)
    for i in range(m):
        assert np.array_equal(qt.to_matrix(np.eye(m)[i]), qt.basis(dim).mats[i])


def test_matrix_round_trip_3d(rng):
    A = rng.normal(size=(100, 3, 3))
    M = A + np.swapaxes(A, 1, 2)
    M -= np.trace(M, axis1=1, axis2=2)[:, None, None] * np.eye(3) / 3
    assert np.max(np.abs(qt.to_matrix(qt.from_matrix(M)) - M)) < 1e-13


@given(coeffs(5))
def test_coefficient_round_trip(q):
    assert np.allclose(qt.from_matrix(qt.to_matrix(q)), q, atol=1e-14, rtol=0)


@given(st.sampled_from([2, 5]).flatmap(coeffs))
def test_frobenius_norm_is_coefficient_norm(q):
    assert abs(np.linalg.norm(qt.to_matrix(q)) - np.linalg.norm(q)) <= 1e-14 * (1 + np.linalg.norm(q))


def test_from_matrix_rejects_bad_input():
    with pytest.raises(PreconditionError):
        qt.from_matrix(np.eye(3))
    with pytest.raises(PreconditionError):
        qt.from_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_traces_match_matrix_traces(rng):
    q = rng.normal(size=(50, 5))
    M = qt.to_matrix(q)
    assert np.allclose(qt.tr2(q), np.einsum("nab,nba->n", M, M), atol=1e-13)
    assert np.allclose(qt.tr3(q), np.einsum("nab,nbc,nca->n", M, M, M), atol=1e-12)
    assert np.all(qt.tr3(rng.normal(size=(10, 2))) == 0)


# -- bulk potential --------------------------------------------------------
def test_bulk_params_validation():
    with pytest.raises(PreconditionError):
        qt.BulkParams(1.0, 0.0, 0.0, 1.0)
    with pytest.raises(PreconditionError):
        qt.BulkParams(1.0, 1.0, 0.0, 1.0, b1=2.0, b2=1.0)


def test_psi_tilde_values():
    assert qt.psi_tilde(np.zeros(2), P2) == 1.0
    q = qt.uniaxial(0.7, np.array([1.0, 0.0]))
    r = 0.245
    expected = 1 - P2.a2 / 2 * r + P2.a4 / 4 * r**2
    assert qt.tr2(q) == pytest.approx(0.245, abs=1e-15)
    assert qt.psi_tilde(q, P2) == pytest.approx(expected, rel=1e-14)
    # the constants put the well bottom at zero, up to rounding of the printed digits
    assert abs(qt.psi_tilde(q, P2)) < 1e-10


@pytest.mark.parametrize("dim,s,p", [(2, 0.7, P2), (3, 0.700005531, P3)])
def test_uniaxial_minimizer_is_critical_in_s(dim, s, p):
    n = np.eye(dim)[0]
    f = lambda t: qt.psi_tilde(qt.uniaxial(t, n), p)  # noqa: E731
    eps = 1e-6
    assert abs((f(s + eps) - f(s - eps)) / (2 * eps)) < 1e-6
    assert qt.uniaxial_order(p, dim) == pytest.approx(s, abs=1e-8)


def test_cutoff_examples():
    assert tuple(map(float, qt.cutoff_rho(0.5))) == (1.0, 0.0, 0.0)
    assert tuple(map(float, qt.cutoff_rho(3.0))) == (0.0, 0.0, 0.0)
    rho, d1, d2 = qt.cutoff_rho(1.5)
    assert 0 < rho < 1 and d1 < 0
    eps = 1e-5
    f = lambda r: qt.cutoff_rho(r)[0]  # noqa: E731
    g = lambda r: qt.cutoff_rho(r)[1]  # noqa: E731
    assert abs((f(1.5 + eps) - f(1.5 - eps)) / (2 * eps) - d1) < 1e-6
    assert abs((g(1.5 + eps) - g(1.5 - eps)) / (2 * eps) - d2) < 1e-6
    with pytest.raises(PreconditionError):
        qt.cutoff_rho(-0.1)


def test_cutoff_monotone_and_c2():
    r = np.linspace(0.0, 3.0, 3001)
    rho, d1, d2 = qt.cutoff_rho(r)
    assert np.all(np.diff(rho) <= 0)
    # derivatives vanish continuously at both ends of the window
    for b in (1.0, 2.0):
        _, a, c = qt.cutoff_rho(np.array([b - 1e-9, b + 1e-9]))
        assert np.all(np.abs(a) < 1e-6) and np.all(np.abs(c) < 1e-6)


@pytest.mark.parametrize("p,m", [(P2, 2), (P3, 5)])
def test_psi_derivatives_match_finite_differences(p, m, rng):
    # radii cover the plain double well, the cutoff window and the quadratic tail
    q = rng.normal(size=(100, m))
    q *= (rng.uniform(0.05, 1.8, 100) / np.linalg.norm(q, axis=1))[:, None]
    g = qt.psi_grad(q, p)
    g_fd = fd_grad(lambda x: qt.psi(x, p), q)
    assert np.max(np.linalg.norm(g - g_fd, axis=1) / np.maximum(np.linalg.norm(g, axis=1), 1)) < 1e-6
    v = rng.normal(size=q.shape)
    eps = 1e-6
    hv = qt.psi_hess_apply(q, v, p)
    hv_fd = (qt.psi_grad(q + eps * v, p) - qt.psi_grad(q - eps * v, p)) / (2 * eps)
    assert np.max(np.linalg.norm(hv - hv_fd, axis=1) / np.maximum(np.linalg.norm(hv, axis=1), 1)) < 1e-5


@pytest.mark.parametrize("p,m", [(P2, 2), (P3, 5)])
def test_hessian_symmetric(p, m, rng):
    q = rng.normal(size=(200, m))
    H = qt.psi_hess(q, p)
    a, b = rng.normal(size=(2, 200, m))
    lhs = np.einsum("ni,nij,nj->n", a, H, b)
    rhs = np.einsum("ni,nij,nj->n", b, H, a)
    assert np.max(np.abs(lhs - rhs) / np.maximum(np.abs(lhs), 1)) < 1e-12


def test_psi_grad_vanishes_at_zero():
    assert np.all(qt.psi_grad(np.zeros(2), P2) == 0)
    assert np.all(qt.psi_grad(np.zeros(5), P3) == 0)


def test_psi_grad_vanishes_only_at_s_star_2d(rng):
    n = random_unit(rng, 10, 2)
    assert np.max(np.abs(qt.psi_grad(qt.uniaxial(np.full(10, 0.7), n), P2))) < 1e-10
    assert np.sqrt(2 * P2.a2 / P2.a4) == pytest.approx(0.7, abs=1e-12)
    for s in (0.5, 0.69, 0.71, 0.9):
        assert np.max(np.abs(qt.psi_grad(qt.uniaxial(s, n[0]), P2))) > 1e-3


def test_psi_equals_double_well_below_cutoff(rng):
    q = rng.normal(size=(500, 5))
    q *= (rng.uniform(0, 0.999, 500) / np.linalg.norm(q, axis=1))[:, None]
    assert np.array_equal(qt.psi(q, P3), qt.psi_tilde(q, P3))


@pytest.mark.parametrize("p,m", [(P2, 2), (P3, 5)])
def test_growth_bounds(p, m, rng):
    # constants fitted once on 2e5 samples with |Q| in [0, 10], then frozen
    c0, c1, c2 = 4500.0, 31000.0, 2.8e5
    q = rng.normal(size=(20000, m))
    rad = rng.uniform(0, 10, 20000)
    q *= (rad / np.linalg.norm(q, axis=1))[:, None]
    assert np.all(np.abs(qt.psi(q, p)) <= p.a0 + c0 * rad**2)
    assert np.all(np.linalg.norm(qt.psi_grad(q, p), axis=1) <= c1 * rad + 1e-12)
    assert np.all(np.linalg.norm(qt.psi_hess(q, p), ord=2, axis=(1, 2)) <= c2)


def test_third_derivative_vanishes_outside_window(rng):
    # beyond b2 the modified potential is exactly a4^2 tr(Q^2): constant Hessian
    q = rng.normal(size=(100, 5))
    q *= (rng.uniform(1.5, 4, 100) / np.linalg.norm(q, axis=1))[:, None]
    H = qt.psi_hess(q, P3)
    assert np.allclose(H, 2 * P3.a4**2 * np.eye(5), rtol=1e-13)


def test_hessian_lipschitz_on_samples(rng):
    q1 = rng.normal(size=(2000, 5)) * rng.uniform(0, 1, (2000, 1))
    q2 = q1 + 1e-3 * rng.normal(size=q1.shape)
    dH = np.linalg.norm(qt.psi_hess(q1, P3) - qt.psi_hess(q2, P3), ord=2, axis=(1, 2))
    ratio = dH / np.linalg.norm(q1 - q2, axis=1)
    # bounded ratio; a non-Lipschitz Hessian would blow up somewhere on the samples
    assert ratio.max() < 2e7


# -- convex split ----------------------------------------------------------
def test_convex_split_identity_and_zero(rng):
    q = rng.normal(size=(100, 5))
    pc, pe = qt.convex_split(q, P3)
    assert np.allclose(pc - pe, qt.psi(q, P3), rtol=1e-12, atol=1e-12 * np.abs(pc).max())
    assert np.allclose(pe, 0.5 * P3.d2 * qt.tr2(q))
    assert tuple(map(float, qt.convex_split(np.zeros(5), P3))) == (P3.a0, 0.0)


@pytest.mark.parametrize("p,m", [(P2, 2), (P3, 5)])
def test_convex_part_is_monotone(p, m, rng):
    d2 = p.d2
    q1 = rng.normal(size=(1000, m)) * rng.uniform(0, 2, (1000, 1))
    q2 = rng.normal(size=(1000, m)) * rng.uniform(0, 2, (1000, 1))
    g = lambda q: qt.psi_grad(q, p) + d2 * q  # noqa: E731
    assert np.all(np.sum((g(q1) - g(q2)) * (q1 - q2), axis=1) >= 0)


@pytest.mark.parametrize("p,m", [(P2, 2), (P3, 5)])
def test_convex_part_lower_bound(p, m, rng):
    q = rng.normal(size=(2000, m)) * rng.uniform(0, 3, (2000, 1))
    pc, _ = qt.convex_split(q, p)
    assert np.all(pc >= p.a0 + 0.25 * p.d2 * qt.tr2(q) - 1e-9)


# -- uniaxial and eigen-structure -----------------------------------------
def test_uniaxial_examples(rng):
    n = random_unit(rng, 20, 3)
    assert np.all(qt.uniaxial(np.zeros(20), n) == 0)
    assert np.allclose(qt.tr2(qt.uniaxial(np.full(20, 0.4), n)), 0.16 * 2 / 3, atol=1e-15)
    assert qt.tr2(qt.uniaxial(0.7, np.array([0.6, 0.8]))) == pytest.approx(0.245, abs=1e-15)
    assert np.array_equal(qt.uniaxial(0.3, n), qt.uniaxial(0.3, -n))
    M = qt.to_matrix(qt.uniaxial(0.5, n[0]))
    assert np.allclose(M, 0.5 * (np.outer(n[0], n[0]) - np.eye(3) / 3), atol=1e-15)
    with pytest.raises(PreconditionError):
        qt.uniaxial(0.5, np.array([1.0, 1.0]))


def test_eig_max_uniaxial_2d():
    lam, v = qt.eig_max(qt.uniaxial(0.7, np.array([1.0, 0.0])))
    assert lam == pytest.approx(0.35, abs=1e-15)
    assert np.allclose(v, [1.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("m,d", [(2, 2), (5, 3)])
def test_eigen_closed_form_matches_eigh(m, d, rng):
    q = rng.normal(size=(500, m))
    w, V = np.linalg.eigh(qt.to_matrix(q))
    assert np.allclose(qt.eigenvalues(q), w[:, ::-1], atol=1e-12)
    lam, v = qt.eig_max(q)
    assert np.allclose(lam, w[:, -1], atol=1e-12)
    # same line as eigh's top eigenvector, first nonzero component positive
    assert np.allclose(np.abs(np.sum(v * V[:, :, -1], axis=1)), 1, atol=1e-9)
    assert np.allclose(np.linalg.norm(v, axis=1), 1, atol=1e-14)
    lead = v[np.arange(500), np.argmax(np.abs(v) > 1e-12, axis=1)]
    assert np.all(lead > 0)


def test_eig_max_degenerate_cases():
    lam, v = qt.eig_max(np.zeros(5))
    assert lam == 0 and np.linalg.norm(v) == pytest.approx(1)
    # oblate uniaxial: repeated top eigenvalue
    q = qt.uniaxial(-0.5, np.array([0.0, 0.0, 1.0]))
    lam, v = qt.eig_max(q)
    assert lam == pytest.approx(0.5 / 3)
    assert abs(v[2]) < 1e-12


def test_biaxiality(rng):
    n = random_unit(rng, 50, 3)
    s = rng.uniform(-1, 1, 50)
    assert np.max(qt.biaxiality(qt.uniaxial(s, n))) < 1e-10
    b = qt.biaxiality(rng.normal(size=(1000, 5)))
    assert np.all((b >= 0) & (b <= 1))
    assert qt.biaxiality(np.zeros(5)) == 0
    assert np.all(qt.biaxiality(rng.normal(size=(5, 2))) == 0)
    # diag(1, 0, -1) is maximally biaxial
    assert qt.biaxiality(qt.from_matrix(np.diag([1.0, 0.0, -1.0]))) == pytest.approx(1.0)


@settings(max_examples=50)
@given(coeffs(5))
def test_biaxiality_in_unit_interval(q):
    b = qt.biaxiality(q)
    assert 0.0 <= b <= 1.0
