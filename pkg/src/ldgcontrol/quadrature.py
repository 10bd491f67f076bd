"""Quadrature on simplices in barycentric form.

A rule is ``(bary, weights)`` with ``bary`` of shape ``(nq, d+1)`` and weights
summing to one, so that ``int_T f ~= |T| * sum_q w_q f(x_q)``.
"""
from functools import lru_cache
from itertools import permutations
from math import ceil, factorial

import numpy as np
from scipy.special import roots_jacobi


def _orbit(point):
    return np.array(sorted(set(permutations(point))))


def _symmetric(orbits):
    pts, wts = [], []
    for point, w in orbits:
        o = _orbit(point)
        pts.append(o)
        wts.append(np.full(len(o), w))
    return np.concatenate(pts), np.concatenate(wts)


def _dunavant4():
    a, b = 0.445948490915965, 0.091576213509771
    return _symmetric([((a, a, 1 - 2 * a), 0.223381589678011),
                       ((b, b, 1 - 2 * b), 0.109951743655322)])


def _tet14():
    # degree-5 rule, positive weights (volume-normalized)
    a1, a2, b = 0.0927352503108912, 0.3108859192633006, 0.0455037041256496
    return _symmetric([((a1, a1, a1, 1 - 3 * a1), 6 * 0.01224884051939366),
                       ((a2, a2, a2, 1 - 3 * a2), 6 * 0.01878132095300264),
                       ((b, b, 0.5 - b, 0.5 - b), 6 * 0.007091003462846911)])


def _gauss_jacobi01(n, alpha):
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def collapsed_rule(dim, degree):
    """Conical product (Stroud) rule exact for polynomials of ``degree``."""
    n = max(1, ceil((degree + 1) / 2))
    if dim == 2:
        u, wu = _gauss_jacobi01(n, 1.0)
        v, wv = _gauss_jacobi01(n, 0.0)
        U, V = np.meshgrid(u, v, indexing="ij")
        W = np.outer(wu, wv)
        x, y = U, (1 - U) * V
        bary = np.stack([1 - x - y, x, y], axis=-1).reshape(-1, 3)
    elif dim == 3:
        u, wu = _gauss_jacobi01(n, 2.0)
        v, wv = _gauss_jacobi01(n, 1.0)
        s, ws = _gauss_jacobi01(n, 0.0)
        U, V, S = np.meshgrid(u, v, s, indexing="ij")
        W = np.einsum("i,j,k->ijk", wu, wv, ws)
        x, y, z = U, (1 - U) * V, (1 - U) * (1 - V) * S
        bary = np.stack([1 - x - y - z, x, y, z], axis=-1).reshape(-1, 4)
    else:
        raise ValueError(dim)
    w = W.ravel() * factorial(dim)
    return bary, w


@lru_cache(maxsize=None)
def simplex_rule(dim, degree):
    """Default rule of at least ``degree`` with the fewest points available here."""
    if dim == 2 and degree <= 4:
        return _dunavant4()
    if dim == 3 and degree <= 5:
        return _tet14()
    return collapsed_rule(dim, degree)


def monomial_integral(exponents):
    """Exact integral of ``prod x_i**k_i`` over the reference simplex."""
    num = np.prod([factorial(k) for k in exponents])
    return num / factorial(sum(exponents) + len(exponents))
