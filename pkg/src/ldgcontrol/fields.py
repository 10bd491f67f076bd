"""Analytic initial states, targets and initial controls of the defect experiments.

All constructors take points of shape ``(N, d)`` and return Q-coefficients of
shape ``(N, m)``.  Angles use the two-argument ``atan2(x2 - b, x1 - a)``.
"""
import numpy as np

from . import qtensor as qt

S_STAR_2D = 0.7
S_STAR_3D = 0.700005531


def theta(x, a, b):
    return np.arctan2(x[:, 1] - b, x[:, 0] - a)


def radius(x, a, b):
    return np.hypot(x[:, 0] - a, x[:, 1] - b)


def melt_factor(r, delta):
    """``r^2 / (r^2 + delta^2)``: forces Q = 0 at the defect center."""
    return r**2 / (r**2 + delta**2)


def _director(angle, dim):
    cols = [np.cos(angle), np.sin(angle)]
    if dim == 3:
        cols.append(np.zeros_like(angle))
    return np.stack(cols, axis=1)


def point_defect(x, center, s, delta, charge=0.5, phase=0.0, dim=None):
    """Uniaxial line field of the given charge around ``center`` with a melted core.

    The director angle is ``charge * theta + phase``; ``charge`` is +1/2 or -1/2
    for the nematic defects, and 1 for a vector (integer) defect.
    """
    dim = x.shape[1] if dim is None else dim
    a, b = center
    ang = charge * theta(x, a, b) + phase
    q = qt.uniaxial(np.full(len(x), s), _director(ang, dim))
    return melt_factor(radius(x, a, b), delta)[:, None] * q


# -- experiment 1: one +1/2 defect in the unit square ---------------------------
def exp1_initial(x, s=S_STAR_2D, delta=0.05):
    return point_defect(x, (0.5, 0.5), s, delta)


def exp1_target(x, s=S_STAR_2D, delta=0.05):
    return point_defect(x, (0.25, 0.35), s, delta)


def exp1_control(x, s=S_STAR_2D, delta=0.05):
    # full-angle director u = (cos theta, sin theta)
    return point_defect(x, (0.5, 0.5), s, delta, charge=1.0)


# -- experiment 2: a +1/2 / -1/2 pair ---------------------------------------------
def defect_pair(x, plus, minus, s=S_STAR_2D, delta=0.05):
    """Blend ``(1 - x1) Q_plus + x1 Q_minus`` of a +1/2 and a -1/2 defect."""
    qn = point_defect(x, plus, s, delta, charge=0.5, phase=np.pi / 2)
    qm = point_defect(x, minus, s, delta, charge=-0.5)
    t = x[:, 0:1]
    return (1.0 - t) * qn + t * qm


def exp2_initial(x, s=S_STAR_2D, delta=0.05):
    return defect_pair(x, (0.4, 0.505), (0.6, 0.495), s, delta)


def exp2_target(x, s=S_STAR_2D, delta=0.05):
    return defect_pair(x, (0.2, 0.6), (0.8, 0.4), s, delta)


def exp2_control(x, s=S_STAR_2D):
    q = qt.uniaxial(s, np.array([1.0, 0.0]))
    return np.broadcast_to(q, (len(x), 2)).copy()


# -- experiment 3: a +1/2 line defect in the unit cube ---------------------------
C0 = 0.6


def curve_offset(xi, c0=C0):
    """``f(xi) = 3 c0 xi^2 - 2 c0 xi^3``."""
    xi = np.asarray(xi, dtype=float)
    return 3.0 * c0 * xi**2 - 2.0 * c0 * xi**3


def target_curve(xi, c0=C0):
    """Points ``(f + 0.2, f + 0.2, xi)`` of the target defect line."""
    f = curve_offset(xi, c0) + 0.2
    return np.stack([f, f, np.asarray(xi, dtype=float)], axis=-1)


def exp3_initial(x, s=S_STAR_3D, delta=0.05):
    return point_defect(x, (0.5, 0.5), s, delta, dim=3)


def exp3_target(x, s=S_STAR_3D, delta=0.05, c0=C0):
    c = curve_offset(x[:, 2], c0) + 0.2
    dx, dy = x[:, 0] - c, x[:, 1] - c
    ang = 0.5 * np.arctan2(dy, dx)
    q = qt.uniaxial(np.full(len(x), s), _director(ang, 3))
    return melt_factor(np.hypot(dx, dy), delta)[:, None] * q


def exp3_control(x, s=S_STAR_3D, delta=0.05):
    return exp3_initial(x, s, delta)
