"""Jacobi-preconditioned conjugate gradients for the SPD systems of each time step."""
import numpy as np

from .errors import LinearSolveError


def pcg(A, b, x0=None, rtol=1e-10, maxiter=None, diag=None):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Stops when ``||b - A x|| <= rtol * ||b||``.  Raises ``LinearSolveError``
    on non-convergence or when a search direction has non-positive
    curvature (the matrix is not SPD).  Returns ``(x, iterations)``.
    """
    n = b.shape[0]
    if maxiter is None:
        maxiter = 10 * n
    if diag is None:
        diag = A.diagonal()
    inv_diag = 1.0 / diag
    normb = np.linalg.norm(b)
    if normb == 0.0:
        return np.zeros_like(b), 0
    tolb = rtol * normb

    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = x0.copy()
        r = b - A @ x
    if np.linalg.norm(r) <= tolb:
        return x, 0
    z = inv_diag * r
    p = z.copy()
    gamma = r @ z
    for it in range(1, maxiter + 1):
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0.0:
            raise LinearSolveError("matrix is not positive definite", iterations=it, indefinite=True)
        alpha = gamma / curv
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tolb:
            return x, it
        z = inv_diag * r
        gamma_old = gamma
        gamma = r @ z
        p *= gamma / gamma_old
        p += z
    raise LinearSolveError(
        f"CG did not converge in {maxiter} iterations "
        f"(relative residual {np.linalg.norm(r) / normb:.3e})", iterations=maxiter)
