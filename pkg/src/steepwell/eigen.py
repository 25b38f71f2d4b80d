"""Smallest eigenvalue of a discrete Schroedinger operator by inverse iteration."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import NumericalError


def smallest_eigenvalue(K, V, *, tol=1e-8, max_iter=10_000, x0=None):
    """Lowest eigenpair of ``K + diag(V)`` with ``K`` symmetric positive semidefinite.

    The operator is shifted by ``min(V) - 1`` so the shifted matrix is SPD and
    inverse iteration converges to the bottom of the spectrum even when V is
    sign-changing.  Stops once the extrapolated Rayleigh-quotient error is below
    ``tol`` relative.

    Returns ``(eigenvalue, eigenvector, iterations)``.
    """
    V = np.asarray(V, dtype=float)
    m = V.size
    if m == 0:
        raise ValueError("empty operator")
    M = (K + sp.diags(V)).tocsc()
    shift = float(V.min()) - 1.0
    solve = spla.factorized((M - shift * sp.identity(m, format="csc")).tocsc())

    x = np.ones(m) if x0 is None else np.abs(np.asarray(x0, dtype=float)) + 1e-300
    x /= np.linalg.norm(x)
    rq = float(x @ (M @ x))
    prev_delta = None
    for it in range(1, max_iter + 1):
        y = solve(x)
        x = y / np.linalg.norm(y)
        new = float(x @ (M @ x))
        delta = abs(new - rq)
        rq = new
        scale = max(abs(rq), 1e-300)
        if prev_delta is not None and prev_delta > 0:
            r2 = min(delta / prev_delta, 0.999)
            err = delta * r2 / (1.0 - r2)
        else:
            err = delta
        if delta <= tol * scale and err <= tol * scale:
            if x.sum() < 0:
                x = -x
            return rq, x, it
        prev_delta = delta
    res = float(np.linalg.norm(M @ x - rq * x))
    raise NumericalError(f"inverse iteration did not converge in {max_iter} steps", residual=res)
