"""Pure-NumPy coordinate-descent kernel (fallback for the compiled version).

Minimizes the penalized quadratic

    q(beta) = 0.5 * beta' G beta - c' beta + l1 * ||beta||_1 + 0.5 * l2 * ||beta||^2

by cyclic soft-threshold coordinate descent, updating ``beta`` in place.
``G`` must be symmetric positive semi-definite (a Gram matrix).
"""

from __future__ import annotations

import numpy as np


def _violation(s, lin, l1, l2, beta):
    """Max KKT violation of the quadratic at ``beta`` given ``s = G @ beta``."""
    g = s - lin + l2 * beta
    nz = beta != 0.0
    v = np.where(nz, np.abs(g + l1 * np.sign(beta)), np.maximum(0.0, np.abs(g) - l1))
    return float(v.max()) if v.size else 0.0


def cd_quadratic(gram, lin, l1, l2, beta, max_sweeps, tol):
    """Run up to ``max_sweeps`` cyclic sweeps; return ``(sweeps, kkt_violation)``.

    Convergence is declared when the max KKT violation of the quadratic drops
    to ``tol`` or below, verified against a freshly recomputed gradient.
    """
    q = beta.shape[0]
    if q == 0:
        return 0, 0.0
    gram = np.asarray(gram)
    lin = np.asarray(lin)
    denom = np.diagonal(gram) + l2
    s = gram @ beta
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        for k in range(q):
            old = beta[k]
            rho = lin[k] - s[k] + gram[k, k] * old
            if denom[k] <= 0.0:
                new = 0.0
            else:
                new = np.sign(rho) * max(abs(rho) - l1, 0.0) / denom[k]
            if new != old:
                s += gram[:, k] * (new - old)
                beta[k] = new
        if sweeps % 32 == 0:
            s = gram @ beta  # shed accumulated drift
        if _violation(s, lin, l1, l2, beta) <= tol:
            s = gram @ beta
            if _violation(s, lin, l1, l2, beta) <= tol:
                return sweeps, _violation(s, lin, l1, l2, beta)
    s = gram @ beta
    return sweeps, _violation(s, lin, l1, l2, beta)
