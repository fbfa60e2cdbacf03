"""Compiled OMP kernel.

Kept separate so the pure-Python layer in ``recon`` stays readable.  The
kernel grows an orthonormal basis of the selected atoms one column at a time
(classical Gram-Schmidt with one re-orthogonalisation pass), which is the
recursive form of the least-squares projection.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def omp_kernel(phi_t, y, k, rank_tol):
    """Run OMP on ``y`` with the transposed sensing matrix ``phi_t`` (M x N).

    Returns ``(x, support, n_used, residual_norm)`` where ``support[:n_used]``
    lists the selected atoms in selection order.
    """
    m, n = phi_t.shape
    q = np.zeros((k, n))
    r_mat = np.zeros((k, k))
    qy = np.zeros(k)
    dependent = np.zeros(k, np.bool_)
    selected = np.zeros(m, np.bool_)
    support = np.full(k, -1, np.int64)
    resid = y.copy()
    new_resid = np.empty(n)
    atom = np.empty(n)

    prev_norm = 0.0
    for i in range(n):
        prev_norm += resid[i] * resid[i]
    prev_norm = np.sqrt(prev_norm)

    used = 0
    while used < k:
        # matched filter; strict '>' keeps the smallest index on ties
        corr = np.dot(phi_t, resid)
        best = -1.0
        best_j = -1
        for j in range(m):
            if selected[j]:
                continue
            s = abs(corr[j])
            if s > best:
                best = s
                best_j = j
        if best_j < 0:
            break

        for i in range(n):
            atom[i] = phi_t[best_j, i]
        for _ in range(2):
            for c in range(used):
                if dependent[c]:
                    continue
                h = 0.0
                for i in range(n):
                    h += q[c, i] * atom[i]
                r_mat[c, used] += h
                for i in range(n):
                    atom[i] -= h * q[c, i]
        norm = 0.0
        for i in range(n):
            norm += atom[i] * atom[i]
        norm = np.sqrt(norm)

        if norm <= rank_tol:
            # atom lies in the span already chosen: zero coefficient, residual unchanged
            is_dep = True
            for i in range(n):
                new_resid[i] = resid[i]
            new_qy = 0.0
        else:
            is_dep = False
            new_qy = 0.0
            for i in range(n):
                new_qy += atom[i] / norm * y[i]
            for i in range(n):
                new_resid[i] = resid[i] - new_qy * atom[i] / norm

        new_norm = 0.0
        for i in range(n):
            new_norm += new_resid[i] * new_resid[i]
        new_norm = np.sqrt(new_norm)
        if new_norm > prev_norm:
            # roll back to the previous iterate
            for c in range(used):
                r_mat[c, used] = 0.0
            break

        selected[best_j] = True
        support[used] = best_j
        dependent[used] = is_dep
        if not is_dep:
            r_mat[used, used] = norm
            for i in range(n):
                q[used, i] = atom[i] / norm
        qy[used] = new_qy
        for i in range(n):
            resid[i] = new_resid[i]
        prev_norm = new_norm
        used += 1

    coef = np.zeros(used)
    for row in range(used - 1, -1, -1):
        if dependent[row]:
            continue
        s = qy[row]
        for c in range(row + 1, used):
            s -= r_mat[row, c] * coef[c]
        coef[row] = s / r_mat[row, row]

    x = np.zeros(m)
    for c in range(used):
        x[support[c]] = coef[c]
    return x, support, used, prev_norm
