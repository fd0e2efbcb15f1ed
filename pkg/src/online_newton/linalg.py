"""Dense symmetric linear algebra for small problems (n up to a few dozen).

Vectors and symmetric matrices are plain float ``ndarray`` objects; the
constructors below only validate and normalise them. The Newton system is
solved with a Bunch-Kaufman (diagonal pivoting) LDL^T factorization so that
indefinite Hessians, e.g. at saddle points, are handled without ever forming
an inverse. Spectral quantities come from a cyclic Jacobi eigenvalue
iteration that also works on stacks of matrices.
"""

import math

import numpy as np

from .errors import SingularMatrix

__all__ = [
    "as_vector",
    "sym_matrix",
    "inf_norm",
    "LDLFactorization",
    "ldl_factor",
    "solve_symmetric",
    "symmetric_eigenvalues",
    "operator_norm",
    "min_singular_value",
    "SINGULAR_RTOL",
]

# pivot cutoff relative to ||M||_inf
SINGULAR_RTOL = 1e-12

# Bunch-Kaufman growth constant (1 + sqrt(17)) / 8
_BK_ALPHA = (1.0 + math.sqrt(17.0)) / 8.0


def as_vector(x):
    """Return ``x`` as a finite 1-D float array (a copy)."""
    v = np.array(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def sym_matrix(m):
    """Build an exactly symmetric matrix from the upper triangle of ``m``."""
    a = np.array(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    upper = np.triu(a)
    return upper + np.triu(a, 1).T


def inf_norm(m):
    """Maximum absolute row sum."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    return float(np.max(np.sum(np.abs(m), axis=-1)))


def _sym2_min_abs_eig(a, b, c):
    mean = 0.5 * (a + c)
    rad = math.hypot(0.5 * (a - c), b)
    return min(abs(mean - rad), abs(mean + rad))


class LDLFactorization:
    """Result of :func:`ldl_factor`: ``P M P^T = L D L^T``.

    ``perm[k]`` is the original index placed at position ``k``; ``blocks``
    lists ``(k, size)`` for each 1x1 or 2x2 diagonal block of ``D``.
    """

    def __init__(self, perm, lower, diag, blocks):
        self.perm = perm
        self.lower = lower
        self.diag = diag
        self.blocks = blocks

    @property
    def n(self):
        return len(self.perm)

    def solve(self, b):
        n = self.n
        L = self.lower
        D = self.diag
        z = [b[p] for p in self.perm]
        # forward substitution, unit lower triangular
        for i in range(n):
            acc = z[i]
            row = L[i]
            for j in range(i):
                acc -= row[j] * z[j]
            z[i] = acc
        for k, size in self.blocks:
            if size == 1:
                z[k] /= D[k][k]
            else:
                a, bb, c = D[k][k], D[k + 1][k], D[k + 1][k + 1]
                det = a * c - bb * bb
                z0, z1 = z[k], z[k + 1]
                z[k] = (c * z0 - bb * z1) / det
                z[k + 1] = (a * z1 - bb * z0) / det
        # back substitution with L^T
        for i in range(n - 1, -1, -1):
            acc = z[i]
            for j in range(i + 1, n):
                acc -= L[j][i] * z[j]
            z[i] = acc
        y = np.empty(n)
        for k, p in enumerate(self.perm):
            y[p] = z[k]
        return y


def ldl_factor(M):
    """Bunch-Kaufman factorization of a symmetric matrix.

    Raises
    ------
    SingularMatrix
        If a 1x1 pivot, or the smaller eigenvalue magnitude of a 2x2 pivot
        block, falls below ``SINGULAR_RTOL * ||M||_inf``.
    """
    A = np.asarray(M, dtype=float).tolist()
    n = len(A)
    if n == 0:
        return LDLFactorization([], [], [], [])
    norm = max(sum(abs(v) for v in row) for row in A)
    if not math.isfinite(norm):
        raise ValueError("matrix has non-finite entries")
    tol = SINGULAR_RTOL * norm
    if norm == 0.0:
        raise SingularMatrix("zero matrix")
    L = [[0.0] * n for _ in range(n)]
    D = [[0.0] * n for _ in range(n)]
    perm = list(range(n))
    blocks = []

    def swap(i, j):
        if i == j:
            return
        A[i], A[j] = A[j], A[i]
        for row in A:
            row[i], row[j] = row[j], row[i]
        L[i], L[j] = L[j], L[i]
        perm[i], perm[j] = perm[j], perm[i]

    k = 0
    while k < n:
        absakk = abs(A[k][k])
        imax, colmax = k, 0.0
        for i in range(k + 1, n):
            v = abs(A[i][k])
            if v > colmax:
                imax, colmax = i, v
        if max(absakk, colmax) <= tol:
            raise SingularMatrix(f"pivot {max(absakk, colmax):.3e} below cutoff {tol:.3e} at step {k}")
        size = 1
        if absakk < _BK_ALPHA * colmax:
            rowmax = 0.0
            for j in range(k, n):
                if j != imax:
                    rowmax = max(rowmax, abs(A[imax][j]))
            if absakk * rowmax >= _BK_ALPHA * colmax * colmax:
                pass
            elif abs(A[imax][imax]) >= _BK_ALPHA * rowmax:
                swap(k, imax)
            else:
                swap(k + 1, imax)
                size = 2

        if size == 1:
            d = A[k][k]
            if abs(d) <= tol:
                raise SingularMatrix(f"pivot {abs(d):.3e} below cutoff {tol:.3e} at step {k}")
            D[k][k] = d
            L[k][k] = 1.0
            col = [A[i][k] / d for i in range(k + 1, n)]
            for ii, i in enumerate(range(k + 1, n)):
                L[i][k] = col[ii]
                li_d = col[ii] * d
                Ai = A[i]
                for jj, j in enumerate(range(k + 1, n)):
                    Ai[j] -= li_d * col[jj]
        else:
            a, b, c = A[k][k], A[k + 1][k], A[k + 1][k + 1]
            if _sym2_min_abs_eig(a, b, c) <= tol:
                raise SingularMatrix(f"2x2 pivot block numerically singular at step {k}")
            det = a * c - b * b
            D[k][k], D[k + 1][k], D[k][k + 1], D[k + 1][k + 1] = a, b, b, c
            L[k][k] = L[k + 1][k + 1] = 1.0
            rest = range(k + 2, n)
            # W = [A_ik, A_ik1]; L_i = W D^{-1}
            W = [(A[i][k], A[i][k + 1]) for i in rest]
            Lrows = [((c * w0 - b * w1) / det, (a * w1 - b * w0) / det) for w0, w1 in W]
            for ii, i in enumerate(rest):
                L[i][k], L[i][k + 1] = Lrows[ii]
                l0, l1 = Lrows[ii]
                Ai = A[i]
                for jj, j in enumerate(rest):
                    w0, w1 = W[jj]
                    Ai[j] -= l0 * w0 + l1 * w1
        blocks.append((k, size))
        k += size
    return LDLFactorization(perm, L, D, blocks)


def solve_symmetric(M, b):
    """Solve ``M y = b`` for symmetric (possibly indefinite) ``M``.

    Parameters
    ----------
    M : array_like, shape (n, n)
        Symmetric matrix; only consistency of the two triangles is assumed.
    b : array_like, shape (n,)

    Returns
    -------
    y : ndarray, shape (n,)

    Raises
    ------
    SingularMatrix
        When a pivot falls below ``1e-12 * ||M||_inf``.
    """
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or b.shape != (M.shape[0],):
        raise ValueError(f"shape mismatch: M {M.shape}, b {b.shape}")
    return ldl_factor(M).solve(b.tolist())


def symmetric_eigenvalues(M, rtol=1e-15, max_sweeps=60):
    """Eigenvalues of a symmetric matrix (or a stack of them) by cyclic Jacobi.

    Works on arrays of shape ``(..., n, n)``; returns shape ``(..., n)``
    with eigenvalues in ascending order.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"expected (..., n, n), got {M.shape}")
    lead = M.shape[:-2]
    n = M.shape[-1]
    A = M.reshape((-1, n, n)).copy()
    if n > 1 and A.shape[0] > 0:
        scale = np.sqrt(np.sum(A * A, axis=(1, 2)))
        threshold = rtol * scale
        iu = np.triu_indices(n, 1)
        for _ in range(max_sweeps):
            off = np.sqrt(2.0 * np.sum(A[:, iu[0], iu[1]] ** 2, axis=1))
            if np.all(off <= threshold):
                break
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = A[:, p, q]
                    active = apq != 0.0
                    if not np.any(active):
                        continue
                    safe = np.where(active, apq, 1.0)
                    # tiny a_pq can overflow theta; the 'big' branch then gives t = 0
                    with np.errstate(over="ignore"):
                        theta = (A[:, q, q] - A[:, p, p]) / (2.0 * safe)
                        big = np.abs(theta) > 1e150
                        root = np.sqrt(np.where(big, 1.0, theta * theta) + 1.0)
                    t = np.where(big, 0.5 / np.where(big, theta, 1.0),
                                 np.sign(theta) / (np.abs(theta) + root))
                    t = np.where(theta == 0.0, 1.0, t)
                    t = np.where(active, t, 0.0)
                    c = 1.0 / np.sqrt(t * t + 1.0)
                    s = t * c
                    c3 = c[:, None]
                    s3 = s[:, None]
                    colp = A[:, :, p].copy()
                    colq = A[:, :, q].copy()
                    A[:, :, p] = c3 * colp - s3 * colq
                    A[:, :, q] = s3 * colp + c3 * colq
                    rowp = A[:, p, :].copy()
                    rowq = A[:, q, :].copy()
                    A[:, p, :] = c3 * rowp - s3 * rowq
                    A[:, q, :] = s3 * rowp + c3 * rowq
                    A[:, p, q] = 0.0
                    A[:, q, p] = 0.0
    eig = np.sort(np.diagonal(A, axis1=1, axis2=2), axis=1)
    return eig.reshape(lead + (n,))


def operator_norm(M):
    """Spectral norm ``max |eigenvalue|`` of a symmetric matrix (or stack)."""
    eig = symmetric_eigenvalues(M)
    out = np.max(np.abs(eig), axis=-1)
    return float(out) if out.ndim == 0 else out


def min_singular_value(M):
    """Smallest ``|eigenvalue|`` of a symmetric matrix (or stack); 0 if singular."""
    eig = symmetric_eigenvalues(M)
    out = np.min(np.abs(eig), axis=-1)
    return float(out) if out.ndim == 0 else out
