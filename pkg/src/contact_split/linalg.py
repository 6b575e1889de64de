"""Sparse symmetric linear algebra used by the splitting solvers.

Matrices are plain :mod:`scipy.sparse` CSR matrices; this module adds the
validation, the reusable symmetric factorization, the extreme-eigenvalue
estimates and the Matrix Market / vector text formats.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .exceptions import DimensionMismatch, NoConvergence, SingularMatrix

__all__ = [
    "Factorization",
    "factorize",
    "solve_with",
    "spmv",
    "sparse_sym",
    "sparse_rect",
    "min_eigenvalue_estimate",
    "spectral_norm_estimate",
    "write_mtx",
    "read_mtx",
    "write_vec",
    "read_vec",
]

PIVOT_RTOL = 1e-14
DEFAULT_SEED = 42


def sparse_sym(A, rtol=1e-14):
    """Return `A` as a canonical CSR matrix after checking symmetry.

    Raises ``ValueError`` when ``|a_ij - a_ji| > rtol * max|a|``.
    """
    A = sp.csr_matrix(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"symmetric matrix must be square, got {A.shape}")
    A.sum_duplicates()
    A.sort_indices()
    if A.nnz:
        scale = np.abs(A.data).max()
        asym = abs(A - A.T)
        if asym.nnz and asym.max() > rtol * scale:
            raise ValueError(f"matrix is not symmetric (max |A - A^T| = {asym.max():.3e})")
    return A


def sparse_rect(A):
    """Return `A` as CSR with sorted, duplicate-free column indices."""
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


def spmv(A, x, transpose=False):
    """Sparse matrix-vector product ``A x`` (or ``A^T x``) with a shape check."""
    x = np.asarray(x, dtype=float)
    m, n = A.shape
    expected = m if transpose else n
    if x.ndim != 1 or x.shape[0] != expected:
        raise DimensionMismatch(f"vector of length {x.shape} does not conform to {A.shape} (transpose={transpose})")
    if transpose:
        return A.T @ x
    return A @ x


class Factorization:
    """Symmetric LDL^T-type factorization of an SPD sparse matrix.

    The matrix is symmetrically permuted (reverse Cuthill-McKee or minimum
    degree on ``A + A^T``) and factored by SuperLU with pivoting restricted to
    the diagonal, so ``P K P^T = L D L^T`` up to the scaling of the unit
    triangular factors.  The signed pivots ``D`` are exposed as
    :attr:`pivots`.

    Parameters
    ----------
    K : sparse matrix
        Symmetric matrix.
    ordering : {"mmd", "rcm", "natural"}
        Fill-reducing symmetric ordering.
    require_positive : bool
        If True (default) any non-positive pivot is reported as
        :class:`SingularMatrix`, which certifies positive definiteness.
    """

    def __init__(self, K, ordering="mmd", require_positive=True):
        K = sp.csc_matrix(K, dtype=float)
        n = K.shape[0]
        if K.shape != (n, n):
            raise DimensionMismatch(f"cannot factorize non-square matrix {K.shape}")
        self.n = n
        self.ordering = ordering
        diag = np.abs(K.diagonal())
        self._scale = diag.max() if n else 0.0
        if n and self._scale == 0.0:
            raise SingularMatrix("matrix has an all-zero diagonal", 0, 0.0)

        if ordering == "rcm":
            perm = reverse_cuthill_mckee(sp.csr_matrix(K), symmetric_mode=True).astype(np.intp)
            Kp = K[perm][:, perm].tocsc()
            permc = "NATURAL"
        elif ordering == "mmd":
            perm, Kp, permc = None, K, "MMD_AT_PLUS_A"
        elif ordering == "natural":
            perm, Kp, permc = None, K, "NATURAL"
        else:
            raise ValueError(f"unknown ordering {ordering!r}")

        try:
            lu = spla.splu(Kp, permc_spec=permc, diag_pivot_thresh=0.0,
                           options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise SingularMatrix(f"factorization failed: {exc}") from exc

        if not np.array_equal(lu.perm_r, lu.perm_c):
            raise SingularMatrix("off-diagonal pivoting was required; matrix is not positive definite")
        pivots = lu.U.diagonal()
        tiny = np.abs(pivots) < PIVOT_RTOL * self._scale
        bad = tiny | (pivots <= 0.0) if require_positive else tiny
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0])
            raise SingularMatrix(f"pivot {k} = {pivots[k]:.3e} (max diagonal {self._scale:.3e})", k, pivots[k])

        if perm is None:
            self.perm = np.asarray(lu.perm_c, dtype=np.intp)
            self._outer = None
        else:
            # compose the RCM permutation with the (natural) SuperLU one
            self.perm = perm[lu.perm_c]
            self._outer = perm
        self.pivots = pivots
        self.nnz_factor = lu.L.nnz + lu.U.nnz - n
        self._lu = lu

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.n:
            raise DimensionMismatch(f"rhs of length {rhs.shape[0]} for a {self.n}x{self.n} factorization")
        if self._outer is None:
            return self._lu.solve(rhs)
        x = np.empty_like(rhs)
        x[self._outer] = self._lu.solve(rhs[self._outer])
        return x

    def __repr__(self):
        return f"Factorization(n={self.n}, ordering={self.ordering!r}, nnz_factor={self.nnz_factor})"


def factorize(K, ordering="mmd"):
    """Factorize a symmetric positive definite matrix for repeated solves."""
    return Factorization(K, ordering=ordering)


def solve_with(f, rhs):
    """Solve ``K x = rhs`` reusing factorization `f`."""
    return f.solve(rhs)


def _power_loop(apply, n, quotient, tol, max_iter, seed):
    # shared driver for power / inverse-power iteration; the stopping test
    # extrapolates the remaining error from the ratio of successive changes
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    mu_prev = quotient(x)
    change_prev = None
    for _ in range(max_iter):
        y = apply(x)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return 0.0
        x = y / norm
        mu = quotient(x)
        change = abs(mu - mu_prev)
        factor = 1.0
        if change_prev:
            q = change / change_prev
            if q < 1.0:
                factor = max(1.0, q / (1.0 - q))
            else:
                factor = math.inf
        if change * factor <= tol * abs(mu) or change == 0.0:
            return mu
        mu_prev, change_prev = mu, change
    raise NoConvergence(f"power iteration did not converge in {max_iter} iterations")


def min_eigenvalue_estimate(K, f=None, tol=1e-6, max_iter=10000, seed=DEFAULT_SEED):
    """Smallest eigenvalue of an SPD matrix by inverse power iteration.

    The returned value is the Rayleigh quotient of the final iterate, so it is
    never below the true minimum eigenvalue.
    """
    K = sp.csr_matrix(K)
    if f is None:
        f = factorize(K)
    n = K.shape[0]
    if n == 1:
        return float(K[0, 0])
    return float(_power_loop(f.solve, n, lambda x: x @ (K @ x), tol, max_iter, seed))


def spectral_norm_estimate(B, tol=1e-6, max_iter=10000, seed=DEFAULT_SEED):
    """Largest singular value of `B` by power iteration on ``B^T B``."""
    B = sp.csr_matrix(B)
    if B.nnz == 0:
        return 0.0
    BT = B.T.tocsr()

    def apply(x):
        return BT @ (B @ x)

    def quotient(x):
        Bx = B @ x
        return Bx @ Bx

    sigma2 = _power_loop(apply, B.shape[1], quotient, tol, max_iter, seed)
    return math.sqrt(sigma2)


# -- text formats -------------------------------------------------------------

def write_mtx(path, A, comment=None):
    """Write a sparse matrix in Matrix Market coordinate format (1-based).

    Values are written with ``repr`` so that reading them back is bit-exact.
    """
    A = sp.coo_matrix(A)
    order = np.lexsort((A.col, A.row))
    lines = ["%%MatrixMarket matrix coordinate real general"]
    if comment:
        lines.extend(f"% {c}" for c in comment.splitlines())
    lines.append(f"{A.shape[0]} {A.shape[1]} {A.nnz}")
    for k in order:
        lines.append(f"{A.row[k] + 1} {A.col[k] + 1} {float(A.data[k])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_mtx(path):
    """Read a Matrix Market coordinate file written by :func:`write_mtx` (or any
    real ``general``/``symmetric`` coordinate file) into CSR."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("%%MatrixMarket"):
            raise ValueError(f"{path}: missing MatrixMarket header")
        tokens = header.lower().split()
        if "coordinate" not in tokens:
            raise ValueError(f"{path}: only coordinate format is supported")
        symmetric = "symmetric" in tokens
        line = fh.readline()
        while line.startswith("%") or not line.strip():
            line = fh.readline()
        m, n, nnz = (int(t) for t in line.split())
        rows = np.empty(nnz, dtype=np.intp)
        cols = np.empty(nnz, dtype=np.intp)
        vals = np.empty(nnz)
        k = 0
        for line in fh:
            if not line.strip() or line.startswith("%"):
                continue
            i, j, v = line.split()
            rows[k], cols[k], vals[k] = int(i) - 1, int(j) - 1, float(v)
            k += 1
    if k != nnz:
        raise ValueError(f"{path}: expected {nnz} entries, found {k}")
    if symmetric:
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    A = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
    A.sort_indices()
    return A


def write_vec(path, x):
    """One value per line, shortest round-trip representation."""
    Path(path).write_text("".join(f"{float(v)!r}\n" for v in np.asarray(x, dtype=float)))


def read_vec(path):
    text = Path(path).read_text().split()
    return np.array([float(t) for t in text], dtype=float)
