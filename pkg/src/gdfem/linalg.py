"""Sparse systems, symmetric-indefinite solves, dense stability diagnostics."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as dla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DIAGNOSTIC_SIZE_LIMIT = 2000


class SingularMatrixError(RuntimeError):
    pass


class SizeLimitError(ValueError):
    pass


@dataclass
class LinearSystem:
    """Sparse symmetric matrix, right-hand side, and strong constraints.

    Constrained dofs are eliminated symmetrically (zeroed row/column with a
    unit diagonal) before factorization, so solutions are exactly zero there.
    """
    matrix: sp.spmatrix
    rhs: np.ndarray
    constrained: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))


def check_symmetry(M, tol=1e-12):
    """Maximum absolute skew |M - M^T|; raises if it exceeds tol * max|entry|."""
    skew = abs(M - M.T).max()
    scale = abs(M).max()
    if skew > tol * max(scale, 1.0):
        raise ValueError(f"matrix not symmetric: skew {skew:g}, scale {scale:g}")
    return float(skew)


def apply_constraints(matrix, rhs, constrained):
    """Symmetric strong-constraint elimination (zero row/col, unit diagonal)."""
    if len(constrained) == 0:
        return matrix.tocsc(), np.asarray(rhs, dtype=float)
    n = matrix.shape[0]
    keep = np.ones(n)
    keep[constrained] = 0.0
    P = sp.diags(keep)
    fix = sp.coo_matrix((np.ones(len(constrained)),
                         (constrained, constrained)), shape=(n, n))
    A = (P @ matrix @ P + fix).tocsc()
    r = np.asarray(rhs, dtype=float).copy()
    r[constrained] = 0.0
    return A, r


def solve(system: LinearSystem) -> np.ndarray:
    """Direct sparse solve of a symmetric (possibly indefinite) system.

    Verifies the residual contract ||Ax - r|| <= 1e-9 (||A||_max ||x|| + ||r||)
    and raises SingularMatrixError on factorization failure or a bad residual.
    """
    if system.matrix.shape[0] != len(system.rhs):
        raise ValueError("matrix/rhs dimension mismatch")
    A, r = apply_constraints(system.matrix, system.rhs, system.constrained)
    try:
        lu = spla.splu(A)
        x = lu.solve(r)
    except RuntimeError as exc:
        raise SingularMatrixError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("non-finite solution")
    res = np.linalg.norm(A @ x - r)
    bound = 1e-9 * (abs(A).max() * np.linalg.norm(x) + np.linalg.norm(r))
    if res > max(bound, 1e-300):
        raise SingularMatrixError(
            f"residual {res:g} exceeds contract bound {bound:g}")
    return x


def _as_dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def dense_nullspace(M, tol=1e-8):
    """Orthonormal basis of the numerical kernel {x : ||Mx|| <= tol ||M||}.

    Diagnostic scale only (n <= 2000); columns of the returned array span
    the kernel.
    """
    A = _as_dense(M)
    n = A.shape[0]
    if n > DIAGNOSTIC_SIZE_LIMIT:
        raise SizeLimitError(f"dense nullspace limited to n <= {DIAGNOSTIC_SIZE_LIMIT}")
    _, s, Vt = dla.svd(A)
    smax = s[0] if len(s) else 0.0
    if smax == 0.0:
        return np.eye(n)
    mask = s <= tol * smax
    # singular values are sorted descending; append fully-zero rows of Vt
    k = int(np.sum(mask)) + (n - len(s))
    if k == 0:
        return np.zeros((n, 0))
    return Vt[-k:].T.copy()


def restrict_free(M, constrained):
    """Submatrix on the unconstrained dofs (for diagnostics)."""
    if len(constrained) == 0:
        return M
    n = M.shape[0]
    free = np.setdiff1d(np.arange(n), constrained)
    return _as_dense(M)[np.ix_(free, free)]


def estimate_control_constant(A, B, tol=1e-8):
    """Smallest ratio b(w, w)/a(w, w) over the a-orthogonal complement of ker B.

    A must be symmetric positive definite, B symmetric positive
    semidefinite.  Returns (c_bh, c_hat, dim_kernel) where
    c_hat = (c_bh - 1)/(c_bh + 1) when c_bh > 1, else None.
    """
    Ad = _as_dense(A)
    Bd = _as_dense(B)
    n = Ad.shape[0]
    if n > DIAGNOSTIC_SIZE_LIMIT:
        raise SizeLimitError(f"diagnostics limited to n <= {DIAGNOSTIC_SIZE_LIMIT}")
    Ad = 0.5 * (Ad + Ad.T)
    Bd = 0.5 * (Bd + Bd.T)
    amin = dla.eigvalsh(Ad, subset_by_index=[0, 0])[0]
    if amin <= 0:
        raise ValueError("A is not symmetric positive definite")
    V = dense_nullspace(Bd, tol=tol)
    k = V.shape[1]
    if k == 0:
        W = np.eye(n)
    else:
        # W = {w : V^T A w = 0}
        _, s, Vt = dla.svd(V.T @ Ad)
        W = Vt[k:].T
    Aw = W.T @ Ad @ W
    Bw = W.T @ Bd @ W
    eigs = dla.eigh(Bw, Aw, eigvals_only=True)
    c_bh = float(eigs[0])
    c_hat = (c_bh - 1.0) / (c_bh + 1.0) if c_bh > 1.0 else None
    return c_bh, c_hat, k


def dump_matrix(M, path):
    """Coordinate text dump, one 'i j value' per line, 0-based."""
    coo = sp.coo_matrix(M)
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{i} {j} {v:.17g}\n")
