"""Matrix-free linear algebra: GMRES, Arnoldi factorization, and leading
eigenvalues of an apply-only operator.

Subspace dimensions here are tiny (the coarse vector has ~20 components), so
the dense Hessenberg eigenproblem is solved in-house with a shifted QR
iteration rather than pulling in an external eigensolver.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class LinearOperator:
    """Apply-only linear map on R^dimension."""

    dimension: int
    apply: Callable[[np.ndarray], np.ndarray]

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.apply(v)


def operator_from_matrix(a: np.ndarray) -> LinearOperator:
    a = np.asarray(a, dtype=np.float64)
    return LinearOperator(dimension=a.shape[0], apply=lambda v: a @ v)


@dataclass
class KrylovResult:
    x: np.ndarray
    residual_history: np.ndarray
    iterations: int
    converged: bool


class EigenSolveError(RuntimeError):
    """Shifted QR failed to converge within the iteration cap."""


_BREAKDOWN = 1e-14


def _orthogonalize(w: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    """Modified Gram-Schmidt with one reorthogonalization pass; returns the
    projection coefficients (the Hessenberg column without its last entry)."""
    h = np.zeros(len(basis))
    for it in range(2):
        for j, v in enumerate(basis):
            c = np.dot(v, w)
            w -= c * v
            h[j] += c
    return h


def arnoldi(op: LinearOperator, start: np.ndarray, m: int):
    """Arnoldi factorization op @ V[:, :k] = V @ H with V orthonormal.

    Returns (V, H, breakdown): V has k+1 columns and H is (k+1, k) unless an
    invariant subspace was hit after k < m steps, in which case V has k
    columns, H is (k, k) and breakdown is True.
    """
    start = np.asarray(start, dtype=np.float64)
    nrm = np.linalg.norm(start)
    if nrm == 0.0:
        raise ValueError("Arnoldi start vector must be nonzero")
    if m < 1 or m > op.dimension:
        raise ValueError(f"need 1 <= m <= dimension, got m={m}")
    basis = [start / nrm]
    columns = []
    for k in range(m):
        w = np.asarray(op(basis[k]), dtype=np.float64).copy()
        h = _orthogonalize(w, basis)
        h_next = np.linalg.norm(w)
        scale = max(np.abs(h).max(initial=0.0), 1.0)
        if h_next <= _BREAKDOWN * scale:
            hess = np.zeros((k + 1, k + 1))
            for j, col in enumerate(columns):
                hess[:j + 2, j] = col
            hess[:k + 1, k] = h
            return np.column_stack(basis), hess, True
        columns.append(np.concatenate([h, [h_next]]))
        basis.append(w / h_next)
    hess = np.zeros((m + 1, m))
    for j, col in enumerate(columns):
        hess[:j + 2, j] = col
    return np.column_stack(basis), hess, False


def gmres(op: LinearOperator, rhs: np.ndarray, x0: np.ndarray | None = None,
          tol: float = 1e-8, max_iter: int | None = None) -> KrylovResult:
    """Minimize ||rhs - op(x)|| over x0 + K_j, one un-restarted cycle.

    converged is True once the relative residual drops to tol; a happy
    breakdown is treated as exact convergence. Hitting max_iter first returns
    the best iterate with converged=False.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    rhs = np.asarray(rhs, dtype=np.float64)
    n = op.dimension
    if max_iter is None:
        max_iter = n
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64)
    r0 = rhs - np.asarray(op(x0), dtype=np.float64)
    beta = np.linalg.norm(r0)
    ref = np.linalg.norm(rhs)
    if ref == 0.0:
        ref = 1.0
    history = [beta]
    if beta <= tol * ref:
        return KrylovResult(x=x0.copy(), residual_history=np.array(history),
                            iterations=0, converged=True)
    basis = [r0 / beta]
    # Givens-rotated least-squares data
    cs: list[float] = []
    sn: list[float] = []
    g = [beta]
    hess_cols: list[np.ndarray] = []
    converged = False
    k = 0
    while k < max_iter:
        w = np.asarray(op(basis[k]), dtype=np.float64).copy()
        h = _orthogonalize(w, basis)
        h_next = np.linalg.norm(w)
        col = np.concatenate([h, [h_next]])
        # apply accumulated rotations, then a new one to kill col[k+1]
        for j in range(k):
            t = cs[j] * col[j] + sn[j] * col[j + 1]
            col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1]
            col[j] = t
        denom = np.hypot(col[k], col[k + 1])
        if denom == 0.0:
            # dependent Krylov column (singular operator): stop with best iterate
            break
        c, s = col[k] / denom, col[k + 1] / denom
        cs.append(c)
        sn.append(s)
        col[k] = denom
        col[k + 1] = 0.0
        hess_cols.append(col[:k + 1])
        g.append(-s * g[k])
        g[k] = c * g[k]
        res = abs(g[k + 1])
        history.append(res)
        happy = h_next <= _BREAKDOWN * max(np.abs(h).max(initial=0.0), 1.0)
        k += 1
        if res <= tol * ref or happy:
            converged = True
            break
        basis.append(w / h_next)
    # back-substitute the triangularized least-squares system
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        acc = g[i]
        for j in range(i + 1, k):
            acc -= hess_cols[j][i] * y[j]
        y[i] = acc / hess_cols[i][i]
    x = x0 + np.column_stack(basis[:k]) @ y
    return KrylovResult(x=x, residual_history=np.array(history),
                        iterations=k, converged=converged)


def _eig_2x2(a: np.ndarray) -> tuple[complex, complex]:
    tr = a[0, 0] + a[1, 1]
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    disc = np.lib.scimath.sqrt(tr * tr - 4.0 * det)
    return (tr + disc) / 2.0, (tr - disc) / 2.0


def hessenberg_eigenvalues(h: np.ndarray, max_sweeps: int = 200) -> np.ndarray:
    """Eigenvalues of an upper Hessenberg matrix by shifted QR in complex
    arithmetic, with deflation at negligible subdiagonals."""
    h = np.asarray(h)
    n = h.shape[0]
    if h.shape != (n, n):
        raise ValueError("need a square Hessenberg matrix")
    if n == 0:
        return np.array([], dtype=np.complex128)
    a = h.astype(np.complex128).copy()
    eigs: list[complex] = []
    hi = n
    sweeps = 0
    while hi > 0:
        if hi == 1:
            eigs.append(a[0, 0])
            break
        # deflate converged trailing eigenvalues
        tol_k = np.finfo(float).eps * 16
        k = hi - 1
        if abs(a[k, k - 1]) <= tol_k * (abs(a[k, k]) + abs(a[k - 1, k - 1]) + 1e-300):
            eigs.append(a[k, k])
            hi -= 1
            continue
        if hi == 2:
            lam1, lam2 = _eig_2x2(a[:2, :2])
            eigs.extend([lam1, lam2])
            break
        # split at any interior negligible subdiagonal
        split = -1
        for j in range(hi - 2, 0, -1):
            if abs(a[j, j - 1]) <= tol_k * (abs(a[j, j]) + abs(a[j - 1, j - 1]) + 1e-300):
                split = j
                break
        if split > 0:
            eigs.extend(hessenberg_eigenvalues(a[split:hi, split:hi], max_sweeps))
            hi = split
            continue
        sweeps += 1
        if sweeps > max_sweeps:
            raise EigenSolveError(
                f"shifted QR did not converge after {max_sweeps} sweeps "
                f"(active block {hi}, trailing subdiagonal {abs(a[hi-1, hi-2]):.3e})")
        # Wilkinson shift: trailing 2x2 eigenvalue closest to the corner
        lam1, lam2 = _eig_2x2(a[hi - 2:hi, hi - 2:hi])
        corner = a[hi - 1, hi - 1]
        mu = lam1 if abs(lam1 - corner) <= abs(lam2 - corner) else lam2
        block = a[:hi, :hi]
        q, r = np.linalg.qr(block - mu * np.eye(hi))
        a[:hi, :hi] = r @ q + mu * np.eye(hi)
    return np.array(eigs, dtype=np.complex128)


def leading_eigenvalues(op: LinearOperator, m: int, n_want: int,
                        seed=0, start: np.ndarray | None = None) -> np.ndarray:
    """n_want largest-magnitude Ritz values of op from an m-step Arnoldi
    factorization, sorted by |lambda| descending."""
    if n_want > m:
        raise ValueError("n_want must not exceed the subspace dimension m")
    m = min(m, op.dimension)
    if start is None:
        start = np.random.default_rng(seed).standard_normal(op.dimension)
    _, hess, breakdown = arnoldi(op, start, m)
    k = hess.shape[1]
    square = hess[:k, :k]
    ritz = hessenberg_eigenvalues(square)
    order = np.argsort(-np.abs(ritz), kind="stable")
    return ritz[order][:min(n_want, len(ritz))]
