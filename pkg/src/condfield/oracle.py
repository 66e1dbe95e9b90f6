"""Brute-force references for small instances.

Nothing here touches the eigen-based code in ``core``: conditioning goes
through a pivoted Cholesky factorization with its own rank rule, and the
operator norm is found by enumerating polytope vertices with LU solves.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError
from .grid import SubsetMask
from .kernels import as_matrix

ORACLE_MAX_T = 64
ORACLE_MAX_S = 3
PIVOT_TOL = 1e-12


@dataclass
class OracleResult:
    mean: np.ndarray
    cov: np.ndarray
    method_tag: str


def pivoted_cholesky(A: np.ndarray, rel_tol: float = PIVOT_TOL):
    """Diagonally pivoted Cholesky ``A[p, p] ~ R R^T`` with ``R`` lower trapezoidal.

    Stops once the largest remaining diagonal drops below ``rel_tol`` times
    the largest diagonal of ``A``. Returns ``(R, perm)`` where ``R`` has one
    column per accepted pivot.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    perm = np.arange(n)
    R = np.zeros((n, n))
    d = np.diag(A).copy()
    stop = rel_tol * max(float(np.max(d)) if n else 0.0, 0.0)
    k = 0
    while k < n:
        j = k + int(np.argmax(d[k:]))
        if d[j] <= stop or d[j] <= 0:
            break
        # swap k <-> j
        perm[[k, j]] = perm[[j, k]]
        d[[k, j]] = d[[j, k]]
        A[[k, j], :] = A[[j, k], :]
        A[:, [k, j]] = A[:, [j, k]]
        R[[k, j], :k] = R[[j, k], :k]
        R[k, k] = np.sqrt(d[k])
        R[k + 1:, k] = (A[k + 1:, k] - R[k + 1:, :k] @ R[k, :k]) / R[k, k]
        d[k + 1:] -= R[k + 1:, k] ** 2
        k += 1
    return R[:, :k], perm


def schur_condition(C, mask: SubsetMask, y) -> OracleResult:
    """Textbook Gaussian conditioning on S with a minimum-norm solve.

    With ``C_SS[p, p] = R R^T`` (rank k) the minimum-norm solution of
    ``C_SS x = b`` is ``P^T R (R^T R)^-2 R^T P b``.
    """
    A = as_matrix(C)
    n = A.shape[0]
    if n > ORACLE_MAX_T:
        raise ConditioningError("oracle-scale-exceeded", f"|T| = {n} > {ORACLE_MAX_T}")
    S = mask.indices
    y = np.asarray(y, dtype=float).ravel()
    Css = A[np.ix_(S, S)]
    Cts = A[:, S]
    R, perm = pivoted_cholesky(Css)
    G = R.T @ R
    Cts_p = Cts[:, perm]
    y_p = y[perm]
    if R.shape[1] == 0:
        return OracleResult(np.zeros(n), A.copy(), "pivoted-cholesky(rank 0)")
    # W = C_TS P^T R (R^T R)^-1 ; mean = W (R^T R)^-1 R^T P y ; cov = C - W W^T
    W = np.linalg.solve(G, (Cts_p @ R).T).T
    mean = W @ np.linalg.solve(G, R.T @ y_p)
    cov = A - W @ W.T
    return OracleResult(mean, (cov + cov.T) / 2, f"pivoted-cholesky(rank {R.shape[1]})")


def exhaustive_m_opnorm(C, mask: SubsetMask) -> float:
    """Exact ``sup ||C_TS e||_inf / ||C_SS e||_inf`` for |S| <= 3.

    The feasible set ``{e : |(C_SS e)_i| <= 1}`` is a bounded polytope when
    ``C_SS`` is invertible; the convex objective ``||C_TS e||_inf`` is
    maximized at one of its vertices. A vertex makes every constraint active,
    so each is the solution of ``C_SS e = sigma`` for a sign pattern sigma.
    """
    A = as_matrix(C)
    S = mask.indices
    k = S.size
    if k > ORACLE_MAX_S or A.shape[0] > ORACLE_MAX_T:
        raise ConditioningError("oracle-scale-exceeded", f"|S| = {k} > {ORACLE_MAX_S}")
    Css = A[np.ix_(S, S)]
    Cts = A[:, S]
    scale = float(np.max(np.abs(Css))) if Css.size else 0.0
    if scale == 0.0 or abs(np.linalg.det(Css)) <= 1e-12 * scale**k:
        raise ConditioningError("singular-denominator", "C_SS is singular")
    best = 0.0
    for sigma in itertools.product((-1.0, 1.0), repeat=k):
        sigma = np.array(sigma)
        try:
            e = np.linalg.solve(Css, sigma)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError("singular-denominator", str(exc)) from exc
        den = np.max(np.abs(Css @ e))
        best = max(best, float(np.max(np.abs(Cts @ e)) / den))
    return best
