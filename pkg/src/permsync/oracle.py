"""Centralized and exhaustive reference computations.

These deliberately avoid the code paths they are used to check: the
eigensolver is cyclic Jacobi, orthogonal iteration uses Householder QR
(not Cholesky), and matrix limits come from repeated squaring.
"""

from __future__ import annotations

import itertools

import numpy as np

from .assoc import PairwiseAssociations
from .exceptions import DomainError, RankDeficiencyError
from .graph import SensorGraph
from .perm import Permutation, matrix_of

MAX_JOINT_M = 4
MAX_JOINT_N = 4
MAX_ASSIGN_M = 8


def sym_eigen(S, tol: float = 1e-15, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues descending, V)`` with orthonormal columns.
    """
    S = np.array(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DomainError(f"expected a square matrix, got {S.shape}")
    if np.max(np.abs(S - S.T), initial=0.0) >= 1e-8:
        raise DomainError("matrix is not symmetric")
    n = S.shape[0]
    A = 0.5 * (S + S.T)
    V = np.eye(n)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        # sum the off-diagonal directly; subtracting the diagonal from the
        # full norm cancels catastrophically near convergence
        off = np.sqrt(np.sum((A - np.diag(np.diag(A))) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def centralized_oi(P, init, iters: int, scale: float = 1.0, return_all: bool = False):
    """Orthogonal iteration ``Y = P X; Q R = Y; X = scale * Q`` with ``R``
    normalized to a positive diagonal (the same factor Cholesky gives)."""
    P = np.asarray(P, dtype=float)
    X = np.asarray(init, dtype=float)
    history = [X]
    for _ in range(iters):
        Y = P @ X
        Q, R = np.linalg.qr(Y)
        d = np.diag(R)
        if np.min(np.abs(d)) <= 1e-12 * max(np.max(np.abs(d)), 1e-300):
            raise RankDeficiencyError("orthogonal iteration lost rank")
        X = scale * Q * np.sign(d)[None, :]
        history.append(X)
    return history if return_all else X


def principal_angle_sines(X, Y) -> np.ndarray:
    """Sines of the principal angles between ``span(X)`` and ``span(Y)``."""
    Qx, _ = np.linalg.qr(np.asarray(X, dtype=float))
    Qy, _ = np.linalg.qr(np.asarray(Y, dtype=float))
    resid = Qx - Qy @ (Qy.T @ Qx)
    return np.sort(np.linalg.svd(resid, compute_uv=False))[::-1]


def power_limit(F, k: int) -> np.ndarray:
    """``F^k`` for ``k`` a power of two, by repeated squaring."""
    if k < 1 or k & (k - 1):
        raise DomainError(f"k must be a positive power of two, got {k}")
    M = np.array(F, dtype=float)
    while k > 1:
        M = M @ M
        k >>= 1
    return M


def brute_force_assignment(W):
    """Best profit and all optimal permutations by enumeration (``m <= 8``)."""
    W = np.asarray(W, dtype=float)
    m = W.shape[0]
    if m > MAX_ASSIGN_M:
        raise DomainError(f"enumeration limited to m <= {MAX_ASSIGN_M}")
    best, winners = -np.inf, []
    cols = np.arange(m)
    for images in itertools.permutations(range(m)):
        val = W[list(images), cols].sum()
        if val > best:
            best, winners = val, [images]
        elif val == best:
            winners.append(images)
    return float(best), [Permutation(w) for w in winners]


def joint_objective(labels, A: PairwiseAssociations, G: SensorGraph) -> float:
    """``sum over edges (j, i) of trace(P_i^T Pt_ij P_j)``."""
    M = [matrix_of(p) for p in labels]
    return float(sum(np.trace(M[i].T @ A[(i, j)] @ M[j]) for j, i in G.edges))


def brute_force_labels(A: PairwiseAssociations, G: SensorGraph, anchor: int = 0):
    """Exhaustive maximizer of :func:`joint_objective` with the anchor label
    fixed to the identity. Returns ``(labels, objective)``."""
    n, m = A.n, A.m
    if m > MAX_JOINT_M or n > MAX_JOINT_N:
        raise DomainError(f"joint search limited to m <= {MAX_JOINT_M}, n <= {MAX_JOINT_N}")
    A.validate_for(G)
    perms = [Permutation(p) for p in itertools.permutations(range(m))]
    mats = [matrix_of(p) for p in perms]
    others = [v for v in range(n) if v != anchor]
    edges = sorted(G.edges)
    best_val, best = -np.inf, None
    for combo in itertools.product(range(len(perms)), repeat=len(others)):
        choice = {anchor: np.eye(m)}
        for v, idx in zip(others, combo):
            choice[v] = mats[idx]
        val = sum(np.trace(choice[i].T @ A[(i, j)] @ choice[j]) for j, i in edges)
        if val > best_val + 1e-12:
            best_val = val
            best = dict(zip(others, combo))
    labels = [Permutation.identity(m) if v == anchor else perms[best[v]] for v in range(n)]
    return labels, float(best_val)
