"""Distributed orthogonal iteration for the spectral relaxation.

Each outer round a sensor forms ``Y_i = sum_{j in N_i + i} Pt_ij X_j``,
agrees with the others on the average Gram matrix ``mean_i Y_i^T Y_i``
(exactly, or by linear consensus ``x <- (I - eps L) x``), and then
orthogonalizes locally with the Cholesky factor of that average. With
exact averaging the stacked iterate satisfies ``(1/n) sum_i X_i^T X_i = I``,
so blocks stay at the scale of permutation matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .assoc import PairwiseAssociations, accuracy
from .consensus import neighbor_stacks, round_labels
from .exceptions import ConfigError, DomainError, RankDeficiencyError
from .graph import SensorGraph, build_matrices, is_balanced

INNER_MODES = ("exact_average", "linear_consensus")


@dataclass
class SpectralConfig:
    outer_iters: int = 100
    inner_mode: str = "linear_consensus"
    inner_iters: int = 50
    epsilon: float | None = None  # default 0.9 / (max in-degree + 1)
    chol_jitter: float = 1e-10
    anchor: int = 0
    angle_tol: float = 1e-9  # stop early once the subspace stops moving; 0 disables
    init: str = "identity"

    def resolve_epsilon(self, G: SensorGraph) -> float:
        dmax = G.max_in_degree()
        eps = 0.9 / (dmax + 1.0) if self.epsilon is None else float(self.epsilon)
        if not eps > 0 or (dmax > 0 and not eps < 1.0 / dmax):
            raise ConfigError(f"epsilon must lie in (0, 1/max_degree) = (0, {1.0 / dmax if dmax else np.inf}), got {eps}")
        return eps

    def validate(self, G: SensorGraph):
        if self.inner_mode not in INNER_MODES:
            raise ConfigError(f"inner_mode must be one of {INNER_MODES}, got {self.inner_mode!r}")
        if self.outer_iters < 0 or self.inner_iters < 0:
            raise ConfigError("iteration counts must be >= 0")
        if not 0 <= self.anchor < G.n:
            raise ConfigError(f"anchor {self.anchor} out of range for n={G.n}")
        if self.init not in ("identity", "random"):
            raise ConfigError(f"init must be 'identity' or 'random', got {self.init!r}")
        if self.inner_mode == "linear_consensus":
            if not is_balanced(G):
                raise ConfigError("linear_consensus inner averaging needs a balanced graph")
            self.resolve_epsilon(G)


@dataclass
class DOIResult:
    relaxed: np.ndarray  # (n, m, m)
    outer_rounds: int
    converged: bool
    trace: list = field(default_factory=list)  # (round, inner rounds, gram residual, accuracy or None)


def power_step(X: np.ndarray, A: PairwiseAssociations, G: SensorGraph, _stacks=None) -> np.ndarray:
    """``Y_i = sum_{j in N_i + {i}} Pt_ij X_j`` summed in ascending ``j``."""
    stacks = _stacks if _stacks is not None else neighbor_stacks(A, G)
    Y = np.empty_like(X)
    for i, (nbrs, assoc) in enumerate(stacks):
        mapped = np.matmul(assoc, X[list(nbrs)]) if nbrs else ()
        total = np.zeros_like(X[i])
        k = 0
        for j in sorted((*nbrs, i)):
            if j == i:
                total += X[i]
            else:
                total += mapped[k]
                k += 1
        Y[i] = total
    return Y


def gram_blocks(Y: np.ndarray) -> np.ndarray:
    """Local Gram matrices ``Y_i^T Y_i``; their node average is ``Y^T Y / n``."""
    return np.matmul(Y.transpose(0, 2, 1), Y)


def inner_average(Z: np.ndarray, G: SensorGraph, cfg: SpectralConfig, rounds: int | None = None):
    """Each node's estimate of ``mean_i Z_i``. Returns ``(estimates, rounds used)``."""
    n = Z.shape[0]
    if cfg.inner_mode == "exact_average":
        mean = Z.mean(axis=0)
        return np.broadcast_to(mean, Z.shape).copy(), 0
    if cfg.inner_mode != "linear_consensus":
        raise ConfigError(f"unknown inner_mode {cfg.inner_mode!r}")
    if not is_balanced(G):
        raise ConfigError("linear_consensus inner averaging needs a balanced graph")
    eps = cfg.resolve_epsilon(G)
    K = cfg.inner_iters if rounds is None else rounds
    W = np.eye(n) - eps * build_matrices(G).laplacian
    x = Z.reshape(n, -1).copy()
    for _ in range(K):
        x = W @ x
    return x.reshape(Z.shape), K


def cholesky_upper(S: np.ndarray, jitter: float = 1e-10) -> np.ndarray:
    """Upper-triangular ``R`` with positive diagonal and ``R^T R = S``.

    One retry with ``jitter * trace(S)/m`` added to the diagonal; a second
    failure means the iterate has lost rank.
    """
    S = np.asarray(S, dtype=float)
    if np.max(np.abs(S - S.T)) > 1e-8 * max(1.0, np.abs(S).max()):
        raise DomainError("Gram estimate is not symmetric")
    S = 0.5 * (S + S.T)
    try:
        return np.linalg.cholesky(S).T
    except np.linalg.LinAlgError:
        pass
    m = S.shape[0]
    bump = jitter * max(np.trace(S), 0.0) / m
    try:
        return np.linalg.cholesky(S + bump * np.eye(m)).T
    except np.linalg.LinAlgError:
        raise RankDeficiencyError("Cholesky failed after jitter: iterate subspace collapsed") from None


def orthogonalize(Y_i: np.ndarray, Zbar_i: np.ndarray, cfg: SpectralConfig | None = None) -> np.ndarray:
    """``Y_i R^-1`` with ``R = chol(Zbar_i)`` via a triangular solve."""
    jitter = cfg.chol_jitter if cfg is not None else 1e-10
    R = cholesky_upper(Zbar_i, jitter)
    # X R = Y  <=>  R^T X^T = Y^T
    return solve_triangular(R, Y_i.T, trans="T", lower=False).T


def gram_residual(X: np.ndarray) -> float:
    n, m, _ = X.shape
    return float(np.max(np.abs(gram_blocks(X).mean(axis=0) - np.eye(m))))


def subspace_sine(X_prev: np.ndarray, X: np.ndarray) -> float:
    """Sine of the largest principal angle between the stacked column spaces."""
    Qa, _ = np.linalg.qr(X_prev.reshape(-1, X.shape[-1]))
    Qb, _ = np.linalg.qr(X.reshape(-1, X.shape[-1]))
    return float(np.linalg.norm(Qa - Qb @ (Qb.T @ Qa), 2))


def initial_blocks(n, m, cfg: SpectralConfig, rng=None) -> np.ndarray:
    if cfg.init == "identity":
        return np.repeat(np.eye(m)[None], n, axis=0)
    if rng is None:
        raise ConfigError("random init needs an rng")
    # Gaussian blocks: full rank against the target subspace almost surely
    return rng.standard_normal((n, m, m))


def doi_iteration(X, A, G, cfg, stacks=None):
    """One outer round. Returns ``(X_next, inner rounds used)``."""
    Y = power_step(X, A, G, stacks)
    Zbar, used = inner_average(gram_blocks(Y), G, cfg)
    X_next = np.stack([orthogonalize(Y[i], Zbar[i], cfg) for i in range(G.n)])
    return X_next, used


def run_doi(A: PairwiseAssociations, G: SensorGraph, cfg: SpectralConfig | None = None,
            init: np.ndarray | None = None, rng=None, truth=None, keep_iterates: bool = False) -> DOIResult:
    """Outer loop of the distributed orthogonal iteration.

    Stops after ``outer_iters`` rounds, or earlier once consecutive
    iterates span the same subspace to within ``angle_tol``.
    """
    cfg = cfg or SpectralConfig()
    cfg.validate(G)
    A.validate_for(G)
    X = initial_blocks(G.n, A.m, cfg, rng) if init is None else np.array(init, dtype=float)
    stacks = neighbor_stacks(A, G)
    trace = []
    iterates = [X] if keep_iterates else None
    converged = False
    t = 0
    for t in range(1, cfg.outer_iters + 1):
        X_next, used = doi_iteration(X, A, G, cfg, stacks)
        acc = None
        if truth is not None:
            try:
                acc = accuracy(round_spectral(procrustes_correct(X_next, cfg.anchor)), truth, cfg.anchor)
            except RankDeficiencyError:
                # transient singular anchor block; only the diagnostic is lost
                acc = float("nan")
        trace.append((t, used, gram_residual(X_next), acc))
        moved = subspace_sine(X, X_next)
        X = X_next
        if keep_iterates:
            iterates.append(X)
        if cfg.angle_tol > 0 and moved < cfg.angle_tol:
            converged = True
            break
    result = DOIResult(X, t, converged, trace)
    if keep_iterates:
        result.iterates = iterates
    return result


def procrustes_correct(relaxed: np.ndarray, anchor: int = 0) -> np.ndarray:
    """Right-multiply every block by the orthogonal ``Q`` that best maps the
    anchor block to the identity: ``Q = V U^T`` from ``X_anchor = U S V^T``."""
    relaxed = np.asarray(relaxed, dtype=float)
    U, s, Vt = np.linalg.svd(relaxed[anchor])
    if s[-1] <= 1e-12 * max(s[0], 1e-300):
        raise RankDeficiencyError("anchor block is rank deficient")
    Q = Vt.T @ U.T
    return np.matmul(relaxed, Q)


round_spectral = round_labels


def solve_spectral(A, G, cfg=None, rng=None, truth=None):
    """Full pipeline: DOI, Procrustes alignment at the anchor, rounding."""
    cfg = cfg or SpectralConfig()
    res = run_doi(A, G, cfg, rng=rng, truth=truth)
    labels = round_spectral(procrustes_correct(res.relaxed, cfg.anchor))
    return labels, res
