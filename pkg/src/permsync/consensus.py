"""Averaging protocol on doubly stochastic label estimates.

Every non-anchor sensor replaces its estimate with the mean of its own
estimate and its in-neighbors' estimates mapped through the pairwise
associations. The anchor never updates, which pins the global permutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assign import solve_assignment
from .assoc import PairwiseAssociations, accuracy
from .exceptions import ConfigError
from .graph import SensorGraph
from .perm import Permutation, matrix_of, random_permutation

INIT_MODES = ("identity", "uniform", "random_permutation")


@dataclass
class ConsensusConfig:
    max_iters: int = 1000
    conv_tol: float = 1e-9
    distinguished: int = 0
    init: str = "identity"

    def validate(self, n: int):
        if not self.conv_tol > 0:
            raise ConfigError("conv_tol must be positive")
        if self.max_iters < 0:
            raise ConfigError("max_iters must be >= 0")
        if not 0 <= self.distinguished < n:
            raise ConfigError(f"distinguished vertex {self.distinguished} out of range for n={n}")
        if self.init not in INIT_MODES:
            raise ConfigError(f"init must be one of {INIT_MODES}, got {self.init!r}")


@dataclass
class ConsensusState:
    labels: np.ndarray  # (n, m, m)
    t: int = 0
    delta: float = np.inf


@dataclass
class ConsensusResult:
    relaxed: np.ndarray
    rounds: int
    converged: bool
    trace: list = field(default_factory=list)  # (round, delta, accuracy or None)


def initial_state(n, m, cfg: ConsensusConfig, rng=None, anchor_value: Permutation | None = None):
    """Anchor starts at ``anchor_value`` (identity by default); the rest
    follow ``cfg.init``."""
    if cfg.init == "identity":
        X = np.repeat(np.eye(m)[None], n, axis=0)
    elif cfg.init == "uniform":
        X = np.full((n, m, m), 1.0 / m)
    else:
        if rng is None:
            raise ConfigError("random_permutation init needs an rng")
        X = np.stack([matrix_of(random_permutation(rng, m)) for _ in range(n)])
    a = cfg.distinguished
    X[a] = np.eye(m) if anchor_value is None else matrix_of(anchor_value)
    return ConsensusState(X)


def local_update(own: np.ndarray, assoc_stack, neighbor_stack) -> np.ndarray:
    """``(own + sum_j Pt_ij X_j) / (deg + 1)``; stacks are ordered by
    ascending neighbor id, which fixes the summation order."""
    if len(assoc_stack) == 0:
        return own.copy()
    mapped = np.matmul(assoc_stack, neighbor_stack)
    total = own.copy()
    for term in mapped:
        total += term
    return total / (len(mapped) + 1)


def neighbor_stacks(A: PairwiseAssociations, G: SensorGraph):
    """Per node, ``(neighbors, stacked Pt_ij)`` in ascending neighbor order."""
    A.validate_for(G)
    out = []
    for i in range(G.n):
        nbrs = G.neighborhood(i)
        stack = np.stack([A[(i, j)] for j in nbrs]) if nbrs else np.zeros((0, A.m, A.m))
        out.append((nbrs, stack))
    return out


def consensus_step(state: ConsensusState, A: PairwiseAssociations, G: SensorGraph,
                   distinguished: int = 0, _stacks=None) -> ConsensusState:
    stacks = _stacks if _stacks is not None else neighbor_stacks(A, G)
    X = state.labels
    new = X.copy()
    for i, (nbrs, assoc) in enumerate(stacks):
        if i == distinguished:
            continue
        new[i] = local_update(X[i], assoc, X[list(nbrs)])
    delta = float(np.max(np.abs(new - X))) if X.size else 0.0
    return ConsensusState(new, state.t + 1, delta)


def run_consensus(A: PairwiseAssociations, G: SensorGraph, cfg: ConsensusConfig | None = None,
                  rng=None, state: ConsensusState | None = None, truth=None) -> ConsensusResult:
    """Iterate until the max-abs change of a round drops below ``conv_tol``.

    Returns relaxed (unrounded) estimates. ``truth``, when given, adds the
    rounded accuracy of each round to the trace.
    """
    cfg = cfg or ConsensusConfig()
    cfg.validate(G.n)
    if state is None:
        state = initial_state(G.n, A.m, cfg, rng)
    stacks = neighbor_stacks(A, G)
    trace = []
    converged = G.n == 1
    while not converged and state.t < cfg.max_iters:
        state = consensus_step(state, A, G, cfg.distinguished, stacks)
        acc = None
        if truth is not None:
            acc = accuracy(round_labels(state.labels), truth, cfg.distinguished)
        trace.append((state.t, state.delta, acc))
        converged = state.delta < cfg.conv_tol
    return ConsensusResult(state.labels, state.t, converged, trace)


def round_labels(relaxed) -> list:
    """Per node, the permutation maximizing ``<relaxed_i, P>``."""
    return [solve_assignment(X) for X in np.asarray(relaxed)]
