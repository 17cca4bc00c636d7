"""Estimator front-end in the scikit-learn style.

``X`` is an :class:`AssociationProblem` (sensor graph plus pairwise
associations); ``y``, where accepted, is a ground-truth labeling used only
for scoring and traces. ``fit`` stores the relaxed solution, ``predict``
returns hard labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_is_fitted

from .assoc import PairwiseAssociations, accuracy
from .consensus import ConsensusConfig, initial_state, round_labels, run_consensus
from .exceptions import DimensionError, DomainError
from .graph import SensorGraph, has_rooted_out_branching
from .perm import Permutation
from .spectral import SpectralConfig, procrustes_correct, round_spectral, run_doi


@dataclass(frozen=True)
class AssociationProblem:
    graph: SensorGraph
    associations: PairwiseAssociations

    @classmethod
    def from_associations(cls, A: PairwiseAssociations) -> "AssociationProblem":
        return cls(A.implied_graph(), A)


def check_problem(X, require_rooted: bool = True) -> AssociationProblem:
    """Coerce and validate estimator input."""
    if isinstance(X, PairwiseAssociations):
        X = AssociationProblem.from_associations(X)
    elif isinstance(X, tuple) and len(X) == 2:
        G, A = X
        X = AssociationProblem(G, A)
    if not isinstance(X, AssociationProblem):
        raise TypeError(f"expected an AssociationProblem, got {type(X).__name__}")
    X.associations.validate_for(X.graph)
    if require_rooted and not has_rooted_out_branching(X.graph):
        raise DomainError("sensor graph has no rooted out-branching")
    return X


def check_labels(y, problem: AssociationProblem) -> list:
    y = list(y)
    if len(y) != problem.graph.n:
        raise DimensionError(f"{len(y)} labels for {problem.graph.n} sensors")
    if not all(isinstance(p, Permutation) and p.size == problem.associations.m for p in y):
        raise DimensionError(f"labels must be permutations of size {problem.associations.m}")
    return y


class _SynchronizerMixin:
    def predict(self, X=None):
        """Hard labels; refits when ``X`` is given."""
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "labels_")
        return list(self.labels_)

    def fit_predict(self, X, y=None):
        return self.fit(X, y).labels_

    def score(self, X, y):
        """Accuracy of the predicted labels against ground truth ``y``."""
        problem = check_problem(X)
        labels = self.predict(problem)
        return accuracy(labels, check_labels(y, problem), self._anchor())


class ConsensusSynchronizer(_SynchronizerMixin, BaseEstimator):
    """Anchored averaging protocol followed by per-node assignment rounding."""

    def __init__(self, max_iters=1000, conv_tol=1e-9, distinguished=0, init="identity", random_state=None):
        self.max_iters = max_iters
        self.conv_tol = conv_tol
        self.distinguished = distinguished
        self.init = init
        self.random_state = random_state

    def _anchor(self):
        return self.distinguished

    def fit(self, X, y=None):
        problem = check_problem(X)
        truth = check_labels(y, problem) if y is not None else None
        cfg = ConsensusConfig(self.max_iters, self.conv_tol, self.distinguished, self.init)
        rng = np.random.default_rng(self.random_state)
        state = initial_state(problem.graph.n, problem.associations.m, cfg, rng)
        res = run_consensus(problem.associations, problem.graph, cfg, state=state, truth=truth)
        self.relaxed_ = res.relaxed
        self.n_iter_ = res.rounds
        self.converged_ = res.converged
        self.trace_ = res.trace
        self.labels_ = round_labels(res.relaxed)
        return self


class SpectralSynchronizer(_SynchronizerMixin, BaseEstimator):
    """Distributed orthogonal iteration, Procrustes alignment, rounding."""

    def __init__(self, outer_iters=100, inner_mode="linear_consensus", inner_iters=50, epsilon=None,
                 chol_jitter=1e-10, anchor=0, angle_tol=1e-9, init="identity", random_state=None):
        self.outer_iters = outer_iters
        self.inner_mode = inner_mode
        self.inner_iters = inner_iters
        self.epsilon = epsilon
        self.chol_jitter = chol_jitter
        self.anchor = anchor
        self.angle_tol = angle_tol
        self.init = init
        self.random_state = random_state

    def _anchor(self):
        return self.anchor

    def config(self) -> SpectralConfig:
        return SpectralConfig(self.outer_iters, self.inner_mode, self.inner_iters, self.epsilon,
                              self.chol_jitter, self.anchor, self.angle_tol, self.init)

    def fit(self, X, y=None):
        problem = check_problem(X)
        truth = check_labels(y, problem) if y is not None else None
        rng = np.random.default_rng(self.random_state)
        res = run_doi(problem.associations, problem.graph, self.config(), rng=rng, truth=truth)
        self.relaxed_ = res.relaxed
        self.aligned_ = procrustes_correct(res.relaxed, self.anchor)
        self.n_iter_ = res.outer_rounds
        self.converged_ = res.converged
        self.trace_ = res.trace
        self.labels_ = round_spectral(self.aligned_)
        return self


__all__ = [
    "AssociationProblem",
    "ConsensusSynchronizer",
    "NotFittedError",
    "SpectralSynchronizer",
    "check_labels",
    "check_problem",
]
