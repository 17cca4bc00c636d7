"""Decentralized consistent data association across sensor networks.

Two solvers are provided: a consensus protocol over doubly stochastic
label matrices and a distributed orthogonal iteration (spectral) method.
Both round their relaxed output to permutations with the Hungarian method.
"""

__version__ = "0.1.0"

from .assign import solve_assignment
from .assoc import (
    PairwiseAssociations,
    accuracy,
    check_label_consistency,
    check_pairwise_consistency,
    generate_synthetic,
    induced_associations,
)
from .consensus import ConsensusConfig, run_consensus
from .estimators import AssociationProblem, ConsensusSynchronizer, SpectralSynchronizer
from .exceptions import (
    ConfigError,
    DimensionError,
    DomainError,
    GraphGenerationError,
    ParseError,
    RankDeficiencyError,
)
from .graph import SensorGraph, complete_graph, gen_graph, has_rooted_out_branching
from .perm import Permutation, compose, inverse, matrix_of
from .spectral import SpectralConfig, run_doi, solve_spectral

__all__ = [
    "AssociationProblem",
    "ConfigError",
    "ConsensusConfig",
    "ConsensusSynchronizer",
    "DimensionError",
    "DomainError",
    "GraphGenerationError",
    "PairwiseAssociations",
    "ParseError",
    "Permutation",
    "RankDeficiencyError",
    "SensorGraph",
    "SpectralConfig",
    "SpectralSynchronizer",
    "accuracy",
    "check_label_consistency",
    "check_pairwise_consistency",
    "complete_graph",
    "compose",
    "gen_graph",
    "generate_synthetic",
    "has_rooted_out_branching",
    "induced_associations",
    "inverse",
    "matrix_of",
    "run_consensus",
    "run_doi",
    "solve_assignment",
    "solve_spectral",
]
