import numpy as np
import pytest

from permsync.assoc import (
    PairwiseAssociations,
    accuracy,
    build_dag_propagation,
    check_label_consistency,
    generate_synthetic,
    induced_associations,
    labels_to_array,
)
from permsync.consensus import (
    ConsensusConfig,
    ConsensusState,
    consensus_step,
    initial_state,
    round_labels,
    run_consensus,
)
from permsync.exceptions import ConfigError
from permsync.graph import SensorGraph, complete_graph, path_graph
from permsync.oracle import brute_force_assignment
from permsync.perm import Permutation, is_doubly_stochastic, matrix_of, random_permutation


def test_step_without_neighbors_keeps_state(rng):
    X = rng.dirichlet(np.ones(3), size=(2, 3))
    out = consensus_step(ConsensusState(X), PairwiseAssociations(2, 3, {}), SensorGraph(2, frozenset()), 0)
    np.testing.assert_array_equal(out.labels, X)
    assert out.delta == 0.0 and out.t == 1


def test_step_equals_block_propagation(rng):
    G = complete_graph(4)
    A, _ = generate_synthetic(G, 3, 0.5, rng)
    X = rng.dirichlet(np.ones(3), size=(4, 3))
    out = consensus_step(ConsensusState(X), A, G, distinguished=0).labels
    ref = (build_dag_propagation(A, G) @ X.reshape(12, 3)).reshape(4, 3, 3)
    np.testing.assert_allclose(out[1:], ref[1:], atol=1e-15)
    np.testing.assert_array_equal(out[0], X[0])


def test_first_step_noiseless_complete(rng):
    n, m = 3, 4
    G = complete_graph(n)
    truth = [random_permutation(rng, m) for _ in range(n)]
    T = labels_to_array(truth)
    A = induced_associations(truth, G)
    state = initial_state(n, m, ConsensusConfig())
    out = consensus_step(state, A, G, distinguished=0).labels
    for i in range(1, n):
        # (I + sum_{j != i} P_i P_j^T) / 3, written as P_i (sum_j P_j^T) / 3
        expected = T[i] @ (T[i].T + sum(T[j].T for j in range(n) if j != i)) / 3
        np.testing.assert_allclose(out[i], expected, atol=1e-15)


@pytest.mark.parametrize("init", ["identity", "uniform", "random_permutation"])
def test_noiseless_path_graph_converges_to_consistent_labels(rng, init):
    G = path_graph(5)
    truth = [random_permutation(rng, 4) for _ in range(5)]
    A = induced_associations(truth, G)
    res = run_consensus(A, G, ConsensusConfig(init=init), rng=rng)
    assert res.converged
    labels = round_labels(res.relaxed)
    assert check_label_consistency(labels, A)
    assert accuracy(labels, truth) == 1.0


def test_single_sensor_is_immediately_converged():
    res = run_consensus(PairwiseAssociations(1, 3, {}), SensorGraph(1, frozenset()))
    assert res.converged and res.rounds == 0
    np.testing.assert_array_equal(res.relaxed[0], np.eye(3))


def test_limit_independent_of_non_anchor_init(rng):
    G = complete_graph(6)
    truth = [random_permutation(rng, 5) for _ in range(6)]
    A = induced_associations(truth, G)
    cfg = ConsensusConfig(init="random_permutation", conv_tol=1e-12, max_iters=10000)
    r1 = run_consensus(A, G, cfg, rng=np.random.default_rng(1))
    r2 = run_consensus(A, G, cfg, rng=np.random.default_rng(2))
    assert np.abs(r1.relaxed - r2.relaxed).max() < 1e-6


def test_iterates_stay_doubly_stochastic(rng):
    G = complete_graph(5)
    A, _ = generate_synthetic(G, 6, 0.5, rng)
    res = run_consensus(A, G, ConsensusConfig(max_iters=200))
    assert all(is_doubly_stochastic(X, tol=1e-10) for X in res.relaxed)


def test_trace_records_accuracy(rng):
    G = complete_graph(4)
    A, truth = generate_synthetic(G, 5, 0.0, rng)
    res = run_consensus(A, G, truth=truth)
    assert [row[0] for row in res.trace] == list(range(1, res.rounds + 1))
    assert res.trace[-1][2] == 1.0


def test_non_convergence_is_reported(rng):
    G = path_graph(6)
    A, _ = generate_synthetic(G.__class__(6, frozenset(G.edges | {(j, i) for i, j in G.edges})), 3, 0.0, rng)
    A = PairwiseAssociations(6, 3, {k: v for k, v in A.mats.items() if (k[1], k[0]) in G.edges})
    res = run_consensus(A, G, ConsensusConfig(max_iters=2, init="random_permutation"), rng=rng)
    assert not res.converged and res.rounds == 2


def test_config_validation():
    with pytest.raises(ConfigError):
        ConsensusConfig(distinguished=5).validate(3)
    with pytest.raises(ConfigError):
        ConsensusConfig(init="zeros").validate(3)
    with pytest.raises(ConfigError):
        initial_state(3, 2, ConsensusConfig(init="random_permutation"))


def test_rounding_examples(rng):
    p = random_permutation(rng, 7)
    assert round_labels([matrix_of(p)]) == [p]
    assert round_labels([np.full((5, 5), 0.2)]) == [Permutation.identity(5)]
    for m in range(2, 7):
        w = rng.dirichlet(np.ones(4))
        X = sum(wk * matrix_of(random_permutation(rng, m)) for wk in w)
        best, winners = brute_force_assignment(X)
        assert round_labels([X])[0] == winners[0]
