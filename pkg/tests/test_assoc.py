import itertools

import numpy as np
import pytest

from permsync.assoc import (
    PairwiseAssociations,
    accuracy,
    build_block_matrix,
    build_dag_propagation,
    check_label_consistency,
    check_pairwise_consistency,
    data_association_graph,
    edge_error_rate,
    generate_synthetic,
    induced_associations,
    labels_to_array,
    read_bundle,
    read_labels,
    write_bundle,
    write_labels,
)
from permsync.consensus import ConsensusState, consensus_step
from permsync.exceptions import DomainError, ParseError
from permsync.graph import SensorGraph, build_matrices, complete_graph, random_rooted_digraph
from permsync.oracle import sym_eigen
from permsync.perm import Permutation, compose, matrix_of, random_permutation


def truth_for(rng, n, m):
    return [random_permutation(rng, m) for _ in range(n)]


def test_induced_associations_are_consistent(rng):
    G = complete_graph(5)
    A = induced_associations(truth_for(rng, 5, 4), G)
    assert check_pairwise_consistency(A, G) == []


def test_three_sensor_inconsistency():
    # sensor 1 and 2 disagree on targets 2 and 3; the other two maps are identities
    swap = matrix_of(Permutation((0, 2, 1)))
    eye = np.eye(3)
    mats = {(0, 1): swap, (1, 0): swap, (1, 2): eye, (2, 1): eye, (0, 2): eye, (2, 0): eye}
    A = PairwiseAssociations(3, 3, mats)
    bad = check_pairwise_consistency(A, complete_graph(3))
    assert (0, 1, 2) in bad
    chained = compose(A.perm(0, 1), A.perm(1, 2))
    assert chained(1) == 2 and A.perm(0, 2)(1) == 1


def test_single_corrupted_edge_triples(rng):
    n, m = 4, 5
    G = complete_graph(n)
    A = induced_associations(truth_for(rng, n, m), G)
    a, b = 1, 3
    wrong = A[(a, b)][[1, 0, 2, 3, 4]]
    mats = dict(A.mats)
    mats[(a, b)], mats[(b, a)] = wrong, wrong.T.copy()
    A = PairwiseAssociations(n, m, mats)
    # oracle: a triple is broken exactly when one of its three pairs is {a, b}
    expected = [(i, j, k) for i, j, k in itertools.permutations(range(n), 3)
                if {a, b} in ({i, j}, {j, k}, {i, k})]
    assert sorted(check_pairwise_consistency(A, G)) == sorted(expected)


def test_label_consistency(rng):
    n, m = 5, 4
    G = complete_graph(n)
    truth = truth_for(rng, n, m)
    A = induced_associations(truth, G)
    assert check_label_consistency(truth, A)
    p0 = random_permutation(rng, m)
    assert check_label_consistency([compose(t, p0) for t in truth], A)
    broken = list(truth)
    broken[2] = compose(truth[2], Permutation((1, 0, 2, 3)))
    assert not check_label_consistency(broken, A)


def test_synthetic_noiseless(rng):
    G = complete_graph(4)
    A, truth = generate_synthetic(G, 6, 0.0, rng)
    assert check_pairwise_consistency(A, G) == []
    ref = induced_associations(truth, G)
    for key in ref.keys():
        np.testing.assert_array_equal(A[key], ref[key])


def test_synthetic_full_corruption(rng):
    G = complete_graph(3)
    A, truth = generate_synthetic(G, 5, 1.0, rng)
    for i, j in A.keys():
        assert edge_error_rate(A[(i, j)], truth, i, j) == 1.0


def test_synthetic_error_rate(rng):
    G = complete_graph(15)
    A, truth = generate_synthetic(G, 50, 0.4, rng)
    rates = [edge_error_rate(A[k], truth, *k) for k in A.keys()][:100]
    assert len(rates) == 100
    assert 0.38 <= np.mean(rates) <= 0.42
    # reverse direction carries the transposed map
    np.testing.assert_array_equal(A[(3, 7)], A[(7, 3)].T)


def test_synthetic_rejects_bad_fraction(rng):
    with pytest.raises(DomainError):
        generate_synthetic(complete_graph(3), 4, 1.5, rng)


def test_accuracy_examples(rng):
    n, m = 10, 6
    truth = truth_for(rng, n, m)
    assert accuracy(truth, truth) == 1.0
    p0 = random_permutation(rng, m)
    assert accuracy([compose(t, p0) for t in truth], truth) == 1.0
    labels = list(truth)
    derange = Permutation(tuple(np.roll(np.arange(m), 1)))
    labels[4] = compose(truth[4], derange)
    assert accuracy(labels, truth) == pytest.approx((n - 1) / n)


def test_block_matrix_examples(rng):
    m = 4
    A1 = PairwiseAssociations(1, m, {})
    np.testing.assert_array_equal(build_block_matrix(A1, SensorGraph(1, frozenset())), np.eye(m))

    truth = truth_for(rng, 2, m)
    G2 = complete_graph(2)
    P = build_block_matrix(induced_associations(truth, G2), G2)
    Pt = matrix_of(truth[0]) @ matrix_of(truth[1]).T
    np.testing.assert_array_equal(P, np.block([[np.eye(m), Pt], [Pt.T, np.eye(m)]]))
    vals, _ = sym_eigen(P)
    np.testing.assert_allclose(vals[:m], 2.0, atol=1e-12)
    np.testing.assert_allclose(vals[m:], 0.0, atol=1e-12)

    G4 = complete_graph(4)
    truth4 = truth_for(rng, 4, m)
    P4 = build_block_matrix(induced_associations(truth4, G4), G4)
    assert np.linalg.matrix_rank(P4) == m
    S = labels_to_array(truth4).reshape(-1, m)
    np.testing.assert_array_equal(P4, S @ S.T)


def test_dag_propagation_examples(rng):
    G = SensorGraph(3, frozenset())
    np.testing.assert_array_equal(build_dag_propagation(PairwiseAssociations(3, 2, {}), G), np.eye(6))

    n, m = 6, 3
    G = random_rooted_digraph(n, rng)
    A, _ = generate_synthetic(SensorGraph(n, frozenset(G.edges | {(j, i) for i, j in G.edges})), m, 0.5, rng)
    A = PairwiseAssociations(n, m, {(i, j): A[(i, j)] for j, i in G.edges})
    X = rng.dirichlet(np.ones(m), size=(n, m))
    stepped = consensus_step(ConsensusState(X), A, G, distinguished=0).labels
    FD = build_dag_propagation(A, G)
    via_matrix = (FD @ X.reshape(n * m, m)).reshape(n, m, m)
    np.testing.assert_allclose(stepped[1:], via_matrix[1:], atol=1e-14)


def test_dag_propagation_noiseless_kronecker(rng):
    n, m = 5, 3
    G = random_rooted_digraph(n, rng)
    truth = truth_for(rng, n, m)
    A = induced_associations(truth, G)
    Pi0 = np.zeros((n * m, n * m))
    for i, t in enumerate(truth):
        Pi0[i * m:(i + 1) * m, i * m:(i + 1) * m] = matrix_of(t)
    F = build_matrices(G).propagation
    np.testing.assert_allclose(build_dag_propagation(A, G), Pi0 @ np.kron(F, np.eye(m)) @ Pi0.T, atol=1e-15)


def test_data_association_graph_edges(rng):
    G = complete_graph(3)
    A = induced_associations(truth_for(rng, 3, 2), G)
    edges = data_association_graph(A, G)
    assert len(edges) == 6 * 2
    assert set(edges.values()) == {1.0}


def test_validate_for_reports_missing_key():
    A = PairwiseAssociations(2, 2, {(1, 0): np.eye(2)})
    A.validate_for(SensorGraph(2, frozenset({(0, 1)})))
    with pytest.raises(DomainError, match="needs key"):
        A.validate_for(complete_graph(2))


def test_bundle_roundtrip(tmp_path, rng):
    G = complete_graph(4)
    A, truth = generate_synthetic(G, 5, 0.4, rng)
    mats = dict(A.mats)
    mats[(0, 1)] = np.full((5, 5), 0.2)
    A = PairwiseAssociations(4, 5, mats)
    write_bundle(A, tmp_path / "a.txt", ["seed = 1"])
    B = read_bundle(tmp_path / "a.txt")
    assert B.keys() == A.keys()
    for k in A.keys():
        np.testing.assert_array_equal(A[k], B[k])
    write_labels(truth, tmp_path / "t.txt")
    assert read_labels(tmp_path / "t.txt") == truth


@pytest.mark.parametrize("text, line", [
    ("2 2\n1 2\n2 1\n1 2 x\n", None),
    ("2 x\n", 1),
    ("2 2\n1 2\n1 2\n1 3\n2 2\n", 4),
    ("2 2\n1 2\n0.5 0.5\n0.5 0.6\n", 4),
    ("2 2\n1 2\n0.5\n", 3),
    ("3 2\n1 2\n", 2),
])
def test_bundle_errors_name_the_line(tmp_path, text, line):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    if line is None:
        # trailing garbage after a complete entry is read as the next edge line
        with pytest.raises(ParseError, match=r":4:"):
            read_bundle(path)
        return
    with pytest.raises(ParseError, match=rf":{line}:"):
        read_bundle(path)
