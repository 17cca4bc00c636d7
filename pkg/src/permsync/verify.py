"""Property batteries for the convergence theory and the equivalence claims.

Each check returns a :class:`CheckResult` with the measured worst case, so
the same code drives ``permsync verify`` and the acceptance tests.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .assign import assignment_objective, solve_assignment
from .assoc import (
    PairwiseAssociations,
    accuracy,
    build_dag_propagation,
    build_block_matrix,
    check_label_consistency,
    generate_synthetic,
    induced_associations,
    labels_to_array,
)
from .consensus import ConsensusConfig, ConsensusState, consensus_step, initial_state, neighbor_stacks, round_labels, run_consensus
from .graph import build_matrices, complete_graph, gen_graph, has_rooted_out_branching, random_digraph, random_rooted_digraph
from .oracle import brute_force_assignment, brute_force_labels, centralized_oi, joint_objective, power_limit
from .perm import Permutation, compose, inverse, matrix_of, random_permutation
from .simnet import simulate_consensus
from .spectral import SpectralConfig, procrustes_correct, round_spectral, run_doi

POWER = 2 ** 20


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def random_doubly_stochastic(rng, m, terms=4):
    w = rng.dirichlet(np.ones(terms))
    return sum(wk * matrix_of(random_permutation(rng, m)) for wk in w)


# ------------------------------------------------------------------ lemmas


@_timed
def check_stochastic_closure(seed=0, rounds=1000, n=6, m=5, tol=1e-10) -> CheckResult:
    """Iterates stay doubly stochastic with doubly stochastic inputs."""
    rng = np.random.default_rng(seed)
    G = random_rooted_digraph(n, rng)
    mats = {(i, j): random_doubly_stochastic(rng, m) for j, i in G.edges}
    A = PairwiseAssociations(n, m, mats)
    X = np.stack([random_doubly_stochastic(rng, m) for _ in range(n)])
    state = ConsensusState(X)
    stacks = neighbor_stacks(A, G)
    worst = 0.0
    for _ in range(rounds):
        state = consensus_step(state, A, G, 0, stacks)
        L = state.labels
        worst = max(worst, np.abs(L.sum(axis=2) - 1).max(), np.abs(L.sum(axis=1) - 1).max())
    return CheckResult("stochastic_closure", worst < tol,
                       f"max row/col sum deviation {worst:.2e} over {rounds} rounds (tol {tol:g})")


@_timed
def check_perron_limit(count=30, seed=0, n_max=10) -> CheckResult:
    """Rooted digraphs: rank(I - F) = n - 1 and F^k -> 1 c^T with c a distribution."""
    rng = np.random.default_rng(seed)
    worst_rows = worst_neg = worst_sum = 0.0
    rank_ok = True
    for _ in range(count):
        n = int(rng.integers(2, n_max + 1))
        G = random_rooted_digraph(n, rng, root=None)
        F = build_matrices(G).propagation
        rank_ok &= np.linalg.matrix_rank(np.eye(n) - F, tol=1e-9 * n) == n - 1
        Fk = power_limit(F, POWER)
        c = Fk[0]
        worst_rows = max(worst_rows, np.abs(Fk - c[None, :]).max())
        worst_neg = max(worst_neg, -c.min())
        worst_sum = max(worst_sum, abs(c.sum() - 1))
    ok = rank_ok and worst_rows <= 1e-8 and worst_neg <= 1e-10 and worst_sum <= 1e-8
    return CheckResult("perron_limit", ok,
                       f"{count} graphs, rank ok={rank_ok}, row spread {worst_rows:.1e}, "
                       f"min c {-worst_neg:.1e}, |sum c - 1| {worst_sum:.1e}")


@_timed
def check_distinguished_limit(count=30, seed=0, n_max=8) -> CheckResult:
    """One source-only vertex: F^k has [0, 0] = 1 and vanishing other columns."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    corner_exact = True
    for _ in range(count):
        n = int(rng.integers(2, n_max + 1))
        G = random_rooted_digraph(n, rng, root=0, source_only=True)
        Fk = power_limit(build_matrices(G).propagation, POWER)
        corner_exact &= Fk[0, 0] == 1.0
        worst = max(worst, np.abs(Fk[:, 1:]).max())
    return CheckResult("anchored_block_limit", corner_exact and worst < 1e-8,
                       f"{count} graphs, top-left exact={corner_exact}, max right-column entry {worst:.1e}")


@_timed
def check_dag_block_limit(count=20, seed=0, n_max=8, m_max=5) -> CheckResult:
    """Same limit on the data association graph with noisy associations."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    ident = True
    for _ in range(count):
        n = int(rng.integers(2, n_max + 1))
        m = int(rng.integers(2, m_max + 1))
        G = random_rooted_digraph(n, rng, root=0, prob=0.5)
        sym = G.__class__(n, frozenset(G.edges | {(j, i) for i, j in G.edges}))
        A, _ = generate_synthetic(sym, m, float(rng.uniform(0, 1)), rng)
        anchored = sym.without_in_edges(0)
        A = PairwiseAssociations(n, m, {k: v for k, v in A.mats.items() if k[0] != 0})
        Fk = power_limit(build_dag_propagation(A, anchored), POWER)
        ident &= bool(np.array_equal(Fk[:m, :m], np.eye(m)))
        worst = max(worst, np.abs(Fk[:, m:]).max())
    return CheckResult("association_graph_block_limit", ident and worst < 1e-8,
                       f"{count} instances, top-left identity={ident}, max right-block entry {worst:.1e}")


@_timed
def check_detzero(count=30, seed=0, n_max=7) -> CheckResult:
    """det(L_i) != 0 exactly when det(I - F_i) != 0."""
    rng = np.random.default_rng(seed)
    agree = True
    for _ in range(count):
        n = int(rng.integers(2, n_max + 1))
        G = random_digraph(n, float(rng.uniform(0.05, 0.5)), rng)
        mats = build_matrices(G)
        for i in range(n):
            keep = [k for k in range(n) if k != i]
            Li = mats.laplacian[np.ix_(keep, keep)]
            Fi = mats.propagation[np.ix_(keep, keep)]
            a = np.linalg.matrix_rank(Li, tol=1e-9 * n) < n - 1
            b = np.linalg.matrix_rank(np.eye(n - 1) - Fi, tol=1e-9 * n) < n - 1
            agree &= a == b
    return CheckResult("minor_singularity_agreement", agree, f"{count} graphs, singularity agreement={agree}")


# ---------------------------------------------------------------- theorems


@_timed
def check_noiseless_exactness(count=50, seed=0) -> CheckResult:
    """Noiseless data: rounded limit is consistent, exact, and equals P_i0 P_00^T."""
    rng = np.random.default_rng(seed)
    worst_acc = 1.0
    all_ok = True
    for _ in range(count):
        n = int(rng.integers(3, 11))
        m = int(rng.integers(2, 9))
        G = random_rooted_digraph(n, rng, root=0)
        truth = [random_permutation(rng, m) for _ in range(n)]
        A = induced_associations(truth, G)
        res = run_consensus(A, G, ConsensusConfig(init="random_permutation"), rng=rng)
        labels = round_labels(res.relaxed)
        acc = accuracy(labels, truth, 0)
        expected = [compose(t, inverse(truth[0])) for t in truth]
        ok = res.converged and acc == 1.0 and check_label_consistency(labels, A) and labels == expected
        worst_acc = min(worst_acc, acc)
        all_ok &= ok
    return CheckResult("noiseless_exactness", all_ok, f"{count} instances, min accuracy {worst_acc:.4f}")


@_timed
def check_init_independence(seed=0, n=8, m=6, p=0.3, tol=1e-6) -> CheckResult:
    """Noisy limit depends only on the data and the anchor's initial value."""
    rng = np.random.default_rng(seed)
    G = complete_graph(n)
    A, _ = generate_synthetic(G, m, p, rng)
    cfg = ConsensusConfig(conv_tol=1e-9, init="random_permutation", max_iters=100000)
    r1 = run_consensus(A, G, cfg, rng=np.random.default_rng(seed + 1))
    r2 = run_consensus(A, G, cfg, rng=np.random.default_rng(seed + 2))
    diff = float(np.abs(r1.relaxed - r2.relaxed).max())
    ok = r1.converged and r2.converged and diff < tol
    return CheckResult("init_independence", ok,
                       f"max-abs difference {diff:.2e} (tol {tol:g}), rounds {r1.rounds}/{r2.rounds}")


@_timed
def check_neighbor_averaging_equivalence(seed=0, n=7, m=5, rounds=50, tol=1e-12) -> CheckResult:
    """Noiseless iterates mapped by P_i0^T follow plain neighbor averaging."""
    rng = np.random.default_rng(seed)
    G = random_rooted_digraph(n, rng, root=0)
    truth = [random_permutation(rng, m) for _ in range(n)]
    T = labels_to_array(truth)
    A = induced_associations(truth, G)
    state = initial_state(n, m, ConsensusConfig(init="random_permutation"), rng)
    stacks = neighbor_stacks(A, G)
    worst = 0.0
    for _ in range(rounds):
        prime = np.matmul(T.transpose(0, 2, 1), state.labels)
        state = consensus_step(state, A, G, 0, stacks)
        new_prime = np.matmul(T.transpose(0, 2, 1), state.labels)
        for i in range(1, n):
            nbrs = G.neighborhood(i)
            avg = (prime[i] + prime[list(nbrs)].sum(axis=0)) / (len(nbrs) + 1)
            worst = max(worst, np.abs(new_prime[i] - avg).max())
    return CheckResult("neighbor_averaging_equivalence", worst <= tol, f"max deviation {worst:.1e} over {rounds} rounds")


# ------------------------------------------------------------- equivalence


def random_instance(rng, n_max=8, m_max=6, n_min=2, m_min=2):
    n = int(rng.integers(n_min, n_max + 1))
    m = int(rng.integers(m_min, m_max + 1))
    G = gen_graph("random_subset", n, float(rng.uniform(0.4, 1.0)), rng) if n > 2 else complete_graph(n)
    A, truth = generate_synthetic(G, m, float(rng.uniform(0, 0.6)), rng)
    return G, A, truth


@_timed
def check_doi_centralized(count=20, seed=0, outer=20, tol=1e-9) -> CheckResult:
    """Exact-average DOI reproduces centralized orthogonal iteration."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        G, A, _ = random_instance(rng)
        n, m = A.n, A.m
        cfg = SpectralConfig(outer_iters=outer, inner_mode="exact_average", angle_tol=0, init="random")
        res = run_doi(A, G, cfg, rng=rng, keep_iterates=True)
        P = build_block_matrix(A, G)
        ref = centralized_oi(P, res.iterates[0].reshape(n * m, m), outer, scale=np.sqrt(n), return_all=True)
        for X, R in zip(res.iterates, ref):
            worst = max(worst, np.abs(X.reshape(n * m, m) - R).max())
    return CheckResult("doi_centralized_lockstep", worst <= tol,
                       f"{count} instances x {outer} iterations, max entry gap {worst:.1e} (tol {tol:g})")


@_timed
def check_harness_consensus(seed=0, rounds=40) -> CheckResult:
    """Consensus through the message-passing harness is bit-identical."""
    rng = np.random.default_rng(seed)
    G, A, _ = random_instance(rng, n_min=4)
    cfg = ConsensusConfig(max_iters=rounds, conv_tol=1e-300)
    direct = run_consensus(A, G, cfg).relaxed
    viaharness, _ = simulate_consensus(A, G, cfg, rounds=rounds)
    same = bool(np.array_equal(direct, viaharness))
    return CheckResult("harness_consensus_bitwise", same, f"{rounds} rounds, bit-identical={same}")


@_timed
def check_tiny_joint_optimality(count=20, seed=0) -> CheckResult:
    """Spectral pipeline hits the exhaustive optimum with one corrupted edge."""
    rng = np.random.default_rng(seed)
    misses = []
    for k in range(count):
        n = int(rng.integers(3, 5))
        m = int(rng.integers(2, 4))
        G = complete_graph(n)
        truth = [random_permutation(rng, m) for _ in range(n)]
        A = induced_associations(truth, G)
        i, j = sorted(rng.choice(n, 2, replace=False))
        bad = matrix_of(truth[i]) @ matrix_of(truth[j]).T
        bad = bad[np.roll(np.arange(m), 1)]
        mats = dict(A.mats)
        mats[(i, j)] = bad
        mats[(j, i)] = bad.T.copy()
        A = PairwiseAssociations(n, m, mats)
        cfg = SpectralConfig(inner_mode="exact_average", init="random")
        labels = round_spectral(procrustes_correct(run_doi(A, G, cfg, rng=rng).relaxed, 0))
        got = joint_objective(labels, A, G)
        _, best = brute_force_labels(A, G)
        if abs(got - best) > 1e-9:
            misses.append((k, got, best))
    return CheckResult("tiny_joint_optimality", not misses,
                       f"{count} instances, {len(misses)} below optimum" + (f": {misses[:3]}" if misses else ""))


# -------------------------------------------------------------- assignment


@_timed
def check_hungarian(counts=((6, 500), (7, 100)), seed=0) -> CheckResult:
    """Hungarian objective equals the brute-force maximum."""
    rng = np.random.default_rng(seed)
    failures = 0
    total = 0
    for m, count in counts:
        for _ in range(count):
            W = rng.random((m, m))
            p = solve_assignment(W)
            best, _ = brute_force_assignment(W)
            failures += assignment_objective(W, p) != best
            total += 1
    return CheckResult("hungarian_vs_bruteforce", failures == 0, f"{total} matrices, {failures} mismatches")


@_timed
def check_procrustes(count=100, seed=0, tol=1e-10) -> CheckResult:
    """Anchor block Q0^T is mapped back to the identity."""
    from scipy.stats import ortho_group

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        m = int(rng.integers(2, 11))
        Q0 = ortho_group.rvs(m, random_state=rng)
        blocks = np.stack([Q0.T, rng.standard_normal((m, m))])
        fixed = procrustes_correct(blocks, 0)
        worst = max(worst, np.abs(fixed[0] - np.eye(m)).max())
    return CheckResult("procrustes_recovery", worst < tol, f"{count} rotations, max deviation {worst:.1e}")


SUITES = {
    "lemmas": (check_stochastic_closure, check_perron_limit, check_distinguished_limit, check_dag_block_limit,
               check_detzero),
    "theorems": (check_noiseless_exactness, check_init_independence, check_neighbor_averaging_equivalence),
    "equivalence": (check_doi_centralized, check_harness_consensus, check_tiny_joint_optimality),
    "assignment": (check_hungarian, check_procrustes),
}


def run_suite(name: str, seed: int = 0) -> list:
    if name not in SUITES:
        raise KeyError(name)
    return [check(seed=seed) for check in SUITES[name]]
