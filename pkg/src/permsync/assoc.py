"""Pairwise associations, consistency checks, synthetic corruption and scoring.

``PairwiseAssociations`` stores ``Pt[(i, j)]``, the estimated map from sensor
``j``'s targets to sensor ``i``'s. Sensor ``i`` uses it when it receives
from ``j``, so the pair ``(i, j)`` must be present for every graph edge
``(j, i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assign import solve_assignment
from .exceptions import DimensionError, DomainError, ParseError
from .graph import SensorGraph
from .perm import (
    Permutation,
    as_square,
    compose,
    inverse,
    is_permutation_matrix,
    matrix_of,
    perm_distance,
    random_permutation,
)


@dataclass
class PairwiseAssociations:
    n: int
    m: int
    mats: dict  # (i, j) -> (m, m) ndarray

    def __post_init__(self):
        checked = {}
        for (i, j), M in self.mats.items():
            i, j = int(i), int(j)
            if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                raise DomainError(f"association key ({i}, {j}) invalid for n={self.n}")
            M = as_square(M, f"association ({i}, {j})")
            if M.shape[0] != self.m:
                raise DimensionError(f"association ({i}, {j}) is {M.shape}, expected m={self.m}")
            if np.any(np.abs(M.sum(axis=1) - 1.0) > 1e-9) or M.min() < -1e-9:
                raise DomainError(f"association ({i}, {j}) is not row-stochastic")
            checked[(i, j)] = M
        self.mats = checked

    def __getitem__(self, key) -> np.ndarray:
        return self.mats[key]

    def __contains__(self, key):
        return key in self.mats

    def keys(self):
        return sorted(self.mats)

    def perm(self, i: int, j: int) -> Permutation:
        M = self.mats[(i, j)]
        if not is_permutation_matrix(M):
            raise DomainError(f"association ({i}, {j}) is not a permutation matrix")
        return Permutation.from_matrix(M)

    def implied_graph(self) -> SensorGraph:
        """Sensor graph whose edges are exactly the flows the data supports."""
        return SensorGraph(self.n, frozenset((j, i) for i, j in self.mats))

    def validate_for(self, G: SensorGraph):
        if G.n != self.n:
            raise DimensionError(f"graph has {G.n} vertices, associations have {self.n}")
        missing = [(j, i) for i, j in G.edges if (j, i) not in self.mats]
        if missing:
            e = missing[0]
            raise DomainError(f"no association for graph edge ({e[0]}, {e[1]}): needs key ({e[1]}, {e[0]})")


# A hard labeling is a list of Permutation; a relaxed one is an (n, m, m) array.


def labels_to_array(labels) -> np.ndarray:
    return np.stack([matrix_of(p) for p in labels])


def induced_associations(truth, G: SensorGraph) -> PairwiseAssociations:
    """Noiseless ``Pt_ij = P_i P_j^T`` for every edge ``(j, i)``."""
    M = labels_to_array(truth)
    mats = {(i, j): M[i] @ M[j].T for j, i in G.edges}
    return PairwiseAssociations(G.n, M.shape[1], mats)


def check_pairwise_consistency(A: PairwiseAssociations, G: SensorGraph) -> list:
    """Ordered triples ``(i, j, k)`` of distinct sensors with all three maps
    present where ``pt_ij o pt_jk != pt_ik``."""
    A.validate_for(G)
    perms = {key: A.perm(*key) for key in A.mats}
    bad = []
    for (i, j), p_ij in sorted(perms.items()):
        for k in range(A.n):
            if k in (i, j) or (j, k) not in perms or (i, k) not in perms:
                continue
            if compose(p_ij, perms[(j, k)]) != perms[(i, k)]:
                bad.append((i, j, k))
    return bad


def check_label_consistency(labels, A: PairwiseAssociations) -> bool:
    """True iff ``pt_ij = pi_i o pi_j^-1`` for every stored pair."""
    if len(labels) != A.n:
        raise DimensionError(f"{len(labels)} labels for {A.n} sensors")
    for p in labels:
        if p.size != A.m:
            raise DimensionError(f"label of size {p.size}, expected m={A.m}")
    for (i, j) in A.keys():
        if A.perm(i, j) != compose(labels[i], inverse(labels[j])):
            return False
    return True


def corrupt_rows(M: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    """Rotate the rows of ``ceil(p*m)`` randomly chosen positions among
    themselves by a random non-zero shift. Every chosen row ends up wrong
    when at least two rows are chosen."""
    m = M.shape[0]
    k = min(m, math.ceil(p * m - 1e-9)) if p > 0 else 0
    out = M.copy()
    if k < 2:
        return out
    rows = np.sort(rng.choice(m, size=k, replace=False))
    shift = int(rng.integers(1, k))
    out[rows] = M[np.roll(rows, -shift)]
    return out


def generate_synthetic(G: SensorGraph, m: int, p: float, rng: np.random.Generator):
    """Draw ground-truth labels and corrupted pairwise associations.

    Corruption is applied once per unordered sensor pair; the reverse
    direction is the transpose.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"outlier fraction must be in [0, 1], got {p}")
    truth = [random_permutation(rng, m) for _ in range(G.n)]
    T = labels_to_array(truth)
    pairs = sorted({(min(i, j), max(i, j)) for i, j in G.edges})
    mats = {}
    for i, j in pairs:
        M = corrupt_rows(T[i] @ T[j].T, p, rng)
        if (j, i) in G.edges:
            mats[(i, j)] = M
        if (i, j) in G.edges:
            mats[(j, i)] = M.T.copy()
    return PairwiseAssociations(G.n, m, mats), truth


def global_alignment(labels, truth, anchor: int = 0) -> Permutation:
    """Permutation ``q`` maximizing agreement of ``labels[anchor] o q`` with
    ``truth[anchor]``."""
    L = matrix_of(labels[anchor])
    T = matrix_of(truth[anchor])
    # <L Q, T> = <Q, L^T T>
    return solve_assignment(L.T @ T)


def accuracy(labels, truth, anchor: int = 0) -> float:
    """Fraction of correct labels after removing the global ambiguity."""
    if len(labels) != len(truth):
        raise DimensionError(f"{len(labels)} labels vs {len(truth)} ground-truth labels")
    q = global_alignment(labels, truth, anchor)
    n, m = len(truth), truth[0].size
    correct = sum(m - perm_distance(compose(p, q), t) for p, t in zip(labels, truth))
    return correct / (n * m)


def edge_error_rate(M: np.ndarray, truth, i: int, j: int) -> float:
    """Fraction of rows of ``M`` that differ from the noiseless ``P_i P_j^T``."""
    ideal = matrix_of(truth[i]) @ matrix_of(truth[j]).T
    return float(np.any(np.abs(M - ideal) > 1e-12, axis=1).mean())


def build_block_matrix(A: PairwiseAssociations, G: SensorGraph) -> np.ndarray:
    """``nm x nm`` matrix with identity diagonal blocks and block ``(i, j)``
    equal to ``Pt_ij`` when ``j`` is an in-neighbor of ``i``."""
    A.validate_for(G)
    n, m = A.n, A.m
    P = np.zeros((n * m, n * m))
    for i in range(n):
        P[i * m:(i + 1) * m, i * m:(i + 1) * m] = np.eye(m)
        for j in G.neighborhood(i):
            P[i * m:(i + 1) * m, j * m:(j + 1) * m] = A[(i, j)]
    return P


def build_dag_propagation(A: PairwiseAssociations, G: SensorGraph) -> np.ndarray:
    """Propagation matrix of the data association graph: block row ``i`` is
    ``[I at i, Pt_ij at j in N_i] / (|N_i| + 1)``."""
    P = build_block_matrix(A, G)
    m = A.m
    scale = np.repeat([1.0 / (len(G.neighborhood(i)) + 1) for i in range(A.n)], m)
    return P * scale[:, None]


def data_association_graph(A: PairwiseAssociations, G: SensorGraph) -> dict:
    """Weighted edges ``((i, k), (j, l)) -> [Pt_ij]_kl`` for positive entries
    on sensor edges ``(i, j)``."""
    edges = {}
    for i, j in sorted(G.edges):
        if (i, j) not in A:
            continue
        M = A[(i, j)]
        for k, l in zip(*np.nonzero(M > 0)):
            edges[((i, int(k)), (j, int(l)))] = float(M[k, l])
    return edges


def stacked_truth(truth) -> np.ndarray:
    return labels_to_array(truth).reshape(-1, truth[0].size)


# ---------------------------------------------------------------- file I/O


def _fmt_row(row):
    return " ".join(repr(float(x)) if x not in (0.0, 1.0) else str(int(x)) for x in row)


def write_bundle(A: PairwiseAssociations, path, header_comments=()):
    """Association bundle: ``n m`` header, then per stored pair a ``i j``
    line (1-based) followed by a permutation line or ``m`` matrix rows."""
    with open(path, "w") as fh:
        for c in header_comments:
            fh.write(f"# {c}\n")
        fh.write(f"{A.n} {A.m}\n")
        for i, j in A.keys():
            M = A[(i, j)]
            fh.write(f"{i + 1} {j + 1}\n")
            if is_permutation_matrix(M):
                fh.write(Permutation.from_matrix(M).to_line() + "\n")
            else:
                for row in M:
                    fh.write(_fmt_row(row) + "\n")


def read_bundle(path) -> PairwiseAssociations:
    with open(path) as fh:
        raw = fh.readlines()
    lines = [(k, ln.split("#", 1)[0].strip()) for k, ln in enumerate(raw, 1)]
    lines = [(k, ln) for k, ln in lines if ln]
    if not lines:
        raise ParseError("empty association file", path=path)
    k, head = lines[0]
    try:
        n, m = (int(t) for t in head.split())
    except ValueError:
        raise ParseError(f"expected header 'n m', got {head!r}", k, path) from None
    if n < 1 or m < 1:
        raise ParseError(f"header values must be positive, got {head!r}", k, path)
    mats = {}
    pos = 1
    while pos < len(lines):
        k, ln = lines[pos]
        toks = ln.split()
        try:
            i, j = int(toks[0]) - 1, int(toks[1]) - 1
            if len(toks) != 2:
                raise ValueError
        except (ValueError, IndexError):
            raise ParseError(f"expected edge line 'i j', got {ln!r}", k, path) from None
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ParseError(f"edge ({i + 1}, {j + 1}) invalid for n={n}", k, path)
        if (i, j) in mats:
            raise ParseError(f"duplicate edge ({i + 1}, {j + 1})", k, path)
        pos += 1
        if pos >= len(lines):
            raise ParseError(f"missing association data for edge ({i + 1}, {j + 1})", k, path)
        k, ln = lines[pos]
        values = ln.split()
        if len(values) != m:
            raise ParseError(f"expected {m} entries, got {len(values)}", k, path)
        as_perm = _try_perm_line(values, m)
        if as_perm is not None and m > 1:
            mats[(i, j)] = matrix_of(as_perm)
            pos += 1
            continue
        rows = []
        for _ in range(m):
            if pos >= len(lines):
                raise ParseError(f"truncated matrix for edge ({i + 1}, {j + 1})", k, path)
            k, ln = lines[pos]
            try:
                row = [float(t) for t in ln.split()]
            except ValueError:
                raise ParseError(f"non-numeric matrix row {ln!r}", k, path) from None
            if len(row) != m:
                raise ParseError(f"expected {m} entries, got {len(row)}", k, path)
            rows.append(row)
            pos += 1
        M = np.array(rows)
        if not np.all(np.isfinite(M)) or M.min() < -1e-9 or np.any(np.abs(M.sum(axis=1) - 1) > 1e-9):
            raise ParseError(f"matrix for edge ({i + 1}, {j + 1}) is not row-stochastic", k, path)
        mats[(i, j)] = M
    return PairwiseAssociations(n, m, mats)


def _try_perm_line(values, m):
    try:
        images = [int(v) - 1 for v in values]
    except ValueError:
        return None
    if sorted(images) != list(range(m)):
        return None
    return Permutation(tuple(images))


def write_labels(labels, path, header_comments=()):
    with open(path, "w") as fh:
        for c in header_comments:
            fh.write(f"# {c}\n")
        for p in labels:
            fh.write(p.to_line() + "\n")


def read_labels(path) -> list:
    out = []
    with open(path) as fh:
        for k, ln in enumerate(fh, 1):
            ln = ln.split("#", 1)[0].strip()
            if ln:
                out.append(Permutation.from_line(ln, k))
    return out
