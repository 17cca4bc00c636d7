"""Directed sensor graphs and their structural matrices.

An edge ``(i, j)`` means information flows from sensor ``i`` to sensor
``j``; the neighborhood of ``i`` is therefore its set of in-neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import DomainError, GraphGenerationError, ParseError

RANK_TOL_FACTOR = 1e-9
MAX_RESAMPLES = 100


@dataclass(frozen=True)
class SensorGraph:
    n: int
    edges: frozenset
    weights: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("graph needs at least one vertex")
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if i == j:
                raise DomainError(f"self-loop at vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise DomainError(f"edge ({i}, {j}) out of range for n={self.n}")
        for e, w in self.weights.items():
            if e not in edges:
                raise DomainError(f"weight given for missing edge {e}")
            if not w > 0:
                raise DomainError(f"edge weight must be positive, got {w} on {e}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "_in", _adjacency_lists(self.n, edges, incoming=True))
        object.__setattr__(self, "_out", _adjacency_lists(self.n, edges, incoming=False))

    def weight(self, i: int, j: int) -> float:
        return float(self.weights.get((i, j), 1.0))

    def neighborhood(self, i: int) -> tuple[int, ...]:
        """In-neighbors of ``i`` (sources of edges into ``i``), ascending."""
        self._check_vertex(i)
        return self._in[i]

    def out_neighbors(self, i: int) -> tuple[int, ...]:
        self._check_vertex(i)
        return self._out[i]

    def is_symmetric(self) -> bool:
        return all((j, i) in self.edges for i, j in self.edges)

    def max_in_degree(self) -> float:
        return max((sum(self.weight(j, i) for j in self._in[i]) for i in range(self.n)), default=0.0)

    def without_in_edges(self, v: int) -> "SensorGraph":
        """Copy where ``v`` keeps only its outgoing edges (a distinguished source)."""
        kept = frozenset(e for e in self.edges if e[1] != v)
        return SensorGraph(self.n, kept, {e: w for e, w in self.weights.items() if e in kept})

    def _check_vertex(self, i):
        if not 0 <= i < self.n:
            raise DomainError(f"vertex {i} out of range for n={self.n}")

    def __repr__(self):
        return f"SensorGraph(n={self.n}, |E|={len(self.edges)})"


def _adjacency_lists(n, edges, incoming):
    lists = [[] for _ in range(n)]
    for i, j in edges:
        if incoming:
            lists[j].append(i)
        else:
            lists[i].append(j)
    return tuple(tuple(sorted(v)) for v in lists)


class GraphMatrices(NamedTuple):
    adjacency: np.ndarray
    degree: np.ndarray
    laplacian: np.ndarray
    propagation: np.ndarray


def neighborhood(G: SensorGraph, i: int) -> tuple[int, ...]:
    return G.neighborhood(i)


def build_matrices(G: SensorGraph) -> GraphMatrices:
    """Adjacency ``A[i, j] = w(j, i)``, in-degree ``D``, ``L = D - A`` and
    ``F = (I + D)^-1 (I + A)``."""
    n = G.n
    A = np.zeros((n, n))
    for j, i in G.edges:
        A[i, j] = G.weight(j, i)
    D = np.diag(A.sum(axis=1))
    L = D - A
    # (I + D) is diagonal, so the inverse is a row scaling.
    F = (np.eye(n) + A) / (1.0 + np.diag(D))[:, None]
    return GraphMatrices(A, D, L, F)


def laplacian_rank(G: SensorGraph) -> int:
    L = build_matrices(G).laplacian
    return int(np.linalg.matrix_rank(L, tol=RANK_TOL_FACTOR * G.n))


def has_rooted_out_branching(G: SensorGraph) -> bool:
    if G.n == 1:
        return True
    return laplacian_rank(G) == G.n - 1


def is_balanced(G: SensorGraph, tol: float = 1e-12) -> bool:
    in_deg = np.zeros(G.n)
    out_deg = np.zeros(G.n)
    for i, j in G.edges:
        w = G.weight(i, j)
        out_deg[i] += w
        in_deg[j] += w
    return bool(np.all(np.abs(in_deg - out_deg) <= tol))


def complete_graph(n: int) -> SensorGraph:
    return SensorGraph(n, frozenset((i, j) for i in range(n) for j in range(n) if i != j))


def path_graph(n: int, directed: bool = True) -> SensorGraph:
    edges = {(i, i + 1) for i in range(n - 1)}
    if not directed:
        edges |= {(j, i) for i, j in edges}
    return SensorGraph(n, frozenset(edges))


def star_graph(n: int, root: int = 0) -> SensorGraph:
    """Directed star: ``root`` sends to every other vertex."""
    return SensorGraph(n, frozenset((root, j) for j in range(n) if j != root))


def gen_graph(kind: str, n: int, edge_fraction: float, rng: np.random.Generator) -> SensorGraph:
    """Experiment graph families.

    ``complete`` returns every ordered pair. ``random_subset`` keeps
    ``ceil(edge_fraction * n(n-1)/2)`` undirected pairs (both directions),
    resampling until the graph has a rooted out-branching.
    """
    if n < 2:
        raise DomainError("n must be >= 2")
    if not 0.0 < edge_fraction <= 1.0:
        raise DomainError(f"edge_fraction must be in (0, 1], got {edge_fraction}")
    if kind == "complete":
        return complete_graph(n)
    if kind != "random_subset":
        raise DomainError(f"unknown graph kind {kind!r}")
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    # small epsilon keeps e.g. 0.3 * 10 from ceiling to 4
    keep = min(len(pairs), math.ceil(edge_fraction * len(pairs) - 1e-9))
    for _ in range(MAX_RESAMPLES):
        chosen = rng.choice(len(pairs), size=keep, replace=False)
        edges = set()
        for idx in chosen:
            i, j = pairs[idx]
            edges.add((i, j))
            edges.add((j, i))
        G = SensorGraph(n, frozenset(edges))
        if has_rooted_out_branching(G):
            return G
    raise GraphGenerationError(
        f"no rooted graph after {MAX_RESAMPLES} resamples (n={n}, edge_fraction={edge_fraction})"
    )


def read_graph(path) -> SensorGraph:
    """Graph file: first line ``n``, then ``i j`` (1-based) per directed edge."""
    with open(path) as fh:
        lines = [(k, ln.split("#", 1)[0].strip()) for k, ln in enumerate(fh, 1)]
    lines = [(k, ln) for k, ln in lines if ln]
    if not lines:
        raise ParseError("empty graph file", path=path)
    k, first = lines[0]
    try:
        n = int(first)
    except ValueError:
        raise ParseError(f"expected vertex count, got {first!r}", k, path) from None
    edges = set()
    for k, ln in lines[1:]:
        toks = ln.split()
        if len(toks) != 2:
            raise ParseError(f"expected 'i j', got {ln!r}", k, path)
        try:
            i, j = int(toks[0]) - 1, int(toks[1]) - 1
        except ValueError:
            raise ParseError(f"non-integer vertex in {ln!r}", k, path) from None
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ParseError(f"invalid edge {ln!r} for n={n}", k, path)
        edges.add((i, j))
    return SensorGraph(n, frozenset(edges))


def write_graph(G: SensorGraph, path):
    with open(path, "w") as fh:
        fh.write(f"{G.n}\n")
        for i, j in sorted(G.edges):
            fh.write(f"{i + 1} {j + 1}\n")


def reachable_from(G: SensorGraph, root: int) -> set:
    seen = {root}
    stack = [root]
    while stack:
        v = stack.pop()
        for w in G.out_neighbors(v):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def random_digraph(n: int, prob: float, rng: np.random.Generator) -> SensorGraph:
    """Each ordered pair is an edge independently with probability ``prob``."""
    mask = rng.random((n, n)) < prob
    return SensorGraph(n, frozenset((i, j) for i in range(n) for j in range(n) if i != j and mask[i, j]))


def random_rooted_digraph(n: int, rng: np.random.Generator, root: int | None = 0,
                          prob: float | None = None, source_only: bool = False) -> SensorGraph:
    """Random digraph with a rooted out-branching.

    ``root`` (if given) must reach every vertex; ``source_only`` also strips
    the root's incoming edges, making it a distinguished vertex.
    """
    for _ in range(10 * MAX_RESAMPLES):
        q = rng.uniform(0.15, 0.6) if prob is None else prob
        G = random_digraph(n, q, rng)
        if source_only:
            G = G.without_in_edges(root)
        if root is None:
            if has_rooted_out_branching(G):
                return G
        elif len(reachable_from(G, root)) == n:
            return G
    raise GraphGenerationError(f"could not draw a rooted digraph with n={n}")
