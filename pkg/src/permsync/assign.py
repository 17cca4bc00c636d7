"""Linear assignment (Hungarian method) used for every rounding step.

The solver maximizes ``sum_l W[pi(l), l]``. Among optimal permutations the
lexicographically smallest image sequence is returned, so rounding is
reproducible when the profit matrix has ties (e.g. the uniform matrix).
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .exceptions import DimensionError, DomainError
from .perm import Permutation


def _hungarian_min(cost: np.ndarray):
    """Shortest augmenting path Hungarian method on a square cost matrix.

    Agents are rows of ``cost``. Returns ``(task_of_agent, u, v)`` where
    ``u``/``v`` are optimal dual potentials: ``cost[a, t] - u[a] - v[t] >= 0``
    with equality on the matching.
    """
    m = cost.shape[0]
    INF = np.inf
    u = np.zeros(m + 1)
    v = np.zeros(m + 1)
    agent_of = np.zeros(m + 1, dtype=np.int64)  # task slot 0 is the virtual root
    way = np.zeros(m + 1, dtype=np.int64)
    # pad with a dummy column 0 so tasks are 1..m like agents
    c = np.zeros((m + 1, m + 1))
    c[1:, 1:] = cost
    for a in range(1, m + 1):
        agent_of[0] = a
        j0 = 0
        minv = np.full(m + 1, INF)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = agent_of[j0]
            free = ~used
            free[0] = False
            cur = c[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            cand = np.where(free, minv, INF)
            j1 = int(np.argmin(cand))
            delta = cand[j1]
            u[agent_of[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if agent_of[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            agent_of[j0] = agent_of[j1]
            j0 = j1
    task_of = np.empty(m, dtype=np.int64)
    for t in range(1, m + 1):
        task_of[agent_of[t] - 1] = t - 1
    return task_of, u[1:], v[1:]


def _lex_smallest_matching(tight: np.ndarray, row_of: np.ndarray) -> np.ndarray:
    """Lexicographically smallest perfect matching of the bipartite graph
    ``tight[col, row]``, starting from the perfect matching ``row_of``."""
    m = tight.shape[0]
    row_of = row_of.copy()
    col_of = np.empty(m, dtype=np.int64)
    col_of[row_of] = np.arange(m)
    for l in range(m):
        for r in np.flatnonzero(tight[l]):
            if r >= row_of[l]:
                break
            if col_of[r] < l:
                continue
            path = _alternating_path(tight, row_of, col_of, start=col_of[r], target=row_of[l], lo=l + 1, banned=r)
            if path is None:
                continue
            target = row_of[l]
            # path: columns c_0 .. c_k; c_i takes the row after it, c_k takes target
            for c_a, c_b in zip(path, path[1:]):
                row_of[c_a] = row_of[c_b]
            row_of[path[-1]] = target
            row_of[l] = r
            col_of[row_of] = np.arange(m)
            break
    return row_of


def _alternating_path(tight, row_of, col_of, start, target, lo, banned):
    """BFS over unfixed columns (index >= lo) for a chain start -> ... that
    frees ``target``. Returns the column chain or None."""
    parent = {start: None}
    queue = deque([start])
    while queue:
        c = queue.popleft()
        for r in np.flatnonzero(tight[c]):
            if r == banned or r == row_of[c]:
                continue
            if r == target:
                chain = [c]
                while parent[chain[-1]] is not None:
                    chain.append(parent[chain[-1]])
                chain.reverse()
                # chain[i] moves to the row currently held by chain[i+1]
                return chain
            nxt = col_of[r]
            if nxt >= lo and nxt not in parent:
                parent[nxt] = c
                queue.append(nxt)
    return None


def solve_assignment(W) -> Permutation:
    """Permutation maximizing ``sum_l W[pi(l), l]`` (lexicographic tie rule)."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] == 0:
        raise DimensionError(f"profit matrix must be square and non-empty, got {W.shape}")
    if not np.all(np.isfinite(W)):
        raise DomainError("profit matrix has NaN or infinite entries")
    m = W.shape[0]
    if m == 1:
        return Permutation((0,))
    cost = -W.T  # agent = column l of W, task = row r
    row_of, u, v = _hungarian_min(cost)
    reduced = cost - u[:, None] - v[None, :]
    tol = 1e-9 * max(1.0, float(np.abs(W).max()))
    tight = reduced <= tol
    row_of = _lex_smallest_matching(tight, row_of)
    return Permutation(tuple(int(r) for r in row_of))


def assignment_objective(W, p: Permutation) -> float:
    W = np.asarray(W, dtype=float)
    return float(W[list(p.map), np.arange(p.size)].sum())
