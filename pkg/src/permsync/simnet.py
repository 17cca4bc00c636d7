"""Synchronous message-passing harness.

A node program supplies two pure functions: ``payload(node_id, state, t)``
(what the node broadcasts on its out-edges in round ``t``) and
``update(node_id, state, inbox, t)`` (its next state given the round's
messages). The harness owns delivery, so a node can only see other nodes
through its inbox.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .assoc import PairwiseAssociations
from .consensus import ConsensusConfig, initial_state, local_update
from .graph import SensorGraph, build_matrices
from .spectral import SpectralConfig, initial_blocks, orthogonalize


@dataclass
class Node:
    id: int
    state: Any
    inbox: list = field(default_factory=list)  # (sender, payload), ascending sender


@dataclass
class RoundStats:
    round: int
    messages: int
    scalars: int
    oracle: bool = False  # traffic not realized by messages; excluded from totals


class NodeProgram:
    """Base class for node behaviour; override ``payload`` and ``update``."""

    def payload(self, node_id, state, t):
        raise NotImplementedError

    def update(self, node_id, state, inbox, t):
        raise NotImplementedError


def run_rounds(G: SensorGraph, program: NodeProgram, states, rounds: int, start_round: int = 0):
    """Run ``rounds`` synchronous rounds. Returns ``(final states, stats)``."""
    nodes = [Node(i, s) for i, s in enumerate(states)]
    stats = []
    for t in range(start_round, start_round + rounds):
        outgoing = [program.payload(node.id, node.state, t) for node in nodes]
        messages = scalars = 0
        for node in nodes:
            node.inbox = []
        for sender in range(G.n):
            msg = outgoing[sender]
            if msg is None:
                continue
            for receiver in G.out_neighbors(sender):
                nodes[receiver].inbox.append((sender, msg))
                messages += 1
                scalars += int(np.size(msg))
        for node in nodes:
            node.inbox.sort(key=lambda item: item[0])
        # barrier: every update reads only round-t messages
        new_states = [program.update(node.id, node.state, node.inbox, t) for node in nodes]
        for node, s in zip(nodes, new_states):
            node.state = s
            node.inbox = []
        stats.append(RoundStats(t, messages, scalars))
    return [node.state for node in nodes], stats


def scalar_traffic(stats) -> int:
    return sum(s.scalars for s in stats if not s.oracle)


def write_stats_csv(stats, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "messages", "scalars", "oracle"])
        for s in stats:
            w.writerow([s.round, s.messages, s.scalars, int(s.oracle)])


class ConsensusProgram(NodeProgram):
    """Each node sends its estimate; non-anchor nodes average what arrives."""

    def __init__(self, A: PairwiseAssociations, distinguished: int = 0):
        self.A = A
        self.distinguished = distinguished

    def payload(self, node_id, state, t):
        return state

    def update(self, node_id, state, inbox, t):
        if node_id == self.distinguished:
            return state
        if not inbox:
            return state.copy()
        senders = [s for s, _ in inbox]
        assoc = np.stack([self.A[(node_id, j)] for j in senders])
        neighbors = np.stack([msg for _, msg in inbox])
        return local_update(state, assoc, neighbors)


def simulate_consensus(A: PairwiseAssociations, G: SensorGraph, cfg: ConsensusConfig | None = None,
                       rounds: int | None = None, rng=None):
    """Consensus protocol executed through the harness for a fixed number of rounds."""
    cfg = cfg or ConsensusConfig()
    cfg.validate(G.n)
    A.validate_for(G)
    init = initial_state(G.n, A.m, cfg, rng).labels
    states, stats = run_rounds(G, ConsensusProgram(A, cfg.distinguished), list(init),
                               cfg.max_iters if rounds is None else rounds)
    return np.stack(states), stats


class DOIProgram(NodeProgram):
    """Distributed orthogonal iteration with linear-consensus Gram averaging.

    An outer iteration spans ``1 + inner_iters`` rounds: round 0 exchanges
    the current blocks (power step), the following rounds exchange Gram
    estimates, and the last one ends with the local Cholesky normalization.
    """

    def __init__(self, A: PairwiseAssociations, G: SensorGraph, cfg: SpectralConfig):
        self.A = A
        self.cfg = cfg
        self.period = 1 + cfg.inner_iters
        self.eps = cfg.resolve_epsilon(G)
        self.weights = build_matrices(G).adjacency

    def payload(self, node_id, state, t):
        return state["X"] if t % self.period == 0 else state["Z"]

    def update(self, node_id, state, inbox, t):
        phase = t % self.period
        state = dict(state)
        if phase == 0:
            terms = {j: self.A[(node_id, j)] @ msg for j, msg in inbox}
            terms[node_id] = state["X"]
            Y = np.zeros_like(state["X"])
            for j in sorted(terms):
                Y = Y + terms[j]
            state["Y"] = Y
            state["Z"] = Y.T @ Y
        else:
            z = state["Z"]
            step = np.zeros_like(z)
            for j, msg in inbox:
                step += self.weights[node_id, j] * (z - msg)
            state["Z"] = z - self.eps * step
        if phase == self.period - 1:
            state["X"] = orthogonalize(state["Y"], state["Z"], self.cfg)
        return state


def simulate_doi(A: PairwiseAssociations, G: SensorGraph, cfg: SpectralConfig | None = None,
                 outer_iters: int | None = None, rng=None):
    """Run DOI through the harness. Returns ``(blocks, stats)``.

    With ``exact_average`` the Gram average cannot be realized by the
    harness; it is computed centrally and logged as an oracle round.
    """
    cfg = cfg or SpectralConfig()
    cfg.validate(G)
    A.validate_for(G)
    outer = cfg.outer_iters if outer_iters is None else outer_iters
    X = initial_blocks(G.n, A.m, cfg, rng)
    if cfg.inner_mode == "linear_consensus":
        program = DOIProgram(A, G, cfg)
        states = [{"X": X[i]} for i in range(G.n)]
        states, stats = run_rounds(G, program, states, outer * program.period)
        return np.stack([s["X"] for s in states]), stats
    program = _PowerProgram(A)
    stats = []
    t = 0
    for _ in range(outer):
        Y, st = run_rounds(G, program, list(X), 1, start_round=t)
        stats.extend(st)
        Y = np.stack(Y)
        gram = np.matmul(Y.transpose(0, 2, 1), Y).mean(axis=0)
        stats.append(RoundStats(t + 1, 0, G.n * A.m * A.m, oracle=True))
        X = np.stack([orthogonalize(Y[i], gram, cfg) for i in range(G.n)])
        t += 2
    return X, stats


class _PowerProgram(NodeProgram):
    def __init__(self, A):
        self.A = A

    def payload(self, node_id, state, t):
        return state

    def update(self, node_id, state, inbox, t):
        terms = {j: self.A[(node_id, j)] @ msg for j, msg in inbox}
        terms[node_id] = state
        Y = np.zeros_like(state)
        for j in sorted(terms):
            Y = Y + terms[j]
        return Y
