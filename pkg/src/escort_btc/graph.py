"""Undirected, unweighted communication topology among actuator agents.

Nodes are 0-based in the Python API. Config files and user-facing messages
use 1-based ids; the scenario loader does the translation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

TOPOLOGIES = ("ring", "path", "complete", "custom")


class GraphError(ValueError):
    """Raised for malformed or disconnected communication graphs."""


@dataclass(frozen=True, eq=False)
class CommGraph:
    adjacency: np.ndarray

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=np.int8)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise GraphError(f"adjacency must be a square matrix, got shape {a.shape}")
        if not np.isin(a, (0, 1)).all():
            raise GraphError("adjacency entries must be 0 or 1")
        if np.any(np.diag(a)):
            loops = [i + 1 for i in np.flatnonzero(np.diag(a))]
            raise GraphError(f"self-loops on nodes {loops}")
        if not np.array_equal(a, a.T):
            raise GraphError("adjacency is not symmetric")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        components = connected_components(a)
        if len(components) > 1:
            main = components[0]
            stray = sorted(i + 1 for comp in components[1:] for i in comp)
            raise GraphError(
                f"graph is disconnected: node(s) {stray} unreachable from node {main[0] + 1}"
            )

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency))
        return [(int(a), int(b)) for a, b in zip(i, j)]

    @property
    def degree(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(float)


def connected_components(adjacency: np.ndarray) -> list[list[int]]:
    """Breadth-first components, ordered by their smallest node."""
    n = adjacency.shape[0]
    seen = np.zeros(n, dtype=bool)
    out = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        comp, queue = [start], deque([start])
        while queue:
            i = queue.popleft()
            for j in np.flatnonzero(adjacency[i]):
                if not seen[j]:
                    seen[j] = True
                    comp.append(int(j))
                    queue.append(j)
        out.append(sorted(comp))
    return out


def is_connected(adjacency) -> bool:
    """True iff the 0/1 adjacency (or a CommGraph) has a single component."""
    if isinstance(adjacency, CommGraph):
        return True
    a = np.asarray(adjacency)
    return len(connected_components(a)) == 1


def from_edges(n: int, edges: Iterable[tuple[int, int]]) -> CommGraph:
    a = np.zeros((n, n), dtype=np.int8)
    for i, j in edges:
        if i == j:
            raise GraphError(f"self-loop on node {i + 1}")
        if not (0 <= i < n and 0 <= j < n):
            raise GraphError(f"edge ({i + 1}, {j + 1}) references a node outside 1..{n}")
        a[i, j] = a[j, i] = 1
    return CommGraph(a)


def build_graph(topology: str, n: int, edges: Iterable[tuple[int, int]] | None = None) -> CommGraph:
    """Build a named topology on ``n`` nodes, or a custom one from 0-based edges."""
    if topology not in TOPOLOGIES:
        raise GraphError(f"unknown topology {topology!r}; expected one of {TOPOLOGIES}")
    if n < 2:
        raise GraphError(f"need at least 2 nodes, got {n}")
    if topology == "custom":
        if edges is None:
            raise GraphError("custom topology needs an edge list")
        return from_edges(n, edges)
    if topology == "complete":
        return CommGraph(np.ones((n, n), dtype=np.int8) - np.eye(n, dtype=np.int8))
    chain = [(i, i + 1) for i in range(n - 1)]
    if topology == "ring" and n > 2:
        chain.append((n - 1, 0))
    return from_edges(n, chain)


def with_slack(g: CommGraph, attach_to: int | Iterable[int] = 0) -> CommGraph:
    """Append a slack node (id ``g.node_count``) linked to the given node(s)."""
    n = g.node_count
    targets = [attach_to] if isinstance(attach_to, (int, np.integer)) else list(attach_to)
    if not targets:
        raise GraphError("slack node needs at least one attachment")
    a = np.zeros((n + 1, n + 1), dtype=np.int8)
    a[:n, :n] = g.adjacency
    for i in targets:
        if not 0 <= i < n:
            raise GraphError(f"slack attachment node {i + 1} outside 1..{n}")
        a[n, i] = a[i, n] = 1
    return CommGraph(a)


def laplacian(g: CommGraph) -> np.ndarray:
    a = g.adjacency.astype(float)
    return np.diag(a.sum(axis=1)) - a


def neighbors(g: CommGraph, i: int) -> set[int]:
    if not 0 <= i < g.node_count:
        raise IndexError(f"node {i} outside 0..{g.node_count - 1}")
    return {int(j) for j in np.flatnonzero(g.adjacency[i])}
