"""Directed acyclic graphs: generation, queries, masks and structural distance.

Node sets are plain Python sets of integer indices. Adjacency follows the
row-is-child convention: ``adj[i, j] == 1`` means node ``j`` is a parent of
node ``i`` (edge ``j -> i``).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

PRESET_KINDS = ("chain", "full", "collider", "tree", "bidiag", "jungle")


class CycleError(RuntimeError):
    """Raised when an adjacency matrix that must be acyclic contains a cycle."""


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph over ``n`` nodes.

    ``adj`` is an ``(n, n)`` 0/1 matrix with ``adj[i, j] = 1`` iff ``j`` is a
    parent of ``i``. The diagonal is zero and the graph admits a topological
    order; both are checked at construction time.
    """

    adj: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adj, dtype=np.int8)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        if not np.isin(adj, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        if np.diagonal(adj).any():
            raise ValueError("adjacency has a self-loop on the diagonal")
        object.__setattr__(self, "adj", adj)
        if not is_acyclic(adj):
            raise CycleError("adjacency matrix contains a directed cycle")

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    @property
    def num_edges(self) -> int:
        return int(self.adj.sum())

    def edges(self) -> list[tuple[int, int]]:
        """All edges as (parent, child) pairs, sorted."""
        child, parent = np.nonzero(self.adj)
        return sorted(zip(parent.tolist(), child.tolist()))


def from_edges(n: int, edges) -> Dag:
    """Build a Dag from (parent, child) pairs."""
    adj = np.zeros((n, n), dtype=np.int8)
    for parent, child in edges:
        adj[child, parent] = 1
    return Dag(adj)


def is_acyclic(adj: np.ndarray) -> bool:
    """Kahn-style check: repeatedly strip nodes without incoming edges."""
    adj = np.asarray(adj)
    n = adj.shape[0]
    indeg = adj.sum(axis=1).astype(np.int64)
    alive = np.ones(n, dtype=bool)
    stripped = 0
    frontier = [i for i in range(n) if indeg[i] == 0]
    while frontier:
        i = frontier.pop()
        alive[i] = False
        stripped += 1
        for ch in np.nonzero(adj[:, i])[0]:
            if not alive[ch]:
                continue
            indeg[ch] -= 1
            if indeg[ch] == 0:
                frontier.append(int(ch))
    return stripped == n


def generate_er(n: int, density: float, rng: np.random.Generator) -> Dag:
    """Random DAG with ``density * n`` expected edges (the ER-d family).

    A uniformly random node ordering is drawn, then each forward pair gets an
    edge independently with probability ``p = 2 * density / (n - 1)`` (clamped
    to 1), so the expected edge count is ``density * n``.
    """
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if density <= 0:
        raise ValueError(f"density must be positive, got {density}")
    p = min(1.0, 2.0 * density / (n - 1))
    order = rng.permutation(n)
    draws = rng.random((n, n))
    adj = np.zeros((n, n), dtype=np.int8)
    rows, cols = np.nonzero(np.triu(draws < p, k=1))
    adj[order[cols], order[rows]] = 1
    return Dag(adj)


def generate_preset(kind: str, n: int) -> Dag:
    """Deterministic named topology over ``n`` nodes.

    chain: 0 -> 1 -> ... -> n-1
    full: every i -> j for i < j
    collider: every non-terminal node points at node n-1
    tree: binary tree, parent of node i is (i - 1) // 2
    bidiag: chain plus skip edges i -> i+2
    jungle: binary tree plus grandparent edges
    """
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    edges: list[tuple[int, int]] = []
    if kind == "chain":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif kind == "full":
        edges = [(i, j) for i in range(n) for j in range(i + 1, n)]
    elif kind == "collider":
        edges = [(i, n - 1) for i in range(n - 1)]
    elif kind == "tree":
        edges = [((i - 1) // 2, i) for i in range(1, n)]
    elif kind == "bidiag":
        edges = [(i, i + 1) for i in range(n - 1)]
        edges += [(i, i + 2) for i in range(n - 2)]
    elif kind == "jungle":
        edges = [((i - 1) // 2, i) for i in range(1, n)]
        for i in range(1, n):
            parent = (i - 1) // 2
            if parent > 0:
                edges.append(((parent - 1) // 2, i))
    else:
        raise ValueError(f"unknown preset kind {kind!r}; expected one of {PRESET_KINDS}")
    return from_edges(n, edges)


def topological_order(dag: Dag) -> list[int]:
    """Node order in which every parent precedes all of its children.

    Deterministic: lowest-index node first among the currently available ones.
    """
    n = dag.n
    indeg = dag.adj.sum(axis=1).astype(np.int64)
    available = sorted(i for i in range(n) if indeg[i] == 0)
    order: list[int] = []
    while available:
        i = available.pop(0)
        order.append(i)
        newly = []
        for ch in np.nonzero(dag.adj[:, i])[0]:
            indeg[ch] -= 1
            if indeg[ch] == 0:
                newly.append(int(ch))
        if newly:
            available = sorted(available + newly)
    if len(order) != n:
        raise CycleError("graph has no topological order")  # unreachable for a valid Dag
    return order


def _check_index(dag: Dag, i: int) -> None:
    if not 0 <= i < dag.n:
        raise ValueError(f"node index {i} out of range for {dag.n} nodes")


def parents(dag: Dag, i: int) -> set[int]:
    _check_index(dag, i)
    return set(np.nonzero(dag.adj[i])[0].tolist())


def children(dag: Dag, i: int) -> set[int]:
    _check_index(dag, i)
    return set(np.nonzero(dag.adj[:, i])[0].tolist())


def roots(dag: Dag) -> set[int]:
    """Nodes with an empty parent set."""
    return set(np.nonzero(dag.adj.sum(axis=1) == 0)[0].tolist())


def descendants(dag: Dag, i: int) -> set[int]:
    """All nodes reachable from ``i`` (excluding ``i`` itself)."""
    _check_index(dag, i)
    seen: set[int] = set()
    stack = [i]
    while stack:
        node = stack.pop()
        for ch in np.nonzero(dag.adj[:, node])[0]:
            if int(ch) not in seen:
                seen.add(int(ch))
                stack.append(int(ch))
    return seen


def anticausal_mask(dag: Dag) -> np.ndarray:
    """Mask admitting each node's children as predictors (adjacency transpose)."""
    return dag.adj.T.copy()


def skeleton_mask(dag: Dag) -> np.ndarray:
    """Mask admitting parents and children (elementwise OR with the transpose)."""
    return (dag.adj | dag.adj.T).astype(np.int8)


def shd(a, b) -> int:
    """Structural Hamming distance between two graphs or 0/1 matrices.

    Counts node pairs whose edge status differs; a reversed edge counts once.
    """
    mat_a = np.asarray(a.adj if isinstance(a, Dag) else a)
    mat_b = np.asarray(b.adj if isinstance(b, Dag) else b)
    if mat_a.shape != mat_b.shape:
        raise ValueError(f"shape mismatch: {mat_a.shape} vs {mat_b.shape}")
    iu = np.triu_indices(mat_a.shape[0], k=1)
    code_a = mat_a[iu] + 2 * mat_a.T[iu]
    code_b = mat_b[iu] + 2 * mat_b.T[iu]
    return int(np.count_nonzero(code_a != code_b))


def save_edge_list(dag: Dag, path) -> None:
    """Plain-text format: node count on the first line, then one 'parent child' per line."""
    lines = [str(dag.n)]
    lines += [f"{p} {c}" for p, c in dag.edges()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_edge_list(path) -> Dag:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    n = int(lines[0])
    edges = []
    for ln in lines[1:]:
        p, c = ln.split()
        edges.append((int(p), int(c)))
    return from_edges(n, edges)
