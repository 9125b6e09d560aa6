"""Interference graphs: construction, two-hop expansion and greedy coloring.

Every graph carries a self-edge on each node, so ``neighbors(g, n)`` always
contains ``n``.  Neighborhoods are returned in ascending index order; that
order defines the "k-th neighbor" used by donor matching and the latent
factor model.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import InputError

__all__ = [
    "NetworkGraph",
    "Coloring",
    "neighbors",
    "two_hop",
    "greedy_color",
    "make_regular_graph",
    "path_graph",
    "star_graph",
    "complete_graph",
    "empty_graph",
    "random_graph",
    "read_edge_list",
    "write_edge_list",
]


@dataclass(frozen=True)
class NetworkGraph:
    """Undirected graph over units ``0..n_units-1`` with all self-edges."""

    n_units: int
    adjacency: tuple[tuple[int, ...], ...]

    @classmethod
    def from_edges(cls, n_units: int, edges: Iterable[tuple[int, int]]) -> NetworkGraph:
        n_units = int(n_units)
        if n_units < 1:
            raise InputError(f"n_units must be positive, got {n_units}")
        nbrs: list[set[int]] = [{i} for i in range(n_units)]
        for i, j in edges:
            i, j = int(i), int(j)
            if not (0 <= i < n_units and 0 <= j < n_units):
                raise InputError(f"edge ({i}, {j}) out of range for {n_units} units")
            nbrs[i].add(j)
            nbrs[j].add(i)
        return cls(n_units, tuple(tuple(sorted(s)) for s in nbrs))

    def neighbors(self, n: int) -> tuple[int, ...]:
        # Directed (in-neighbor) interference would only change this lookup.
        if not 0 <= n < self.n_units:
            raise InputError(f"unit {n} out of range [0, {self.n_units})")
        return self.adjacency[n]

    def degree(self, n: int) -> int:
        """Number of neighbors excluding the self-edge."""
        return len(self.neighbors(n)) - 1

    @property
    def max_degree(self) -> int:
        return max(len(a) for a in self.adjacency) - 1

    def edges(self) -> list[tuple[int, int]]:
        """Non-self edges as ``(i, j)`` with ``i < j``."""
        return [(i, j) for i, nb in enumerate(self.adjacency) for j in nb if i < j]

    @cached_property
    def _by_size(self) -> dict[int, tuple[np.ndarray, np.ndarray]]:
        groups: dict[int, list[int]] = {}
        for i, nb in enumerate(self.adjacency):
            groups.setdefault(len(nb), []).append(i)
        return {
            k: (np.asarray(units), np.asarray([self.adjacency[i] for i in units]))
            for k, units in groups.items()
        }

    def units_with_nbhd_size(self, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Units whose neighborhood (self included) has ``size`` members, and those neighborhoods."""
        empty = (np.empty(0, dtype=int), np.empty((0, size), dtype=int))
        return self._by_size.get(size, empty)

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.adjacency[i]

    def to_networkx(self):
        import networkx as nx

        h = nx.Graph()
        h.add_nodes_from(range(self.n_units))
        h.add_edges_from(self.edges())
        return h


@dataclass(frozen=True)
class Coloring:
    num_colors: int
    assignment: tuple[int, ...]

    def is_proper(self, g: NetworkGraph) -> bool:
        return all(self.assignment[i] != self.assignment[j] for i, j in g.edges())

    def color_classes(self) -> list[list[int]]:
        classes: list[list[int]] = [[] for _ in range(self.num_colors)]
        for unit, c in enumerate(self.assignment):
            classes[c].append(unit)
        return classes


def neighbors(g: NetworkGraph, n: int) -> list[int]:
    return list(g.neighbors(n))


def two_hop(g: NetworkGraph) -> NetworkGraph:
    """Add an edge between every node and each of its two-hop neighbors."""
    adj = []
    for i in range(g.n_units):
        reach = set()
        for j in g.adjacency[i]:
            reach.update(g.adjacency[j])
        adj.append(tuple(sorted(reach)))
    return NetworkGraph(g.n_units, tuple(adj))


def greedy_color(g: NetworkGraph) -> Coloring:
    """First-fit coloring visiting nodes in ascending index order.

    Colors are 0-based.  Uses at most ``g.max_degree + 1`` colors.
    """
    assignment = [-1] * g.n_units
    for i in range(g.n_units):
        taken = {assignment[j] for j in g.adjacency[i] if j != i}
        c = 0
        while c in taken:
            c += 1
        assignment[i] = c
    return Coloring(max(assignment) + 1, tuple(assignment))


def make_regular_graph(kind: str, n_units: int, degree: int) -> NetworkGraph:
    """Ring or circulant graph where every unit has exactly ``degree`` neighbors.

    The circulant graph joins each unit to the units at offsets
    ``1..degree/2`` on either side; a ring is the circulant with degree 2.
    """
    if kind not in ("ring", "circulant"):
        raise InputError(f"unknown graph kind {kind!r}")
    if kind == "ring" and degree != 2:
        raise InputError("a ring graph has degree 2")
    if n_units < 1 or degree < 0 or degree % 2:
        raise InputError(f"degree must be a non-negative even integer, got {degree}")
    if degree >= n_units:
        raise InputError(f"degree {degree} must be smaller than n_units {n_units}")
    edges = [(i, (i + k) % n_units) for i in range(n_units) for k in range(1, degree // 2 + 1)]
    return NetworkGraph.from_edges(n_units, edges)


def path_graph(n_units: int) -> NetworkGraph:
    return NetworkGraph.from_edges(n_units, [(i, i + 1) for i in range(n_units - 1)])


def star_graph(n_leaves: int) -> NetworkGraph:
    """Hub 0 joined to leaves ``1..n_leaves``."""
    return NetworkGraph.from_edges(n_leaves + 1, [(0, i) for i in range(1, n_leaves + 1)])


def complete_graph(n_units: int) -> NetworkGraph:
    return NetworkGraph.from_edges(
        n_units, [(i, j) for i in range(n_units) for j in range(i + 1, n_units)]
    )


def empty_graph(n_units: int) -> NetworkGraph:
    return NetworkGraph.from_edges(n_units, [])


def random_graph(n_units: int, max_degree: int, n_edges: int | None = None, seed=None) -> NetworkGraph:
    """Random simple graph whose degrees never exceed ``max_degree``.

    Candidate edges are drawn uniformly and kept when both endpoints still
    have spare degree.  ``n_edges`` defaults to ``n_units * max_degree // 3``.
    """
    rng = np.random.default_rng(seed)
    if n_edges is None:
        n_edges = n_units * max_degree // 3
    deg = np.zeros(n_units, dtype=int)
    edges: set[tuple[int, int]] = set()
    attempts = 0
    while len(edges) < n_edges and attempts < 50 * max(n_edges, 1) and n_units > 1:
        attempts += 1
        i, j = (int(x) for x in rng.integers(n_units, size=2))
        if i == j:
            continue
        e = (min(i, j), max(i, j))
        if e in edges or deg[i] >= max_degree or deg[j] >= max_degree:
            continue
        edges.add(e)
        deg[i] += 1
        deg[j] += 1
    return NetworkGraph.from_edges(n_units, sorted(edges))


def read_edge_list(path: str | Path, n_units: int | None = None) -> NetworkGraph:
    """Load ``i j`` pairs, one per line; ``#`` comments and blank lines ignored.

    Without ``n_units`` the unit count is one more than the largest index.
    A line holding a single index declares an isolated unit.
    """
    edges = []
    largest = -1
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            idx = [int(p) for p in parts]
        except ValueError:
            raise InputError(f"{path}:{lineno}: expected integer indices, got {raw!r}") from None
        if len(idx) not in (1, 2) or min(idx) < 0:
            raise InputError(f"{path}:{lineno}: expected 'i j' with 0-based indices")
        largest = max(largest, *idx)
        if len(idx) == 2:
            edges.append((idx[0], idx[1]))
    if n_units is None:
        n_units = largest + 1
    return NetworkGraph.from_edges(n_units, edges)


def write_edge_list(g: NetworkGraph, path: str | Path) -> None:
    lines = [f"# {g.n_units} units, self-edges implied"]
    lines += [f"{i} {j}" for i, j in g.edges()]
    lines += [str(i) for i in range(g.n_units) if g.degree(i) == 0]
    Path(path).write_text("\n".join(lines) + "\n")
