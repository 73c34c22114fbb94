"""Acoustic conflict graph and greedy TDMA group coloring.

Two AUVs conflict when at least one ASV can hear both of them, so their
simultaneous uplink pings could collide at that ASV.  A proper greedy
coloring of the conflict graph partitions the fleet into ping groups that
share uplink slots safely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .formation import AsvLayout


@dataclass
class ConflictGraph:
    n: int
    edges: frozenset[tuple[int, int]]    # pairs (i, j) with i < j
    adj: list[set[int]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.adj is None:
            adj = [set() for _ in range(self.n)]
            for i, j in self.edges:
                if i == j:
                    raise ValueError(f"self-loop on vertex {i}")
                if not (0 <= i < self.n and 0 <= j < self.n):
                    raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
                adj[i].add(j)
                adj[j].add(i)
            self.adj = adj

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def max_degree(self) -> int:
        return max((len(a) for a in self.adj), default=0)


@dataclass
class Coloring:
    color: list[int]
    k: int

    def groups(self) -> list[list[int]]:
        """Vertex indices per color class, ascending within each group."""
        out = [[] for _ in range(self.k)]
        for v, c in enumerate(self.color):
            out[c].append(v)
        return out


def acoustic_conflict(p_i, p_j, layout: AsvLayout, r_hf: float) -> bool:
    """True iff some ASV is within r_hf (horizontal) of both AUV positions."""
    pi = np.asarray(p_i, dtype=float)[:2]
    pj = np.asarray(p_j, dtype=float)[:2]
    di = np.linalg.norm(layout.positions - pi, axis=1)
    dj = np.linalg.norm(layout.positions - pj, axis=1)
    return bool(np.any((di <= r_hf) & (dj <= r_hf)))


def build_conflict_graph(auv_positions, layout: AsvLayout, r_hf: float) -> ConflictGraph:
    """Conflict graph over the whole fleet.

    AUVs out of range of every ASV become isolated vertices; they still get a
    color and ping in their slot, their pings are simply unheard.
    """
    pos = np.asarray(auv_positions, dtype=float)
    if pos.size == 0:
        return ConflictGraph(0, frozenset())
    pos = pos.reshape(len(pos), -1)[:, :2]
    n = len(pos)
    # audible ASV index set per AUV; an edge needs a shared audible ASV
    d = np.linalg.norm(pos[:, None, :] - layout.positions[None, :, :], axis=2)
    audible = d <= r_hf
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if np.any(audible[i] & audible[j]):
                edges.add((i, j))
    return ConflictGraph(n, frozenset(edges))


def greedy_color(g: ConflictGraph) -> Coloring:
    """Greedy coloring in ascending vertex order (deterministic)."""
    color = [-1] * g.n
    for v in range(g.n):
        used = {color[u] for u in g.adj[v] if color[u] != -1}
        c = 0
        while c in used:
            c += 1
        color[v] = c
    k = max(color) + 1 if color else 0
    return Coloring(color, k)
