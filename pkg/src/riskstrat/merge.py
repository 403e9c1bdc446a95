"""Recursive graph decomposition that merges indistinguishable leaves.

Leaves become vertices of a similarity graph with an edge wherever the
pairwise test cannot tell two vertices apart (p > alpha_prime). Each
connected component is handled on its own: every vertex is joined to its
most similar neighbour, the joined groups become the vertices of a new
subgraph, and the procedure repeats on that subgraph with p-values
recomputed on the pooled data. Vertices in different components are never
merged.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .partition import Partition, Region, fit_partition, merge_regions
from .stats import TestMethod, p_value
from .survival import Dataset


@dataclass(frozen=True)
class MergeConfig:
    alpha_prime: float
    method: TestMethod = field(default_factory=TestMethod.logrank)
    n_leaf: int = 10

    def __post_init__(self):
        if not 0 < self.alpha_prime < 1:
            raise ValueError("alpha_prime must lie in (0, 1)")
        if self.n_leaf < 1:
            raise ValueError("n_leaf must be at least 1")


@dataclass(frozen=True, eq=False)
class Vertex:
    region: Region
    data: Dataset

    @property
    def key(self) -> int:
        # smallest original leaf id; stable identity across merges
        return min(self.region.provenance) if self.region.provenance else self.region.id


@dataclass
class SimilarityGraph:
    vertices: list[Vertex]
    edges: dict[tuple[int, int], float]

    def neighbours(self, v: int) -> list[tuple[int, float]]:
        out = []
        for (a, b), p in self.edges.items():
            if a == v:
                out.append((b, p))
            elif b == v:
                out.append((a, p))
        return out

    def adjacency(self) -> list[list[tuple[int, float]]]:
        adj = [[] for _ in self.vertices]
        for (a, b), p in sorted(self.edges.items()):
            adj[a].append((b, p))
            adj[b].append((a, p))
        return adj


def _as_vertices(leaves) -> list[Vertex]:
    return [v if isinstance(v, Vertex) else Vertex(*v) for v in leaves]


def build_similarity_graph(leaves: Sequence, config: MergeConfig) -> SimilarityGraph:
    """Graph over ``(Region, Dataset)`` leaves; degenerate pairs count as p = 1."""
    vertices = _as_vertices(leaves)
    if not vertices:
        raise ValueError("need at least one leaf")
    edges = {}
    for i in range(len(vertices)):
        for j in range(i + 1, len(vertices)):
            p = p_value(config.method, vertices[i].data, vertices[j].data)
            if p > config.alpha_prime:
                edges[(i, j)] = p
    return SimilarityGraph(vertices, edges)


def connected_components(graph: SimilarityGraph) -> list[list[int]]:
    """Breadth-first components, each sorted, ordered by smallest member."""
    adj = graph.adjacency()
    seen = [False] * len(graph.vertices)
    components = []
    for start in range(len(graph.vertices)):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        comp = []
        while queue:
            v = queue.popleft()
            comp.append(v)
            for w, _ in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        components.append(sorted(comp))
    return components


def nearest_links(component: Sequence[int], graph: SimilarityGraph) -> list[tuple[float, int, int]]:
    """Each vertex's highest-p edge as ``(p, v, w)``.

    Sorted by descending p, ties by the vertices' keys. This is the order
    in which joins are applied.
    """
    adj = graph.adjacency()
    members = set(component)
    links = []
    for v in component:
        options = [(w, p) for w, p in adj[v] if w in members]
        if not options:
            continue
        w, p = min(options, key=lambda wp: (-wp[1], graph.vertices[wp[0]].key))
        links.append((p, v, w))
    links.sort(key=lambda l: (-l[0], graph.vertices[l[1]].key))
    return links


class _Groups:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True

    def groups(self) -> list[list[int]]:
        out = {}
        for i in sorted(self.parent):
            out.setdefault(self.find(i), []).append(i)
        return list(out.values())


def _combine(members: list[Vertex]) -> Vertex:
    members = sorted(members, key=lambda m: m.key)
    region = members[0].region
    for other in members[1:]:
        region = merge_regions(region, other.region)
    return Vertex(region, Dataset.concat([m.data for m in members]) if len(members) > 1 else members[0].data)


def merge_pass(component: Sequence[int], graph: SimilarityGraph, max_joins: int | None = None) -> list[Vertex]:
    """Join every vertex of ``component`` with its most similar neighbour.

    If the neighbour is already part of a merged vertex, the vertex joins
    that merged vertex. ``max_joins`` caps the number of joins that reduce
    the vertex count, applied in descending p order.
    """
    groups = _Groups(component)
    joins = 0
    for _, v, w in nearest_links(component, graph):
        if max_joins is not None and joins >= max_joins:
            break
        joins += groups.union(v, w)
    return [_combine([graph.vertices[i] for i in g]) for g in groups.groups()]


def merge_leaves(
    leaves: Sequence,
    config: MergeConfig,
    t_star: float | None = None,
) -> Partition:
    """Merge statistically indistinguishable leaves into a final partition.

    Stops once the total vertex count is at most ``config.n_leaf`` or no
    subgraph has an edge. If a round would go below ``n_leaf``, only the
    highest-p joins of that round are applied, stopping at ``n_leaf``.
    Regions are fitted with pooled KM curves and sorted by risk at
    ``t_star`` (defaulting to the test method's horizon, if any).
    """
    vertices = _as_vertices(leaves)
    if not vertices:
        raise ValueError("need at least one leaf")
    if t_star is None:
        t_star = config.method.t_star
    schema = vertices[0].data.schema

    active = [vertices]  # subgraphs still being decomposed
    done: list[Vertex] = []
    while active:
        total = len(done) + sum(len(s) for s in active)
        if total <= config.n_leaf:
            break

        plans = []  # (subgraph graph, component, links)
        for sub in active:
            graph = build_similarity_graph(sub, config)
            for comp in connected_components(graph):
                if len(comp) == 1:
                    done.append(graph.vertices[comp[0]])
                else:
                    plans.append((graph, comp, nearest_links(comp, graph)))
        if not plans:
            active = []
            break

        budget = total - config.n_leaf
        reducing = []
        for idx, (graph, comp, links) in enumerate(plans):
            groups = _Groups(comp)
            for p, v, w in links:
                if groups.union(v, w):
                    reducing.append((p, graph.vertices[v].key, idx))
        allowance = [None] * len(plans)
        if len(reducing) > budget:
            reducing.sort(key=lambda r: (-r[0], r[1]))
            allowance = [0] * len(plans)
            for _, _, idx in reducing[:budget]:
                allowance[idx] += 1

        active = []
        for (graph, comp, _), cap in zip(plans, allowance):
            merged = merge_pass(comp, graph, max_joins=cap)
            if len(merged) == 1:
                done.append(merged[0])
            else:
                active.append(merged)
        if any(a is not None for a in allowance):
            break

    final = done + [v for sub in active for v in sub]
    final.sort(key=lambda v: v.key)
    return fit_partition(schema, [(v.region, v.data) for v in final], t_star)
