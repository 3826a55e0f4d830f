"""Directed observation graph, spanning trees, fundamental cycles, misclosures.

Every observed leg becomes one directed edge (angle legs vertex->backsight
and vertex->foresight, distance legs at->target), de-duplicated on the
unordered station pair with kind tags merged.  Traversal prefers the
observed direction; edges are walked against it only when forward
progress stalls, so a survey recorded as a run of outgoing sights is
spanned in its own order.

Spanning trees are built iteratively: insert the first segment from the
root, forward-track from each newly reached node along its first
unexplored outgoing edge (observation order), and on a leaf back-track
along the tree to the nearest node with unexplored edges.  Unused edges
become back edges; each contributes one fundamental cycle.  By default a
cycle uses the shortest route available through the tree plus the back
edges already processed, which keeps cycles tight around the geometry;
`minimal=False` restricts routes to the tree itself.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping

from . import equations
from .equations import Coordinates
from .errors import DisconnectedNetwork, MissingLegObservation, RootUnknown

if TYPE_CHECKING:
    from .fieldbook import DataSet


@dataclass
class Edge:
    """Directed edge in observation order; kinds collects 'angle'/'distance' tags."""

    u: str
    v: str
    kinds: set[str] = field(default_factory=set)

    @property
    def pair(self) -> frozenset[str]:
        return frozenset((self.u, self.v))

    def other(self, node: str) -> str:
        return self.v if node == self.u else self.u

    def __repr__(self):
        return f"Edge({self.u}->{self.v})"


@dataclass
class NetworkGraph:
    nodes: set[str]
    edges: list[Edge]

    def components(self) -> list[set[str]]:
        """Undirected connected components, ordered by smallest member id."""
        seen: set[str] = set()
        adjacency: dict[str, list[str]] = {n: [] for n in self.nodes}
        for e in self.edges:
            adjacency[e.u].append(e.v)
            adjacency[e.v].append(e.u)
        out = []
        for start in sorted(self.nodes):
            if start in seen:
                continue
            comp = {start}
            queue = deque([start])
            while queue:
                node = queue.popleft()
                for nxt in adjacency[node]:
                    if nxt not in comp:
                        comp.add(nxt)
                        queue.append(nxt)
            seen |= comp
            out.append(comp)
        return out


def build_graph(dataset: "DataSet") -> NetworkGraph:
    """One node per station, one edge per observed leg, in observation order."""
    nodes: set[str] = set()
    edges: list[Edge] = []
    by_pair: dict[frozenset[str], Edge] = {}

    def add_leg(u: str, v: str, kind: str) -> None:
        pair = frozenset((u, v))
        edge = by_pair.get(pair)
        if edge is None:
            edge = Edge(u=u, v=v, kinds={kind})
            by_pair[pair] = edge
            edges.append(edge)
        else:
            edge.kinds.add(kind)

    for obs in dataset.observations:
        nodes.add(obs.at)
        nodes.add(obs.from_target)
        if obs.kind == "angle":
            nodes.add(obs.to_target)
            add_leg(obs.at, obs.from_target, "angle")
            add_leg(obs.at, obs.to_target, "angle")
        else:
            add_leg(obs.at, obs.from_target, "distance")
    return NetworkGraph(nodes=nodes, edges=edges)


def require_connected(graph: NetworkGraph) -> None:
    """Raise DisconnectedNetwork (listing component membership) if split."""
    components = graph.components()
    if len(components) > 1:
        raise DisconnectedNetwork(components)


@dataclass
class SpanningTree:
    """Tree edges and discovery order of one traversal, plus the unused edges."""

    root: str
    span_tree: list[Edge]
    span_index: list[str]
    back_edges: list[Edge]
    parent: dict[str, tuple[str, Edge]] = field(default_factory=dict)

    def depth(self) -> int:
        depths = {self.root: 0}
        for node in self.span_index[1:]:
            depths[node] = depths[self.parent[node][0]] + 1
        return max(depths.values(), default=0)


def _adjacency(graph: NetworkGraph):
    out_edges: dict[str, list[Edge]] = {n: [] for n in graph.nodes}
    in_edges: dict[str, list[Edge]] = {n: [] for n in graph.nodes}
    for e in graph.edges:
        out_edges[e.u].append(e)
        in_edges[e.v].append(e)
    return out_edges, in_edges


def _component_back_edges(graph: NetworkGraph, visited: set[str],
                          tree: list[Edge]) -> list[Edge]:
    in_tree = {id(e) for e in tree}
    return [
        e for e in graph.edges
        if e.u in visited and e.v in visited and id(e) not in in_tree
    ]


def dfs_spanning_tree(graph: NetworkGraph, root: str) -> SpanningTree:
    """Iterative forward-track/back-track depth-first spanning tree."""
    if root not in graph.nodes:
        raise RootUnknown(f"root {root!r} is not in the graph")
    out_edges, in_edges = _adjacency(graph)
    visited = {root}
    span_index = [root]
    span_tree: list[Edge] = []
    parent: dict[str, tuple[str, Edge]] = {}
    allow_reversed = False

    def candidate(node: str) -> tuple[Edge, str] | None:
        for e in out_edges[node]:
            if e.v not in visited:
                return e, e.v
        if allow_reversed:
            for e in in_edges[node]:
                if e.u not in visited:
                    return e, e.u
        return None

    current = root
    while True:
        found = candidate(current)
        if found is not None:
            edge, target = found
            visited.add(target)
            span_index.append(target)
            span_tree.append(edge)
            parent[target] = (current, edge)
            current = target
            continue
        # leaf: back-track along the tree to the nearest node with work left
        while current != root and candidate(current) is None:
            current = parent[current][0]
        if candidate(current) is not None:
            continue
        # root exhausted: resume from the earliest visited node that can
        # still reach somewhere, permitting reversed edges if needed
        restart = next((n for n in span_index if candidate(n) is not None), None)
        if restart is None and not allow_reversed:
            allow_reversed = True
            restart = next((n for n in span_index if candidate(n) is not None), None)
        if restart is None:
            break
        current = restart

    return SpanningTree(
        root=root,
        span_tree=span_tree,
        span_index=span_index,
        back_edges=_component_back_edges(graph, visited, span_tree),
        parent=parent,
    )


def bfs_spanning_tree(graph: NetworkGraph, root: str) -> SpanningTree:
    """Layer-order spanning tree; non-tree edges are recorded as cross edges."""
    if root not in graph.nodes:
        raise RootUnknown(f"root {root!r} is not in the graph")
    out_edges, in_edges = _adjacency(graph)
    visited = {root}
    span_index = [root]
    span_tree: list[Edge] = []
    parent: dict[str, tuple[str, Edge]] = {}
    allow_reversed = False
    queue = deque([root])

    while True:
        while queue:
            node = queue.popleft()
            candidates = list(out_edges[node])
            if allow_reversed:
                candidates += in_edges[node]
            for e in candidates:
                target = e.other(node)
                if target in visited:
                    continue
                visited.add(target)
                span_index.append(target)
                span_tree.append(e)
                parent[target] = (node, e)
                queue.append(target)
        stranded = any(
            (e.u in visited) != (e.v in visited) for e in graph.edges
        )
        if not stranded:
            break
        allow_reversed = True
        queue.extend(span_index)

    return SpanningTree(
        root=root,
        span_tree=span_tree,
        span_index=span_index,
        back_edges=_component_back_edges(graph, visited, span_tree),
        parent=parent,
    )


@dataclass
class Cycle:
    """Closed loop; edges carry +1 when walked with the observed direction."""

    node_sequence: list[str]
    edges: list[tuple[Edge, int]]

    @property
    def node_set(self) -> frozenset[str]:
        return frozenset(self.node_sequence)

    def name(self) -> str:
        return "".join(self.node_sequence) if all(
            len(n) == 1 for n in self.node_sequence
        ) else "-".join(self.node_sequence)


def _shortest_route(adjacency: dict[str, list[tuple[str, Edge]]],
                    start: str, goal: str) -> list[tuple[str, Edge]]:
    """BFS route from start to goal as (next_node, edge) hops."""
    prev: dict[str, tuple[str, Edge]] = {}
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for nxt, edge in adjacency.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                prev[nxt] = (node, edge)
                queue.append(nxt)
    if goal not in seen:
        return []
    hops: list[tuple[str, Edge]] = []
    node = goal
    while node != start:
        before, edge = prev[node]
        hops.append((node, edge))
        node = before
    hops.reverse()
    return hops


def fundamental_cycles(tree: SpanningTree, minimal: bool = True) -> list[Cycle]:
    """One cycle per back edge: the edge plus the route between its endpoints.

    With `minimal` (the default) the route may run through back edges
    already fitted, which keeps each loop as short as the processed part
    of the network allows; with `minimal=False` routes stay on the
    spanning tree.
    """
    adjacency: dict[str, list[tuple[str, Edge]]] = {}

    def connect(edge: Edge) -> None:
        adjacency.setdefault(edge.u, []).append((edge.v, edge))
        adjacency.setdefault(edge.v, []).append((edge.u, edge))

    for edge in tree.span_tree:
        connect(edge)

    cycles = []
    for back in tree.back_edges:
        hops = _shortest_route(adjacency, back.v, back.u)
        sequence = [back.u, back.v]
        walked: list[tuple[Edge, int]] = [(back, 1)]
        at = back.v
        for nxt, edge in hops:
            walked.append((edge, 1 if (edge.u, edge.v) == (at, nxt) else -1))
            sequence.append(nxt)
            at = nxt
        cycles.append(Cycle(node_sequence=sequence, edges=walked))
        if minimal:
            connect(back)
    return cycles


def cycle_misclosure(cycle: Cycle, dataset: "DataSet",
                     coords: Mapping[str, Coordinates]) -> tuple[float, float, float]:
    """Vector misclosure of a cycle from observed distances and coordinate bearings.

    Sums the leg vectors (l*sin(theta), l*cos(theta)) around the loop and
    returns (dE, dN, closure_ratio) with closure_ratio = |misclosure| / sum(l).
    """
    leg_length: dict[frozenset[str], float] = {}
    for obs in dataset.observations:
        if obs.kind != "distance":
            continue
        leg_length.setdefault(frozenset((obs.at, obs.from_target)), obs.value)

    de = 0.0
    dn = 0.0
    total = 0.0
    for a, b in zip(cycle.node_sequence, cycle.node_sequence[1:]):
        length = leg_length.get(frozenset((a, b)))
        if length is None:
            raise MissingLegObservation(f"no distance observation on leg {a}-{b}")
        theta = equations.bearing(coords[a], coords[b])
        de += length * math.sin(theta)
        dn += length * math.cos(theta)
        total += length
    ratio = math.hypot(de, dn) / total if total > 0.0 else 0.0
    return de, dn, ratio
