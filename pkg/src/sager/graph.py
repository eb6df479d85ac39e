"""Rooted dependency graphs, cycle breaking, and topological hierarchies.

A hierarchy stratifies a rooted DAG by longest-path distance from the root:
component t holds every node whose longest root path has t edges, plus the
incoming edges of those nodes.  All edges then point strictly forward
across strata, which is what makes stratum-by-stratum generation sound.
"""

from __future__ import annotations

from dataclasses import dataclass


class ConnectivityError(ValueError):
    """A non-root node is unreachable from the root."""


class StructuralError(ValueError):
    """A graph or hierarchy violates its invariants."""


@dataclass(frozen=True)
class DepGraph:
    n_nodes: int
    edges: frozenset  # of DepEdge

    def __post_init__(self):
        for e in self.edges:
            if not (0 <= e.head < self.n_nodes and 0 < e.dep < self.n_nodes):
                raise StructuralError(f"edge {e} outside [0, {self.n_nodes})")


@dataclass(frozen=True)
class Component:
    nodes: tuple  # sorted node ids
    edges: frozenset  # incoming edges of those nodes


@dataclass(frozen=True)
class Hierarchy:
    components: tuple  # of Component

    @property
    def levels(self):
        """Node id -> hierarchy index, as a list."""
        n = sum(len(c.nodes) for c in self.components)
        out = [0] * n
        for t, comp in enumerate(self.components):
            for v in comp.nodes:
                out[v] = t
        return out


def _successors(g):
    succ = [[] for _ in range(g.n_nodes)]
    for e in g.edges:
        succ[e.head].append(e.dep)
    return [sorted(set(s)) for s in succ]


def _dfs_back_pairs(succ, n):
    """Iterative DFS from node 0, children in ascending id order.

    Returns (back pairs in encounter order, visited flags).  Removing all
    back edges of one DFS leaves an acyclic graph: every surviving edge
    goes from a later to an earlier finish time.
    """
    state = [0] * n  # 0 unseen, 1 on stack, 2 done
    back, order = set(), []
    stack = [(0, iter(succ[0]))]
    state[0] = 1
    while stack:
        u, it = stack[-1]
        advanced = False
        for v in it:
            if state[v] == 0:
                state[v] = 1
                stack.append((v, iter(succ[v])))
                advanced = True
                break
            if state[v] == 1 and (u, v) not in back:
                back.add((u, v))
                order.append((u, v))
        if not advanced:
            state[u] = 2
            stack.pop()
    return order, [s == 2 for s in state]


def break_cycles(g):
    """Delete the back edges found by a root DFS, making the graph acyclic.

    Returns (dag, removed) with dag.edges | removed == g.edges; ``removed``
    is deterministic (DFS encounter order, then label).
    """
    succ = _successors(g)
    back_order, visited = _dfs_back_pairs(succ, g.n_nodes)
    for v, seen in enumerate(visited):
        if not seen:
            raise ConnectivityError(f"node {v} unreachable from root")
    back = set(back_order)
    rank = {p: i for i, p in enumerate(back_order)}
    removed = sorted(
        (e for e in g.edges if (e.head, e.dep) in back),
        key=lambda e: (rank[(e.head, e.dep)], e.label),
    )
    dag = DepGraph(g.n_nodes, g.edges - set(removed))
    return dag, removed


def restore_edges(dag, removed):
    """Union the removed edges back in (training-data round trips only)."""
    for e in removed:
        if not (0 <= e.head < dag.n_nodes and 0 < e.dep < dag.n_nodes):
            raise StructuralError(f"removed edge {e} outside graph")
    return DepGraph(dag.n_nodes, dag.edges | set(removed))


def _kahn_levels(succ, n, indeg):
    """Longest-path levels by dynamic programming over a topological order."""
    level = [0] * n
    queue = [v for v in range(n) if indeg[v] == 0]
    seen = 0
    while queue:
        u = queue.pop()
        seen += 1
        for v in succ[u]:
            if level[u] + 1 > level[v]:
                level[v] = level[u] + 1
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    if seen != n:
        raise StructuralError("cycle detected; call break_cycles first")
    return level


def build_hierarchy(dag):
    """Stratify an acyclic rooted graph by longest path from the root."""
    succ = _successors(dag)
    reach = [False] * dag.n_nodes
    reach[0] = True
    todo = [0]
    while todo:
        for v in succ[todo.pop()]:
            if not reach[v]:
                reach[v] = True
                todo.append(v)
    for v, ok in enumerate(reach):
        if not ok:
            raise ConnectivityError(f"node {v} unreachable from root")

    indeg = [0] * dag.n_nodes
    for e in dag.edges:
        indeg[e.dep] += 1
    level = _kahn_levels(succ, dag.n_nodes, indeg)

    depth = max(level) if level else 0
    nodes_at = [[] for _ in range(depth + 1)]
    edges_at = [[] for _ in range(depth + 1)]
    for v, t in enumerate(level):
        nodes_at[t].append(v)
    for e in dag.edges:
        edges_at[level[e.dep]].append(e)
    return Hierarchy(
        tuple(
            Component(tuple(sorted(ns)), frozenset(es))
            for ns, es in zip(nodes_at, edges_at)
        )
    )


def longest_path_oracle(dag, node):
    """Maximum root-to-node path length by exhaustive path enumeration.

    Deliberately independent of build_hierarchy: walks every path from the
    root (no memoization), so it only suits small graphs (<= ~20 nodes).
    """
    succ = _successors(dag)
    best = [0] * dag.n_nodes

    def walk(u, depth):
        if depth > best[u]:
            best[u] = depth
        for v in succ[u]:
            walk(v, depth + 1)

    walk(0, 0)
    return best[node]


def components_to_graph(h):
    """Union the component edge sets back into a DepGraph."""
    seen = set()
    n = 0
    for t, comp in enumerate(h.components):
        if t == 0 and tuple(comp.nodes) != (0,):
            raise StructuralError("component 0 must be exactly the root")
        for v in comp.nodes:
            if v in seen:
                raise StructuralError(f"node {v} appears in two components")
            seen.add(v)
        n += len(comp.nodes)
    if seen != set(range(n)):
        raise StructuralError("components do not partition 0..n-1")
    level = {}
    for t, comp in enumerate(h.components):
        for v in comp.nodes:
            level[v] = t
    edges = set()
    for t, comp in enumerate(h.components):
        for e in comp.edges:
            if level.get(e.dep) != t or level.get(e.head, -1) >= t:
                raise StructuralError(f"edge {e} violates hierarchy direction")
            edges.add(e)
    return DepGraph(n, frozenset(edges))


def reachable_levels(g):
    """Lenient levels for metrics: root-reachable nodes only, cycles broken.

    Returns a list with the hierarchy index for every node reachable from
    the root and None for unattached nodes; never raises on disconnected
    or cyclic system output.
    """
    succ = _successors(g)
    back, visited = _dfs_back_pairs(succ, g.n_nodes)
    back = set(back)
    kept = [[] for _ in range(g.n_nodes)]
    indeg = [0] * g.n_nodes
    for e in g.edges:
        pair = (e.head, e.dep)
        if pair in back or not (visited[e.head] and visited[e.dep]):
            continue
        if e.dep not in kept[e.head]:
            kept[e.head].append(e.dep)
            indeg[e.dep] += 1
    for s in kept:
        s.sort()
    level = _kahn_levels(kept, g.n_nodes, indeg)
    return [level[v] if visited[v] else None for v in range(g.n_nodes)]
