"""Rooted parent assignment over the nodes of a document graph."""

from __future__ import annotations

from collections import deque
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx

from doctree.common import HierarchyError
from doctree.services.corpus import DocumentGraph

NO_PARENT = -1


class Hierarchy:
    """Mutable tree stored as a parent array plus sorted children lists.

    ``parent[root]`` is ``NO_PARENT``. Depths are kept in sync on every
    attach so path lookups stay cheap inside the samplers.
    """

    def __init__(self, parent: Sequence[int], root: int) -> None:
        self.root = root
        self.parent: List[int] = list(parent)
        self.parent[root] = NO_PARENT
        self.children: List[List[int]] = [[] for _ in self.parent]
        for node, parent_id in enumerate(self.parent):
            if parent_id != NO_PARENT:
                self.children[parent_id].append(node)
        for child_list in self.children:
            child_list.sort()
        self.depth: List[int] = [0] * len(self.parent)
        self._refresh_depths(root, 0)

    def __len__(self) -> int:
        return len(self.parent)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Hierarchy):
            return NotImplemented
        return self.root == other.root and self.parent == other.parent

    def __repr__(self) -> str:
        return f"Hierarchy(root={self.root}, parent={self.parent})"

    def _refresh_depths(self, node: int, depth: int) -> None:
        stack = [(node, depth)]
        while stack:
            current, current_depth = stack.pop()
            self.depth[current] = current_depth
            stack.extend((child, current_depth + 1) for child in self.children[current])

    def copy(self) -> "Hierarchy":
        clone = Hierarchy.__new__(Hierarchy)
        clone.root = self.root
        clone.parent = list(self.parent)
        clone.children = [list(child_list) for child_list in self.children]
        clone.depth = list(self.depth)
        return clone

    def degree(self, node: int) -> int:
        return len(self.children[node])

    def path(self, node: int) -> List[int]:
        """Nodes from the root down to ``node``, both included."""
        path = [node]
        while self.parent[path[-1]] != NO_PARENT:
            path.append(self.parent[path[-1]])
            if len(path) > len(self.parent):
                raise HierarchyError(f"parent chain of node {node} does not reach the root")
        path.reverse()
        return path

    def subtree(self, node: int) -> List[int]:
        """``node`` and all its descendants in preorder."""
        members: List[int] = []
        stack = [node]
        while stack:
            current = stack.pop()
            members.append(current)
            stack.extend(reversed(self.children[current]))
        return members

    def is_ancestor(self, ancestor: int, node: int) -> bool:
        """True when ``ancestor`` lies on the root path of ``node`` (inclusive)."""
        current = node
        while current != NO_PARENT:
            if current == ancestor:
                return True
            current = self.parent[current]
        return False

    def detach(self, node: int) -> int:
        """Unlink ``node`` (and its subtree) from its parent; returns the old parent."""
        if node == self.root:
            raise HierarchyError("the root cannot be detached")
        old_parent = self.parent[node]
        if old_parent != NO_PARENT:
            self.children[old_parent].remove(node)
            self.parent[node] = NO_PARENT
        return old_parent

    def attach(self, node: int, new_parent: int) -> None:
        """Hang a detached ``node`` under ``new_parent``."""
        if self.parent[node] != NO_PARENT:
            raise HierarchyError(f"node {node} is still attached to {self.parent[node]}")
        if self.is_ancestor(node, new_parent):
            raise HierarchyError(f"attaching {node} under {new_parent} would create a cycle")
        self.parent[node] = new_parent
        siblings = self.children[new_parent]
        siblings.append(node)
        siblings.sort()
        self._refresh_depths(node, self.depth[new_parent] + 1)

    def move(self, node: int, new_parent: int) -> None:
        if self.parent[node] == new_parent:
            return
        self.detach(node)
        self.attach(node, new_parent)

    def average_depth(self) -> float:
        """Mean depth over non-root nodes (0 for a lone root)."""
        if len(self.parent) <= 1:
            return 0.0
        return (sum(self.depth) - self.depth[self.root]) / (len(self.parent) - 1)

    def max_depth(self) -> int:
        return max(self.depth)

    def edges(self) -> List[Tuple[int, int]]:
        return [
            (parent_id, node)
            for node, parent_id in enumerate(self.parent)
            if parent_id != NO_PARENT
        ]

    def to_networkx(self) -> nx.DiGraph:
        tree = nx.DiGraph()
        tree.add_nodes_from(range(len(self.parent)))
        tree.add_edges_from(self.edges())
        return tree

    def validate(self, graph: Optional[DocumentGraph] = None) -> None:
        """Check the tree invariants, and containment in ``graph`` when given.

        Raises:
            HierarchyError: On a cycle, an orphan, or an edge missing from the graph.
        """
        seen = set()
        queue = deque([self.root])
        while queue:
            node = queue.popleft()
            seen.add(node)
            for child in self.children[node]:
                if self.parent[child] != node:
                    raise HierarchyError(f"children list of {node} disagrees with parent[{child}]")
                queue.append(child)
        if len(seen) != len(self.parent):
            missing = sorted(set(range(len(self.parent))) - seen)
            raise HierarchyError(f"nodes not reachable from the root: {missing[:10]}")

        for node in range(len(self.parent)):
            if node != self.root and self.parent[node] == NO_PARENT:
                raise HierarchyError(f"node {node} has no parent")
            if self.depth[node] != (0 if node == self.root else self.depth[self.parent[node]] + 1):
                raise HierarchyError(f"stale depth for node {node}")

        if graph is not None:
            for parent_id, node in self.edges():
                if not graph.has_edge(parent_id, node):
                    raise HierarchyError(f"tree edge {parent_id}->{node} is not a graph edge")

    @classmethod
    def from_parents(cls, parents: Sequence[Optional[int]], root: int) -> "Hierarchy":
        cleaned = [NO_PARENT if value is None else int(value) for value in parents]
        hierarchy = cls(cleaned, root)
        hierarchy.validate()
        return hierarchy


def bfs_hierarchy(graph: DocumentGraph) -> Hierarchy:
    """Breadth-first tree from the root; among shallowest parents the lowest id wins."""
    distances: Dict[int, int] = nx.single_source_shortest_path_length(graph.to_networkx(), graph.root)
    if len(distances) != graph.num_nodes:
        raise HierarchyError(
            f"{graph.num_nodes - len(distances)} node(s) are unreachable from the root"
        )

    parent = [NO_PARENT] * graph.num_nodes
    for node in range(graph.num_nodes):
        if node == graph.root:
            continue
        parent[node] = min(
            source
            for source in graph.predecessors[node]
            if distances.get(source, -2) == distances[node] - 1
        )
    return Hierarchy(parent, graph.root)


def anchored_nodes(parents: Sequence[int], root: int) -> List[bool]:
    """Flags for nodes whose parent chain reaches the root."""
    children: List[List[int]] = [[] for _ in parents]
    for node, parent_id in enumerate(parents):
        if parent_id != NO_PARENT and node != root:
            children[parent_id].append(node)
    anchored = [False] * len(parents)
    stack = [root]
    while stack:
        node = stack.pop()
        if anchored[node]:
            continue
        anchored[node] = True
        stack.extend(children[node])
    return anchored


def cycle_members(parents: Sequence[int], nodes: Iterable[int]) -> Set[int]:
    """Nodes among ``nodes`` that lie on a cycle of the parent chains."""
    members = set(nodes)
    on_cycle: Set[int] = set()
    visited: Set[int] = set()
    for start in sorted(members):
        trail: Dict[int, int] = {}
        node = start
        while node in members and node not in visited:
            visited.add(node)
            trail[node] = len(trail)
            node = parents[node]
        if node in trail:
            on_cycle.update(step for step, position in trail.items() if position >= trail[node])
    return on_cycle


def repair_to_tree(
    parents: List[int],
    root: int,
    ranked_options: Iterable[Tuple[int, Sequence[int]]],
    fallback: Hierarchy,
) -> Hierarchy:
    """Break parent-chain cycles until the parent array is a tree.

    Only nodes on a cycle, or without any parent, are reassigned; nodes
    hanging below a cycle keep their parent and are anchored once it is
    broken. ``ranked_options`` yields ``(node, parents best-first)``; the
    lowest-id offending node takes its best-ranked option that is already
    anchored. When none has one, the shallowest offending node whose
    ``fallback`` parent is anchored takes it, and failing that the shallowest
    cut-off node.
    """
    parents = list(parents)
    options = {node: list(choices) for node, choices in ranked_options}
    anchored = anchored_nodes(parents, root)
    while not all(anchored):
        stranded = [node for node, flag in enumerate(anchored) if not flag]
        offending = sorted(
            cycle_members(parents, stranded) | {node for node in stranded if parents[node] == NO_PARENT}
        )
        chosen: Optional[Tuple[int, int]] = None
        for node in offending:
            for candidate in options.get(node, ()):
                if anchored[candidate]:
                    chosen = (node, candidate)
                    break
            if chosen:
                break
        if chosen is None:
            reachable = [node for node in offending if anchored[fallback.parent[node]]]
            # the shallowest cut-off node always has an anchored fallback parent
            node = min(reachable or stranded, key=lambda item: (fallback.depth[item], item))
            chosen = (node, fallback.parent[node])
        node, new_parent = chosen
        parents[node] = new_parent
        anchored = anchored_nodes(parents, root)
    return Hierarchy(parents, root)
