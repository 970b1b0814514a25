import pytest

from doctree.common import HierarchyError
from doctree.services.corpus import build_graph
from doctree.services.hierarchy import (
    NO_PARENT,
    Hierarchy,
    anchored_nodes,
    bfs_hierarchy,
    cycle_members,
    repair_to_tree,
)


class TestHierarchy:
    def test_paths_depths_and_children(self):
        tree = Hierarchy([NO_PARENT, 0, 0, 1, 3], 0)

        assert tree.path(4) == [0, 1, 3, 4]
        assert tree.depth == [0, 1, 1, 2, 3]
        assert tree.children[0] == [1, 2]
        assert tree.subtree(1) == [1, 3, 4]
        assert tree.average_depth() == pytest.approx(7 / 4)
        assert tree.max_depth() == 3

    def test_move_carries_the_subtree(self):
        tree = Hierarchy([NO_PARENT, 0, 0, 1, 3], 0)
        tree.move(3, 2)

        assert tree.path(4) == [0, 2, 3, 4]
        assert tree.children[1] == []
        assert tree.depth[4] == 3
        tree.validate()

    def test_attach_under_own_descendant_is_rejected(self):
        tree = Hierarchy([NO_PARENT, 0, 1], 0)
        tree.detach(1)
        with pytest.raises(HierarchyError, match="cycle"):
            tree.attach(1, 2)

    def test_root_cannot_be_detached(self):
        with pytest.raises(HierarchyError):
            Hierarchy([NO_PARENT, 0], 0).detach(0)

    def test_validate_reports_orphans(self):
        tree = Hierarchy([NO_PARENT, 2, 1], 0)
        with pytest.raises(HierarchyError, match="not reachable"):
            tree.validate()

    def test_validate_checks_graph_containment(self, diamond):
        graph, _ = diamond
        tree = Hierarchy([NO_PARENT, 0, 0, 0], 0)
        with pytest.raises(HierarchyError, match="0->3"):
            tree.validate(graph)

    def test_copy_is_independent(self):
        tree = Hierarchy([NO_PARENT, 0, 1], 0)
        clone = tree.copy()
        clone.move(2, 0)
        assert tree.parent == [NO_PARENT, 0, 1]
        assert clone.parent == [NO_PARENT, 0, 0]
        assert tree != clone

    def test_from_parents_accepts_none_for_root(self):
        tree = Hierarchy.from_parents([None, 0, 0], 0)
        assert tree.parent == [NO_PARENT, 0, 0]

    def test_lone_root(self):
        tree = Hierarchy([NO_PARENT], 0)
        assert tree.average_depth() == 0.0
        assert tree.edges() == []


class TestBfsHierarchy:
    def test_diamond_tie_goes_to_lowest_id(self, diamond):
        graph, _ = diamond
        tree = bfs_hierarchy(graph)
        assert tree.parent == [NO_PARENT, 0, 0, 1]

    def test_shortest_distance_wins_over_id(self, chain_graph):
        graph, _ = chain_graph
        assert bfs_hierarchy(graph).parent == [NO_PARENT, 0, 0]

    def test_unreachable_nodes_are_an_error(self):
        graph, _ = build_graph({"a": ["x"], "b": ["y"]}, [], "a")
        with pytest.raises(HierarchyError, match="unreachable"):
            bfs_hierarchy(graph)


class TestRepair:
    def test_anchored_flags(self):
        assert anchored_nodes([NO_PARENT, 0, 3, 2], 0) == [True, True, False, False]

    def test_stranded_cycle_takes_best_anchored_option(self, small_web):
        graph, _ = small_web
        # d (3) and f (5) point at each other
        parents = [NO_PARENT, 0, 0, 5, 2, 3]
        options = [(3, [5, 1, 0]), (5, [3, 0])]
        tree = repair_to_tree(parents, 0, options, bfs_hierarchy(graph))

        assert tree.parent == [NO_PARENT, 0, 0, 1, 2, 3]
        tree.validate(graph)

    def test_falls_back_to_bfs_parent(self, small_web):
        graph, _ = small_web
        parents = [NO_PARENT, 0, 0, 5, 2, 3]
        tree = repair_to_tree(parents, 0, [], bfs_hierarchy(graph))

        # d and f share a breadth-first depth; the lower id is repaired first
        assert tree.parent[3] == 0
        assert tree.parent[5] == 3
        tree.validate(graph)

    def test_node_below_a_cycle_keeps_its_parent(self):
        # 3 and 4 point at each other, 1 hangs below 3
        parents = [NO_PARENT, 3, 0, 4, 3]
        options = [(1, [3, 0]), (3, [4, 2]), (4, [3, 0])]
        tree = repair_to_tree(parents, 0, options, Hierarchy([NO_PARENT, 0, 0, 0, 0], 0))

        assert tree.parent == [NO_PARENT, 3, 0, 2, 3]

    def test_cycle_members(self):
        # 1 -> 2 -> 3 -> 1 is a cycle, 4 hangs below it, 5 is anchored
        parents = [NO_PARENT, 3, 1, 2, 3, 0]
        assert cycle_members(parents, [1, 2, 3, 4]) == {1, 2, 3}
        assert cycle_members(parents, [4, 5]) == set()
