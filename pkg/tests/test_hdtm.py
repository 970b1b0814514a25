import math

import numpy as np
import pytest
from scipy.special import gammaln

from doctree.common import CountConsistencyError
from doctree.services.corpus import build_graph
from doctree.services.hdtm import (
    CountTables,
    align_levels,
    Hyperparameters,
    check_state,
    counts_under,
    detach_document,
    init_state,
    level_distribution,
    level_log_likelihood,
    level_log_prior,
    log_likelihood,
    path_distribution,
    path_log_likelihood,
    reattach_document,
    recount,
    restore_document,
    rwr_path_probs,
    sample_document_levels,
    sample_level,
    sample_path,
    serial_path_prior,
    top_word_ids,
    walk_log_factors,
)
from doctree.services.hierarchy import NO_PARENT, Hierarchy
from doctree.utils.numeric import normalize_log_weights


@pytest.fixture
def fork_graph():
    """r -> a, r -> b, a -> k, b -> k. Dense ids: a=0, b=1, k=2, r=3."""
    documents = {"r": ["y"], "a": ["x"], "b": ["x"], "k": ["x", "y"]}
    edges = [("r", "a"), ("r", "b"), ("a", "k"), ("b", "k")]
    return build_graph(documents, edges, "r")


def dense_path_log_likelihood(state, doc, candidate, levels=None):
    """Direct Dirichlet-multinomial ratio over the full vocabulary."""
    eta = state.hp.eta
    size = state.vocabulary_size
    path = state.hierarchy.path(candidate) + [doc]
    if levels is None:
        levels = np.minimum(state.levels[doc], len(path))
    total = 0.0
    for level in range(1, len(path) + 1):
        words = state.tokens[doc][levels == level]
        if words.size == 0:
            continue
        node_counts = np.zeros(size)
        for word, count in state.counts.node_word[path[level - 1]].items():
            node_counts[word] = count
        doc_counts = np.bincount(words, minlength=size).astype(float)
        total += gammaln(node_counts.sum() + size * eta) - gammaln(node_counts.sum() + doc_counts.sum() + size * eta)
        total += np.sum(gammaln(node_counts + doc_counts + eta) - gammaln(node_counts + eta))
    return total


class TestHyperparameters:
    @pytest.mark.parametrize("gamma", [0.0, 1.0, 1.5, -0.1, float("nan")])
    def test_gamma_outside_open_interval(self, gamma):
        with pytest.raises(ValueError, match="gamma"):
            Hyperparameters(gamma=gamma)

    def test_eta_and_alpha_must_be_positive(self):
        with pytest.raises(ValueError, match="eta"):
            Hyperparameters(eta=0.0)
        with pytest.raises(ValueError, match="alpha"):
            Hyperparameters(alpha=-1.0)

    def test_defaults(self):
        assert Hyperparameters().as_dict() == {"gamma": 0.95, "eta": 0.1, "alpha": 1.0}


class TestCountTables:
    def test_negative_count_is_fatal(self):
        counts = CountTables(2)
        counts.add(0, 3, 1)
        counts.add(0, 3, -1)
        assert counts.node_word[0] == {}
        with pytest.raises(CountConsistencyError):
            counts.add(0, 3, -1)

    def test_top_words_break_ties_by_id(self):
        counts = CountTables(1)
        for word, count in [(5, 2), (1, 2), (7, 3), (2, 1)]:
            counts.add(0, word, count)
        assert top_word_ids(counts, 0, 3) == [(7, 3), (1, 2), (5, 2)]


class TestInitState:
    def test_star_graph(self, hp):
        graph, _ = build_graph(
            {"r": ["w"], "a": ["w"], "b": ["w"], "c": ["w"]},
            [("r", "a"), ("r", "b"), ("r", "c")],
            "r",
        )
        state = init_state(graph, hp, seed=1)
        root = graph.root
        assert all(state.hierarchy.parent[node] == root for node in range(4) if node != root)
        assert state.hierarchy.average_depth() == 1.0

    def test_chain_depth(self, hp):
        graph, _ = build_graph({"r": ["x"], "a": ["x"], "b": ["x"]}, [("r", "a"), ("a", "b")], "r")
        state = init_state(graph, hp, seed=1)
        assert state.hierarchy.depth[graph.external_index["b"]] == 2

    def test_diamond_uses_lowest_id_parent(self, diamond, hp):
        graph, _ = diamond
        state = init_state(graph, hp, seed=3)
        assert state.hierarchy.parent[3] == 1

    def test_levels_within_path_and_counts_consistent(self, web_state):
        for doc, levels in enumerate(web_state.levels):
            assert levels.min() >= 1
            assert levels.max() <= web_state.hierarchy.depth[doc] + 1
        assert web_state.counts.total() == web_state.total_tokens
        check_state(web_state)

    def test_vocabulary_size_must_cover_word_ids(self, small_web, hp):
        graph, _ = small_web
        with pytest.raises(ValueError, match="vocabulary size"):
            init_state(graph, hp, seed=0, vocabulary_size=2)


class TestRandomWalkPrior:
    def test_only_root_links_to_target(self):
        graph, _ = build_graph({"r": [], "t": []}, [("r", "t")], "r")
        tree = Hierarchy([NO_PARENT, 0], 0)
        target = graph.external_index["t"]
        assert rwr_path_probs(tree, graph, target, 0.5) == {graph.root: 0.0}

    def test_two_children_at_half_restart(self, fork_graph):
        graph, _ = fork_graph
        tree = Hierarchy([3, 3, 0, NO_PARENT], 3)
        weights = rwr_path_probs(tree, graph, 2, 0.5)
        assert weights.keys() == {0, 1}
        assert weights[0] == pytest.approx(math.log(0.25))
        assert weights[1] == pytest.approx(math.log(0.25))

    def test_target_subtree_is_never_a_candidate(self):
        graph, _ = build_graph({"r": [], "s": [], "t": []}, [("r", "s"), ("s", "t"), ("t", "s")], "r")
        index = graph.external_index
        parent = [NO_PARENT] * 3
        parent[index["s"]] = index["r"]
        parent[index["t"]] = index["s"]
        tree = Hierarchy(parent, index["r"])
        assert rwr_path_probs(tree, graph, index["s"], 0.5) == {index["r"]: 0.0}

    def test_root_has_no_path(self, fork_graph):
        graph, _ = fork_graph
        with pytest.raises(ValueError):
            rwr_path_probs(Hierarchy([3, 3, 0, NO_PARENT], 3), graph, 3, 0.5)


class TestPathLikelihood:
    def test_zero_token_document(self, hp):
        graph, _ = build_graph({"r": ["x"], "a": []}, [("r", "a")], "r")
        state = init_state(graph, hp, seed=0)
        doc = graph.external_index["a"]
        detach_document(state, doc)
        assert path_log_likelihood(state, doc, graph.root) == 0.0

    def test_single_word_vocabulary(self, hp):
        graph, _ = build_graph(
            {"r": ["x", "x"], "a": ["x"], "b": ["x", "x", "x"]},
            [("r", "a"), ("r", "b"), ("a", "b")],
            "r",
        )
        state = init_state(graph, hp, seed=4)
        doc = graph.external_index["b"]
        detach_document(state, doc)
        for candidate in (graph.root, graph.external_index["a"]):
            assert path_log_likelihood(state, doc, candidate) == pytest.approx(0.0, abs=1e-9)

    def test_matches_dense_evaluation(self, web_state):
        doc = 5
        detach_document(web_state, doc)
        for candidate in serial_path_prior(web_state, doc):
            assert path_log_likelihood(web_state, doc, candidate) == pytest.approx(
                dense_path_log_likelihood(web_state, doc, candidate), abs=1e-10
            )


class TestSamplePath:
    def test_distribution_is_normalized(self, web_state):
        detach_document(web_state, 5)
        candidates, probabilities = path_distribution(web_state, 5)
        assert set(candidates.tolist()) <= {0, 3, 4}
        assert probabilities.sum() == pytest.approx(1.0, abs=1e-9)

    def test_scaling_the_prior_leaves_the_distribution_unchanged(self, web_state):
        detach_document(web_state, 5)
        _, base = path_distribution(web_state, 5)

        def shifted(state, doc):
            return {node: weight + math.log(7.5) for node, weight in serial_path_prior(state, doc).items()}

        _, scaled = path_distribution(web_state, 5, shifted)
        np.testing.assert_allclose(scaled, base, atol=1e-12)

    def test_single_candidate_keeps_parent(self, chain_graph, hp):
        graph, _ = chain_graph
        state = init_state(graph, hp, seed=2)
        rng = np.random.default_rng(0)
        for _ in range(20):
            sample_path(state, 1, rng)
            assert state.hierarchy.parent[1] == 0

    def test_invariants_hold_after_every_move(self, web_state):
        rng = np.random.default_rng(11)
        for _ in range(30):
            for doc in range(1, 6):
                sample_path(web_state, doc, rng)
                check_state(web_state)

    def test_symmetric_candidates_are_equally_likely(self, fork_graph, hp):
        graph, _ = fork_graph
        state = init_state(graph, hp, seed=0)
        state.levels = [np.array([2]), np.array([2]), np.array([3, 3]), np.array([1])]
        state.counts = recount(state)
        check_state(state)

        rng = np.random.default_rng(123)
        draws = 10_000
        under_a = 0
        for _ in range(draws):
            sample_path(state, 2, rng)
            under_a += state.hierarchy.parent[2] == 0
        assert under_a / draws == pytest.approx(0.5, abs=0.02)
        check_state(state)

    def test_asymmetric_candidates_match_exact_enumeration(self, hp):
        graph, _ = build_graph(
            {"r": ["y"], "a": ["x", "x"], "b": ["y"], "k": ["x", "x", "y"]},
            [("r", "a"), ("r", "b"), ("a", "k"), ("b", "k")],
            "r",
        )
        state = init_state(graph, hp, seed=0)
        state.levels = [np.array([2, 2]), np.array([2]), np.array([2, 2, 2]), np.array([1])]
        state.counts = recount(state)

        detached = state.copy()
        detach_document(detached, 2)
        prior = rwr_path_probs(detached.hierarchy, graph, 2, hp.gamma)
        aligned = {
            parent: align_levels(detached, detached.hierarchy.path(parent) + [2], detached.tokens[2])
            for parent in (0, 1)
        }
        # x sits best at a under a, at k itself under b; y at r and at b (the deeper tie)
        assert aligned[0].tolist() == [2, 2, 1]
        assert aligned[1].tolist() == [3, 3, 2]
        exact = normalize_log_weights(
            np.array(
                [prior[parent] + dense_path_log_likelihood(detached, 2, parent, aligned[parent]) for parent in (0, 1)]
            )
        )

        rng = np.random.default_rng(9)
        draws = 10_000
        under_a = 0
        for _ in range(draws):
            sample_path(state, 2, rng)
            under_a += state.hierarchy.parent[2] == 0
        assert exact[0] > 0.5
        assert under_a / draws == pytest.approx(exact[0], abs=0.02)

    def test_moving_a_document_carries_its_subtree(self, web_state):
        web_state.hierarchy.move(5, 3)
        web_state.counts = recount(web_state)
        tree = web_state.hierarchy
        assert tree.path(5) == [0, 3, 5]
        rng = np.random.default_rng(5)
        for _ in range(10):
            sample_path(web_state, 3, rng)
            assert web_state.hierarchy.parent[5] == 3
            check_state(web_state)


class TestSubtreeMoves:
    @pytest.fixture
    def ladder(self, hp):
        """r -> a -> d -> c plus r -> d; d starts under r."""
        graph, _ = build_graph(
            {"r": ["u"], "a": ["v", "v"], "d": ["v"], "c": ["v", "u"]},
            [("r", "a"), ("r", "d"), ("a", "d"), ("d", "c")],
            "r",
        )
        state = init_state(graph, hp, seed=0)
        index = graph.external_index
        assert state.hierarchy.parent[index["d"]] == index["r"]
        state.levels[index["r"]][:] = 1
        state.levels[index["a"]][:] = 2
        state.levels[index["d"]][:] = 2
        state.levels[index["c"]][:] = 3
        state.counts = recount(state)
        check_state(state)
        return state, index

    @staticmethod
    def move(state, doc, parent):
        old_parent, old_path = detach_document(state, doc)
        reattach_document(state, doc, parent, old_parent, old_path)

    def test_tokens_below_the_mover_keep_their_node(self, ladder):
        state, index = ladder
        self.move(state, index["d"], index["a"])
        assert state.hierarchy.path(index["c"]) == [index[name] for name in "radc"]
        assert state.levels[index["c"]].tolist() == [4, 4]
        assert state.counts.node_word[index["c"]] == {int(word): 1 for word in state.tokens[index["c"]]}
        check_state(state)

    def test_tokens_above_the_mover_are_realigned(self, ladder):
        state, index = ladder
        self.move(state, index["d"], index["a"])
        c = index["c"]
        state.levels[c][:] = [2, 1]
        state.counts = recount(state)

        self.move(state, index["d"], index["r"])

        # the v token of c no longer fits under a; only r is left above d
        assert state.levels[c].tolist() == [1, 1]
        assert state.levels[index["d"]].tolist() == [2]
        assert state.counts.node_word[index["a"]] == {int(state.tokens[index["a"]][0]): 2}
        check_state(state)

    def test_restore_undoes_detach_exactly(self, ladder):
        state, index = ladder
        self.move(state, index["d"], index["a"])
        state.levels[index["c"]][:] = [2, 1]
        state.counts = recount(state)
        before = state.copy()

        old_parent, old_path = detach_document(state, index["d"])
        restore_document(state, index["d"], old_parent, old_path)

        assert state.hierarchy == before.hierarchy
        assert state.hierarchy.depth == before.hierarchy.depth
        assert all(np.array_equal(a, b) for a, b in zip(state.levels, before.levels))
        assert state.counts == before.counts

    def test_detach_removes_subtree_tokens_above_the_mover(self, ladder):
        state, index = ladder
        self.move(state, index["d"], index["a"])
        state.levels[index["c"]][:] = [2, 4]
        state.counts = recount(state)

        detach_document(state, index["d"])

        assert state.counts.total() == state.total_tokens - 2
        assert state.counts.node_word[index["a"]] == {int(state.tokens[index["a"]][0]): 2}


class TestSampleLevel:
    def test_root_level_is_always_one(self, web_state):
        rng = np.random.default_rng(0)
        root = web_state.hierarchy.root
        before = web_state.counts.copy()
        sample_level(web_state, root, 0, rng)
        assert web_state.levels[root].tolist() == [1] * len(web_state.levels[root])
        assert web_state.counts == before

    def test_word_seen_only_at_own_node(self):
        graph, _ = build_graph({"r": ["a"], "d": ["z", "z", "z", "z"]}, [("r", "d")], "r")
        state = init_state(graph, Hyperparameters(gamma=0.5, eta=0.1), seed=0)
        doc = graph.external_index["d"]
        word = int(state.tokens[doc][0])
        state.levels[doc][:] = 2
        state.counts = recount(state)
        state.counts.add(doc, word, -1)
        state.counts.doc_level[doc][1] -= 1

        probabilities = level_distribution(state, doc, 0)

        # (n + eta) times walk and counter factors: 0.1 * 0.5 * 0.2 vs 3.1 * 0.5 * 0.5
        assert probabilities[1] == pytest.approx(0.775 / 0.785)
        assert probabilities[1] > 0.95

    def test_huge_eta_leaves_the_level_prior(self, web_state):
        web_state.hp = Hyperparameters(gamma=0.5, eta=1e12)
        doc = 5
        path = web_state.hierarchy.path(doc)
        word = int(web_state.tokens[doc][0])
        level = int(web_state.levels[doc][0])
        web_state.counts.add(path[level - 1], word, -1)
        web_state.counts.doc_level[doc][level - 1] -= 1

        walk = walk_log_factors(web_state.hierarchy, path, 0.5)
        expected = normalize_log_weights(level_log_prior(walk, web_state.counts.doc_level[doc]))
        np.testing.assert_allclose(level_distribution(web_state, doc, 0), expected, atol=1e-6)

    def test_sweeps_keep_counts_consistent(self, web_state):
        rng = np.random.default_rng(3)
        for _ in range(5):
            for doc in range(6):
                sample_document_levels(web_state, doc, rng)
        check_state(web_state)

    def test_document_sweep_matches_token_by_token_sampling(self, web_state):
        for _ in range(3):
            other = web_state.copy()
            first, second = np.random.default_rng(17), np.random.default_rng(17)
            for doc in range(6):
                sample_document_levels(web_state, doc, first)
                for position in range(other.tokens[doc].size):
                    sample_level(other, doc, position, second)
            assert all(np.array_equal(a, b) for a, b in zip(web_state.levels, other.levels))
            assert web_state.counts == other.counts

    def test_level_distribution_is_normalized(self, web_state):
        doc = 5
        rng = np.random.default_rng(1)
        sample_level(web_state, doc, 0, rng)
        path = web_state.hierarchy.path(doc)
        level = int(web_state.levels[doc][1])
        web_state.counts.add(path[level - 1], int(web_state.tokens[doc][1]), -1)
        web_state.counts.doc_level[doc][level - 1] -= 1
        assert level_distribution(web_state, doc, 1).sum() == pytest.approx(1.0, abs=1e-9)


class TestLogLikelihood:
    def test_single_root_document_is_the_dirichlet_multinomial_marginal(self):
        graph, _ = build_graph({"r": ["a", "a", "b"]}, [], "r")
        state = init_state(graph, Hyperparameters(eta=0.1), seed=0)
        expected = (
            gammaln(0.2) - gammaln(3.2)
            + gammaln(2.1) - gammaln(0.1)
            + gammaln(1.1) - gammaln(0.1)
        )
        assert log_likelihood(state) == pytest.approx(expected, abs=1e-10)

    def test_empty_corpus_is_path_prior_only(self):
        graph, _ = build_graph(
            {"r": [], "a": [], "b": [], "c": []},
            [("r", "a"), ("r", "b"), ("r", "c")],
            "r",
        )
        state = init_state(graph, Hyperparameters(gamma=0.5), seed=0)
        assert log_likelihood(state) == pytest.approx(3 * math.log(0.5 / 3))

    def test_is_a_log_probability(self, web_state):
        rng = np.random.default_rng(9)
        for _ in range(3):
            for doc in range(1, 6):
                sample_path(web_state, doc, rng)
            value = log_likelihood(web_state)
            assert math.isfinite(value)
            assert value <= 0.0

    def test_rejects_foreign_hyperparameters(self, web_state):
        with pytest.raises(ValueError, match="hyperparameters"):
            log_likelihood(web_state, Hyperparameters(gamma=0.9))

    def test_level_term_matches_a_per_level_loop(self, web_state):
        rng = np.random.default_rng(2)
        for doc in range(6):
            sample_document_levels(web_state, doc, rng)
        for doc in range(6):
            path = web_state.hierarchy.path(doc)
            level_counts = web_state.counts.doc_level[doc]
            if len(path) == 1:
                assert level_log_likelihood(web_state, doc) == 0.0
                continue
            walk = walk_log_factors(web_state.hierarchy, path, web_state.hp.gamma)
            expected = 0.0
            for index, count in enumerate(level_counts.tolist()):
                if count == 0:
                    continue
                others = level_counts.copy()
                others[index] -= 1
                weights = level_log_prior(walk, others)
                expected += count * (weights[index] - np.log(np.sum(np.exp(weights))))
            assert level_log_likelihood(web_state, doc) == pytest.approx(expected, abs=1e-10)


def test_counts_under_another_hierarchy_conserve_tokens(web_state):
    flat = Hierarchy([NO_PARENT, 0, 0, 0, 2, 0], 0)
    counts = counts_under(web_state, flat)
    assert counts.total() == web_state.total_tokens
    assert web_state.hierarchy != flat
    check_state(web_state)
