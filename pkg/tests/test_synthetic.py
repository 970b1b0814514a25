import pytest

from doctree.services.hierarchy import bfs_hierarchy
from doctree.services.synthetic import node_name, planted_corpus


class TestPlantedCorpus:
    def test_tree_edges_are_graph_edges(self):
        corpus = planted_corpus(20, branching=2, tokens_per_doc=10, seed=1)
        assert corpus.graph.num_nodes == 20
        corpus.tree.validate(corpus.graph)
        assert corpus.recovered_fraction(corpus.tree) == 1.0

    def test_dense_ids_match_planted_ids(self):
        corpus = planted_corpus(12, tokens_per_doc=5)
        assert [record.external_id for record in corpus.graph.nodes] == [node_name(i) for i in range(12)]

    def test_tokens_come_from_path_topics(self):
        corpus = planted_corpus(13, branching=3, words_per_topic=4, tokens_per_doc=30, seed=5)
        for node in range(corpus.graph.num_nodes):
            owners = {int(corpus.vocabulary.word(word)[1:5]) for word in corpus.graph.nodes[node].tokens}
            assert owners <= set(corpus.tree.path(node))

    def test_without_shortcuts_bfs_recovers_everything(self):
        corpus = planted_corpus(15, tokens_per_doc=3, shortcut_probability=0.0)
        assert corpus.recovered_fraction(bfs_hierarchy(corpus.graph)) == 1.0
        assert len(corpus.graph.edges) == 14

    def test_same_seed_same_corpus(self):
        assert planted_corpus(10, seed=9).graph == planted_corpus(10, seed=9).graph

    @pytest.mark.parametrize(
        "kwargs",
        [{"num_nodes": 0}, {"alpha": 0.0}, {"shortcut_probability": 1.5}, {"branching": 0}],
    )
    def test_invalid_arguments(self, kwargs):
        with pytest.raises(ValueError):
            planted_corpus(**kwargs)
