import numpy as np
import pandas as pd
import pytest

import doctree.services.chain as chain
from doctree.services.chain import (
    ChainResult,
    ChainSample,
    GibbsConfig,
    gibbs_iteration,
    latest_checkpoint,
    load_checkpoint,
    map_hierarchy,
    parent_frequencies,
    run_gibbs,
    save_checkpoint,
)
from doctree.services.corpus import build_graph
from doctree.services.hdtm import Hyperparameters, check_state, init_state, log_likelihood
from doctree.services.hierarchy import NO_PARENT


def sample_with(parent, iteration=1, likelihood=-10.0):
    return ChainSample(iteration=iteration, log_likelihood=likelihood, average_depth=1.0, parent=tuple(parent))


class TestGibbsConfig:
    def test_default_schedule_collects_150_samples(self):
        config = GibbsConfig(iterations=5000, burn_in=2000, lag=20)
        collected = [t for t in range(1, config.iterations + 1) if config.collects(t)]
        assert len(collected) == 150 == config.expected_samples
        assert collected[0] == 2020
        assert collected[-1] == 5000

    def test_single_iteration_without_burn_in(self):
        config = GibbsConfig(iterations=1, burn_in=0, lag=1)
        assert config.collects(1)
        assert config.expected_samples == 1

    def test_checkpoints_fall_on_barrier_multiples(self):
        config = GibbsConfig(iterations=30, burn_in=0, checkpoint_every=50)
        # four barriers per iteration: 52 and 100 are the first counts past 50 and 100
        assert [t for t in range(1, 31) if config.checkpoint_due(t)] == [13, 25]
        every_iteration = GibbsConfig(iterations=3, burn_in=0, checkpoint_every=1)
        assert all(every_iteration.checkpoint_due(t) for t in range(1, 4))


    @pytest.mark.parametrize(
        "kwargs",
        [
            {"iterations": 10, "burn_in": 10},
            {"iterations": 10, "burn_in": 20},
            {"iterations": 10, "burn_in": 2, "lag": 0},
            {"iterations": 0, "burn_in": 0},
            {"iterations": 10, "burn_in": 2, "seed": -1},
        ],
    )
    def test_invalid_schedules(self, kwargs):
        with pytest.raises(ValueError):
            GibbsConfig(**kwargs)


class TestRunGibbs:
    def test_one_iteration_gives_one_sample(self, small_web, hp):
        graph, vocabulary = small_web
        result = run_gibbs(graph, hp, GibbsConfig(iterations=1, burn_in=0, lag=1), vocabulary_size=vocabulary.size)

        assert len(result.samples) == 1
        assert list(result.diagnostics.columns) == ["iteration", "log_likelihood", "avg_depth"]
        assert result.diagnostics["iteration"].tolist() == [1]
        sample = result.samples[0]
        assert sample.log_likelihood == pytest.approx(log_likelihood(result.state))
        assert sample.average_depth >= 1.0
        check_state(result.state)

    def test_same_seed_same_samples(self, small_web, hp):
        graph, vocabulary = small_web
        config = GibbsConfig(iterations=12, burn_in=2, lag=2, seed=42)
        first = run_gibbs(graph, hp, config, vocabulary_size=vocabulary.size)
        second = run_gibbs(graph, hp, config, vocabulary_size=vocabulary.size)

        assert [sample.parent for sample in first.samples] == [sample.parent for sample in second.samples]
        assert [sample.iteration for sample in first.samples] == [4, 6, 8, 10, 12]
        pd.testing.assert_frame_equal(first.diagnostics, second.diagnostics)

    def test_callback_sees_every_sample(self, small_web, hp, mocker):
        graph, vocabulary = small_web
        on_sample = mocker.Mock()
        result = run_gibbs(
            graph,
            hp,
            GibbsConfig(iterations=6, burn_in=0, lag=3),
            vocabulary_size=vocabulary.size,
            on_sample=on_sample,
        )
        assert on_sample.call_count == 2
        assert on_sample.call_args_list[0].args[0] is result.samples[0]

    def test_gibbs_iteration_keeps_invariants(self, web_state):
        total = web_state.total_tokens
        gibbs_iteration(web_state)
        check_state(web_state)
        assert web_state.counts.total() == total

    def test_best_sample_prefers_likelihood_then_earliest(self, web_state):
        result = ChainResult(
            samples=[
                sample_with([NO_PARENT, 0], iteration=1, likelihood=-5.0),
                sample_with([NO_PARENT, 0], iteration=2, likelihood=-3.0),
                sample_with([NO_PARENT, 0], iteration=3, likelihood=-3.0),
            ],
            diagnostics=pd.DataFrame(),
            state=web_state,
        )
        assert result.best_sample.iteration == 2


class TestMapHierarchy:
    def test_mode_parent_wins(self, diamond):
        graph, _ = diamond
        samples = [sample_with([NO_PARENT, 0, 0, 1])] * 5 + [sample_with([NO_PARENT, 0, 0, 2])] * 15
        assert map_hierarchy(samples, graph).parent[3] == 2
        assert parent_frequencies(samples)[3] == {1: 5, 2: 15}

    def test_ties_go_to_lowest_id(self, diamond):
        graph, _ = diamond
        samples = [sample_with([NO_PARENT, 0, 0, 2]), sample_with([NO_PARENT, 0, 0, 1])]
        assert map_hierarchy(samples, graph).parent[3] == 1

    def test_single_sample_is_returned_verbatim(self, small_web, hp):
        graph, vocabulary = small_web
        result = run_gibbs(graph, hp, GibbsConfig(iterations=3, burn_in=2, lag=1), vocabulary_size=vocabulary.size)
        assert map_hierarchy(result.samples, graph).parent == list(result.samples[0].parent)

    def test_independent_modes_forming_a_cycle_are_repaired(self):
        graph, _ = build_graph(
            {"r": ["a"], "x": ["b"], "y": ["c"]},
            [("r", "x"), ("r", "y"), ("x", "y"), ("y", "x")],
            "r",
        )
        samples = [sample_with([NO_PARENT, 2, 1])] * 2 + [sample_with([NO_PARENT, 0, 0])]
        tree = map_hierarchy(samples, graph)

        assert tree.parent == [NO_PARENT, 0, 1]
        tree.validate(graph)

    def test_only_cycle_members_are_reassigned(self):
        graph, _ = build_graph(
            {"a": ["r"], "b": ["x"], "c": ["y"], "d": ["z"]},
            [("a", "b"), ("a", "c"), ("a", "d"), ("c", "d"), ("d", "c"), ("d", "b")],
            "a",
        )
        a, b, c, d = (graph.external_index[name] for name in "abcd")
        cyclic = [NO_PARENT] * 4
        cyclic[b], cyclic[c], cyclic[d] = d, d, c
        flat = [NO_PARENT, a, a, a]
        samples = [sample_with(cyclic)] * 5 + [sample_with(flat)] * 2

        tree = map_hierarchy(samples, graph)

        assert tree.parent[b] == d
        assert tree.parent[c] == a
        assert tree.parent[d] == c
        tree.validate(graph)


    def test_requires_samples(self, diamond):
        graph, _ = diamond
        with pytest.raises(ValueError):
            map_hierarchy([], graph)


class TestCheckpoints:
    def test_resumed_chain_matches_uninterrupted_chain(self, tmp_path, small_web, hp):
        graph, vocabulary = small_web
        full = run_gibbs(graph, hp, GibbsConfig(iterations=6, burn_in=0, lag=1, seed=5), vocabulary_size=vocabulary.size)

        run_gibbs(
            graph,
            hp,
            GibbsConfig(iterations=3, burn_in=0, lag=1, seed=5, checkpoint_every=1),
            vocabulary_size=vocabulary.size,
            checkpoint_dir=tmp_path,
        )
        checkpoint = latest_checkpoint(tmp_path)
        assert checkpoint.name == "checkpoint-00000003.json"
        assert sorted(path.name for path in tmp_path.glob("checkpoint-*.json")) == [checkpoint.name]

        resumed = run_gibbs(
            graph,
            hp,
            GibbsConfig(iterations=6, burn_in=0, lag=1, seed=5),
            vocabulary_size=vocabulary.size,
            resume_from=checkpoint,
        )
        assert [sample.parent for sample in resumed.samples] == [sample.parent for sample in full.samples]
        assert all(np.array_equal(a, b) for a, b in zip(resumed.state.levels, full.state.levels))
        np.testing.assert_allclose(
            resumed.diagnostics["log_likelihood"].to_numpy(),
            full.diagnostics["log_likelihood"].to_numpy(),
            rtol=1e-12,
        )

    def test_checkpoint_rejects_other_hyperparameters(self, tmp_path, web_state, small_web):
        graph, vocabulary = small_web
        path = save_checkpoint(tmp_path / "checkpoint-00000001.json", web_state, 1, [], [])
        with pytest.raises(ValueError, match="hyperparameters"):
            load_checkpoint(path, graph, Hyperparameters(gamma=0.2), vocabulary.size)

    def test_checkpoint_restores_state(self, tmp_path, web_state, small_web, hp):
        graph, vocabulary = small_web
        path = save_checkpoint(tmp_path / "checkpoint-00000004.json", web_state, 4, [], [(1, -3.0, 1.0)])
        state, iteration, samples, rows = load_checkpoint(path, graph, hp, vocabulary.size)

        assert iteration == 4
        assert samples == []
        assert rows == [(1, -3.0, 1.0)]
        assert state.hierarchy == web_state.hierarchy
        assert state.counts == web_state.counts
        assert state.rng.random() == web_state.rng.random()

    def test_run_checkpoints_every_eight_barriers(self, tmp_path, small_web, hp, mocker):
        graph, vocabulary = small_web
        save = mocker.spy(chain, "save_checkpoint")
        run_gibbs(
            graph,
            hp,
            GibbsConfig(iterations=5, burn_in=0, lag=1, seed=2, checkpoint_every=8),
            vocabulary_size=vocabulary.size,
            checkpoint_dir=tmp_path,
        )
        assert [call.args[2] for call in save.call_args_list] == [2, 4]
        assert latest_checkpoint(tmp_path).name == "checkpoint-00000004.json"

    def test_diagnostics_rows_reach_disk_as_the_chain_runs(self, tmp_path, small_web, hp):
        graph, vocabulary = small_web
        path = tmp_path / "diagnostics.csv"
        seen = []
        result = run_gibbs(
            graph,
            hp,
            GibbsConfig(iterations=4, burn_in=0, lag=2, seed=1),
            vocabulary_size=vocabulary.size,
            diagnostics_path=path,
            on_sample=lambda sample: seen.append(pd.read_csv(path)["iteration"].tolist()),
        )
        assert seen == [[1, 2], [1, 2, 3, 4]]
        written = pd.read_csv(path)
        assert list(written.columns) == ["iteration", "log_likelihood", "avg_depth"]
        np.testing.assert_allclose(written["log_likelihood"], result.diagnostics["log_likelihood"], rtol=1e-9)

    def test_resumed_diagnostics_restart_from_the_checkpoint(self, tmp_path, small_web, hp):
        graph, vocabulary = small_web
        path = tmp_path / "diagnostics.csv"
        checkpoints = tmp_path / "checkpoints"
        run_gibbs(
            graph,
            hp,
            GibbsConfig(iterations=3, burn_in=0, lag=1, seed=3, checkpoint_every=8),
            vocabulary_size=vocabulary.size,
            checkpoint_dir=checkpoints,
            diagnostics_path=path,
        )
        assert pd.read_csv(path)["iteration"].tolist() == [1, 2, 3]

        run_gibbs(
            graph,
            hp,
            GibbsConfig(iterations=5, burn_in=0, lag=1, seed=3),
            vocabulary_size=vocabulary.size,
            resume_from=latest_checkpoint(checkpoints),
            diagnostics_path=path,
        )
        assert pd.read_csv(path)["iteration"].tolist() == [1, 2, 3, 4, 5]


    def test_latest_checkpoint_of_empty_directory(self, tmp_path):
        assert latest_checkpoint(tmp_path) is None


def test_sample_payload_marks_root_parent_as_null():
    payload = sample_with([NO_PARENT, 0, 1]).to_payload()
    assert payload["parent"] == [None, 0, 1]
    assert ChainSample.from_payload(payload).parent == (NO_PARENT, 0, 1)


def test_init_state_reproducible(small_web, hp):
    graph, _ = small_web
    first = init_state(graph, hp, seed=3)
    second = init_state(graph, hp, seed=3)
    assert all(np.array_equal(a, b) for a, b in zip(first.levels, second.levels))
