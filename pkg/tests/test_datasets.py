import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lifelong.datasets import (TaskCorpus, generate_disjoint, load_corpus,
                               save_corpus, split_corpus, standardize_targets)
from lifelong.tasks import TaskData, fit_single_task


class TestGenerateDisjoint:
    def test_default_shape(self):
        corpus = generate_disjoint(seed=0)
        assert len(corpus) == 30
        assert corpus.d == 40
        assert all(t.n_samples == 50 for t in corpus.tasks)
        assert corpus.problem_kind == "regression"
        assert corpus.ground_truth.true_weights.shape == (40, 30)

    def test_deterministic_per_seed(self):
        a = generate_disjoint(seed=5)
        b = generate_disjoint(seed=5)
        np.testing.assert_array_equal(a.tasks[3].features, b.tasks[3].features)
        np.testing.assert_array_equal(a.tasks[3].targets, b.tasks[3].targets)
        c = generate_disjoint(seed=6)
        assert not np.array_equal(a.ground_truth.true_weights,
                                  c.ground_truth.true_weights)

    def test_noiseless_task_is_recoverable(self):
        corpus = generate_disjoint(seed=1, clusters=1, tasks_per_cluster=1,
                                   d=20, n_per_task=60, noise_std=0.0)
        task = corpus.tasks[0]
        w = fit_single_task(task, ridge=0.0).w
        assert np.abs(w - corpus.ground_truth.true_weights[:, 0]).max() <= 1e-6

    def test_cluster_supports_are_disjoint(self):
        corpus = generate_disjoint(seed=2)
        weights = corpus.ground_truth.true_weights
        labels = corpus.ground_truth.cluster_labels
        half = 20
        for c in range(3):
            cols = weights[half:, labels == c]
            support = np.abs(cols).sum(axis=1) > 0
            for other in range(3):
                if other == c:
                    continue
                cols_o = weights[half:, labels == other]
                support_o = np.abs(cols_o).sum(axis=1) > 0
                assert not np.any(support & support_o)

    def test_same_cluster_pairs_more_similar(self):
        gaps = []
        for seed in range(10):
            corpus = generate_disjoint(seed=seed)
            W = corpus.ground_truth.true_weights
            labels = corpus.ground_truth.cluster_labels
            unit = W / np.linalg.norm(W, axis=0)
            cos = np.abs(unit.T @ unit)
            same = labels[:, None] == labels[None, :]
            off = ~np.eye(len(labels), dtype=bool)
            gaps.append(cos[same & off].mean() - cos[~same].mean())
        assert np.mean(gaps) > 0.2

    def test_invalid_sizes_rejected(self):
        with pytest.raises(ValueError):
            generate_disjoint(seed=0, clusters=4, d=6)
        with pytest.raises(ValueError):
            generate_disjoint(seed=0, tasks_per_cluster=0)


class TestSplit:
    def test_half_split_sizes(self):
        corpus = generate_disjoint(seed=0)
        train, test = split_corpus(corpus, 0.5, seed=0)
        assert all(t.n_samples == 25 for t in train.tasks)
        assert all(t.n_samples == 25 for t in test.tasks)

    def test_deterministic(self):
        corpus = generate_disjoint(seed=0)
        a_train, _ = split_corpus(corpus, 0.5, seed=3)
        b_train, _ = split_corpus(corpus, 0.5, seed=3)
        np.testing.assert_array_equal(a_train.tasks[0].features, b_train.tasks[0].features)

    def test_partition_property(self):
        corpus = generate_disjoint(seed=0, clusters=1, tasks_per_cluster=2,
                                   d=6, n_per_task=9)
        train, test = split_corpus(corpus, 0.4, seed=1)
        for orig, tr, te in zip(corpus.tasks, train.tasks, test.tasks):
            combined = np.concatenate([tr.targets, te.targets])
            assert sorted(combined.tolist()) == sorted(orig.targets.tolist())
            assert tr.n_samples + te.n_samples == orig.n_samples

    def test_bad_fraction_rejected(self):
        corpus = generate_disjoint(seed=0, clusters=1, tasks_per_cluster=1, d=6)
        for frac in (0.0, 1.0, -0.2, 1.7):
            with pytest.raises(ValueError):
                split_corpus(corpus, frac, seed=0)


class TestStandardize:
    def test_train_stats_applied_to_both(self):
        corpus = generate_disjoint(seed=0, clusters=1, tasks_per_cluster=2, d=8)
        train, test = split_corpus(corpus, 0.5, seed=0)
        tr, te = standardize_targets(train, test)
        for t_raw, t_std in zip(train.tasks, tr.tasks):
            m, s = t_raw.targets.mean(), t_raw.targets.std()
            assert abs(t_std.targets.mean()) < 1e-10
            assert t_std.targets.std() == pytest.approx(1.0)
            np.testing.assert_allclose(t_std.targets, (t_raw.targets - m) / s)
        for t_raw, t_std, t_train in zip(test.tasks, te.tasks, train.tasks):
            m, s = t_train.targets.mean(), t_train.targets.std()
            np.testing.assert_allclose(t_std.targets, (t_raw.targets - m) / s)

    def test_classification_rejected(self):
        X = np.ones((2, 4))
        y = np.array([1.0, -1.0, 1.0, -1.0])
        task = TaskData(features=X, targets=y, loss_kind="logistic", task_id="a")
        corpus = TaskCorpus(tasks=(task,), problem_kind="classification")
        with pytest.raises(ValueError):
            standardize_targets(corpus, corpus)


class TestCorpusIO:
    def test_round_trip_bit_exact(self, tmp_path):
        corpus = generate_disjoint(seed=0, clusters=2, tasks_per_cluster=2,
                                   d=7, n_per_task=11)
        save_corpus(corpus, tmp_path / "disjoint")
        loaded = load_corpus(tmp_path / "disjoint")
        assert len(loaded) == len(corpus)
        for orig, back in zip(corpus.tasks, loaded.tasks):
            assert back.task_id == orig.task_id
            np.testing.assert_array_equal(back.features, orig.features)
            np.testing.assert_array_equal(back.targets, orig.targets)

    def test_missing_file_named(self, tmp_path):
        corpus = generate_disjoint(seed=0, clusters=1, tasks_per_cluster=2, d=6)
        save_corpus(corpus, tmp_path)
        (tmp_path / "c0_t1.csv").unlink()
        with pytest.raises(FileNotFoundError, match="c0_t1.csv"):
            load_corpus(tmp_path)

    def test_malformed_line_reports_location(self, tmp_path):
        corpus = generate_disjoint(seed=0, clusters=1, tasks_per_cluster=1,
                                   d=4, n_per_task=5)
        save_corpus(corpus, tmp_path)
        task_file = tmp_path / "c0_t0.csv"
        lines = task_file.read_text().splitlines()
        lines[2] = "not,numeric,at,all,nope"
        task_file.write_text("\n".join(lines) + "\n")
        with pytest.raises(ValueError, match="line 3"):
            load_corpus(tmp_path)

    def test_mixed_dimensions_rejected(self, tmp_path):
        corpus = generate_disjoint(seed=0, clusters=1, tasks_per_cluster=2,
                                   d=4, n_per_task=5)
        save_corpus(corpus, tmp_path)
        other = generate_disjoint(seed=0, clusters=1, tasks_per_cluster=1,
                                  d=6, n_per_task=5)
        # point one manifest entry at a task file with a different width
        save_corpus(other, tmp_path / "other")
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        manifest["tasks"][1]["file"] = "other/c0_t0.csv"
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(ValueError, match="header"):
            load_corpus(tmp_path)

    def test_classification_labels_validated(self, tmp_path):
        X = np.ones((2, 4))
        y = np.array([1.0, -1.0, 1.0, -1.0])
        task = TaskData(features=X, targets=y, loss_kind="logistic", task_id="a")
        corpus = TaskCorpus(tasks=(task,), problem_kind="classification")
        save_corpus(corpus, tmp_path)
        task_file = tmp_path / "a.csv"
        text = task_file.read_text().replace("-1.0", "0.0")
        task_file.write_text(text)
        with pytest.raises(ValueError, match=r"\+/-1"):
            load_corpus(tmp_path)


class TestFloatSerialisation:
    @given(st.floats(allow_nan=False, allow_infinity=False, width=64))
    @settings(max_examples=300)
    def test_repr_round_trip_is_bit_exact(self, x):
        # the corpus writer and all CSV reports rely on shortest-repr floats
        assert float(repr(float(x))) == x
