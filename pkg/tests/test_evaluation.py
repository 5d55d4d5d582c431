import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zsar.errors import InvalidArgumentError, InvalidDatasetError
from zsar.evaluation import (EvalReport, ProbeConfig, SplitMetrics,
                             aggregate_splits, evaluate_rankings,
                             few_shot_probe, format_mean_std, predict,
                             rank_classes, topk_accuracy)
from zsar.synth import make_probe_data, take_shots


class TestPredict:
    def test_fused_scores_and_ranking(self):
        # x_vo.Z = (0.2, 0.6), x_ov.Z = (-0.5, 0.1) -> scores (0.2, 0.7)
        z = np.array([[0.2, 0.6], [-0.5, 0.1]])  # rows: the two dot products
        pair = (np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        ranking, scores = predict(pair, z)
        np.testing.assert_allclose(scores, [0.2, 0.7], atol=1e-15)
        assert ranking.tolist() == [1, 0]

    def test_negative_object_scores_fall_back_to_st_ranking(self, rng):
        k, t = 6, 5
        z = rng.standard_normal((k, t))
        z /= np.linalg.norm(z, axis=0, keepdims=True)
        x_vo = rng.standard_normal(k)
        x_ov = -10.0 * (z @ np.ones(t))  # make all object dots negative
        x_ov /= np.linalg.norm(x_ov)
        p_o = x_ov @ z
        assume_all_negative = np.all(p_o < 0)
        if not assume_all_negative:
            x_ov = -z[:, 0] - z[:, 1] - z[:, 2] - z[:, 3] - z[:, 4]
            x_ov /= np.linalg.norm(x_ov)
        ranking, _ = predict((x_vo, x_ov), z)
        st_ranking = rank_classes(x_vo @ z)[0]
        np.testing.assert_array_equal(ranking, st_ranking)

    def test_matches_scalar_loop_oracle(self, rng):
        k, t = 7, 9
        z = rng.standard_normal((k, t))
        z /= np.linalg.norm(z, axis=0, keepdims=True)
        x_vo = rng.standard_normal(k)
        x_ov = rng.standard_normal(k)
        ranking, scores = predict((x_vo, x_ov), z)
        oracle = []
        for j in range(t):
            pv = sum(float(x_vo[i]) * float(z[i, j]) for i in range(k))
            po = sum(float(x_ov[i]) * float(z[i, j]) for i in range(k))
            oracle.append(pv + max(po, 0.0))
        np.testing.assert_allclose(scores, oracle, atol=1e-10)
        oracle_rank = sorted(range(t), key=lambda j: (-oracle[j], j))
        assert ranking.tolist() == oracle_rank

    def test_empty_class_set(self):
        with pytest.raises(InvalidArgumentError):
            predict((np.ones(3), np.ones(3)), np.zeros((3, 0)))

    def test_tie_broken_by_class_id(self):
        scores = np.array([0.5, 0.9, 0.9, 0.1])
        assert rank_classes(scores)[0].tolist() == [1, 2, 0, 3]

    def test_shift_invariance_of_ranking(self, rng):
        scores = rng.standard_normal(8)
        base = rank_classes(scores)[0]
        shifted = rank_classes(scores + 123.456)[0]
        np.testing.assert_array_equal(base, shifted)


class TestTopkAccuracy:
    def test_all_correct(self):
        rankings = np.tile(np.arange(5), (4, 1))
        labels = np.zeros(4, dtype=int)
        assert topk_accuracy(rankings, labels, 1) == 100.0
        assert topk_accuracy(rankings, labels, 5) == 100.0

    def test_k_equals_class_count_is_total(self, rng):
        t = 6
        rankings = np.stack([rng.permutation(t) for _ in range(10)])
        labels = rng.integers(0, t, size=10)
        assert topk_accuracy(rankings, labels, t) == 100.0

    def test_matches_counting_oracle(self, rng):
        t, n, k = 8, 20, 3
        rankings = np.stack([rng.permutation(t) for _ in range(n)])
        labels = rng.integers(0, t, size=n)
        hits = sum(1 for i in range(n) if labels[i] in rankings[i, :k].tolist())
        assert topk_accuracy(rankings, labels, k) == pytest.approx(100.0 * hits / n)

    def test_invalid_k(self):
        rankings = np.tile(np.arange(4), (2, 1))
        with pytest.raises(InvalidArgumentError):
            topk_accuracy(rankings, np.zeros(2, dtype=int), 5)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=2 ** 31 - 1))
    def test_monotone_in_k(self, seed):
        rng = np.random.default_rng(seed)
        t, n = 6, 12
        rankings = np.stack([rng.permutation(t) for _ in range(n)])
        labels = rng.integers(0, t, size=n)
        accs = [topk_accuracy(rankings, labels, k) for k in range(1, t + 1)]
        assert all(a <= b for a, b in zip(accs, accs[1:]))


class TestAggregateSplits:
    def test_three_split_example(self):
        mean, std = aggregate_splits([40.0, 42.0, 44.0])
        assert mean == pytest.approx(42.0)
        assert std == pytest.approx(2.0)
        assert format_mean_std(mean, std) == "42.0 ± 2.0"

    def test_single_split_zero_std(self):
        mean, std = aggregate_splits([37.1])
        assert (mean, std) == (37.1, 0.0)

    def test_matches_high_precision_oracle(self, rng):
        for _ in range(20):
            vals = rng.uniform(0, 100, size=3).tolist()
            mean, std = aggregate_splits(vals)
            m = sum(vals) / 3
            var = sum((v - m) ** 2 for v in vals) / 2
            assert mean == pytest.approx(m, abs=1e-12)
            assert std == pytest.approx(var ** 0.5, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            aggregate_splits([])


class TestReports:
    def test_per_class_weighted_mean_equals_top1(self, rng):
        t, n = 5, 40
        rankings = np.stack([rng.permutation(t) for _ in range(n)])
        labels = rng.integers(0, t, size=n)
        m = evaluate_rankings(rankings, labels)
        weighted = sum(m.per_class[c] * m.class_sizes[c]
                       for c in m.per_class) / sum(m.class_sizes.values())
        assert abs(weighted - m.top1) < 1e-9

    def test_confusions_are_top1_errors(self):
        rankings = np.array([[1, 0, 2], [1, 0, 2], [2, 1, 0]])
        labels = np.array([0, 0, 2])
        m = evaluate_rankings(rankings, labels, ["a", "b", "c"])
        assert m.confused_pairs == [("a", "b", 2)]

    def test_report_bounds_enforced(self):
        with pytest.raises(Exception):
            EvalReport([SplitMetrics(top1=50.0, top5=40.0, n_videos=10)])

    def test_report_aggregation(self):
        report = EvalReport([
            SplitMetrics(top1=40.0, top5=70.0, n_videos=10),
            SplitMetrics(top1=42.0, top5=72.0, n_videos=10),
            SplitMetrics(top1=44.0, top5=74.0, n_videos=10)])
        assert report.mean_top1 == pytest.approx(42.0)
        assert report.std_top1 == pytest.approx(2.0)
        assert "42.0 ± 2.0" in report.summary()
        d = report.to_dict()
        assert d["top1"]["mean"] == pytest.approx(42.0)


class TestFewShotProbe:
    def test_separable_one_shot_fits_training_data(self):
        tx, ty, _, _ = make_probe_data(n_classes=4, train_per_class=1, d=16,
                                       noise=0.01, seed=0)
        m = few_shot_probe(tx, ty, tx, ty, 4, ProbeConfig(epochs=80))
        assert m.top1 == 100.0

    def test_output_dimension_matches_class_count(self):
        tx, ty, vx, vy = make_probe_data(n_classes=6, seed=1)
        m = few_shot_probe(tx, ty, vx, vy, 6)
        assert len(m.per_class) == 6

    def test_accuracy_non_decreasing_in_shots(self):
        tops = {1: [], 2: [], 5: []}
        for seed in range(3):
            tx, ty, vx, vy = make_probe_data(n_classes=5, train_per_class=8,
                                             seed=seed)
            for shots in (1, 2, 5):
                sx, sy = take_shots(tx, ty, shots, 5, seed=seed)
                m = few_shot_probe(sx, sy, vx, vy, 5,
                                   ProbeConfig(epochs=60, seed=seed))
                tops[shots].append(m.top1)
        means = [np.mean(tops[k]) for k in (1, 2, 5)]
        assert means[0] < means[1] < means[2]

    def test_missing_class_rejected(self):
        tx = np.zeros((4, 3))
        ty = np.array([0, 0, 1, 1])
        with pytest.raises(InvalidDatasetError):
            few_shot_probe(tx, ty, tx, ty, n_classes=3)
