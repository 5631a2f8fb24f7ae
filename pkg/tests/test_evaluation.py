import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from keystroke_id.errors import ClassTooSmall, ConfigError, EmptyMatrix, LabelOutOfRange
from keystroke_id.evaluation import (
    DECILE_EDGES,
    PartitionResult,
    SplitSpec,
    accuracy,
    build_report,
    confusion_matrix,
    partition_users,
    per_class_accuracy,
    range_histogram,
    stratified_split,
    validate_report,
)


class TestStratifiedSplit:
    def test_exact_proportions(self):
        labels = np.array([0] * 5 + [1] * 5)
        train, validation, test = stratified_split(labels, SplitSpec(seed=0))
        assert len(train) == 8 and len(validation) == 0 and len(test) == 2
        assert np.bincount(labels[train]).tolist() == [4, 4]
        assert np.bincount(labels[test]).tolist() == [1, 1]

    def test_identity_partition(self):
        labels = np.array([0, 1, 0, 1])
        train, validation, test = stratified_split(
            labels, SplitSpec(train=1.0, validation=0.0, test=0.0, seed=3)
        )
        assert sorted(train.tolist()) == [0, 1, 2, 3]
        assert len(validation) == len(test) == 0

    def test_same_seed_identical(self):
        labels = np.tile(np.arange(3), 10)
        a = stratified_split(labels, SplitSpec(seed=7))
        b = stratified_split(labels, SplitSpec(seed=7))
        for part_a, part_b in zip(a, b):
            assert np.array_equal(part_a, part_b)

    def test_different_seed_differs(self):
        labels = np.tile(np.arange(3), 20)
        a = stratified_split(labels, SplitSpec(seed=1))
        b = stratified_split(labels, SplitSpec(seed=2))
        assert any(not np.array_equal(x, y) for x, y in zip(a, b))

    def test_class_too_small(self):
        labels = np.array([0, 0, 1])
        with pytest.raises(ClassTooSmall) as exc:
            stratified_split(labels, SplitSpec(seed=0))
        assert exc.value.class_id == 1

    def test_three_way_split(self):
        labels = np.repeat(np.arange(2), 10)
        spec = SplitSpec(train=0.8, validation=0.1, test=0.1, seed=5)
        train, validation, test = stratified_split(labels, spec)
        assert len(train) == 16 and len(validation) == 2 and len(test) == 2

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ConfigError):
            SplitSpec(train=0.5, validation=0.0, test=0.2)

    @given(
        counts=st.lists(st.integers(2, 30), min_size=1, max_size=5),
        seed=st.integers(0, 1000),
    )
    def test_partition_properties(self, counts, seed):
        labels = np.concatenate([np.full(c, i) for i, c in enumerate(counts)])
        train, validation, test = stratified_split(labels, SplitSpec(seed=seed))
        merged = np.concatenate([train, validation, test])
        assert sorted(merged.tolist()) == list(range(len(labels)))
        # per-class train allocation within one sample of the request
        for class_id, count in enumerate(counts):
            achieved = int((labels[train] == class_id).sum())
            assert abs(achieved - 0.8 * count) <= 1


class TestConfusionMatrix:
    def test_perfect_predictions_are_diagonal(self):
        cm = confusion_matrix([0, 1, 2, 1], [0, 1, 2, 1], 3)
        assert np.array_equal(cm, np.diag([1, 2, 1]))

    def test_hand_tally(self):
        cm = confusion_matrix([0, 0, 1], [0, 1, 1], 2)
        assert cm.tolist() == [[1, 1], [0, 1]]

    def test_empty_inputs(self):
        assert confusion_matrix([], [], 2).tolist() == [[0, 0], [0, 0]]

    def test_label_out_of_range(self):
        with pytest.raises(LabelOutOfRange):
            confusion_matrix([0, 2], [0, 1], 2)
        with pytest.raises(LabelOutOfRange):
            confusion_matrix([0, 1], [0, -1], 2)

    def test_row_sums_are_class_counts(self):
        actual = [0, 0, 0, 1, 1, 2]
        cm = confusion_matrix(actual, [2, 0, 0, 1, 0, 2], 3)
        assert cm.sum(axis=1).tolist() == [3, 2, 1]


class TestAccuracy:
    def test_hand_computed_2x2(self):
        cm = np.array([[3, 1], [2, 4]])
        assert accuracy(cm) == pytest.approx(0.7, abs=1e-12)
        per_class = per_class_accuracy(cm)
        assert per_class[0] == pytest.approx(0.75, abs=1e-12)
        assert per_class[1] == pytest.approx(2 / 3, abs=1e-12)

    def test_diagonal_matrix_is_perfect(self):
        assert accuracy(np.diag([4, 9, 2])) == 1.0

    def test_empty_matrix_rejected(self):
        with pytest.raises(EmptyMatrix):
            accuracy(np.zeros((2, 2), dtype=int))

    def test_unsampled_class_is_none(self):
        cm = np.array([[5, 0], [0, 0]])
        per_class = per_class_accuracy(cm)
        assert per_class == [1.0, None]
        assert accuracy(cm) == 1.0

    @given(st.integers(0, 10_000))
    def test_weighted_identity(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 6))
        cm = rng.integers(0, 20, size=(k, k))
        total = cm.sum()
        if total == 0:
            return
        per_class = per_class_accuracy(cm)
        weighted = sum(
            acc * cm[i].sum() for i, acc in enumerate(per_class) if acc is not None
        )
        assert accuracy(cm) == pytest.approx(weighted / total, rel=1e-12)


class TestPartition:
    def test_three_bands(self):
        result = partition_users({"u1": 0.95, "u2": 0.80, "u3": 0.60})
        assert result.easy == {"u1"}
        assert result.moderate == {"u2"}
        assert result.difficult == {"u3"}

    def test_boundary_hi_is_easy(self):
        assert partition_users({"u": 0.90}).easy == {"u"}

    def test_boundary_lo_is_moderate(self):
        assert partition_users({"u": 0.75}).moderate == {"u"}

    def test_disjoint_and_exhaustive(self):
        accs = {f"u{i}": i / 20 for i in range(21)}
        result = partition_users(accs)
        union = result.easy | result.moderate | result.difficult
        assert union == set(accs)
        assert len(result.easy) + len(result.moderate) + len(result.difficult) == len(accs)

    def test_custom_thresholds(self):
        result = partition_users({"a": 0.5, "b": 0.3}, hi=0.5, lo=0.4)
        assert result.easy == {"a"}
        assert result.difficult == {"b"}

    def test_inverted_thresholds_rejected(self):
        with pytest.raises(ConfigError):
            partition_users({"a": 0.5}, hi=0.5, lo=0.6)


class TestRangeHistogram:
    def test_direct_binning(self):
        counts = range_histogram([0.5, 0.8, 0.95], [0.0, 0.75, 0.90, 1.0])
        assert counts.tolist() == [1, 1, 1]

    def test_empty_input(self):
        assert range_histogram([], [0.0, 0.5, 1.0]).tolist() == [0, 0]

    def test_last_bin_closed(self):
        counts = range_histogram([1.0, 1.0, 0.95], DECILE_EDGES)
        assert counts[-1] == 3

    def test_left_edges_inclusive(self):
        counts = range_histogram([0.75], [0.0, 0.75, 1.0])
        assert counts.tolist() == [0, 1]

    def test_non_increasing_edges_rejected(self):
        with pytest.raises(ConfigError):
            range_histogram([0.5], [0.0, 0.5, 0.5])

    @given(st.lists(st.floats(0.0, 1.0), max_size=40))
    def test_total_count_preserved(self, values):
        counts = range_histogram(values, DECILE_EDGES)
        assert counts.sum() == len(values)


class TestReport:
    def _report(self):
        label_map = {"alice": 0, "bob": 1, "carol": 2}
        actual = [0, 0, 1, 1, 2, 2]
        predicted = [0, 0, 1, 0, 0, 1]
        return build_report("random_forest", actual, predicted, label_map, {"note": "test"})

    def test_schema_valid(self):
        validate_report(self._report())

    def test_contents(self):
        report = self._report()
        assert report["accuracy"] == pytest.approx(0.5)
        assert report["per_user_accuracy"]["alice"] == 1.0
        assert report["per_user_accuracy"]["carol"] == 0.0
        assert report["partition"]["difficult"] == ["bob", "carol"]
        assert report["partition"]["easy"] == ["alice"]
        assert sum(report["range_histogram"]["counts"]) == 3
        assert report["confusion_matrix"][1] == [1, 1, 0]

    def test_sorted_pairs_descend(self):
        ranked = self._report()["per_user_accuracy_sorted"]
        values = [acc for _, acc in ranked]
        assert values == sorted(values, reverse=True)

    def test_schema_rejects_damage(self):
        import jsonschema

        report = self._report()
        report["accuracy"] = 1.5
        with pytest.raises(jsonschema.ValidationError):
            validate_report(report)

    def test_partition_result_defaults(self):
        result = PartitionResult(frozenset(), frozenset(), frozenset())
        assert result.hi == 0.90
        assert result.lo == 0.75
