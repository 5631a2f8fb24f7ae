import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from keystroke_id import evaluation, forest
from keystroke_id.errors import (
    ConfigError,
    EmptyNode,
    FeatureLengthMismatch,
    ModelVersionMismatch,
)
from keystroke_id.forest import (
    ForestConfig,
    Internal,
    Leaf,
    best_split,
    fit_decision_tree,
    fit_forest,
    gini,
    grow_tree,
    load_model,
    predict,
    save_model,
)


class TestGini:
    def test_symmetric_two_class(self):
        assert gini(np.array([5, 5])) == 0.5

    def test_pure_node(self):
        assert gini(np.array([7, 0])) == 0.0

    def test_hand_computed(self):
        assert gini(np.array([1, 2])) == pytest.approx(4 / 9, abs=1e-12)

    def test_empty_node_rejected(self):
        with pytest.raises(EmptyNode):
            gini(np.array([0, 0]))

    @given(st.lists(st.integers(0, 50), min_size=2, max_size=6).filter(lambda c: sum(c) > 0))
    def test_bounds(self, counts):
        value = gini(np.array(counts))
        k = len(counts)
        assert 0.0 <= value <= 1.0 - 1.0 / k + 1e-12
        pure = sum(1 for c in counts if c > 0) == 1
        assert (value == 0.0) == pure


class TestBestSplit:
    def test_derived_example(self):
        X = np.array([[1.0], [2.0], [3.0], [4.0]])
        y = np.array([0, 0, 1, 1])
        feature, threshold, decrease = best_split(X, y, np.array([0]), 1, 2)
        assert feature == 0
        assert threshold == 2.5
        assert decrease == pytest.approx(0.5, abs=1e-12)

    def test_pure_labels_give_nothing(self):
        X = np.array([[1.0], [2.0], [3.0]])
        assert best_split(X, np.array([1, 1, 1]), np.array([0]), 1, 2) is None

    def test_constant_features_give_nothing(self):
        X = np.ones((4, 2))
        y = np.array([0, 1, 0, 1])
        assert best_split(X, y, np.array([0, 1]), 1, 2) is None

    def test_min_samples_leaf_respected(self):
        X = np.array([[1.0], [2.0], [3.0], [4.0]])
        y = np.array([0, 1, 0, 1])
        # the only impurity-reducing boundaries strand a single sample
        assert best_split(X, y, np.array([0]), min_samples_leaf=2, num_classes=2) is None
        assert best_split(X, y, np.array([0]), min_samples_leaf=1, num_classes=2) is not None

    def test_tie_breaks_to_lowest_feature_index(self):
        # feature 1 and feature 0 produce identical perfect splits
        X = np.array([[5.0, 1.0], [6.0, 2.0], [7.0, 3.0], [8.0, 4.0]])
        y = np.array([0, 0, 1, 1])
        feature, threshold, _ = best_split(X, y, np.array([1, 0]), 1, 2)
        assert feature == 0
        assert threshold == 6.5

    def test_tie_breaks_to_lowest_threshold(self):
        # the same feature separates at two thresholds equally well:
        # labels 0,1,1,0 -> splits at 1.5 and 3.5 both give decrease > 0
        X = np.array([[1.0], [2.0], [3.0], [4.0]])
        y = np.array([0, 1, 1, 0])
        feature, threshold, _ = best_split(X, y, np.array([0]), 1, 2)
        assert feature == 0
        assert threshold == 1.5


def _tiny_config(**overrides):
    fields = dict(n_estimators=1, min_samples_split=2, min_samples_leaf=1, seed=0)
    fields.update(overrides)
    return ForestConfig(**fields)


class TestGrowTree:
    def test_single_sample_is_leaf(self):
        node = grow_tree(
            np.array([[1.0, 2.0]]),
            np.array([1]),
            _tiny_config(),
            np.random.default_rng(0),
            num_classes=3,
        )
        assert isinstance(node, Leaf)
        assert node.class_counts.tolist() == [0, 1, 0]

    def test_two_separable_samples_split_once(self):
        node = grow_tree(
            np.array([[0.0], [10.0]]),
            np.array([0, 1]),
            _tiny_config(max_features="all"),
            np.random.default_rng(0),
            num_classes=2,
        )
        assert isinstance(node, Internal)
        assert isinstance(node.left, Leaf) and isinstance(node.right, Leaf)
        assert node.left.prediction == 0
        assert node.right.prediction == 1

    def test_min_samples_split_stops_growth(self):
        node = grow_tree(
            np.array([[0.0], [1.0], [2.0], [3.0]]),
            np.array([0, 0, 1, 1]),
            _tiny_config(min_samples_split=5),
            np.random.default_rng(0),
            num_classes=2,
        )
        assert isinstance(node, Leaf)

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=20, deadline=None)
    def test_memorizes_training_set_when_unconstrained(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(12, 5))
        y = rng.integers(0, 3, size=12)
        node = grow_tree(X, y, _tiny_config(max_features="all"), np.random.default_rng(0), 3)
        model = forest.ForestModel("decision_tree", _tiny_config(), 3, 5, [node])
        assert np.array_equal(predict(model, X), y)


class TestForest:
    def test_single_class_always_predicted(self):
        X = np.random.default_rng(0).normal(size=(6, 4))
        y = np.zeros(6, dtype=int)
        model = fit_forest(X, y, _tiny_config(n_estimators=5), num_classes=1)
        assert predict(model, X).tolist() == [0] * 6

    def test_seeded_determinism(self, tmp_path, sep5_dataset):
        d = sep5_dataset
        cfg = ForestConfig(n_estimators=8, seed=21)
        model_a = fit_forest(d.X, d.y, cfg, num_classes=d.num_classes)
        model_b = fit_forest(d.X, d.y, cfg, num_classes=d.num_classes)
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        save_model(model_a, pa)
        save_model(model_b, pb)
        assert pa.read_bytes() == pb.read_bytes()
        assert np.array_equal(predict(model_a, d.X), predict(model_b, d.X))

    def test_parallel_training_is_bit_identical(self, tmp_path, sep5_dataset):
        d = sep5_dataset
        cfg = ForestConfig(n_estimators=8, seed=3)
        serial = fit_forest(d.X, d.y, cfg, num_classes=d.num_classes, n_jobs=1)
        threaded = fit_forest(d.X, d.y, cfg, num_classes=d.num_classes, n_jobs=4)
        ps, pt = tmp_path / "s.json", tmp_path / "t.json"
        save_model(serial, ps)
        save_model(threaded, pt)
        assert ps.read_bytes() == pt.read_bytes()

    def test_feature_length_checked(self, sep5_dataset):
        d = sep5_dataset
        model = fit_forest(d.X, d.y, _tiny_config(), num_classes=d.num_classes)
        with pytest.raises(FeatureLengthMismatch):
            predict(model, np.zeros((1, 10)))

    def test_high_separation_corpus_identified(self, sep5_dataset):
        d = sep5_dataset
        train_idx, _, test_idx = evaluation.stratified_split(
            d.y, evaluation.SplitSpec(seed=2)
        )
        model = fit_forest(
            d.X[train_idx], d.y[train_idx], ForestConfig(n_estimators=50, seed=1),
            num_classes=d.num_classes,
        )
        accuracy = float((predict(model, d.X[test_idx]) == d.y[test_idx]).mean())
        assert accuracy >= 0.95

    def test_routing_is_total(self, sep5_dataset):
        # any 8820-vector lands in exactly one leaf of every tree
        d = sep5_dataset
        model = fit_forest(d.X, d.y, ForestConfig(n_estimators=5, seed=4),
                           num_classes=d.num_classes)
        rng = np.random.default_rng(0)
        probes = rng.normal(0, 1e4, size=(64, d.X.shape[1]))
        predictions = predict(model, probes)
        assert ((predictions >= 0) & (predictions < d.num_classes)).all()

    def test_forest_not_materially_worse_than_single_tree(self, sep5_dataset):
        d = sep5_dataset
        train_idx, _, test_idx = evaluation.stratified_split(
            d.y, evaluation.SplitSpec(seed=5)
        )
        tree_model = fit_decision_tree(
            d.X[train_idx], d.y[train_idx], ForestConfig(seed=0), num_classes=d.num_classes
        )
        forest_model = fit_forest(
            d.X[train_idx], d.y[train_idx], ForestConfig(n_estimators=50, seed=0),
            num_classes=d.num_classes,
        )
        tree_acc = float((predict(tree_model, d.X[test_idx]) == d.y[test_idx]).mean())
        forest_acc = float((predict(forest_model, d.X[test_idx]) == d.y[test_idx]).mean())
        assert forest_acc >= tree_acc - 0.02


class TestVoting:
    def _leaf(self, counts):
        return Leaf(np.array(counts, dtype=np.int64))

    def test_majority_vote(self):
        # three stumps voting 2, 2, 7 on any input
        trees = [self._leaf([0, 0, 1, 0, 0, 0, 0, 0]) for _ in range(2)]
        trees.append(self._leaf([0, 0, 0, 0, 0, 0, 0, 1]))
        model = forest.ForestModel("random_forest", _tiny_config(n_estimators=3), 8, 4, trees)
        assert predict(model, np.zeros((1, 4)))[0] == 2

    def test_forest_tie_goes_to_smallest_class(self):
        trees = [self._leaf([0, 1, 0]), self._leaf([0, 0, 1])]
        model = forest.ForestModel("random_forest", _tiny_config(n_estimators=2), 3, 4, trees)
        assert predict(model, np.zeros((1, 4)))[0] == 1

    def test_leaf_tie_goes_to_smallest_class(self):
        assert self._leaf([0, 3, 3]).prediction == 1


class TestSerialization:
    def test_roundtrip_preserves_predictions(self, tmp_path, sep5_dataset):
        d = sep5_dataset
        model = fit_forest(d.X, d.y, ForestConfig(n_estimators=4, seed=9), num_classes=d.num_classes)
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.kind == "random_forest"
        assert loaded.config == model.config
        assert np.array_equal(predict(loaded, d.X), predict(model, d.X))

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "model.json"
        X = np.array([[0.0], [1.0]])
        model = fit_decision_tree(X, np.array([0, 1]), _tiny_config())
        save_model(model, path)
        tampered = path.read_text().replace("kdi-forest/1", "kdi-forest/0")
        path.write_text(tampered)
        with pytest.raises(ModelVersionMismatch):
            load_model(path)


@pytest.mark.parametrize(
    "bad",
    [dict(n_estimators=0), dict(min_samples_split=1), dict(min_samples_leaf=0), dict(max_features="log2")],
)
def test_invalid_forest_config_rejected(bad):
    with pytest.raises(ConfigError):
        ForestConfig(**bad)
