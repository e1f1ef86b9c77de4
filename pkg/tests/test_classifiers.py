"""Naive Bayes, random forest, persistence, and cross-validation."""

import json

import numpy as np
import pytest

from fusum.corpus import Segment
from fusum.errors import ValidationError
from fusum.features import extract_features
from fusum.classifiers import (
    NaiveBayes,
    RandomForest,
    _stratified_folds,
    classify,
    cross_validate,
    load_model,
    make_classifier,
    save_model,
)
from conftest import flat_utt, meeting_of


def separable(n=80, d=4, gap=6.0, seed=1):
    rng = np.random.default_rng(seed)
    half = n // 2
    X = np.vstack([rng.normal(0, 1, (half, d)),
                   rng.normal(gap, 1, (n - half, d))])
    y = np.concatenate([np.zeros(half, int), np.ones(n - half, int)])
    order = rng.permutation(n)
    return X[order], y[order]


class TestNaiveBayes:
    def test_separable_accuracy(self):
        X, y = separable()
        model = NaiveBayes().fit(X, y)
        assert (model.predict(X) == y).mean() >= 0.95

    def test_probabilities_sum_to_one(self):
        X, y = separable(n=40)
        model = NaiveBayes().fit(X, y)
        proba = model.predict_proba(X)
        assert proba.shape == (40, 2)
        assert np.allclose(proba.sum(axis=1), 1.0)
        assert np.all((proba >= 0) & (proba <= 1))

    def test_midpoint_scores_half(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([0, 0, 1, 1])
        model = NaiveBayes().fit(X, y)
        proba = model.predict_proba(np.array([[0.0]]))
        assert proba[0, 1] == pytest.approx(0.5, abs=1e-9)
        assert model.predict(np.array([[0.0]]))[0] == 1  # >= 0.5 is positive

    def test_constant_feature_survives(self):
        X = np.array([[0.0, 3.0], [1.0, 3.0], [4.0, 3.0], [5.0, 3.0]])
        y = np.array([0, 0, 1, 1])
        model = NaiveBayes().fit(X, y)
        assert np.all(np.isfinite(model.predict_proba(X)))
        assert (model.predict(X) == y).all()

    def test_binary_columns_detected(self):
        X = np.array([[0.0, 2.0], [1.0, 3.0], [0.0, 4.0], [1.0, 5.0]])
        y = np.array([0, 0, 1, 1])
        model = NaiveBayes().fit(X, y)
        assert model.binary_mask_.tolist() == [True, False]

    def test_weights_match_duplication(self):
        X = np.array([[0.0], [1.0], [4.0], [5.0]])
        y = np.array([0, 0, 1, 1])
        weighted = NaiveBayes().fit(X, y, sample_weight=[2, 1, 1, 2])
        dup_X = np.array([[0.0], [0.0], [1.0], [4.0], [5.0], [5.0]])
        dup_y = np.array([0, 0, 0, 1, 1, 1])
        duplicated = NaiveBayes().fit(dup_X, dup_y)
        assert weighted.means_ == pytest.approx(duplicated.means_, rel=1e-12)
        assert weighted.variances_ == pytest.approx(duplicated.variances_, rel=1e-12)
        assert weighted.priors_ == pytest.approx(duplicated.priors_, rel=1e-12)

    def test_zero_weight_erases_instance(self):
        X = np.array([[0.0], [1.0], [4.0], [99.0]])
        y = np.array([0, 0, 1, 1])
        weighted = NaiveBayes().fit(X, y, sample_weight=[1, 1, 1, 0])
        assert weighted.means_[1, 0] == pytest.approx(4.0)

    def test_json_round_trip(self):
        X, y = separable(n=30)
        model = NaiveBayes().fit(X, y)
        clone = NaiveBayes.from_json(json.loads(json.dumps(model.to_json())))
        assert np.array_equal(clone.predict(X), model.predict(X))
        assert np.allclose(clone.predict_proba(X), model.predict_proba(X))


class TestRandomForest:
    def test_separable_accuracy(self):
        X, y = separable()
        model = RandomForest(n_trees=30, seed=0).fit(X, y)
        assert (model.predict(X) == y).mean() >= 0.95

    def test_seed_determinism(self):
        X, y = separable(n=60)
        a = RandomForest(n_trees=20, seed=5).fit(X, y)
        b = RandomForest(n_trees=20, seed=5).fit(X, y)
        assert a.to_json() == b.to_json()
        assert np.array_equal(a.predict(X), b.predict(X))

    def test_n_trees_honored(self):
        X, y = separable(n=30)
        model = RandomForest(n_trees=7, seed=0).fit(X, y)
        assert len(model.trees_) == 7
        with pytest.raises(ValidationError, match="n_trees"):
            RandomForest(n_trees=0).fit(X, y)

    def test_proba_is_vote_fraction(self):
        X, y = separable(n=60)
        model = RandomForest(n_trees=10, seed=2).fit(X, y)
        proba = model.predict_proba(X)
        assert np.allclose(proba.sum(axis=1), 1.0)
        # 10 trees: every fraction is a multiple of 1/10
        assert np.allclose(proba * 10, np.round(proba * 10))

    def test_clear_points_get_unanimous_votes(self):
        X, y = separable(n=80, gap=10.0)
        model = RandomForest(n_trees=25, seed=0).fit(X, y)
        proba = model.predict_proba(np.array([[10.0] * 4, [0.0] * 4]))
        assert proba[0, 1] == 1.0
        assert proba[1, 1] == 0.0

    def test_json_round_trip(self):
        X, y = separable(n=40)
        model = RandomForest(n_trees=12, seed=3).fit(X, y)
        clone = RandomForest.from_json(json.loads(json.dumps(model.to_json())))
        assert np.array_equal(clone.predict(X), model.predict(X))
        assert np.allclose(clone.predict_proba(X), model.predict_proba(X))


class TestFitValidation:
    @pytest.mark.parametrize("estimator", [NaiveBayes(), RandomForest(n_trees=3)])
    def test_bad_args(self, estimator):
        X, y = separable(n=10)
        with pytest.raises(ValidationError, match="2d"):
            estimator.fit(X[:, 0], y)
        with pytest.raises(ValidationError, match="number of instances"):
            estimator.fit(X, y[:-1])
        with pytest.raises(ValidationError, match="0 or 1"):
            estimator.fit(X, y + 5)
        with pytest.raises(ValidationError, match="both classes"):
            estimator.fit(X, np.zeros(10, int))
        with pytest.raises(ValidationError, match="sample_weight"):
            estimator.fit(X, y, sample_weight=np.full(10, -1.0))
        with pytest.raises(ValidationError, match="sample_weight"):
            estimator.fit(X, y, sample_weight=np.zeros(10))

    def test_feature_count_checked_at_predict(self):
        X, y = separable(n=10, d=3)
        model = NaiveBayes().fit(X, y)
        with pytest.raises(ValidationError, match="features"):
            model.predict(np.zeros((2, 5)))


class TestHelpers:
    def test_classify_accepts_feature_vector(self):
        u = flat_utt("u1", "panel/NN glows/VBZ")
        fv = extract_features(u, meeting_of(u), Segment(0, 0, 1))
        d = len(fv.to_array())
        X, y = separable(n=40, d=d)
        model = NaiveBayes().fit(X, y)
        label, score = classify(model, fv)
        assert label == int(score >= 0.5)
        assert 0.0 <= score <= 1.0
        label2, score2 = classify(model, fv.to_array())
        assert (label2, score2) == (label, score)

    def test_save_load_round_trip(self, tmp_path):
        X, y = separable(n=30)
        for model in (NaiveBayes().fit(X, y),
                      RandomForest(n_trees=5, seed=1).fit(X, y)):
            path = tmp_path / "model.json"
            save_model(model, str(path))
            loaded = load_model(str(path))
            assert type(loaded) is type(model)
            assert np.array_equal(loaded.predict(X), model.predict(X))

    def test_load_unknown_kind(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"kind": "svm"}', encoding="utf-8")
        with pytest.raises(ValidationError, match="unknown model kind"):
            load_model(str(path))

    def test_make_classifier(self):
        assert isinstance(make_classifier("nb"), NaiveBayes)
        rf = make_classifier("rf", n_trees=9, seed=4)
        assert isinstance(rf, RandomForest)
        assert rf.n_trees == 9 and rf.seed == 4
        with pytest.raises(ValidationError, match="unknown classifier"):
            make_classifier("svm")

    def test_get_params(self):
        assert RandomForest(n_trees=3, seed=2).get_params() == {
            "n_trees": 3, "seed": 2}
        assert NaiveBayes().get_params() == {
            "var_floor": 1e-9, "bern_smoothing": 1.0}


class TestCrossValidation:
    def test_perfect_on_separable(self):
        X, y = separable(n=60, gap=8.0)
        report = cross_validate(X, y, NaiveBayes(), folds=5)
        assert report["f_measure"] == pytest.approx(1.0)
        assert report["classes"][1]["recall"] == 1.0

    def test_sampling_strategies_run(self):
        X, y = separable(n=60)
        y[:45] = 0  # make it imbalanced
        for sampling in ("none", "weight", "resample", "smote"):
            report = cross_validate(X, y, NaiveBayes(), folds=3,
                                    sampling=sampling, seed=0)
            assert 0.0 <= report["f_measure"] <= 1.0

    def test_deterministic(self):
        X, y = separable(n=50)
        a = cross_validate(X, y, RandomForest(n_trees=5, seed=0), folds=4, seed=2)
        b = cross_validate(X, y, RandomForest(n_trees=5, seed=0), folds=4, seed=2)
        assert a == b

    def test_parameter_errors(self):
        X, y = separable(n=10)
        with pytest.raises(ValidationError, match="folds"):
            cross_validate(X, y, NaiveBayes(), folds=1)
        with pytest.raises(ValidationError, match="instances"):
            cross_validate(X, y, NaiveBayes(), folds=11)

    def test_stratified_folds_cover_and_balance(self):
        rng = np.random.default_rng(0)
        y = np.array([0] * 70 + [1] * 30)
        buckets = _stratified_folds(y, 10, rng)
        everything = np.concatenate(buckets)
        assert sorted(everything.tolist()) == list(range(100))
        for b in buckets:
            labels = y[b]
            assert (labels == 0).sum() == 7
            assert (labels == 1).sum() == 3
