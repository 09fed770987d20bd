import numpy as np
import pytest

from sepolml.dataset import LabeledDataset, LabeledExample, ViolationLabel
from sepolml.detectors import (
    DimensionMismatch,
    FeatureSpace,
    ForestConfig,
    LabelTooSmall,
    MetricsReport,
    MissingNode,
    MLPConfig,
    Standardizer,
    StackingConfig,
    SVMConfig,
    classification_report,
    confusion_matrix,
    evaluate,
    featurize_example,
    featurize_rules,
    gradient_check,
    metrics_from_confusion,
    model_from_json,
    model_to_json,
    predict_with_report,
    stratified_folds,
    stratified_split,
    train_mlp,
    train_random_forest,
    train_stacking,
    train_svm,
)
from sepolml.detectors.mlp import forward, init_params
from sepolml.embedding import EmbeddingTable
from sepolml.graph import build_graph
from sepolml.parser import AllowRule, parse_document

LISTING_4 = """\
allow financial_process_t financial_data_t:file { read write };
allow audit_process_t audit_log_t:file { write };
"""

SMALL_FOREST = ForestConfig(n_trees=15, seed=1)
SMALL_SVM = SVMConfig(epochs=20, seed=1)
SMALL_MLP = MLPConfig(hidden=(16,), epochs=60, seed=1)


def separable(n=40, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 4))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(np.int64)
    X[:, 0] += np.where(y == 1, 1.0, -1.0)  # open a margin
    return X, y


def blobs(n_per=10, labels=(0, 3, 7), seed=0):
    rng = np.random.default_rng(seed)
    centers = rng.normal(scale=6.0, size=(len(labels), 5))
    X = np.vstack([c + rng.normal(size=(n_per, 5)) for c in centers])
    y = np.repeat(labels, n_per)
    return X, y


# -- metrics -----------------------------------------------------------------------


def test_hand_computed_confusion():
    r = metrics_from_confusion([[2, 0], [1, 1]])
    assert r.accuracy == pytest.approx(0.75)
    assert (r.per_label[0].precision, r.per_label[1].precision) == pytest.approx((2 / 3, 1.0))
    assert (r.per_label[0].recall, r.per_label[1].recall) == pytest.approx((1.0, 0.5))
    assert r.macro_avg == pytest.approx((0.833, 0.750, 0.733), abs=1e-3)


def test_evaluate_on_fixture_predictions():
    class Fixed:
        def predict(self, X):
            return np.array([0, 0, 0, 1])

    r = evaluate(Fixed(), np.zeros((4, 1)), np.array([0, 0, 1, 1]))
    assert r.accuracy == pytest.approx(0.75)
    assert r.macro_avg == pytest.approx((0.833, 0.750, 0.733), abs=1e-3)
    assert r.confusion_matrix.shape == (11, 11)


def test_perfect_predictions():
    y = np.arange(11).repeat(2)
    r = classification_report(y, y)
    assert r.accuracy == 1.0 and r.macro_avg == (1.0, 1.0, 1.0) and r.weighted_avg == (1.0, 1.0, 1.0)
    assert np.array_equal(r.confusion_matrix, np.diag(np.full(11, 2)))


def test_constant_predictor_on_balanced_labels():
    y = np.arange(11).repeat(3)
    r = classification_report(y, np.zeros_like(y))
    assert r.accuracy == pytest.approx(1 / 11)
    assert r.macro_avg[1] == pytest.approx(1 / 11)


def test_zero_division_is_zero():
    r = metrics_from_confusion([[0, 3], [0, 0]])
    assert r.per_label[1].precision == 0.0 and r.per_label[1].f1 == 0.0
    assert r.per_label[1].support == 0


def test_weighted_recall_equals_accuracy_identity():
    rng = np.random.default_rng(0)
    for _ in range(100):
        k = int(rng.integers(2, 12))
        cm = rng.integers(0, 6, size=(k, k))
        cm[0, 0] += 1
        r = metrics_from_confusion(cm)
        assert r.accuracy == pytest.approx(np.trace(cm) / cm.sum(), abs=1e-12)
        assert r.weighted_avg[1] == pytest.approx(r.accuracy, abs=1e-12)
        assert all(0.0 <= v <= 1.0 for v in r.macro_avg)


def test_confusion_rows_are_true_labels():
    cm = confusion_matrix([1, 1], [2, 2], n_labels=3)
    assert cm[1, 2] == 2


def test_report_round_trip():
    r = classification_report([0, 1, 1, 2], [0, 1, 2, 2])
    back = MetricsReport.from_dict(r.to_dict())
    assert back.accuracy == r.accuracy and back.macro_avg == r.macro_avg
    assert np.array_equal(back.confusion_matrix, r.confusion_matrix)


# -- features ------------------------------------------------------------------------


def listing4_fixture():
    g = build_graph([parse_document(LISTING_4)])
    emb = EmbeddingTable([n.key for n in g.nodes], np.ones((len(g.nodes), 4)))
    rules = parse_document(LISTING_4).rules
    return g, emb, rules


def test_listing_4_features():
    g, emb, rules = listing4_fixture()
    space = FeatureSpace.for_graph(g, emb)
    assert space.vocabulary == ("read", "write")
    v = featurize_rules(rules, emb, space)
    assert len(v) == space.size == 3 * 4 + 2 + 1
    assert np.all(v[:12] == 1.0)
    # read is granted by one of the two rules, write by both
    assert (v[12], v[13]) == (0.5, 1.0)
    assert v[14] == pytest.approx(2 / 6)


def test_one_rule_and_duplicate_rule():
    g, emb, rules = listing4_fixture()
    space = FeatureSpace.for_graph(g, emb)
    one = featurize_rules(rules[:1], emb, space)
    two = featurize_rules([rules[0], rules[0]], emb, space)
    assert one[-1] == pytest.approx(1 / 6) and two[-1] == pytest.approx(2 / 6)
    assert np.array_equal(one[:-1], two[:-1])


def test_featurize_example_and_missing_node():
    g, emb, rules = listing4_fixture()
    ex = LabeledExample("e1", rules, ViolationLabel.NO_ANOMALY)
    assert featurize_example(g, emb, ex).shape == (15,)
    with pytest.raises(MissingNode):
        featurize_rules([AllowRule("ghost_t", "financial_data_t", "file", ("read",))], emb,
                        FeatureSpace.for_graph(g, emb))


def test_transition_rule_has_no_permissions():
    doc = parse_document("type_transition a_t b_exec_t:process c_t;")
    g = build_graph([doc])
    emb = EmbeddingTable([n.key for n in g.nodes], np.ones((len(g.nodes), 3)))
    space = FeatureSpace.for_graph(g, emb)
    v = featurize_rules(doc.rules, emb, space)
    assert len(v) == 9 + 0 + 1


def test_embedding_width_mismatch():
    g, emb, rules = listing4_fixture()
    space = FeatureSpace(("read", "write"), 8)
    with pytest.raises(DimensionMismatch):
        featurize_rules(rules, emb, space)


# -- split ---------------------------------------------------------------------------


def toy_dataset(per_label=10, labels=range(11)):
    exs = []
    for lbl in labels:
        for i in range(per_label):
            exs.append(LabeledExample(f"l{lbl}_{i}", (AllowRule(f"s{lbl}_{i}_t", "o_t", "file", ("read",)),),
                                      ViolationLabel(lbl)))
    return LabeledDataset(exs)


def test_split_sizes():
    train, test = stratified_split(toy_dataset(), 0.2, seed=0)
    assert (len(train), len(test)) == (88, 22)
    assert all(n == 2 for n in test.label_counts.values())
    ids = {e.example_id for e in train} | {e.example_id for e in test}
    assert len(ids) == 110


def test_split_determinism():
    a = stratified_split(toy_dataset(), 0.2, seed=5)[1]
    b = stratified_split(toy_dataset(), 0.2, seed=5)[1]
    c = stratified_split(toy_dataset(), 0.2, seed=6)[1]
    assert [e.example_id for e in a] == [e.example_id for e in b]
    assert [e.example_id for e in a] != [e.example_id for e in c]


def test_split_rejects_tiny_label():
    ds = toy_dataset(per_label=1, labels=[0]).examples + toy_dataset(per_label=5, labels=[1]).examples
    with pytest.raises(LabelTooSmall):
        stratified_split(LabeledDataset(ds), 0.2, seed=0)


def test_folds_are_stratified():
    y = np.repeat(np.arange(3), 10)
    folds = stratified_folds(y, 5, seed=0)
    for k in range(5):
        assert np.bincount(y[folds == k], minlength=3).tolist() == [2, 2, 2]


# -- random forest ------------------------------------------------------------------


def test_forest_separable_training_accuracy():
    X, y = separable()
    model = train_random_forest(X, y, SMALL_FOREST)
    assert np.mean(model.predict(X) == y) == 1.0


def test_forest_vote_oracle():
    X, y = blobs(n_per=10)
    model = train_random_forest(X, y, ForestConfig(n_trees=25, seed=3))
    votes = np.array([[tree.predict(x[None])[0] for tree in model.trees] for x in X])
    expected = []
    for row in votes:
        counts = {}
        for v in row:
            counts[int(v)] = counts.get(int(v), 0) + 1
        best = max(counts.values())
        expected.append(min(k for k, c in counts.items() if c == best))
    assert model.predict(X).tolist() == expected
    scores = model.predict_scores(X)
    np.testing.assert_allclose(scores.sum(axis=1), 1.0)


def test_forest_single_label_is_constant():
    X = np.random.default_rng(0).normal(size=(8, 3))
    model = train_random_forest(X, np.full(8, 4), SMALL_FOREST)
    assert set(model.predict(np.random.default_rng(1).normal(size=(5, 3)))) == {4}


def test_forest_flags_degenerate_data():
    X = np.ones((6, 2))
    model = train_random_forest(X, np.array([0, 1, 0, 1, 0, 1]), SMALL_FOREST)
    assert model.degenerate


def test_vote_ties_go_to_lowest_label():
    X = np.array([[0.0], [1.0]])
    model = train_random_forest(X, np.array([5, 2]), ForestConfig(n_trees=2, seed=0))
    votes = model.tree_votes(X)
    for j, col in enumerate(votes.T):
        if col[0] != col[1]:
            assert model.predict(X)[j] == min(col)


# -- svm -------------------------------------------------------------------------------


def test_svm_separable():
    X, y = separable(80)
    model = train_svm(X[:40], y[:40], SMALL_SVM)
    assert np.mean(model.predict(X[40:]) == y[40:]) == 1.0


def test_svm_constant_predictor():
    X = np.random.default_rng(0).normal(size=(6, 2))
    model = train_svm(X, np.full(6, 7), SMALL_SVM)
    assert set(model.predict(X)) == {7}


def test_svm_argmax_scale_invariance():
    X, y = blobs()
    model = train_svm(X, y, SMALL_SVM)
    m = model.margins(X)
    labels = np.array(model.label_set)
    for c in (0.01, 1.0, 37.0):
        assert np.array_equal(labels[np.argmax(c * m, axis=1)], model.predict(X))


def test_svm_scores_unseen_labels_minus_inf():
    X, y = blobs()
    scores = train_svm(X, y, SMALL_SVM).predict_scores(X)
    assert np.all(np.isneginf(scores[:, 1]))
    assert np.all(np.isfinite(scores[:, [0, 3, 7]]))


# -- mlp -------------------------------------------------------------------------------


def test_mlp_learns_xor():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1, 1, 0])
    model = train_mlp(X, y, MLPConfig(hidden=(8,), epochs=2000, batch=4, lr=0.05, seed=0))
    assert model.predict(X).tolist() == y.tolist()


def test_mlp_zero_epochs_near_uniform():
    X, y = blobs()
    model = train_mlp(X, y, MLPConfig(epochs=0, seed=0))
    probs = model.predict_scores(X)
    assert np.all(np.abs(probs - 1 / 11) <= 0.2)


def test_mlp_gradient_check():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(5, 6))
    y = np.array([0, 3, 10, 3, 5])
    params = init_params([6, 7, 11], rng)
    assert gradient_check(params, X, y, eps=1e-4) <= 1e-3


def test_mlp_two_hidden_layers_gradient_check():
    rng = np.random.default_rng(1)
    params = init_params([4, 5, 3, 11], rng)
    assert gradient_check(params, rng.normal(size=(5, 4)), np.array([1, 2, 3, 4, 0])) <= 1e-3


def test_mlp_outputs_are_distributions():
    X, y = blobs()
    model = train_mlp(X, y, SMALL_MLP)
    np.testing.assert_allclose(model.predict_scores(X).sum(axis=1), 1.0)
    assert np.mean(model.predict(X) == y) == 1.0
    assert forward(model.params, model.standardizer.transform(X))[-1].shape == (30, 11)


def test_mlp_deterministic():
    X, y = blobs()
    a, b = train_mlp(X, y, SMALL_MLP), train_mlp(X, y, SMALL_MLP)
    assert all(np.array_equal(wa, wb) for (wa, _), (wb, _) in zip(a.params, b.params))


# -- stacking --------------------------------------------------------------------------


def stack_config():
    return StackingConfig(forest=SMALL_FOREST, svm=SMALL_SVM, mlp=SMALL_MLP, seed=1)


def test_stacking_reproduces_unanimous_bases():
    X, y = blobs(n_per=12)
    model = train_stacking(X, y, stack_config())
    base_preds = np.stack([b.predict(X) for b in model.bases])
    unanimous = np.all(base_preds == base_preds[0], axis=0)
    assert unanimous.any()
    assert np.array_equal(model.predict(X)[unanimous], base_preds[0][unanimous])


def test_stacking_deterministic():
    X, y = blobs(n_per=12)
    a = train_stacking(X, y, stack_config())
    b = train_stacking(X, y, stack_config())
    assert model_to_json(a) == model_to_json(b)


# -- shared behaviour ---------------------------------------------------------------------


def trained_models():
    X, y = blobs(n_per=12)
    return X, [
        train_random_forest(X, y, SMALL_FOREST),
        train_svm(X, y, SMALL_SVM),
        train_mlp(X, y, SMALL_MLP),
        train_stacking(X, y, stack_config()),
    ]


def test_persistence_round_trip():
    X, models = trained_models()
    for m in models:
        back = model_from_json(model_to_json(m))
        assert type(back) is type(m)
        np.testing.assert_array_equal(back.predict_scores(X), m.predict_scores(X))
        assert back.label_set == m.label_set and back.training_seed == m.training_seed


def test_predict_with_report_shapes():
    X, models = trained_models()
    for m in models:
        for label, scores in predict_with_report(m, X[:3]):
            assert len(scores) == 11 and 0 <= label <= 10


def test_dimension_mismatch():
    X, models = trained_models()
    for m in models:
        with pytest.raises(DimensionMismatch):
            m.predict(X[:, :3])


def test_persisted_feature_space_must_match():
    X, models = trained_models()
    m = models[0]
    m.feature_space = FeatureSpace(("read",), 4).to_dict()  # 3*4+1+1 = 14 != 5
    with pytest.raises(DimensionMismatch):
        model_from_json(model_to_json(m))


def test_standardizer_round_trip():
    X = np.random.default_rng(0).normal(loc=3.0, scale=[1.0, 10.0, 0.1], size=(20, 3))
    X[:, 2] = 5.0  # constant column
    s = Standardizer.fit(X)
    np.testing.assert_allclose(s.inverse_transform(s.transform(X)), X, atol=1e-9)
    back = Standardizer.from_dict(s.to_dict())
    np.testing.assert_array_equal(back.transform(X), s.transform(X))
