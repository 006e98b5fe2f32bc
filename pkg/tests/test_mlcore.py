import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ordpick.mlcore import (
    KNN,
    CVConfig,
    DecisionTree,
    ModelSpec,
    TrainingSet,
    accuracy,
    chosen_cost,
    load_models,
    metric_accuracy_within,
    metric_total_time,
    predict,
    run_search,
    sample_candidates,
    save_models,
    standardize_apply,
    standardize_fit,
    train,
)
from ordpick.mlcore.models import canonical_family, mlp_init, mlp_loss_grad, svm_loss_grad
from ordpick.mlcore.search import SEARCH_SPACES, IntRange, LogUniform, cv_predictions, fold_assignment
from ordpick.oracle import TimingRecord


def distinct_rows(rng, n, d):
    X = rng.normal(size=(n, d))
    assert len({r.tobytes() for r in X}) == n
    return X


def synthetic_set(rng, n=90, d=4, k=6):
    X = rng.normal(size=(n, d))
    y = (np.argmax(X[:, :3], axis=1) * 2 + (X[:, 3] > 0)).astype(np.int64)
    T = []
    for i in range(n):
        costs = rng.uniform(1.0, 10.0, size=k)
        costs[y[i]] = 0.5
        T.append(TimingRecord(i, costs.tolist(), [False] * k))
    return TrainingSet(X, y, T)


# ---------------------------------------------------------------------------
# standardization


def test_standardize_two_points():
    st_ = standardize_fit([[1.0], [3.0]])
    assert standardize_apply(st_, [[1.0], [3.0]]).tolist() == [[-1.0], [1.0]]


def test_standardize_constant_column():
    X = np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]])
    out = standardize_apply(standardize_fit(X), X)
    assert out[:, 0].tolist() == [0.0, 0.0, 0.0]
    assert standardize_fit(X).std[0] > 0


def test_standardize_recomputation(rng):
    X = rng.normal(3.0, 7.0, size=(100, 10))
    Z = standardize_apply(standardize_fit(X), X)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-12)
    assert np.all(np.abs(Z.std(axis=0) - 1.0) < 1e-12)


def test_standardize_errors():
    with pytest.raises(ValueError):
        standardize_fit(np.zeros((0, 3)))
    st_ = standardize_fit(np.ones((3, 2)))
    with pytest.raises(ValueError, match="columns"):
        standardize_apply(st_, np.ones((2, 3)))


# ---------------------------------------------------------------------------
# estimators


@pytest.mark.parametrize("weighting", ["uniform", "inverse-distance"])
def test_knn_k1_recovers_training_labels(rng, weighting):
    X = distinct_rows(rng, 60, 5)
    y = rng.integers(0, 6, size=60)
    assert np.array_equal(KNN(1, weighting).fit(X, y).predict(X), y)


def test_knn_hand_vote():
    X = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.2], [5.0, 5.0], [5.1, 5.0], [5.0, 5.2]])
    y = np.array([0, 0, 1, 1, 1, 0])
    m = KNN(3).fit(X, y)
    # neighbours of the origin: rows 0, 1, 2 -> votes 0, 0, 1
    assert m.predict([[0.01, 0.01]]).tolist() == [0]
    # neighbours of (5, 5): rows 3, 4, 5 -> votes 1, 1, 0
    assert m.predict([[5.0, 5.0]]).tolist() == [1]


def test_knn_vote_tie_goes_to_lower_label():
    X = np.array([[0.0], [1.0]])
    assert KNN(2).fit(X, [4, 2]).predict([[0.5]]).tolist() == [2]


def test_knn_distance_tie_uses_lower_row():
    X = np.array([[-1.0], [1.0]])
    assert KNN(1).fit(X, [5, 3]).predict([[0.0]]).tolist() == [5]


def test_dt_unlimited_depth_fits_training_set(rng):
    X = distinct_rows(rng, 120, 4)
    y = rng.integers(0, 6, size=120)
    for criterion in ("gini", "entropy"):
        assert accuracy(DecisionTree(criterion=criterion).fit(X, y).predict(X), y) == 1.0


def test_dt_depth_limit(rng):
    X = distinct_rows(rng, 80, 3)
    y = rng.integers(0, 4, size=80)
    assert DecisionTree(max_depth=2).fit(X, y).depth() <= 2


def test_dt_hand_split():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    m = DecisionTree().fit(X, [0, 0, 1, 1])
    assert m.predict([[1.4], [1.6], [-9.0], [9.0]]).tolist() == [0, 1, 0, 1]


@pytest.mark.parametrize(
    "spec",
    [
        ModelSpec("KNN", {"k": 3}),
        ModelSpec("DT", {"max_depth": 4}),
        ModelSpec("MLP", {"hidden_size": 8, "epochs": 20}),
        ModelSpec("LSVM", {"C": 1.0, "epochs": 20}),
    ],
)
def test_single_training_point(spec):
    m = train(spec, [[1.0, 2.0]], [4])
    assert predict(m, [[0.0, 0.0], [9.0, -3.0]]).tolist() == [4, 4]


@pytest.mark.parametrize("family", ["KNN", "DT", "MLP", "SVM"])
def test_training_and_prediction_deterministic(rng, family):
    data = synthetic_set(rng)
    spec = sample_candidates(family, 1, 5)[0]
    a = train(spec, data.X, data.y, seed=3)
    b = train(spec, data.X, data.y, seed=3)
    assert np.array_equal(predict(a, data.X), predict(b, data.X))
    assert np.array_equal(predict(a, data.X), predict(a, data.X))


def test_train_errors():
    with pytest.raises(ValueError, match="empty"):
        train(ModelSpec("KNN"), np.zeros((0, 2)), [])
    with pytest.raises(ValueError, match="NaN"):
        train(ModelSpec("DT"), [[np.nan, 1.0]], [0])
    m = train(ModelSpec("KNN", {"k": 1}), [[1.0, 2.0]], [0])
    with pytest.raises(ValueError):
        predict(m, [[1.0, 2.0, 3.0]])


def test_family_names():
    assert canonical_family("lsvm") == "SVM"
    assert ModelSpec("LSVM").family == "SVM"
    with pytest.raises(ValueError):
        canonical_family("RF")


def test_models_learn_a_separable_problem(rng):
    data = synthetic_set(rng, n=300)
    test = synthetic_set(rng, n=150)
    specs = [
        ModelSpec("KNN", {"k": 5}),
        ModelSpec("DT", {"max_depth": 8}),
        ModelSpec("MLP", {"hidden_size": 32, "learning_rate": 0.05, "epochs": 200, "l2": 1e-4}),
        ModelSpec("SVM", {"C": 10.0, "epochs": 300, "learning_rate": 0.05}),
    ]
    for spec in specs:
        acc = accuracy(predict(train(spec, data.X, data.y), test.X), test.y)
        assert acc > 0.6, spec


# ---------------------------------------------------------------------------
# gradients


def rel_err(a, b):
    # normwise: entrywise ratios are meaningless where the exact gradient is 0
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-300))


def test_mlp_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(5, 4))
    yi = np.array([0, 1, 2, 1, 0])
    for trial in range(5):
        params = mlp_init(4, 6, 3, np.random.default_rng(trial))
        _, grads = mlp_loss_grad(params, X, yi, 1e-3)
        h = 1e-6
        for key, value in params.items():
            num = np.zeros_like(value)
            for idx in np.ndindex(value.shape):
                old = value[idx]
                value[idx] = old + h
                up, _ = mlp_loss_grad(params, X, yi, 1e-3)
                value[idx] = old - h
                down, _ = mlp_loss_grad(params, X, yi, 1e-3)
                value[idx] = old
                num[idx] = (up - down) / (2 * h)
            assert rel_err(grads[key], num) < 1e-5, key


def test_svm_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(6, 4))
    y = np.array([0, 1, 2, 0, 1, 2])
    T = np.where(y[:, None] == np.arange(3)[None, :], 1.0, -1.0)
    h = 1e-6
    checked = 0
    for trial in range(5):
        W = rng.normal(size=(4, 3)) * 0.3
        b = rng.normal(size=3) * 0.3
        margins = T * (X @ W + b)
        if np.min(np.abs(margins - 1.0)) < 1e-3:
            continue  # hinge kink: derivative undefined
        _, gW, gb = svm_loss_grad(W, b, X, T, 2.0)
        numW = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            Wp, Wm = W.copy(), W.copy()
            Wp[idx] += h
            Wm[idx] -= h
            numW[idx] = (svm_loss_grad(Wp, b, X, T, 2.0)[0] - svm_loss_grad(Wm, b, X, T, 2.0)[0]) / (2 * h)
        numb = np.zeros_like(b)
        for j in range(3):
            bp, bm = b.copy(), b.copy()
            bp[j] += h
            bm[j] -= h
            numb[j] = (svm_loss_grad(W, bp, X, T, 2.0)[0] - svm_loss_grad(W, bm, X, T, 2.0)[0]) / (2 * h)
        assert rel_err(gW, numW) < 1e-5
        assert rel_err(gb, numb) < 1e-5
        checked += 1
    assert checked >= 3


# ---------------------------------------------------------------------------
# search


def test_candidates_within_declared_ranges():
    for family, space in SEARCH_SPACES.items():
        for spec in sample_candidates(family, 50, 9):
            for name, dist in space.items():
                v = spec.hyperparams[name]
                if isinstance(dist, IntRange):
                    assert dist.lo <= v <= dist.hi and isinstance(v, int)
                elif isinstance(dist, LogUniform):
                    assert dist.lo <= v <= dist.hi
                else:
                    assert v in dist.options


def test_fold_assignment_balanced_and_seeded():
    f = fold_assignment(23, 5, 4)
    assert sorted(np.bincount(f).tolist()) == [4, 4, 5, 5, 5]
    assert np.array_equal(f, fold_assignment(23, 5, 4))
    with pytest.raises(ValueError):
        fold_assignment(3, 5, 0)


def test_cv_config_validation():
    with pytest.raises(ValueError):
        CVConfig(folds=1)
    with pytest.raises(ValueError):
        CVConfig(n_candidates=0)
    with pytest.raises(ValueError):
        CVConfig(objective="f1")


@pytest.mark.parametrize("objective", ["accuracy", "time"])
def test_single_candidate_returned(rng, objective):
    data = synthetic_set(rng, n=30)
    res = run_search("KNN", data, CVConfig(folds=3, n_candidates=1, objective=objective, seed=2))
    assert res.best == sample_candidates("KNN", 1, 2)[0]


def test_time_objective_picks_lower_summed_cost():
    # candidate A (k=1) copies the nearest label; B (k=4) votes the majority,
    # which is the cheap ordering everywhere
    X = np.arange(12, dtype=np.float64).reshape(-1, 1)
    y = np.array([0, 0, 1, 0, 0, 2, 0, 0, 1, 0, 0, 2])
    T = [TimingRecord(i, [1.0, 50.0, 50.0] if y[i] == 0 else [1.0, 0.9, 0.9], [False] * 3) for i in range(12)]
    data = TrainingSet(X, y, T)
    space = {"k": IntRange(1, 1)}
    a = run_search("KNN", data, CVConfig(folds=3, n_candidates=1, objective="time"), space)
    b = run_search("KNN", data, CVConfig(folds=3, n_candidates=1, objective="time"), {"k": IntRange(4, 4)})
    assert b.candidates[0].time < a.candidates[0].time
    both = {"k": _Seq([1, 4])}
    res = run_search("KNN", data, CVConfig(folds=3, n_candidates=2, objective="time"), both)
    assert res.best.hyperparams["k"] == 4


class _Seq:
    """Deterministic pseudo-distribution yielding the given values in turn."""

    def __init__(self, values):
        self.values = list(values)
        self.i = 0

    def sample(self, rng):
        v = self.values[self.i % len(self.values)]
        self.i += 1
        return v


@pytest.mark.parametrize("family", ["KNN", "DT"])
def test_objectives_share_candidates_and_time_winner_is_cheapest(rng, family):
    data = synthetic_set(rng, n=60)
    acc = run_search(family, data, CVConfig(folds=4, n_candidates=6, objective="accuracy", seed=11))
    tim = run_search(family, data, CVConfig(folds=4, n_candidates=6, objective="time", seed=11))
    assert [c.spec for c in acc.candidates] == [c.spec for c in tim.candidates]
    assert [c.time for c in acc.candidates] == [c.time for c in tim.candidates]
    assert tim.cv_score <= acc.candidates[acc.best_index].time
    assert all(tim.cv_score <= c.time for c in tim.candidates)
    assert all(acc.cv_score >= c.accuracy for c in acc.candidates)


def test_cv_predictions_out_of_fold(rng):
    data = synthetic_set(rng, n=40)
    fold_of = fold_assignment(40, 4, 0)
    pred = cv_predictions(ModelSpec("KNN", {"k": 1}), data, fold_of)
    # k=1 on out-of-fold rows cannot simply echo the row's own label every time
    assert pred.shape == (40,)
    assert accuracy(pred, data.y) < 1.0


# ---------------------------------------------------------------------------
# metrics


def test_accuracy_within_examples():
    T = [[1.0, 1.05, 2.0]]
    assert metric_accuracy_within([1], T, 10) == 1.0
    assert metric_accuracy_within([1], T, 0) == 0.0
    assert metric_accuracy_within([0], T, 0) == 1.0
    with pytest.raises(ValueError):
        metric_accuracy_within([0], T, -1)


def test_total_time_examples():
    assert metric_total_time([1], [[2.0, 5.0]], 0.5) == 5.5
    T = [TimingRecord(0, [3.0, 1.0], [False] * 2), TimingRecord(1, [2.0, 4.0], [False] * 2)]
    assert metric_total_time([1, 0], T, 0.0) == 3.0


def test_total_time_matches_scan(rng):
    T = [rng.uniform(0.1, 10.0, size=6).tolist() for _ in range(100)]
    pred = rng.integers(0, 6, size=100)
    total = 0.0
    for p, c in zip(pred, T):
        total += c[p]
    assert metric_total_time(pred, T, 1.25) == pytest.approx(1.25 + total, rel=1e-12)
    assert chosen_cost(pred, T) == pytest.approx(total, rel=1e-12)


@given(st.lists(st.lists(st.floats(0.01, 100.0), min_size=6, max_size=6), min_size=1, max_size=30), st.data())
def test_accuracy_within_monotone(T, data):
    pred = data.draw(st.lists(st.integers(0, 5), min_size=len(T), max_size=len(T)))
    xs = sorted(data.draw(st.lists(st.floats(0, 1e4), min_size=2, max_size=5)))
    vals = [metric_accuracy_within(pred, T, x) for x in xs]
    assert vals == sorted(vals)
    assert metric_accuracy_within(pred, T, 1e9) == 1.0
    best = [int(np.argmin(c)) for c in T]
    assert metric_accuracy_within(best, T, 0) == 1.0


# ---------------------------------------------------------------------------
# model files


def test_model_file_roundtrip(tmp_path, rng):
    data = synthetic_set(rng, n=50)
    models = {
        "KNN": train(ModelSpec("KNN", {"k": 3, "weighting": "inverse-distance"}), data.X, data.y),
        "DT": train(ModelSpec("DT", {"max_depth": 5, "min_samples_split": 2, "criterion": "entropy"}), data.X, data.y),
        "MLP": train(ModelSpec("MLP", {"hidden_size": 5, "epochs": 10}), data.X, data.y, seed=4),
        "SVM": train(ModelSpec("SVM", {"C": 0.5, "epochs": 20}), data.X, data.y),
    }
    save_models(tmp_path / "par.txt", models)
    doc = json.loads((tmp_path / "par.txt").read_text())
    assert doc["format"] == "ordpick-models" and doc["version"] == 1
    back = load_models(tmp_path / "par.txt")
    assert set(back) == set(models)
    for name, m in models.items():
        assert back[name].spec == m.spec
        assert np.array_equal(predict(back[name], data.X), predict(m, data.X))


def test_model_file_empty_feature_set(tmp_path):
    m = train(ModelSpec("MLP", {"hidden_size": 3, "epochs": 2}), np.zeros((4, 0)), [1, 1, 0, 1])
    save_models(tmp_path / "p.txt", {"MLP": m})
    back = load_models(tmp_path / "p.txt")["MLP"]
    assert np.array_equal(predict(back, np.zeros((2, 0))), predict(m, np.zeros((2, 0))))


def test_model_file_rejects_foreign(tmp_path):
    (tmp_path / "x.txt").write_text('{"format": "other", "version": 1, "models": {}}')
    with pytest.raises(ValueError):
        load_models(tmp_path / "x.txt")
    (tmp_path / "y.txt").write_text("not json")
    with pytest.raises(ValueError):
        load_models(tmp_path / "y.txt")
