"""From-scratch classifiers: KNN, CART decision tree, one-hidden-layer MLP and
one-vs-rest linear SVM, plus feature standardization and model files.

All estimators share ``fit(X, y)`` / ``predict(X)`` and a JSON-friendly
``state()`` / ``from_state()`` pair.  Labels are arbitrary non-negative ints;
ties (votes, scores, probabilities) resolve to the lowest label.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("DT", "KNN", "MLP", "SVM")
FAMILY_ALIASES = {"LSVM": "SVM"}
MODEL_FILE_FORMAT = "ordpick-models"
MODEL_FILE_VERSION = 1


def canonical_family(name: str) -> str:
    name = FAMILY_ALIASES.get(name.upper(), name.upper())
    if name not in FAMILIES:
        raise ValueError(f"unknown model family {name!r}; expected one of {FAMILIES}")
    return name


# ---------------------------------------------------------------------------
# standardization


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray  # zero-variance columns carry 1.0 here and are zeroed on apply
    constant: np.ndarray

    def state(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(), "constant": self.constant.tolist()}

    @classmethod
    def from_state(cls, st: dict) -> "Standardizer":
        return cls(
            np.array(st["mean"], dtype=np.float64),
            np.array(st["std"], dtype=np.float64),
            np.array(st["constant"], dtype=bool),
        )


def standardize_fit(X) -> Standardizer:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("cannot standardize an empty matrix")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = np.all(X == X[0], axis=0) | (std == 0)
    std = np.where(constant, 1.0, std)
    return Standardizer(mean, std, constant)


def standardize_apply(st: Standardizer, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != st.mean.shape[0]:
        raise ValueError(f"expected {st.mean.shape[0]} feature columns, got {X.shape[-1] if X.ndim else 0}")
    out = (X - st.mean) / st.std
    out[:, st.constant] = 0.0
    return out


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per label")
    if len(y) == 0:
        raise ValueError("empty class set: no training rows")
    if np.isnan(X).any():
        raise ValueError("NaN in features")
    return X, y


# ---------------------------------------------------------------------------
# KNN


class KNN:
    def __init__(self, k: int = 5, weighting: str = "uniform"):
        weighting = "inverse-distance" if weighting == "distance" else weighting
        if weighting not in ("uniform", "inverse-distance"):
            raise ValueError(f"unknown weighting {weighting!r}")
        self.k = int(k)
        self.weighting = weighting

    def fit(self, X, y):
        self.X, self.y = _check_xy(X, y)
        self.classes = np.unique(self.y)
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        k = min(self.k, len(self.X))
        class_pos = {c: i for i, c in enumerate(self.classes)}
        out = np.empty(len(X), dtype=np.int64)
        for r, x in enumerate(X):
            d2 = np.sum((self.X - x) ** 2, axis=1)
            nearest = np.argsort(d2, kind="stable")[:k]
            votes = np.zeros(len(self.classes))
            if self.weighting == "uniform":
                for i in nearest:
                    votes[class_pos[self.y[i]]] += 1.0
            else:
                dist = np.sqrt(d2[nearest])
                exact = dist == 0
                for i, d, z in zip(nearest, dist, exact):
                    if exact.any():
                        votes[class_pos[self.y[i]]] += 1.0 if z else 0.0
                    else:
                        votes[class_pos[self.y[i]]] += 1.0 / d
            out[r] = self.classes[int(np.argmax(votes))]
        return out

    def state(self) -> dict:
        return {
            "k": self.k,
            "weighting": self.weighting,
            "n_features": self.X.shape[1],
            "X": self.X.tolist(),
            "y": self.y.tolist(),
        }

    @classmethod
    def from_state(cls, st: dict) -> "KNN":
        m = cls(st["k"], st["weighting"])
        X = np.array(st["X"], dtype=np.float64).reshape(len(st["y"]), st["n_features"])
        return m.fit(X, st["y"])


# ---------------------------------------------------------------------------
# decision tree


def _impurity(counts: np.ndarray, criterion: str) -> np.ndarray:
    """Impurity of each row of class counts (rows may sum to zero)."""
    n = counts.sum(axis=-1, keepdims=True)
    p = counts / np.where(n == 0, 1, n)
    if criterion == "gini":
        return 1.0 - np.sum(p * p, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(p > 0, np.log2(np.where(p > 0, p, 1)), 0.0)
    return -np.sum(p * logs, axis=-1)


class DecisionTree:
    """CART classifier; thresholds sit at midpoints between sorted unique values.

    ``max_depth=None`` grows until leaves are pure or unsplittable.
    """

    def __init__(self, max_depth: int | None = None, min_samples_split: int = 2, criterion: str = "gini"):
        if criterion not in ("gini", "entropy"):
            raise ValueError(f"unknown split criterion {criterion!r}")
        self.max_depth = None if max_depth is None else int(max_depth)
        self.min_samples_split = max(2, int(min_samples_split))
        self.criterion = criterion

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.classes = np.unique(y)
        yi = np.searchsorted(self.classes, y)
        onehot = np.eye(len(self.classes))[yi]
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []
        self._grow(X, onehot, np.arange(len(y)), 0)
        return self

    def _new_node(self, counts) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(int(self.classes[int(np.argmax(counts))]))
        return len(self.feature) - 1

    def _grow(self, X, onehot, rows, depth) -> int:
        counts = onehot[rows].sum(axis=0)
        node = self._new_node(counts)
        if (
            np.count_nonzero(counts) <= 1
            or len(rows) < self.min_samples_split
            or (self.max_depth is not None and depth >= self.max_depth)
        ):
            return node
        split = self._best_split(X[rows], onehot[rows], counts)
        if split is None:
            return node
        f, thr = split
        go_left = X[rows, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self._grow(X, onehot, rows[go_left], depth + 1)
        self.right[node] = self._grow(X, onehot, rows[~go_left], depth + 1)
        return node

    def _best_split(self, Xn, Yn, total):
        n = len(Xn)
        best = None
        best_score = np.inf
        for f in range(Xn.shape[1]):
            order = np.argsort(Xn[:, f], kind="stable")
            xs = Xn[order, f]
            valid = np.nonzero(xs[:-1] != xs[1:])[0]
            if len(valid) == 0:
                continue
            left = np.cumsum(Yn[order], axis=0)[valid]
            right = total - left
            nl = (valid + 1).astype(np.float64)
            score = (nl * _impurity(left, self.criterion) + (n - nl) * _impurity(right, self.criterion)) / n
            i = int(np.argmin(score))
            if score[i] < best_score - 1e-12:
                best_score = score[i]
                lo, hi = xs[valid[i]], xs[valid[i] + 1]
                thr = (lo + hi) / 2.0
                if not lo <= thr < hi:
                    thr = lo
                best = (f, float(thr))
        return best

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty(len(X), dtype=np.int64)
        for r, x in enumerate(X):
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
            out[r] = self.value[node]
        return out

    def depth(self) -> int:
        def walk(node):
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def state(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "criterion": self.criterion,
            "classes": self.classes.tolist(),
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "value": self.value,
        }

    @classmethod
    def from_state(cls, st: dict) -> "DecisionTree":
        m = cls(st["max_depth"], st["min_samples_split"], st["criterion"])
        m.classes = np.array(st["classes"], dtype=np.int64)
        for key in ("feature", "threshold", "left", "right", "value"):
            setattr(m, key, list(st[key]))
        return m


# ---------------------------------------------------------------------------
# MLP


def mlp_forward(params: dict, X: np.ndarray):
    H = np.tanh(X @ params["W1"] + params["b1"])
    Z = H @ params["W2"] + params["b2"]
    Z = Z - Z.max(axis=1, keepdims=True)
    P = np.exp(Z)
    P /= P.sum(axis=1, keepdims=True)
    return H, P


def mlp_loss_grad(params: dict, X: np.ndarray, yi: np.ndarray, l2: float):
    """Mean cross-entropy plus ``l2/2 * (|W1|^2 + |W2|^2)`` and its gradient."""
    n = len(X)
    H, P = mlp_forward(params, X)
    loss = -np.mean(np.log(P[np.arange(n), yi] + 1e-300))
    loss += 0.5 * l2 * (np.sum(params["W1"] ** 2) + np.sum(params["W2"] ** 2))
    dZ = P.copy()
    dZ[np.arange(n), yi] -= 1.0
    dZ /= n
    grads = {
        "W2": H.T @ dZ + l2 * params["W2"],
        "b2": dZ.sum(axis=0),
    }
    dH = (dZ @ params["W2"].T) * (1.0 - H * H)
    grads["W1"] = X.T @ dH + l2 * params["W1"]
    grads["b1"] = dH.sum(axis=0)
    return float(loss), grads


def mlp_init(n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator) -> dict:
    b1 = 1.0 / np.sqrt(max(n_in, 1))  # n_in may be 0 after simplification
    b2 = 1.0 / np.sqrt(n_hidden)
    return {
        "W1": rng.uniform(-b1, b1, size=(n_in, n_hidden)),
        "b1": rng.uniform(-b1, b1, size=n_hidden),
        "W2": rng.uniform(-b2, b2, size=(n_hidden, n_out)),
        "b2": rng.uniform(-b2, b2, size=n_out),
    }


class MLP:
    """tanh hidden layer, softmax output, mini-batch gradient descent."""

    def __init__(self, hidden_size=16, learning_rate=0.01, epochs=100, l2=1e-4, batch_size=32, seed=0):
        self.hidden_size = int(hidden_size)
        self.learning_rate = float(learning_rate)
        self.epochs = int(epochs)
        self.l2 = float(l2)
        self.batch_size = int(batch_size)
        self.seed = int(seed)

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.classes = np.unique(y)
        yi = np.searchsorted(self.classes, y)
        rng = np.random.default_rng(self.seed)
        self.params = mlp_init(X.shape[1], self.hidden_size, len(self.classes), rng)
        n = len(X)
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                batch = order[start : start + self.batch_size]
                _, grads = mlp_loss_grad(self.params, X[batch], yi[batch], self.l2)
                for key, g in grads.items():
                    self.params[key] -= self.learning_rate * g
        return self

    def predict(self, X) -> np.ndarray:
        _, P = mlp_forward(self.params, np.asarray(X, dtype=np.float64))
        return self.classes[np.argmax(P, axis=1)]

    def state(self) -> dict:
        return {
            "hidden_size": self.hidden_size,
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "l2": self.l2,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "classes": self.classes.tolist(),
            "n_features": self.params["W1"].shape[0],
            "params": {k: v.tolist() for k, v in self.params.items()},
        }

    @classmethod
    def from_state(cls, st: dict) -> "MLP":
        m = cls(st["hidden_size"], st["learning_rate"], st["epochs"], st["l2"], st["batch_size"], st["seed"])
        m.classes = np.array(st["classes"], dtype=np.int64)
        n_out = len(m.classes)
        m.params = {k: np.array(v, dtype=np.float64) for k, v in st["params"].items()}
        m.params["W1"] = m.params["W1"].reshape(st["n_features"], m.hidden_size)
        m.params["W2"] = m.params["W2"].reshape(m.hidden_size, n_out)
        return m


# ---------------------------------------------------------------------------
# linear SVM


def svm_loss_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, T: np.ndarray, C: float):
    """One-vs-rest hinge objective ``|W|^2 / (2C) + mean_i sum_c max(0, 1 - T_ic * s_ic)``.

    ``T`` holds +1 for the row's class column and -1 elsewhere.
    """
    n = len(X)
    margins = T * (X @ W + b)
    active = (margins < 1.0).astype(np.float64)
    loss = 0.5 / C * np.sum(W * W) + np.sum(np.maximum(0.0, 1.0 - margins)) / n
    coef = -(T * active) / n
    return float(loss), W / C + X.T @ coef, coef.sum(axis=0)


class LinearSVM:
    def __init__(self, C=1.0, epochs=100, learning_rate=0.01, seed=0):
        self.C = float(C)
        self.epochs = int(epochs)
        self.learning_rate = float(learning_rate)
        self.seed = int(seed)

    def fit(self, X, y):
        X, y = _check_xy(X, y)
        self.classes = np.unique(y)
        T = np.where(y[:, None] == self.classes[None, :], 1.0, -1.0)
        self.W = np.zeros((X.shape[1], len(self.classes)))
        self.b = np.zeros(len(self.classes))
        # keeps the shrinkage factor of the L2 term inside (0, 1) for any C
        step = self.learning_rate / (1.0 + self.learning_rate / self.C)
        for _ in range(self.epochs):
            _, gW, gb = svm_loss_grad(self.W, self.b, X, T, self.C)
            self.W -= step * gW
            self.b -= step * gb
        return self

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.W + self.b

    def predict(self, X) -> np.ndarray:
        return self.classes[np.argmax(self.decision_function(X), axis=1)]

    def state(self) -> dict:
        return {
            "C": self.C,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "seed": self.seed,
            "classes": self.classes.tolist(),
            "n_features": self.W.shape[0],
            "W": self.W.tolist(),
            "b": self.b.tolist(),
        }

    @classmethod
    def from_state(cls, st: dict) -> "LinearSVM":
        m = cls(st["C"], st["epochs"], st["learning_rate"], st["seed"])
        m.classes = np.array(st["classes"], dtype=np.int64)
        m.W = np.array(st["W"], dtype=np.float64).reshape(st["n_features"], len(m.classes))
        m.b = np.array(st["b"], dtype=np.float64)
        return m


# ---------------------------------------------------------------------------
# specs and trained models


@dataclass
class ModelSpec:
    family: str
    hyperparams: dict = field(default_factory=dict)

    def __post_init__(self):
        self.family = canonical_family(self.family)

    def describe(self) -> str:
        return " ".join(f"{k}={_fmt(v)}" for k, v in self.hyperparams.items())


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def build_estimator(spec: ModelSpec, seed: int = 0):
    hp = spec.hyperparams
    if spec.family == "KNN":
        return KNN(hp.get("k", 5), hp.get("weighting", "uniform"))
    if spec.family == "DT":
        return DecisionTree(hp.get("max_depth"), hp.get("min_samples_split", 2), hp.get("criterion", "gini"))
    if spec.family == "MLP":
        return MLP(
            hp.get("hidden_size", 16),
            hp.get("learning_rate", 0.01),
            hp.get("epochs", 100),
            hp.get("l2", 1e-4),
            hp.get("batch_size", 32),
            seed,
        )
    return LinearSVM(hp.get("C", 1.0), hp.get("epochs", 100), hp.get("learning_rate", 0.01), seed)


_ESTIMATORS = {"KNN": KNN, "DT": DecisionTree, "MLP": MLP, "SVM": LinearSVM}


@dataclass
class TrainedModel:
    spec: ModelSpec
    estimator: object
    standardizer: Standardizer

    def predict(self, X) -> np.ndarray:
        return predict(self, X)

    def state(self) -> dict:
        return {
            "family": self.spec.family,
            "hyperparams": self.spec.hyperparams,
            "standardizer": self.standardizer.state(),
            "parameters": self.estimator.state(),
        }

    @classmethod
    def from_state(cls, st: dict) -> "TrainedModel":
        spec = ModelSpec(st["family"], dict(st["hyperparams"]))
        est = _ESTIMATORS[spec.family].from_state(st["parameters"])
        return cls(spec, est, Standardizer.from_state(st["standardizer"]))


def train(spec: ModelSpec, X, y, seed: int = 0) -> TrainedModel:
    """Fit the standardizer on ``X`` then the estimator on the standardized rows."""
    X, y = _check_xy(X, y)
    st = standardize_fit(X)
    est = build_estimator(spec, seed).fit(standardize_apply(st, X), y)
    return TrainedModel(spec, est, st)


def predict(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    return model.estimator.predict(standardize_apply(model.standardizer, X))


def save_models(path, models: dict) -> None:
    doc = {
        "format": MODEL_FILE_FORMAT,
        "version": MODEL_FILE_VERSION,
        "models": {name: m.state() for name, m in models.items()},
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_models(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not a model file: {exc}") from exc
    if doc.get("format") != MODEL_FILE_FORMAT or doc.get("version") != MODEL_FILE_VERSION:
        raise ValueError(f"{path}: unsupported model file format/version")
    return {name: TrainedModel.from_state(st) for name, st in doc["models"].items()}
