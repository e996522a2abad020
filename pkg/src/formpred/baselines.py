"""Conventional regressors written from scratch: MLR, PLS1, k-NN, random forest
and a one-hidden-layer network.

Every fitted model exposes ``predict(X) -> (n,)`` for a single target and
round-trips through ``to_dict``/``regressor_from_dict``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import deepnet

KINDS = ("MLR", "PLSR", "KNN", "RF", "ANN1")


def _as_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] == 0:
        raise ValueError("no training rows")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"{X.shape[0]} rows but {y.shape[0]} targets")
    return X, y


@dataclass
class LinearModel:
    """y = X @ coef + intercept; used by both MLR and PLSR."""

    kind: str
    coef: np.ndarray
    intercept: float
    hyperparameters: dict = field(default_factory=dict)

    def predict(self, X) -> np.ndarray:
        return np.atleast_2d(np.asarray(X, dtype=float)) @ self.coef + self.intercept

    def to_dict(self) -> dict:
        return {"kind": self.kind, "hyperparameters": dict(self.hyperparameters),
                "coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearModel":
        return cls(d["kind"], np.asarray(d["coef"], dtype=float), float(d["intercept"]), d["hyperparameters"])


def fit_mlr(X, y) -> LinearModel:
    """Least squares with intercept; rank-deficient designs get the minimum-norm solution."""
    X, y = _as_xy(X, y)
    A = np.hstack([X, np.ones((X.shape[0], 1))])
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    return LinearModel("MLR", sol[:-1], float(sol[-1]))


def fit_plsr(X, y, n_components: int, tol: float = 1e-12) -> LinearModel:
    """PLS1 by NIPALS on centred data.

    Each component takes the weight vector w = X'y / |X'y| of the current
    residuals, deflates X and y by the score t = Xw, and the final
    regression vector is W (P'W)^-1 q. Extraction stops early once X'y
    vanishes, which happens for constant y or when the fit is exact.
    """
    X, y = _as_xy(X, y)
    n_features = X.shape[1]
    if not 1 <= n_components <= n_features:
        raise ValueError(f"n_components must lie in [1, {n_features}], got {n_components}")
    x_mean, y_mean = X.mean(axis=0), float(y.mean())
    E, f = X - x_mean, y - y_mean
    W, P, q = [], [], []
    scale = np.linalg.norm(E.T @ (y - y_mean)) or 1.0
    for _ in range(n_components):
        w = E.T @ f
        norm = np.linalg.norm(w)
        if norm <= tol * scale:
            break
        w = w / norm
        t = E @ w
        tt = t @ t
        if tt <= 0.0:
            break
        p = E.T @ t / tt
        c = (f @ t) / tt
        E = E - np.outer(t, p)
        f = f - c * t
        W.append(w)
        P.append(p)
        q.append(c)
    if W:
        Wm, Pm = np.array(W).T, np.array(P).T
        coef = Wm @ np.linalg.solve(Pm.T @ Wm, np.array(q))
    else:
        coef = np.zeros(n_features)
    return LinearModel("PLSR", coef, float(y_mean - x_mean @ coef),
                       {"n_components": n_components, "extracted": len(W)})


@dataclass
class KNNModel:
    X: np.ndarray
    y: np.ndarray
    k: int
    kind: str = "KNN"

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            d = np.sqrt(((self.X - row) ** 2).sum(axis=1))
            nearest = np.argsort(d, kind="stable")[:self.k]  # stable: ties -> lower training index
            out[i] = self.y[nearest].mean()
        return out

    def to_dict(self) -> dict:
        return {"kind": "KNN", "hyperparameters": {"k": self.k}, "X": self.X.tolist(), "y": self.y.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "KNNModel":
        X = np.asarray(d["X"], dtype=float)
        return cls(X.reshape(len(d["X"]), -1), np.asarray(d["y"], dtype=float), int(d["hyperparameters"]["k"]))


def fit_knn(X, y, k: int) -> KNNModel:
    X, y = _as_xy(X, y)
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k must lie in [1, {X.shape[0]}], got {k}")
    return KNNModel(X.copy(), y.copy(), int(k))


@dataclass
class Tree:
    """Array-encoded binary regression tree; feature -1 marks a leaf."""

    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    value: list[float]

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        for i, row in enumerate(X):
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if row[self.feature[node]] <= self.threshold[node] else self.right[node]
            out[i] = self.value[node]
        return out

    def depth(self, node: int = 0) -> int:
        if self.feature[node] < 0:
            return 0
        return 1 + max(self.depth(self.left[node]), self.depth(self.right[node]))

    def to_dict(self) -> dict:
        return {"feature": self.feature, "threshold": self.threshold, "left": self.left,
                "right": self.right, "value": self.value}


def _best_split(X: np.ndarray, y: np.ndarray, features: np.ndarray) -> tuple[int, float, float]:
    """Feature, midpoint threshold and squared-error reduction of the best split."""
    n = len(y)
    total, total_sq = y.sum(), (y ** 2).sum()
    parent_sse = total_sq - total ** 2 / n
    best = (-1, 0.0, 0.0)
    for j in features:
        order = np.argsort(X[:, j], kind="stable")
        xs, ys = X[order, j], y[order]
        csum = np.cumsum(ys)[:-1]
        csq = np.cumsum(ys ** 2)[:-1]
        n_left = np.arange(1, n)
        valid = xs[1:] > xs[:-1]
        if not valid.any():
            continue
        sse_left = csq - csum ** 2 / n_left
        sse_right = (total_sq - csq) - (total - csum) ** 2 / (n - n_left)
        gain = np.where(valid, parent_sse - sse_left - sse_right, -np.inf)
        pos = int(np.argmax(gain))
        if gain[pos] > best[2] + 1e-12 * max(parent_sse, 1e-300):
            lo, hi = xs[pos], xs[pos + 1]
            thr = 0.5 * (lo + hi)
            if not lo <= thr < hi:  # adjacent floats: midpoint rounds onto hi
                thr = lo
            best = (int(j), float(thr), float(gain[pos]))
    return best


def fit_tree(X: np.ndarray, y: np.ndarray, max_depth: int, rng: np.random.Generator,
             max_features: float = 1.0) -> Tree:
    tree = Tree([], [], [], [], [])
    n_features = X.shape[1]
    n_try = max(1, int(round(max_features * n_features)))

    def grow(rows: np.ndarray, depth: int) -> int:
        node = len(tree.feature)
        tree.feature.append(-1)
        tree.threshold.append(0.0)
        tree.left.append(-1)
        tree.right.append(-1)
        tree.value.append(float(y[rows].mean()))
        if depth >= max_depth or len(rows) < 2:
            return node
        features = np.arange(n_features) if n_try >= n_features else np.sort(
            rng.choice(n_features, n_try, replace=False))
        j, thr, gain = _best_split(X[rows], y[rows], features)
        if j < 0 or gain <= 0.0:
            return node
        go_left = X[rows, j] <= thr
        tree.feature[node], tree.threshold[node] = j, thr
        tree.left[node] = grow(rows[go_left], depth + 1)
        tree.right[node] = grow(rows[~go_left], depth + 1)
        return node

    grow(np.arange(X.shape[0]), 0)
    return tree


@dataclass
class ForestModel:
    trees: list[Tree]
    hyperparameters: dict
    kind: str = "RF"

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.mean([t.predict(X) for t in self.trees], axis=0)

    def to_dict(self) -> dict:
        return {"kind": "RF", "hyperparameters": dict(self.hyperparameters),
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        return cls([Tree(**t) for t in d["trees"]], d["hyperparameters"])


def fit_rf(X, y, max_depth: int, n_trees: int = 100, seed: int = 0, max_features: float = 1.0) -> ForestModel:
    """Bagged variance-reduction trees, one independent seed stream per tree."""
    X, y = _as_xy(X, y)
    if X.shape[0] < 2:
        raise ValueError("random forest needs at least 2 rows")
    if max_depth < 1 or n_trees < 1:
        raise ValueError("max_depth and n_trees must be >= 1")
    if not 0.0 < max_features <= 1.0:
        raise ValueError("max_features must lie in (0, 1]")
    n = X.shape[0]
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        rows = rng.integers(0, n, size=n)
        trees.append(fit_tree(X[rows], y[rows], max_depth, rng, max_features))
    return ForestModel(trees, {"max_depth": max_depth, "n_trees": n_trees, "seed": seed,
                               "max_features": max_features})


@dataclass
class ANN1Model:
    params: deepnet.NetworkParams
    hyperparameters: dict
    losses: list[float] = field(default_factory=list)
    kind: str = "ANN1"

    def predict(self, X) -> np.ndarray:
        return deepnet.forward(self.params, np.atleast_2d(np.asarray(X, dtype=float)))[:, 0]

    def to_dict(self) -> dict:
        return {"kind": "ANN1", "hyperparameters": dict(self.hyperparameters), "network": self.params.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "ANN1Model":
        return cls(deepnet.NetworkParams.from_dict(d["network"]), d["hyperparameters"])


def ann1_spec(input_width: int, hidden_width: int, output_width: int = 1, seed: int = 0) -> deepnet.NetworkSpec:
    return deepnet.NetworkSpec((input_width, hidden_width, output_width), seed)


def fit_ann1(X, y, hidden_width: int, train_config: deepnet.TrainConfig, seed: int = 0) -> ANN1Model:
    X, y = _as_xy(X, y)
    spec = ann1_spec(X.shape[1], hidden_width, 1, seed)
    result = deepnet.train(spec, train_config, X, y.reshape(-1, 1))
    hp = {"hidden_width": hidden_width, "learning_rate": train_config.learning_rate,
          "momentum": train_config.momentum, "epochs": train_config.epochs, "seed": seed}
    return ANN1Model(result.params, hp, result.losses)


@dataclass(frozen=True)
class RegressorSpec:
    kind: str
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ValueError(f"unknown regressor kind {self.kind!r}; expected one of {KINDS}")
        required = {"PLSR": ("n_components",), "KNN": ("k",), "RF": ("max_depth",), "ANN1": ("hidden_width",)}
        for key in required.get(kind, ()):
            value = self.hyperparameters.get(key)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{kind} needs a positive integer {key!r}, got {value!r}")

    def fit(self, X, y):
        hp = self.hyperparameters
        if self.kind == "MLR":
            return fit_mlr(X, y)
        if self.kind == "PLSR":
            return fit_plsr(X, y, hp["n_components"])
        if self.kind == "KNN":
            return fit_knn(X, y, hp["k"])
        if self.kind == "RF":
            return fit_rf(X, y, hp["max_depth"], hp.get("n_trees", 100), hp.get("seed", 0),
                          hp.get("max_features", 1.0))
        cfg = deepnet.TrainConfig(hp.get("learning_rate", 0.01), hp.get("momentum", 0.8), hp.get("epochs", 900))
        return fit_ann1(X, y, hp["hidden_width"], cfg, hp.get("seed", 0))


def regressor_from_dict(d: dict):
    kind = d["kind"]
    if kind in ("MLR", "PLSR"):
        return LinearModel.from_dict(d)
    return {"KNN": KNNModel, "RF": ForestModel, "ANN1": ANN1Model}[kind].from_dict(d)


@dataclass
class MultiTargetWrapper:
    """One independently fitted regressor per target column."""

    spec: RegressorSpec
    models: list

    def predict(self, X) -> np.ndarray:
        return np.column_stack([m.predict(X) for m in self.models])

    @property
    def losses(self) -> list[list[float]]:
        return [getattr(m, "losses", []) for m in self.models]

    def to_dict(self) -> dict:
        return {"kind": self.spec.kind, "hyperparameters": dict(self.spec.hyperparameters),
                "models": [m.to_dict() for m in self.models]}

    @classmethod
    def from_dict(cls, d: dict) -> "MultiTargetWrapper":
        return cls(RegressorSpec(d["kind"], d["hyperparameters"]), [regressor_from_dict(m) for m in d["models"]])


def fit_multi(spec: RegressorSpec, X, Y, jobs: int = 1) -> MultiTargetWrapper:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    if Y.shape[1] < 1:
        raise ValueError("Y needs at least one column")
    if jobs > 1 and Y.shape[1] > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            models = list(pool.map(lambda j: spec.fit(X, Y[:, j]), range(Y.shape[1])))
    else:
        models = [spec.fit(X, Y[:, j]) for j in range(Y.shape[1])]
    return MultiTargetWrapper(spec, models)
