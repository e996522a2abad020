"""Trained model artifacts: encoding tables + scaling + regressor, saved as one JSON document."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import baselines, deepnet
from .data import (
    OFDF, SRMT, CategoryCodes, Dataset, DatasetSchema, ScalingParams, SchemaError, apply_scaling,
    encode_categoricals, fit_scaling,
)
from .splitting import SplitAssignment

ARTIFACT_VERSION = 1

MODEL_NAMES = ("mlr", "plsr", "knn", "rf", "ann1", "dnn-ofdf", "dnn-srmt")

# per-task baseline settings: PLSR components, ANN hidden nodes, RF depth, k-NN neighbours
TASK_DEFAULTS = {
    OFDF: {"plsr": {"n_components": 8}, "ann1": {"hidden_width": 80}, "rf": {"max_depth": 3}, "knn": {"k": 5}},
    SRMT: {"plsr": {"n_components": 10}, "ann1": {"hidden_width": 60}, "rf": {"max_depth": 5}, "knn": {"k": 3}},
}
TASK_PRESET = {OFDF: "OFDF-DNN", SRMT: "SRMT-DNN"}

# hyperparameter names each model accepts
ACCEPTED = {
    "mlr": (),
    "plsr": ("n_components",),
    "knn": ("k",),
    "rf": ("max_depth", "n_trees", "max_features"),
    "ann1": ("hidden_width", "epochs", "learning_rate", "momentum"),
    "dnn-ofdf": ("hidden_layers", "epochs", "learning_rate", "momentum"),
    "dnn-srmt": ("hidden_layers", "epochs", "learning_rate", "momentum"),
}


def resolve_hyperparameters(name: str, task_kind: str, overrides: Mapping | None = None, seed: int = 0) -> dict:
    """Task defaults merged with user overrides (``None`` values are ignored)."""
    name = name.lower()
    if name not in MODEL_NAMES:
        raise ValueError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
    hp = dict(TASK_DEFAULTS[task_kind].get(name, {}))
    if name == "ann1":
        _, cfg = deepnet.preset(TASK_PRESET[task_kind], 1)
        hp.update(epochs=cfg.epochs, learning_rate=cfg.learning_rate, momentum=cfg.momentum)
    if name == "rf":
        hp.update(n_trees=100, max_features=1.0)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in ACCEPTED[name]:
            raise ValueError(f"model {name!r} does not take hyperparameter {key!r}")
        hp[key] = value
    if name in ("rf", "ann1", "dnn-ofdf", "dnn-srmt"):
        hp["seed"] = seed
    return hp


@dataclass
class ModelArtifact:
    name: str
    schema: DatasetSchema
    codes: CategoryCodes
    scaling: ScalingParams
    hyperparameters: dict
    regressor: object
    losses: list = field(default_factory=list, repr=False)

    def _features(self, ds: Dataset) -> np.ndarray:
        if ds.schema.feature_names != self.schema.feature_names:
            raise SchemaError(f"dataset features {ds.schema.feature_names} do not match the model's "
                              f"{self.schema.feature_names}")
        return apply_scaling(encode_categoricals(ds, self.codes), self.scaling).encoded

    def predict_scaled(self, ds: Dataset) -> np.ndarray:
        X = self._features(ds)
        if isinstance(self.regressor, deepnet.NetworkParams):
            return deepnet.forward(self.regressor, X)
        return self.regressor.predict(X)

    def predict(self, ds: Dataset) -> np.ndarray:
        """Predictions in original target units, shape (records, targets)."""
        return self.scaling.invert_targets(self.predict_scaled(ds))

    def to_dict(self) -> dict:
        if isinstance(self.regressor, deepnet.NetworkParams):
            params = {"network": self.regressor.to_dict()}
        else:
            params = self.regressor.to_dict()
        return {
            "version": ARTIFACT_VERSION,
            "name": self.name,
            "hyperparameters": self.hyperparameters,
            "schema": self.schema.to_dict(),
            "encoding": self.codes.to_dict(),
            "scaling": self.scaling.to_dict(),
            "params": params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelArtifact":
        if d.get("version") != ARTIFACT_VERSION:
            raise ValueError(f"unsupported model artifact version {d.get('version')!r}")
        params = d["params"]
        if d["name"].startswith("dnn"):
            regressor = deepnet.NetworkParams.from_dict(params["network"])
        else:
            regressor = baselines.MultiTargetWrapper.from_dict(params)
        return cls(d["name"], DatasetSchema.from_dict(d["schema"]), CategoryCodes.from_dict(d["encoding"]),
                   ScalingParams.from_dict(d["scaling"]), d["hyperparameters"], regressor)

    @classmethod
    def load(cls, path: str | Path) -> "ModelArtifact":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def train_model(name: str, ds: Dataset, split: SplitAssignment, overrides: Mapping | None = None, seed: int = 0,
                one_hot: bool = False, jobs: int = 1) -> ModelArtifact:
    """Fit one model on the training rows of ``split``.

    Encoding tables come from the whole file (labels only, no targets);
    scaling comes from the training rows alone.
    """
    name = name.lower()
    task = ds.schema.task_kind
    hp = resolve_hyperparameters(name, task, overrides, seed)
    enc = encode_categoricals(ds, one_hot=one_hot)
    train = list(split.train)
    scaling = fit_scaling(enc, train)
    X = apply_scaling(enc, scaling).encoded[train]
    Y = scaling.scale_targets(enc.targets[train])
    if name.startswith("dnn"):
        spec, cfg = deepnet.preset(TASK_PRESET[OFDF if name == "dnn-ofdf" else SRMT], X.shape[1], Y.shape[1],
                                   hidden_layers=hp.get("hidden_layers"), seed=seed)
        cfg = deepnet.TrainConfig(hp.get("learning_rate", cfg.learning_rate), hp.get("momentum", cfg.momentum),
                                  hp.get("epochs", cfg.epochs))
        hp.update(layer_widths=list(spec.layer_widths), epochs=cfg.epochs, learning_rate=cfg.learning_rate,
                  momentum=cfg.momentum)
        result = deepnet.train(spec, cfg, X, Y)
        return ModelArtifact(name, ds.schema, enc.codes, scaling, hp, result.params, [result.losses])
    kind = {"mlr": "MLR", "plsr": "PLSR", "knn": "KNN", "rf": "RF", "ann1": "ANN1"}[name]
    wrapper = baselines.fit_multi(baselines.RegressorSpec(kind, hp), X, Y, jobs=jobs)
    return ModelArtifact(name, ds.schema, enc.codes, scaling, hp, wrapper,
                         [l for l in wrapper.losses if l])
