"""Zero-shot pose classifiers: plain NN, NN with attribute importance, random importance, DAP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import ImportanceRow, PoseCatalog, encode_definition, expand_importance
from .distance import (
    IMPORTANCE,
    NAIVE,
    ClassModel,
    MetricParams,
    distance_matrix,
    prototype,
)
from .schema import AttributeSpace

NN_NAIVE = "nn_naive"
NN_AI = "nn_ai"
NN_RANDOM_AI = "nn_random_ai"
DAP = "dap"
METHODS = (NN_NAIVE, NN_AI, NN_RANDOM_AI, DAP)

DAP_FLOOR = 1e-12


@dataclass(frozen=True)
class RandomAiConfig:
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True, eq=False)
class TrainedZslModel:
    space: AttributeSpace
    models: tuple[ClassModel, ...]
    method: str
    params: MetricParams = MetricParams()

    @property
    def class_ids(self) -> list[str]:
        return [m.class_id for m in self.models]


def _check_method(method):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def class_prototypes(vectors, labels, classes) -> dict:
    """Mean vector per class label, for the labels listed in ``classes``."""
    vectors = np.asarray(vectors, dtype=float)
    labels = np.asarray(labels)
    out = {}
    for c in classes:
        mask = labels == c
        if not mask.any():
            raise ValueError(f"seen class {c!r} has no training instances")
        out[c] = prototype(vectors[mask])
    return out


def build_models(catalog: PoseCatalog, prototypes: dict, method: str,
                 importance=None) -> tuple[ClassModel, ...]:
    """One model per catalog pose, in catalog order, weighted according to ``method``.

    ``importance`` is a (n_poses, n_joints) table used by ``nn_random_ai``.
    """
    _check_method(method)
    space = catalog.space
    n_joints = len(space.joints)
    if method == NN_RANDOM_AI:
        if importance is None:
            raise ValueError("nn_random_ai needs an importance table")
        importance = np.asarray(importance, dtype=float)
        if importance.shape != (len(catalog), n_joints):
            raise ValueError(f"importance table must have shape {(len(catalog), n_joints)}")
    models = []
    for i, pose in enumerate(catalog.pose_ids):
        if method == NN_AI:
            row = catalog.importance_row(pose)
        elif method == NN_RANDOM_AI:
            row = ImportanceRow(pose, dict(zip(space.joint_names, importance[i])))
        else:
            row = ImportanceRow(pose, dict.fromkeys(space.joint_names, 1.0))
        attr_w, W = expand_importance(space, row)
        joint_w = np.array([row.weights[n] for n in space.joint_names], dtype=float)
        models.append(ClassModel(pose, np.asarray(prototypes[pose], dtype=float), attr_w, W, joint_w))
    return tuple(models)


def fit(space: AttributeSpace, catalog: PoseCatalog, vectors, labels, unseen_class: str,
        method: str, importance=None, params: MetricParams = MetricParams()) -> TrainedZslModel:
    """Seen classes become mean-vector prototypes; the unseen class uses its encoded definition.

    DAP ignores the prototypes and scores every class against its definition.
    """
    _check_method(method)
    if unseen_class not in catalog.pose_ids:
        raise KeyError(unseen_class)
    labels = np.asarray(labels)
    if np.any(labels == unseen_class):
        raise ValueError(f"training data contains instances of unseen class {unseen_class!r}")
    seen = [p for p in catalog.pose_ids if p != unseen_class]
    protos = class_prototypes(vectors, labels, seen)
    protos[unseen_class] = encode_definition(space, catalog.definition(unseen_class))
    if method == DAP:
        protos = {p: encode_definition(space, catalog.definition(p)) for p in catalog.pose_ids}
    return TrainedZslModel(space, build_models(catalog, protos, method, importance), method, params)


def _dap_log_terms(queries, models, space: AttributeSpace) -> np.ndarray:
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    out = np.zeros((q.shape[0], len(models)))
    for c, m in enumerate(models):
        for i, j in enumerate(space.joints):
            blk = space.block(i)
            if j.is_classification:
                k = blk.start + int(np.argmax(m.prototype[blk]))
                term = q[:, k]
            else:
                term = 1.0 - np.abs(q[:, blk.start] - m.prototype[blk.start])
            out[:, c] += np.log(np.maximum(term, DAP_FLOOR))
    return out


def dap_score(query, model: ClassModel, space: AttributeSpace) -> float:
    """Product over joints of the likelihood the query gives the class's defined status.

    A classification joint contributes the query's mass on the defined label; a regression
    joint contributes ``1 - |a - v|``. Each factor is floored at ``DAP_FLOOR``.
    """
    return float(np.exp(_dap_log_terms(query, [model], space)[0, 0]))


def dap_log_scores(queries, models, space: AttributeSpace) -> np.ndarray:
    return _dap_log_terms(queries, models, space)


def predict_many(model: TrainedZslModel, queries) -> np.ndarray:
    """Predicted class index (into ``model.models``) for each query row."""
    if model.method == DAP:
        return np.argmax(dap_log_scores(queries, model.models, model.space), axis=1)
    metric = NAIVE if model.method == NN_NAIVE else IMPORTANCE
    d = distance_matrix(queries, model.models, model.space, metric, model.params)
    return np.argmin(d, axis=1)


def predict(model: TrainedZslModel, query) -> str:
    return model.models[int(predict_many(model, query)[0])].class_id


def random_importance_table(catalog: PoseCatalog, rng: np.random.Generator) -> np.ndarray:
    """Fair 0/1 coin per (pose, joint); rows that come out all zero are redrawn."""
    n_poses, n_joints = len(catalog), len(catalog.space.joints)
    table = rng.integers(0, 2, size=(n_poses, n_joints)).astype(float)
    for i in range(n_poses):
        while not table[i].any():
            table[i] = rng.integers(0, 2, size=n_joints)
    return table
