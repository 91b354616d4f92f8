"""Nearest-prototype distances: plain Minkowski and the importance-weighted form."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .schema import AttributeSpace

NAIVE = "naive"
IMPORTANCE = "importance"


@dataclass(frozen=True)
class MetricParams:
    p: float = 1.0
    lam: float = 0.1
    use_rc: bool = True

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError(f"Minkowski exponent must be positive, got {self.p}")
        if not self.lam >= 0:
            raise ValueError(f"penalty coefficient must be >= 0, got {self.lam}")


@dataclass(frozen=True, eq=False)
class ClassModel:
    class_id: str
    prototype: np.ndarray
    attr_weights: np.ndarray
    W: float
    joint_weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.W > 0:
            raise ValueError(f"class {self.class_id!r}: W must be positive, got {self.W}")


def rc_weights(space: AttributeSpace) -> np.ndarray:
    """1.0 for attributes estimated by regression, 0.5 for one-of-K attributes."""
    per_joint = np.array([0.5 if j.is_classification else 1.0 for j in space.joints])
    return per_joint[space.attribute_joint_index()]


def _root(s, p):
    return s if p == 1 else s ** (1.0 / p)


def naive_distance(a, v, space: AttributeSpace, params: MetricParams = MetricParams()) -> float:
    diff = np.abs(np.asarray(a, dtype=float) - np.asarray(v, dtype=float)) ** params.p
    if params.use_rc:
        diff = diff * rc_weights(space)
    return float(_root(diff.sum(), params.p))


def importance_distance(a, model: ClassModel, space: AttributeSpace,
                        params: MetricParams = MetricParams()) -> float:
    # 1/W multiplies the root of the weighted sum; the penalty lam/W is added after.
    diff = np.abs(np.asarray(a, dtype=float) - model.prototype) ** params.p
    s = float(np.sum(model.attr_weights * rc_weights(space) * diff))
    return _root(s, params.p) / model.W + params.lam / model.W


def prototype(vectors) -> np.ndarray:
    """Coordinate-wise mean of a non-empty collection of vectors."""
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("prototype needs a non-empty list of equal-length vectors")
    return arr.mean(axis=0)


def distance_matrix(queries, models, space: AttributeSpace, metric: str = IMPORTANCE,
                    params: MetricParams = MetricParams()) -> np.ndarray:
    """Distances of shape (n_queries, n_models); same values as the per-pair functions."""
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    protos = np.stack([m.prototype for m in models])
    diff = np.abs(q[:, None, :] - protos[None, :, :]) ** params.p
    rc = rc_weights(space)
    # Both metrics share one contraction so that exact ties survive rounding identically.
    if metric == NAIVE:
        w = rc if params.use_rc else np.ones_like(rc)
        weights = np.repeat(w[None, :], len(models), axis=0)
        return _root(np.einsum("ncd,cd->nc", diff, weights), params.p)
    if metric != IMPORTANCE:
        raise ValueError(f"unknown metric {metric!r}")
    weights = np.stack([m.attr_weights for m in models]) * rc
    W = np.array([m.W for m in models])
    s = np.einsum("ncd,cd->nc", diff, weights)
    return _root(s, params.p) / W + params.lam / W


def joint_terms(queries, prototypes, space: AttributeSpace, p: float = 1.0) -> np.ndarray:
    """Per-joint partial sums of ``w_rc * |a - v|**p``, shape (n_queries, n_models, n_joints).

    Any joint-level importance table can then be applied with one contraction,
    which keeps repeated random-importance trials cheap.
    """
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    protos = np.atleast_2d(np.asarray(prototypes, dtype=float))
    diff = (np.abs(q[:, None, :] - protos[None, :, :]) ** p) * rc_weights(space)
    owner = np.zeros((space.dim, len(space.joints)))
    owner[np.arange(space.dim), space.attribute_joint_index()] = 1.0
    return diff @ owner


def importance_from_terms(terms: np.ndarray, joint_weights: np.ndarray,
                          params: MetricParams = MetricParams()) -> np.ndarray:
    """Importance distances from :func:`joint_terms` and a (n_models, n_joints) table."""
    joint_weights = np.asarray(joint_weights, dtype=float)
    W = joint_weights.sum(axis=1)
    s = np.einsum("ncj,cj->nc", terms, joint_weights)
    return _root(s, params.p) / W + params.lam / W


def nearest(query, models, space: AttributeSpace, metric: str = IMPORTANCE,
            params: MetricParams = MetricParams()) -> tuple[str, float]:
    """Closest class; ties go to the model listed first."""
    if not models:
        raise ValueError("nearest needs at least one class model")
    d = distance_matrix(query, models, space, metric, params)[0]
    i = int(np.argmin(d))
    return models[i].class_id, float(d[i])
