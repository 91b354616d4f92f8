"""Attribute space: body joints, their value domains, and the flat vector layout."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CLASSIFICATION = "classification"
REGRESSION = "regression"

SIMPLEX_TOL = 1e-6

DIRECTION_LABELS = ("up", "down", "left", "right", "front")
HAND_LABELS = ("normal", "grasp", "pointing")
WAIST_LABELS = ("straight", "bend", "twist-L", "twist-R")


class SpaceError(ValueError):
    """Raised for malformed joint specifications or space files."""


@dataclass(frozen=True)
class JointSpec:
    name: str
    side: str = "center"
    kind: str = REGRESSION
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.side not in ("left", "right", "center"):
            raise SpaceError(f"joint {self.name!r}: bad side {self.side!r}")
        if self.kind == CLASSIFICATION:
            if len(self.labels) < 2:
                raise SpaceError(f"joint {self.name!r}: classification needs >= 2 labels")
            if len(set(self.labels)) != len(self.labels):
                raise SpaceError(f"joint {self.name!r}: duplicate labels")
        elif self.kind == REGRESSION:
            if self.labels:
                raise SpaceError(f"joint {self.name!r}: regression joints take no labels")
        else:
            raise SpaceError(f"joint {self.name!r}: unknown kind {self.kind!r}")

    @property
    def width(self) -> int:
        return len(self.labels) if self.kind == CLASSIFICATION else 1

    @property
    def is_classification(self) -> bool:
        return self.kind == CLASSIFICATION


@dataclass(frozen=True)
class AttributeSpace:
    """Ordered joints plus the start offset of each joint's block in the flat vector."""

    joints: tuple[JointSpec, ...]
    offsets: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        if not self.joints:
            raise SpaceError("attribute space needs at least one joint")
        names = [j.name for j in self.joints]
        if len(set(names)) != len(names):
            raise SpaceError("duplicate joint names")
        offsets, pos = [], 0
        for j in self.joints:
            offsets.append(pos)
            pos += j.width
        object.__setattr__(self, "offsets", tuple(offsets))

    @property
    def dim(self) -> int:
        return self.offsets[-1] + self.joints[-1].width

    @property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    def joint(self, name: str) -> JointSpec:
        return self.joints[self.index(name)]

    def index(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise KeyError(name)

    def block(self, name_or_index) -> slice:
        i = name_or_index if isinstance(name_or_index, int) else self.index(name_or_index)
        return slice(self.offsets[i], self.offsets[i] + self.joints[i].width)

    def joint_of(self, d: int) -> int:
        """Index of the joint owning flat attribute ``d``."""
        if not 0 <= d < self.dim:
            raise IndexError(d)
        return int(np.searchsorted(self.offsets, d, side="right") - 1)

    def attribute_joint_index(self) -> np.ndarray:
        """Length-D array mapping each attribute to its joint index."""
        return np.repeat(np.arange(len(self.joints)), [j.width for j in self.joints])

    def to_dict(self) -> dict:
        out = []
        for j in self.joints:
            entry = {"name": j.name, "side": j.side, "kind": j.kind}
            if j.is_classification:
                entry["labels"] = list(j.labels)
            out.append(entry)
        return {"joints": out}

    @classmethod
    def from_dict(cls, data: dict) -> "AttributeSpace":
        try:
            joints = [
                JointSpec(
                    name=e["name"],
                    side=e.get("side", "center"),
                    kind=e["kind"],
                    labels=tuple(e.get("labels", ())),
                )
                for e in data["joints"]
            ]
        except (KeyError, TypeError) as exc:
            raise SpaceError(f"malformed space description: {exc}") from exc
        return cls(tuple(joints))


def build_default_space() -> AttributeSpace:
    """The 14-joint, 33-attribute space used for full-body poses."""
    joints = [JointSpec("head", "center", CLASSIFICATION, DIRECTION_LABELS)]
    for side, tag in (("left", "L"), ("right", "R")):
        joints.append(JointSpec(f"shoulder_{tag}", side, CLASSIFICATION, DIRECTION_LABELS))
    for name in ("elbow", "wrist"):
        joints += [JointSpec(f"{name}_L", "left"), JointSpec(f"{name}_R", "right")]
    joints += [
        JointSpec("hand_L", "left", CLASSIFICATION, HAND_LABELS),
        JointSpec("hand_R", "right", CLASSIFICATION, HAND_LABELS),
        JointSpec("waist", "center", CLASSIFICATION, WAIST_LABELS),
    ]
    for name in ("hip", "knee"):
        joints += [JointSpec(f"{name}_L", "left"), JointSpec(f"{name}_R", "right")]
    return AttributeSpace(tuple(joints))


def vector_dim(space: AttributeSpace) -> int:
    return space.dim


@dataclass(frozen=True)
class Violation:
    """First problem found in an attribute vector."""

    reason: str  # "length", "range" or "simplex"
    joint: str | None = None
    index: int | None = None
    detail: str = ""

    def __str__(self):
        where = f" at {self.joint}" if self.joint else ""
        if self.index is not None:
            where += f" [{self.index}]"
        return f"{self.reason}{where}: {self.detail}"


def validate_vector(space: AttributeSpace, v, tol: float = SIMPLEX_TOL) -> Violation | None:
    """Return ``None`` if ``v`` is a valid attribute vector, else the first violation."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != space.dim:
        return Violation("length", detail=f"expected {space.dim} values, got {v.size}")
    for i, j in enumerate(space.joints):
        blk = v[space.block(i)]
        bad = np.flatnonzero(~((blk >= 0.0) & (blk <= 1.0)))
        if bad.size:
            d = space.offsets[i] + int(bad[0])
            return Violation("range", j.name, d, f"value {v[d]!r} outside [0, 1]")
        if j.is_classification and abs(blk.sum() - 1.0) > tol:
            return Violation("simplex", j.name, space.offsets[i], f"block sums to {blk.sum():.6g}")
    return None


def load_space(path) -> AttributeSpace:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SpaceError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return AttributeSpace.from_dict(data)


def save_space(space: AttributeSpace, path) -> None:
    Path(path).write_text(json.dumps(space.to_dict(), indent=2) + "\n")
