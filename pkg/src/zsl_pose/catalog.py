"""Pose definitions and per-pose joint importance, with file round-tripping."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .schema import AttributeSpace, SpaceError, build_default_space, load_space

FORMAT_VERSION = 1

# Column order of both tables is the default space's joint order.
_DEFINITION_TABLE = """
Standing          F D D 0   0   0.5 0.5 N N S   0   0   0   0
Sitting           F D D 0   0   0.5 0.5 N N S   0.5 0.5 0.5 0.5
Squatting         F D D 0   0   0.5 0.5 N N S   1   1   1   1
RaiseArmL         F U D 0   0   0.5 0.5 N N S   0   0   0   0
RaiseArmR         F D U 0   0   0.5 0.5 N N S   0   0   0   0
PointingL         F F D 0   0   0.5 0.5 P N S   0   0   0   0
PointingR         F D F 0   0   0.5 0.5 N P S   0   0   0   0
FoldingArm        F D D 0.5 0.5 0.5 0.5 N N S   0   0   0   0
DeepBreathing     F L R 0   0   0.5 0.5 N N S   0   0   0   0
StretchingUp      F U U 0   0   0   0   N N S   0   0   0   0
StretchingForward F F F 0   0   0   0   N N S   0   0   0   0
WaistBending      F D D 0   0   0.5 0.5 N N B   0   0   0   0
WaistTwistingL    L L L 0   0.5 0.5 0.5 N N TwL 0   0   0   0
WaistTwistingR    R R R 0.5 0   0.5 0.5 N N TwR 0   0   0   0
HeelToBackL       F D D 0   0   0.5 0.5 G N S   0   0   1   0
HeelToBackR       F D D 0   0   0.5 0.5 N G S   0   0   0   1
StretchingCalfL   F F F 0   0   0   0   N N S   0   0.3 0   0.3
StretchingCalfR   F F F 0   0   0   0   N N S   0.3 0   0.3 0
Boxing            F D D 1   1   0.5 0.5 G G S   0   0   0   0
BaseballHitting   L D D 0.5 0.5 0.5 0.5 G G S   0.5 0   0.5 0
Skiing            F D D 0.5 0.5 0.5 0.5 G G S   0.3 0.3 0.3 0.3
Thinking          F D D 0.5 1   0.5 0   N N S   1   1   0.5 0.5
"""

_IMPORTANCE_TABLE = """
Standing          1 1 1 1 1 1 1 1 1 1 1 1 1 1
Sitting           1 1 1 0 0 0 0 0 0 1 1 1 1 1
Squatting         1 1 1 0 0 0 0 0 0 1 1 1 1 1
RaiseArmL         1 1 1 1 0 1 0 1 0 1 1 1 1 1
RaiseArmR         1 1 1 0 1 0 1 0 1 1 1 1 1 1
PointingL         1 1 1 1 0 1 0 1 0 1 1 1 1 1
PointingR         1 1 1 0 1 0 1 0 1 1 1 1 1 1
FoldingArm        1 1 1 1 1 0 0 0 0 1 1 1 1 1
DeepBreathing     0 1 1 1 1 1 1 1 1 1 1 1 1 1
StretchingUp      0 1 1 1 1 1 1 1 1 1 1 1 1 1
StretchingForward 1 1 1 1 1 1 1 1 1 0 1 1 1 1
WaistBending      0 0 0 0 0 0 0 0 0 1 1 1 1 1
WaistTwistingL    1 0 0 0 0 0 0 0 0 1 1 1 1 1
WaistTwistingR    1 0 0 0 0 0 0 0 0 1 1 1 1 1
HeelToBackL       1 1 0 1 0 0 0 0 0 1 1 1 1 1
HeelToBackR       1 0 1 0 1 0 0 0 0 1 1 1 1 1
StretchingCalfL   0 1 1 1 1 1 1 1 1 1 1 1 1 1
StretchingCalfR   0 1 1 1 1 1 1 1 1 1 1 1 1 1
Boxing            0 1 1 1 1 1 1 1 1 1 1 1 1 1
BaseballHitting   0 0 0 1 1 0 0 1 1 1 1 1 1 1
Skiing            0 1 1 1 1 1 1 1 1 0 1 1 1 1
Thinking          0 1 1 0 1 0 0 0 0 0 1 1 1 1
"""

_ABBREV = {
    "head": {"U": "up", "D": "down", "L": "left", "R": "right", "F": "front"},
    "hand": {"N": "normal", "G": "grasp", "P": "pointing"},
    "waist": {"S": "straight", "B": "bend", "TwL": "twist-L", "TwR": "twist-R"},
}
_ABBREV["shoulder"] = _ABBREV["head"]


class CatalogError(ValueError):
    """Raised when a catalog file or catalog contents are invalid."""


@dataclass(frozen=True)
class PoseDefinition:
    """Per-joint status: a label string for classification joints, a float otherwise."""

    pose_id: str
    status: dict


@dataclass(frozen=True)
class ImportanceRow:
    pose_id: str
    weights: dict


@dataclass(frozen=True)
class PoseCatalog:
    space: AttributeSpace
    definitions: tuple[PoseDefinition, ...]
    importance: tuple[ImportanceRow, ...]
    space_ref: str = "default"

    def __post_init__(self):
        object.__setattr__(self, "definitions", tuple(self.definitions))
        object.__setattr__(self, "importance", tuple(self.importance))
        ids = [d.pose_id for d in self.definitions]
        if len(set(ids)) != len(ids):
            raise CatalogError("duplicate pose ids in definitions")
        imp_ids = [r.pose_id for r in self.importance]
        if len(set(imp_ids)) != len(imp_ids):
            raise CatalogError("duplicate pose ids in importance")
        if set(ids) != set(imp_ids):
            missing = sorted(set(ids) ^ set(imp_ids))
            raise CatalogError(f"definitions and importance disagree on poses: {missing}")
        for d in self.definitions:
            _check_definition(self.space, d)
        for r in self.importance:
            _check_importance(self.space, r)

    @property
    def pose_ids(self) -> list[str]:
        return [d.pose_id for d in self.definitions]

    def __len__(self):
        return len(self.definitions)

    def definition(self, pose_id: str) -> PoseDefinition:
        for d in self.definitions:
            if d.pose_id == pose_id:
                return d
        raise KeyError(pose_id)

    def importance_row(self, pose_id: str) -> ImportanceRow:
        for r in self.importance:
            if r.pose_id == pose_id:
                return r
        raise KeyError(pose_id)

    def importance_matrix(self) -> np.ndarray:
        """Joint-level weights, one row per pose in catalog order."""
        names = self.space.joint_names
        return np.array(
            [[self.importance_row(p).weights[n] for n in names] for p in self.pose_ids],
            dtype=float,
        )


def _check_definition(space: AttributeSpace, d: PoseDefinition) -> None:
    where = f"definition {d.pose_id!r}"
    _check_joint_keys(space, d.status, where)
    for j in space.joints:
        value = d.status[j.name]
        if j.is_classification:
            if value not in j.labels:
                raise CatalogError(f"{where}: unknown label {value!r} for joint {j.name!r}")
        else:
            if isinstance(value, (bool, str)) or not 0.0 <= float(value) <= 1.0:
                raise CatalogError(f"{where}: joint {j.name!r} needs a value in [0, 1], got {value!r}")


def _check_importance(space: AttributeSpace, r: ImportanceRow) -> None:
    where = f"importance {r.pose_id!r}"
    _check_joint_keys(space, r.weights, where)
    for name, w in r.weights.items():
        if isinstance(w, (bool, str)) or not float(w) >= 0.0:
            raise CatalogError(f"{where}: joint {name!r} weight must be a real >= 0, got {w!r}")
    if sum(float(w) for w in r.weights.values()) <= 0.0:
        raise CatalogError(f"{where}: all-zero importance row")


def _check_joint_keys(space: AttributeSpace, mapping: dict, where: str) -> None:
    names = set(space.joint_names)
    unknown = sorted(set(mapping) - names)
    if unknown:
        raise CatalogError(f"{where}: unknown joint {unknown[0]!r}")
    missing = [n for n in space.joint_names if n not in mapping]
    if missing:
        raise CatalogError(f"{where}: missing joint {missing[0]!r}")


def _joint_family(name: str) -> str:
    return name.split("_")[0]


def _parse_tables(space: AttributeSpace):
    names = space.joint_names
    definitions = []
    for line in _DEFINITION_TABLE.strip().splitlines():
        pose, *cells = line.split()
        status = {}
        for joint, cell in zip(names, cells):
            if space.joint(joint).is_classification:
                status[joint] = _ABBREV[_joint_family(joint)][cell]
            else:
                status[joint] = float(cell)
        definitions.append(PoseDefinition(pose, status))
    importance = []
    for line in _IMPORTANCE_TABLE.strip().splitlines():
        pose, *cells = line.split()
        importance.append(ImportanceRow(pose, {j: float(c) for j, c in zip(names, cells)}))
    return definitions, importance


def default_catalog() -> PoseCatalog:
    """The 22 HDPoseDS poses with their definitions and joint importance."""
    space = build_default_space()
    definitions, importance = _parse_tables(space)
    return PoseCatalog(space, definitions, importance)


def catalog_to_dict(catalog: PoseCatalog) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "space_ref": catalog.space_ref,
        "poses": catalog.pose_ids,
        "definitions": {d.pose_id: dict(d.status) for d in catalog.definitions},
        "importance": {r.pose_id: dict(r.weights) for r in catalog.importance},
    }


def save_catalog(catalog: PoseCatalog, path) -> None:
    Path(path).write_text(json.dumps(catalog_to_dict(catalog), indent=2) + "\n")


def load_catalog(path) -> PoseCatalog:
    """Load a catalog file; ``space_ref`` is ``"default"`` or a path relative to the file."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise CatalogError(f"{path}: top level must be an object")
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise CatalogError(f"{path}: unsupported format_version {version!r}")

    space_ref = data.get("space_ref", "default")
    if isinstance(data.get("space"), dict):
        space = _space_from(data["space"], path)
    elif space_ref == "default":
        space = build_default_space()
    else:
        try:
            space = load_space(path.parent / space_ref)
        except (OSError, SpaceError) as exc:
            raise CatalogError(f"{path}: space_ref {space_ref!r}: {exc}") from exc

    for key in ("definitions", "importance"):
        if not isinstance(data.get(key), dict):
            raise CatalogError(f"{path}: field {key!r} missing or not an object")
    order = data.get("poses") or list(data["definitions"])
    try:
        definitions = [PoseDefinition(p, dict(data["definitions"][p])) for p in order]
        importance = [ImportanceRow(p, dict(data["importance"][p])) for p in order]
    except KeyError as exc:
        raise CatalogError(f"{path}: pose {exc.args[0]!r} missing from definitions or importance") from exc
    if set(order) != set(data["definitions"]) or set(order) != set(data["importance"]):
        raise CatalogError(f"{path}: 'poses', 'definitions' and 'importance' list different poses")
    try:
        return PoseCatalog(space, definitions, importance, space_ref=space_ref)
    except CatalogError as exc:
        raise CatalogError(f"{path}: {exc}") from exc


def _space_from(data, path):
    try:
        return AttributeSpace.from_dict(data)
    except SpaceError as exc:
        raise CatalogError(f"{path}: field 'space': {exc}") from exc


def encode_definition(space: AttributeSpace, definition: PoseDefinition) -> np.ndarray:
    """One-of-K blocks for classification joints, scalars copied for regression joints."""
    v = np.zeros(space.dim)
    for i, j in enumerate(space.joints):
        value = definition.status[j.name]
        if j.is_classification:
            v[space.offsets[i] + j.labels.index(value)] = 1.0
        else:
            v[space.offsets[i]] = float(value)
    return v


def expand_importance(space: AttributeSpace, row: ImportanceRow) -> tuple[np.ndarray, float]:
    """Copy each joint's weight onto its attributes.

    Returns the length-D attribute weights and the normaliser ``W``, which is the
    sum of the *joint* weights (number of relevant joints when weights are binary).
    """
    missing = [n for n in space.joint_names if n not in row.weights]
    if missing:
        raise CatalogError(f"importance {row.pose_id!r}: missing joint {missing[0]!r}")
    joint_w = np.array([float(row.weights[n]) for n in space.joint_names])
    total = float(joint_w.sum())
    if total <= 0.0:
        raise CatalogError(f"importance {row.pose_id!r}: all-zero importance row")
    return joint_w[space.attribute_joint_index()], total
