"""Synthetic attribute vectors with per-pose intra-class variation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .catalog import PoseCatalog, encode_definition
from .schema import AttributeSpace

# Joints observed to vary between subjects for each pose. For one-sided poses the
# variation is in the arm that is not performing the pose.
_FREE_JOINTS = {
    "Standing": (),
    "Sitting": ("elbow_L", "elbow_R", "hand_L", "hand_R"),
    "Squatting": ("elbow_L", "elbow_R", "hand_L", "hand_R"),
    "RaiseArmL": ("elbow_R", "hand_R"),
    "RaiseArmR": ("elbow_L", "hand_L"),
    "PointingL": ("elbow_R", "hand_R"),
    "PointingR": ("elbow_L", "hand_L"),
    "FoldingArm": ("wrist_L", "wrist_R", "hand_L", "hand_R"),
    "DeepBreathing": ("head",),
    "StretchingUp": ("head",),
    "StretchingForward": ("waist",),
    "WaistBending": (),
    "WaistTwistingL": ("head", "shoulder_L", "shoulder_R", "elbow_L", "elbow_R"),
    "WaistTwistingR": ("head", "shoulder_L", "shoulder_R", "elbow_L", "elbow_R"),
    "HeelToBackL": ("shoulder_R", "elbow_R", "hand_R"),
    "HeelToBackR": ("shoulder_L", "elbow_L", "hand_L"),
    "StretchingCalfL": ("head",),
    "StretchingCalfR": ("head",),
    "Boxing": ("head",),
    "BaseballHitting": ("head",),
    "Skiing": ("head",),
    "Thinking": ("head", "wrist_R", "hand_L", "hand_R"),
}


@dataclass(frozen=True)
class VariationSpec:
    free_joints: dict = field(default_factory=dict)
    sigma: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")

    def check(self, space: AttributeSpace) -> None:
        names = set(space.joint_names)
        for pose, joints in self.free_joints.items():
            unknown = set(joints) - names
            if unknown:
                raise ValueError(f"pose {pose!r}: unknown free joints {sorted(unknown)}")


def default_variation_spec(sigma: float = 0.05, seed: int = 0) -> VariationSpec:
    return VariationSpec({k: tuple(v) for k, v in _FREE_JOINTS.items()}, sigma, seed)


def _perturb(x: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    # Uniform noise on [-s, s] with s = min(sigma, x, 1 - x): stays in [0, 1] and is unbiased.
    half = np.minimum(sigma, np.minimum(x, 1.0 - x))
    return x + half * rng.uniform(-1.0, 1.0, size=x.shape)


def synth_dataset(catalog: PoseCatalog, spec: VariationSpec, n_per_class: int,
                  rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``n_per_class`` noisy attribute vectors per pose.

    Each instance starts from the pose's encoded definition. Free joints are replaced
    by a uniformly random status (one-hot corner or uniform scalar). Every attribute
    then gets bounded, mean-preserving uniform noise, and one-of-K blocks are
    renormalised.

    Returns ``(vectors, labels)`` ordered by pose, then instance.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    space = catalog.space
    spec.check(space)
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    vectors, labels = [], []
    for pose in catalog.pose_ids:
        base = encode_definition(space, catalog.definition(pose))
        x = np.repeat(base[None, :], n_per_class, axis=0)
        for name in spec.free_joints.get(pose, ()):
            j = space.joint(name)
            blk = space.block(name)
            if j.is_classification:
                x[:, blk] = np.eye(j.width)[rng.integers(0, j.width, size=n_per_class)]
            else:
                x[:, blk.start] = rng.uniform(0.0, 1.0, size=n_per_class)
        if spec.sigma > 0:
            x = _perturb(x, spec.sigma, rng)
            for i, j in enumerate(space.joints):
                if j.is_classification:
                    blk = space.block(i)
                    x[:, blk] /= x[:, blk].sum(axis=1, keepdims=True)
        vectors.append(x)
        labels += [pose] * n_per_class
    return np.concatenate(vectors), np.array(labels)


def write_vectors_csv(vectors, labels, path, space: AttributeSpace | None = None) -> None:
    """Attribute-vector CSV: a ``label`` column followed by one column per attribute."""
    vectors = np.asarray(vectors, dtype=float)
    header = ["label"] + (_attribute_names(space) if space else [f"a{d}" for d in range(vectors.shape[1])])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for label, row in zip(labels, vectors):
            w.writerow([label] + [repr(float(x)) for x in row])


def read_vectors_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "label":
            raise ValueError(f"{path}: expected a header starting with 'label'")
        labels, rows = [], []
        for lineno, r in enumerate(reader, start=2):
            if not r:
                continue
            if len(r) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} cells, got {len(r)}")
            try:
                rows.append([float(x) for x in r[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            labels.append(r[0])
    return np.array(rows, dtype=float).reshape(len(rows), len(header) - 1), np.array(labels)


def _attribute_names(space: AttributeSpace) -> list[str]:
    names = []
    for j in space.joints:
        names += [f"{j.name}:{lab}" for lab in j.labels] if j.is_classification else [j.name]
    return names
