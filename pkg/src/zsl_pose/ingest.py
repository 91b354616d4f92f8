"""Raw IMU recordings, sliding windows, summary features and the per-joint estimator contract."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .schema import CLASSIFICATION, AttributeSpace, JointSpec

CHANNELS = ("acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z",
            "quat_w", "quat_x", "quat_y", "quat_z")
QUAT_SLICE = slice(6, 10)
QUAT_TOL = 5e-2

WINDOW_SIZE = 60
WINDOW_STRIDE = 30

_FINGERS = [f"finger_{s}{i}" for s in "LR" for i in range(1, 8)]
DEFAULT_IMUS = (
    ["head", "shoulder_L", "shoulder_R", "upper_arm_L", "upper_arm_R",
     "lower_arm_L", "lower_arm_R", "hand_L", "hand_R"]
    + _FINGERS
    + ["spine", "hip", "upper_leg_L", "upper_leg_R", "lower_leg_L", "lower_leg_R",
       "foot_L", "foot_R"]
)

DEFAULT_JOINT_MAP = {
    "head": ["head"],
    "shoulder_L": ["shoulder_L", "upper_arm_L"],
    "shoulder_R": ["shoulder_R", "upper_arm_R"],
    "elbow_L": ["upper_arm_L", "lower_arm_L"],
    "elbow_R": ["upper_arm_R", "lower_arm_R"],
    "wrist_L": ["lower_arm_L", "hand_L"],
    "wrist_R": ["lower_arm_R", "hand_R"],
    "hand_L": ["hand_L"] + [f for f in _FINGERS if f.startswith("finger_L")],
    "hand_R": ["hand_R"] + [f for f in _FINGERS if f.startswith("finger_R")],
    "waist": ["spine", "hip"],
    "hip_L": ["hip", "upper_leg_L"],
    "hip_R": ["hip", "upper_leg_R"],
    "knee_L": ["upper_leg_L", "lower_leg_L"],
    "knee_R": ["upper_leg_R", "lower_leg_R"],
}


class RecordingError(ValueError):
    """Raised for unreadable or malformed raw recordings."""


class TrainingError(RuntimeError):
    """Raised when estimator training diverges."""


@dataclass(frozen=True)
class ImuLayout:
    """Column layout of a raw recording file: IMUs in order, each with the same channels."""

    imus: tuple = tuple(DEFAULT_IMUS)
    channels: tuple = CHANNELS
    header: bool = False

    @property
    def n_columns(self) -> int:
        return len(self.imus) * len(self.channels)

    @property
    def column_names(self) -> list[str]:
        return [f"{imu}.{ch}" for imu in self.imus for ch in self.channels]

    def channel_map(self) -> dict:
        n = len(self.channels)
        return {imu: slice(i * n, (i + 1) * n) for i, imu in enumerate(self.imus)}

    def to_dict(self) -> dict:
        n = len(self.channels)
        return {
            "imus": list(self.imus),
            "channels": list(self.channels),
            "header": self.header,
            "offsets": {imu: i * n for i, imu in enumerate(self.imus)},
            "columns": self.column_names,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ImuLayout":
        layout = cls(tuple(data["imus"]), tuple(data.get("channels", CHANNELS)), bool(data.get("header", False)))
        offsets = data.get("offsets")
        if offsets and offsets != layout.to_dict()["offsets"]:
            raise RecordingError("layout offsets must be contiguous in IMU order")
        return layout


def load_layout(path) -> ImuLayout:
    return ImuLayout.from_dict(json.loads(Path(path).read_text()))


def load_joint_map(path) -> dict:
    return {k: list(v) for k, v in json.loads(Path(path).read_text()).items()}


@dataclass(eq=False)
class Recording:
    subject_id: str
    pose_id: str
    samples: np.ndarray
    channel_map: dict
    source: str = ""

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]


def read_recording(path, layout: ImuLayout = ImuLayout(), subject_id: str | None = None,
                   pose_id: str | None = None, check_quaternions: bool = True) -> Recording:
    """Parse one CSV recording. ``subject_id``/``pose_id`` default to ``<subject>_<pose>.csv``."""
    path = Path(path)
    if subject_id is None or pose_id is None:
        stem_subject, _, stem_pose = path.stem.rpartition("_")
        subject_id = subject_id or stem_subject
        pose_id = pose_id or stem_pose
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if layout.header and rows:
        rows = rows[1:]
    if not rows:
        raise RecordingError(f"{path}: empty file")
    first_line = 2 if layout.header else 1
    data = np.empty((len(rows), layout.n_columns))
    for i, row in enumerate(rows):
        if len(row) != layout.n_columns:
            raise RecordingError(
                f"{path}:{i + first_line}: expected {layout.n_columns} columns, got {len(row)}")
        try:
            data[i] = [float(x) for x in row]
        except ValueError:
            col = next(c for c, x in enumerate(row) if not _is_float(x))
            raise RecordingError(
                f"{path}:{i + first_line}: non-numeric cell {row[col]!r} in column {col + 1}") from None
    cmap = layout.channel_map()
    if check_quaternions and tuple(layout.channels[QUAT_SLICE]) == CHANNELS[QUAT_SLICE]:
        for imu, sl in cmap.items():
            q = data[:, sl][:, QUAT_SLICE]
            bad = np.flatnonzero(np.abs(np.linalg.norm(q, axis=1) - 1.0) > QUAT_TOL)
            if bad.size:
                raise RecordingError(
                    f"{path}:{bad[0] + first_line}: quaternion of {imu} is not unit norm")
    return Recording(subject_id, pose_id, data, cmap, str(path))


def _is_float(x: str) -> bool:
    try:
        float(x)
    except ValueError:
        return False
    return True


@dataclass(eq=False)
class Window:
    data: np.ndarray  # (size, M)
    source: str
    offset: int


def window_count(n_samples: int, size: int = WINDOW_SIZE, stride: int = WINDOW_STRIDE) -> int:
    if n_samples < size:
        return 0
    return (n_samples - size) // stride + 1


def sliding_windows(rec: Recording, size: int = WINDOW_SIZE, stride: int = WINDOW_STRIDE,
                    joint_map: dict | None = None) -> dict:
    """Cut ``rec`` into windows and slice each joint's IMU columns: ``{joint: [Window, ...]}``."""
    if size < 1 or stride < 1:
        raise ValueError("window size and stride must be positive")
    joint_map = DEFAULT_JOINT_MAP if joint_map is None else joint_map
    cols = {j: _joint_columns(rec.channel_map, imus, j) for j, imus in joint_map.items()}
    n = window_count(rec.n_samples, size, stride)
    if n == 0:
        warnings.warn(f"{rec.source or 'recording'}: {rec.n_samples} samples is shorter than one window")
    out = {j: [] for j in joint_map}
    for w in range(n):
        start = w * stride
        chunk = rec.samples[start:start + size]
        for j, c in cols.items():
            out[j].append(Window(chunk[:, c], rec.source, start))
    return out


def _joint_columns(channel_map, imus, joint):
    try:
        return np.concatenate([np.arange(channel_map[imu].start, channel_map[imu].stop) for imu in imus])
    except KeyError as exc:
        raise RecordingError(f"joint {joint!r} uses unknown IMU {exc.args[0]!r}") from None


def window_features(w) -> np.ndarray:
    """Per-channel mean and population std, concatenated, followed by a constant 1."""
    x = np.asarray(getattr(w, "data", w), dtype=float)
    return np.concatenate([x.mean(axis=0), x.std(axis=0), [1.0]])


def stack_features(windows) -> np.ndarray:
    return np.stack([window_features(w) for w in windows])


# ---------------------------------------------------------------- reference estimator


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.05
    momentum: float = 0.9
    epochs: int = 100
    batch: int = 32
    seed: int = 0


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(eq=False)
class LinearEstimator:
    """Linear map on standardised window features, squashed by softmax or sigmoid.

    The last feature is the constant bias input and is left unscaled.
    """

    joint: str
    kind: str
    labels: tuple
    weights: np.ndarray  # (n_features, n_outputs)
    center: np.ndarray
    scale: np.ndarray
    config: TrainConfig = field(default_factory=TrainConfig)
    loss_history: list = field(default_factory=list)

    @property
    def n_outputs(self) -> int:
        return self.weights.shape[1]

    def _inputs(self, features):
        f = np.atleast_2d(np.asarray(features, dtype=float))
        return (f - self.center) / self.scale

    def predict_features(self, features) -> np.ndarray:
        z = self._inputs(features) @ self.weights
        return _softmax(z) if self.kind == CLASSIFICATION else _sigmoid(z)

    def __call__(self, windows) -> np.ndarray:
        return self.predict_features(stack_features(windows))


def _standardiser(features):
    center = features.mean(axis=0)
    scale = features.std(axis=0)
    scale[scale < 1e-12] = 1.0
    center[-1], scale[-1] = 0.0, 1.0
    return center, scale


def train_reference_estimator(features, targets, joint: JointSpec,
                              config: TrainConfig = TrainConfig()) -> LinearEstimator:
    """Fit a linear softmax (cross entropy) or sigmoid (mean absolute error) model.

    ``targets`` are label strings for classification joints and values in [0, 1] for
    regression joints. Updates follow ``v = momentum * v - lr * grad; w += v``.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a non-empty (n_samples, n_features) array")
    if joint.is_classification:
        index = {lab: i for i, lab in enumerate(joint.labels)}
        try:
            y = np.array([index[t] for t in targets])
        except KeyError as exc:
            raise ValueError(f"joint {joint.name!r}: unknown label {exc.args[0]!r}") from None
        n_out = len(joint.labels)
    else:
        y = np.asarray(targets, dtype=float)
        n_out = 1
    if len(y) != len(X):
        raise ValueError("features and targets differ in length")

    center, scale = _standardiser(X)
    Z = (X - center) / scale
    W = np.zeros((X.shape[1], n_out))
    V = np.zeros_like(W)
    rng = np.random.default_rng(config.seed)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(Z))
        total = 0.0
        for b, start in enumerate(range(0, len(Z), config.batch)):
            idx = order[start:start + config.batch]
            loss, grad = _loss_and_grad(Z[idx], y[idx], W, joint.is_classification)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingError(
                    f"joint {joint.name!r}: non-finite loss at epoch {epoch}, batch {b} "
                    f"(lr={config.lr}, momentum={config.momentum}, |W|max={np.abs(W).max():.3g})")
            V = config.momentum * V - config.lr * grad
            W = W + V
            total += loss * len(idx)
        history.append(total / len(Z))
    return LinearEstimator(joint.name, joint.kind, tuple(joint.labels), W, center, scale, config, history)


def _loss_and_grad(Z, y, W, classification):
    logits = Z @ W
    n = len(Z)
    if classification:
        probs = _softmax(logits)
        with np.errstate(divide="ignore"):
            loss = -np.mean(np.log(probs[np.arange(n), y]))
        probs[np.arange(n), y] -= 1.0
        return loss, Z.T @ probs / n
    pred = _sigmoid(logits[:, 0])
    err = pred - y
    loss = np.mean(np.abs(err))
    dz = np.sign(err) * pred * (1.0 - pred) / n
    return loss, (Z.T @ dz)[:, None]


# ---------------------------------------------------------------- bundles

BUNDLE_VERSION = 1


@dataclass(eq=False)
class EstimatorBundle:
    """One estimator per joint; each maps that joint's windows to its attribute block."""

    estimators: dict

    def check(self, space: AttributeSpace) -> None:
        missing = [n for n in space.joint_names if n not in self.estimators]
        if missing:
            raise KeyError(f"no estimator for joint {missing[0]!r}")


def estimate_attributes(bundle: EstimatorBundle, space: AttributeSpace, windows_by_joint: dict,
                        features: bool = False) -> np.ndarray:
    """Concatenate per-joint outputs into attribute vectors, one row per window.

    With ``features=True`` the inputs are precomputed feature matrices and each
    estimator must provide ``predict_features``.
    """
    bundle.check(space)
    blocks = []
    n = None
    for j in space.joints:
        est = bundle.estimators[j.name]
        if j.name not in windows_by_joint:
            raise KeyError(f"no input windows for joint {j.name!r}")
        inputs = windows_by_joint[j.name]
        out = est.predict_features(inputs) if features else est(inputs)
        out = np.asarray(out, dtype=float).reshape(len(out), -1)
        if out.shape[1] != j.width:
            raise ValueError(f"joint {j.name!r}: estimator gave {out.shape[1]} outputs, expected {j.width}")
        if n is not None and len(out) != n:
            raise ValueError("joints received different numbers of windows")
        n = len(out)
        blocks.append(out)
    return np.concatenate(blocks, axis=1)


def save_bundle(bundle: EstimatorBundle, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, est in bundle.estimators.items():
        fname = f"{name}.npz"
        np.savez(directory / fname, weights=est.weights, center=est.center, scale=est.scale,
                 loss_history=np.asarray(est.loss_history))
        entries.append({
            "joint": name,
            "kind": est.kind,
            "labels": list(est.labels),
            "n_features": int(est.weights.shape[0]),
            "n_outputs": int(est.weights.shape[1]),
            "hyper": asdict(est.config),
            "seed": est.config.seed,
            "file": fname,
        })
    manifest = {"format_version": BUNDLE_VERSION, "estimator": "linear", "joints": entries}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_bundle(directory) -> EstimatorBundle:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("format_version") != BUNDLE_VERSION:
        raise ValueError(f"{directory}: unsupported bundle version {manifest.get('format_version')!r}")
    estimators = {}
    for e in manifest["joints"]:
        arrays = np.load(directory / e["file"])
        if arrays["weights"].shape != (e["n_features"], e["n_outputs"]):
            raise ValueError(f"{directory}: weight shape mismatch for joint {e['joint']!r}")
        estimators[e["joint"]] = LinearEstimator(
            e["joint"], e["kind"], tuple(e["labels"]), arrays["weights"], arrays["center"],
            arrays["scale"], TrainConfig(**e["hyper"]), arrays["loss_history"].tolist())
    return EstimatorBundle(estimators)
