"""Evaluation protocols (zero-shot folds, k-shot blocks) and precision/recall/F reporting."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .catalog import PoseCatalog, encode_definition
from .classify import (
    DAP,
    NN_AI,
    NN_NAIVE,
    NN_RANDOM_AI,
    RandomAiConfig,
    TrainedZslModel,
    build_models,
    class_prototypes,
    fit,
    predict_many,
    random_importance_table,
)
from .distance import IMPORTANCE, NAIVE, MetricParams, distance_matrix, importance_from_terms, joint_terms, prototype

METHOD_TITLES = {
    DAP: "DAP",
    NN_NAIVE: "NN w/o AI",
    NN_RANDOM_AI: "NN w/random AI",
    NN_AI: "NN w/AI",
}


def worker_count() -> int:
    """Worker cap from ``ZSL_ATTR_THREADS`` (default: CPU count)."""
    raw = os.environ.get("ZSL_ATTR_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    labels: list
    counts: np.ndarray

    def __post_init__(self):
        self.labels = list(self.labels)
        self.counts = np.asarray(self.counts, dtype=float)
        n = len(self.labels)
        if self.counts.shape != (n, n):
            raise ValueError(f"counts must be {n}x{n}, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("confusion counts must be non-negative")

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> float:
        return float(self.counts.sum())


def confusion(preds, truths, labels) -> ConfusionMatrix:
    preds, truths = list(preds), list(truths)
    if len(preds) != len(truths):
        raise ValueError("predictions and truths differ in length")
    index = {c: i for i, c in enumerate(labels)}
    counts = np.zeros((len(index), len(index)))
    for t, p in zip(truths, preds):
        try:
            counts[index[t], index[p]] += 1
        except KeyError as exc:
            raise ValueError(f"unknown label {exc.args[0]!r}") from None
    return ConfusionMatrix(list(labels), counts)


def _counts_from_indices(truth_idx, pred_idx, n) -> np.ndarray:
    flat = np.bincount(np.asarray(truth_idx) * n + np.asarray(pred_idx), minlength=n * n)
    return flat.reshape(n, n).astype(float)


@dataclass(eq=False)
class EvalReport:
    labels: list
    precision: np.ndarray
    recall: np.ndarray
    f_measure: np.ndarray
    accuracy: float
    confusion: ConfusionMatrix | None = None
    meta: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict, repr=False)

    @property
    def macro_f(self) -> float:
        return float(np.mean(self.f_measure))

    def per_class(self) -> dict:
        return {c: float(f) for c, f in zip(self.labels, self.f_measure)}


def _safe_div(num, den):
    num, den = np.asarray(num, dtype=float), np.asarray(den, dtype=float)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den != 0)
    return out


def prf(cm: ConfusionMatrix) -> EvalReport:
    """Per-class precision, recall and F-measure; zero wherever a denominator vanishes."""
    diag = np.diag(cm.counts)
    precision = _safe_div(diag, cm.col_totals)
    recall = _safe_div(diag, cm.row_totals)
    f = _safe_div(2 * precision * recall, precision + recall)
    accuracy = float(diag.sum() / cm.total) if cm.total else 0.0
    return EvalReport(cm.labels, precision, recall, f, accuracy, cm)


def _average_reports(reports: list[EvalReport], meta: dict) -> EvalReport:
    avg_cm = ConfusionMatrix(reports[0].labels, np.mean([r.confusion.counts for r in reports], axis=0))
    return EvalReport(
        reports[0].labels,
        np.mean([r.precision for r in reports], axis=0),
        np.mean([r.recall for r in reports], axis=0),
        np.mean([r.f_measure for r in reports], axis=0),
        float(np.mean([r.accuracy for r in reports])),
        avg_cm,
        meta,
        {"trial_macro_f": [r.macro_f for r in reports]},
    )


def _check_dataset(vectors, labels, catalog):
    vectors = np.asarray(vectors, dtype=float)
    labels = np.asarray(labels)
    if vectors.ndim != 2 or vectors.shape[1] != catalog.space.dim:
        raise ValueError(f"vectors must have shape (n, {catalog.space.dim})")
    if len(labels) != len(vectors):
        raise ValueError("labels and vectors differ in length")
    unknown = sorted(set(labels.tolist()) - set(catalog.pose_ids))
    if unknown:
        raise ValueError(f"labels not in catalog: {unknown}")
    for c in catalog.pose_ids:
        if not np.any(labels == c):
            raise ValueError(f"class {c!r} has zero samples")
    return vectors, labels


def run_zsl(vectors, labels, catalog: PoseCatalog, method: str,
            params: MetricParams = MetricParams(), random_ai: RandomAiConfig = RandomAiConfig(),
            on_fold=None) -> EvalReport:
    """Leave-one-class-out zero-shot evaluation over every catalog pose.

    Fold ``c`` fits on all data except class ``c`` plus the definition of ``c`` and
    predicts every instance of ``c`` against all poses. Each fold fills one row of a
    pooled confusion matrix from which per-class scores are computed. With
    ``nn_random_ai`` the whole protocol is repeated per random importance table and
    per-class scores are averaged over trials.

    ``on_fold(unseen_class, train_labels)`` is called before each fold is fitted.
    """
    vectors, labels = _check_dataset(vectors, labels, catalog)
    poses = catalog.pose_ids
    meta = {"protocol": "zsl", "method": method, "p": params.p, "lambda": params.lam}

    if method == NN_RANDOM_AI:
        meta.update(trials=random_ai.trials, seed=random_ai.seed)
        return _zsl_random(vectors, labels, catalog, params, random_ai, on_fold, meta)

    n = len(poses)
    counts = np.zeros((n, n))
    folds = {}
    for ci, c in enumerate(poses):
        train = labels != c
        if on_fold is not None:
            on_fold(c, labels[train])
        assert not np.any(labels[train] == c)
        model = fit(catalog.space, catalog, vectors[train], labels[train], c, method, params=params)
        pred = predict_many(model, vectors[~train])
        row = np.bincount(pred, minlength=n).astype(float)
        counts[ci] = row
        folds[c] = row
    report = prf(ConfusionMatrix(poses, counts))
    report.meta = meta
    report.details["fold_rows"] = folds
    return report


def _zsl_random(vectors, labels, catalog, params, cfg, on_fold, meta):
    space = catalog.space
    poses = catalog.pose_ids
    n = len(poses)
    terms, truth = [], []
    for ci, c in enumerate(poses):
        train = labels != c
        if on_fold is not None:
            on_fold(c, labels[train])
        assert not np.any(labels[train] == c)
        protos = class_prototypes(vectors[train], labels[train], [p for p in poses if p != c])
        protos[c] = encode_definition(space, catalog.definition(c))
        stacked = np.stack([protos[p] for p in poses])
        test = vectors[~train]
        terms.append(joint_terms(test, stacked, space, params.p))
        truth.append(np.full(len(test), ci))
    terms = np.concatenate(terms)
    truth = np.concatenate(truth)

    def trial(t):
        rng = np.random.default_rng(cfg.seed ^ t)
        table = random_importance_table(catalog, rng)
        pred = np.argmin(importance_from_terms(terms, table, params), axis=1)
        return prf(ConfusionMatrix(poses, _counts_from_indices(truth, pred, n)))

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        reports = list(pool.map(trial, range(cfg.trials)))
    return _average_reports(reports, meta)


def kshot_blocks(n_samples: int, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Permute ``range(n_samples)`` and cut it into ``n_samples // k`` blocks of size ``k``."""
    perm = rng.permutation(n_samples)
    return [perm[l * k:(l + 1) * k] for l in range(n_samples // k)]


def run_kshot(vectors, labels, catalog: PoseCatalog, k: int, method: str, seed: int = 0,
              params: MetricParams = MetricParams()) -> EvalReport:
    """k-shot evaluation: class ``c`` is represented by the mean of ``k`` of its own samples.

    Each class's data is permuted once and cut into ``N_c // k`` disjoint blocks. For
    every block the class prototype is that block's mean, the other classes keep their
    full-data prototypes, and the remaining ``N_c - k`` samples of ``c`` are classified.
    The confusion row of ``c`` is the average over its blocks.
    """
    if method not in (NN_NAIVE, NN_AI):
        raise ValueError(f"k-shot evaluation supports nn_naive and nn_ai, not {method!r}")
    if k < 1:
        raise ValueError("k must be >= 1")
    vectors, labels = _check_dataset(vectors, labels, catalog)
    poses = catalog.pose_ids
    n = len(poses)
    if n < 2:
        raise ValueError("k-shot evaluation needs at least two classes")
    sizes = {c: int(np.sum(labels == c)) for c in poses}
    for c, size in sizes.items():
        if k >= size:
            raise ValueError(f"k={k} must be smaller than the {size} samples of class {c!r}")

    space = catalog.space
    metric = NAIVE if method == NN_NAIVE else IMPORTANCE
    full = class_prototypes(vectors, labels, poses)
    base_models = build_models(catalog, full, method)
    rng = np.random.default_rng(seed)
    counts = np.zeros((n, n))
    blocks_by_class = {}
    for ci, c in enumerate(poses):
        idx = np.flatnonzero(labels == c)
        x = vectors[idx]
        blocks = kshot_blocks(len(idx), k, rng)
        blocks_by_class[c] = [idx[b] for b in blocks]

        d_other = distance_matrix(x, base_models, space, metric, params)
        d_other[:, ci] = np.inf
        best_other = np.argmin(d_other, axis=1)
        best_other_d = d_other[np.arange(len(x)), best_other]

        block_models = [replace(base_models[ci], prototype=prototype(x[b])) for b in blocks]
        d_c = distance_matrix(x, block_models, space, metric, params)  # (N_c, n_blocks)
        wins = (d_c < best_other_d[:, None]) | ((d_c == best_other_d[:, None]) & (ci < best_other[:, None]))

        tested = np.ones_like(d_c, dtype=bool)
        for l, b in enumerate(blocks):
            tested[b, l] = False
        row = np.zeros(n)
        row[ci] = np.sum(wins & tested)
        lost = (~wins & tested).sum(axis=1)
        row += np.bincount(best_other, weights=lost, minlength=n)
        counts[ci] = row / len(blocks)

    report = prf(ConfusionMatrix(poses, counts))
    report.meta = {"protocol": "kshot", "method": method, "k": k, "seed": seed,
                   "p": params.p, "lambda": params.lam}
    report.details["blocks"] = blocks_by_class
    return report


# ---------------------------------------------------------------- text and CSV output


def format_table(columns: dict, labels=None, digits: int = 4) -> str:
    """Aligned text table: one row per class, one column per report, plus ``avg.``."""
    names = list(columns)
    if labels is None:
        labels = columns[names[0]].labels
    head = ["Pose"] + [METHOD_TITLES.get(n, n) for n in names]
    rows = [[c] + [f"{columns[m].per_class()[c]:.{digits}f}" for m in names] for c in labels]
    rows.append(["avg."] + [f"{columns[m].macro_f:.{digits}f}" for m in names])
    widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))

    def fmt(r):
        return "  ".join([r[0].ljust(widths[0])] + [x.rjust(w) for x, w in zip(r[1:], widths[1:])])

    lines = [fmt(head), rule] + [fmt(r) for r in rows[:-1]] + [rule, fmt(rows[-1])]
    return "\n".join(lines) + "\n"


def write_per_class_csv(columns: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "method", "precision", "recall", "f_measure"])
        for method, rep in columns.items():
            for c, p, r, f in zip(rep.labels, rep.precision, rep.recall, rep.f_measure):
                w.writerow([c, method, repr(float(p)), repr(float(r)), repr(float(f))])


def read_per_class_csv(path) -> dict:
    """Inverse of :func:`write_per_class_csv`; returns ``{method: EvalReport}`` without confusions."""
    data: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            data.setdefault(row["method"], []).append(row)
    out = {}
    for method, rows in data.items():
        p = np.array([float(r["precision"]) for r in rows])
        r_ = np.array([float(r["recall"]) for r in rows])
        f = np.array([float(r["f_measure"]) for r in rows])
        out[method] = EvalReport([r["class"] for r in rows], p, r_, f, float("nan"))
    return out


def _fmt_count(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def write_confusion_csv(cm: ConfusionMatrix, path, totals: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([""] + cm.labels + (["T"] if totals else []))
        for label, row, tot in zip(cm.labels, cm.counts, cm.row_totals):
            w.writerow([label] + [_fmt_count(x) for x in row] + ([_fmt_count(tot)] if totals else []))


def read_confusion_csv(path) -> tuple[ConfusionMatrix, np.ndarray | None]:
    """Read a confusion CSV; returns the matrix and the declared ``T`` column if present."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty confusion file")
    header = rows[0][1:]
    has_t = bool(header) and header[-1] == "T"
    labels = header[:-1] if has_t else header
    body = [r for r in rows[1:] if r[0] not in ("T", "P")]
    if [r[0] for r in body] != labels:
        raise ValueError(f"{path}: row labels do not match the header")
    counts, declared = [], []
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header) + 1:
            raise ValueError(f"{path}:{lineno}: expected {len(header) + 1} cells, got {len(r)}")
        try:
            values = [float(x) for x in r[1:]]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        counts.append(values[:len(labels)])
        if has_t:
            declared.append(values[-1])
    return ConfusionMatrix(labels, np.array(counts)), (np.array(declared) if has_t else None)


# ---------------------------------------------------------------- reference fixtures

FIXTURE_DIR = Path(__file__).parent / "data" / "fixtures"
# (file, reference column, per-class tolerance, integer counts?)
FIXTURES = (
    ("A1_dap.csv", DAP, 5e-4, True),
    ("A2_nn_naive.csv", NN_NAIVE, 5e-4, True),
    ("A3_nn_random_ai.csv", NN_RANDOM_AI, 5e-3, False),
    ("A4_nn_ai.csv", NN_AI, 5e-4, True),
)
REFERENCE_FILE = "table5.csv"


@dataclass
class FixtureResult:
    name: str
    method: str
    ok: bool
    tolerance: float
    deltas: dict = field(default_factory=dict)
    macro_delta: float = float("nan")
    messages: list = field(default_factory=list)


def read_reference(path) -> dict:
    """Reference F table: ``{method: {class: F}}`` including the ``avg.`` row."""
    out: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            pose = row.pop("pose")
            for method, value in row.items():
                out.setdefault(method, {})[pose] = float(value)
    return out


def check_fixtures(directory=FIXTURE_DIR) -> list[FixtureResult]:
    """Recompute F from each reference confusion matrix and compare with the reference table."""
    directory = Path(directory)
    results = []
    ref_path = directory / REFERENCE_FILE
    reference = read_reference(ref_path) if ref_path.exists() else None
    for fname, method, tol, integral in FIXTURES:
        res = FixtureResult(fname, method, False, tol)
        results.append(res)
        path = directory / fname
        if not path.exists():
            res.messages.append(f"missing fixture {path}")
            continue
        if reference is None:
            res.messages.append(f"missing reference table {ref_path}")
            continue
        try:
            cm, declared = read_confusion_csv(path)
        except ValueError as exc:
            res.messages.append(str(exc))
            continue
        if integral and declared is not None:
            bad = np.flatnonzero(cm.row_totals != declared)
            for i in bad:
                res.messages.append(
                    f"row {cm.labels[i]}: cells sum to {cm.row_totals[i]:g}, T column says {declared[i]:g}")
        report = prf(cm)
        expected = reference.get(method, {})
        for c, f in zip(cm.labels, report.f_measure):
            if c not in expected:
                res.messages.append(f"class {c} missing from reference")
                continue
            res.deltas[c] = float(f - expected[c])
        if "avg." in expected:
            res.macro_delta = report.macro_f - expected["avg."]
        within = all(abs(d) <= tol for d in res.deltas.values())
        macro_ok = not np.isfinite(res.macro_delta) or abs(res.macro_delta) <= tol
        res.ok = within and macro_ok and not res.messages and len(res.deltas) == len(cm.labels)
    return results
