"""Command-line entry point: ``zsl-pose <command> ...``.

Exit codes: 0 success, 1 evaluation failure, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .catalog import CatalogError, catalog_to_dict, default_catalog, encode_definition, load_catalog
from .classify import DAP, NN_AI, NN_NAIVE, NN_RANDOM_AI, RandomAiConfig
from .distance import MetricParams
from .evaluate import (
    FIXTURE_DIR,
    check_fixtures,
    format_table,
    read_per_class_csv,
    run_kshot,
    run_zsl,
    write_confusion_csv,
    write_per_class_csv,
)
from .ingest import (
    DEFAULT_JOINT_MAP,
    ImuLayout,
    RecordingError,
    TrainConfig,
    EstimatorBundle,
    estimate_attributes,
    load_bundle,
    load_joint_map,
    load_layout,
    read_recording,
    save_bundle,
    sliding_windows,
    stack_features,
    train_reference_estimator,
)
from .schema import build_default_space
from .synthkit import default_variation_spec, read_vectors_csv, synth_dataset, write_vectors_csv

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

METHOD_FLAGS = {"nn": NN_NAIVE, "nn-ai": NN_AI, "nn-random-ai": NN_RANDOM_AI, "dap": DAP}


class InputError(Exception):
    pass


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, config: dict, inputs=(), name: str = "manifest.json") -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs if Path(p).is_file()},
    }
    (out / name).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _catalog(args):
    if args.catalog is None:
        return default_catalog()
    try:
        return load_catalog(args.catalog)
    except (OSError, CatalogError) as exc:
        raise InputError(str(exc)) from exc


def _vectors(path, catalog):
    try:
        vectors, labels = read_vectors_csv(path)
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    if vectors.shape[1] != catalog.space.dim:
        raise InputError(f"{path}: {vectors.shape[1]} attributes, catalog space has {catalog.space.dim}")
    return vectors, labels


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _params(args) -> MetricParams:
    try:
        return MetricParams(p=args.p, lam=args.lam)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


# ---------------------------------------------------------------- commands


def cmd_ingest(args) -> int:
    raw = Path(args.raw_dir)
    files = sorted(raw.glob("*.csv")) if raw.is_dir() else []
    if not files:
        print(f"no recordings in {raw}", file=sys.stderr)
        return EXIT_INPUT
    try:
        layout = load_layout(args.layout) if args.layout else ImuLayout()
        joint_map = load_joint_map(args.joint_map) if args.joint_map else DEFAULT_JOINT_MAP
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"layout/joint map: {exc}") from exc
    out = _outdir(args)

    features = {j: [] for j in joint_map}
    index, failures = [], []
    for path in files:
        try:
            rec = read_recording(path, layout)
            wins = sliding_windows(rec, args.size, args.stride, joint_map)
        except (OSError, RecordingError) as exc:
            failures.append((path.name, str(exc)))
            continue
        n = len(next(iter(wins.values())))
        for j in joint_map:
            if n:
                features[j].append(stack_features(wins[j]))
        for w in range(n):
            index.append((rec.subject_id, rec.pose_id, path.name, w * args.stride))

    ok = len(files) - len(failures)
    print(f"ingested {ok}/{len(files)} recordings, {len(index)} windows")
    for name, msg in failures:
        print(f"  skipped {name}: {msg}")
    if ok == 0:
        return EXIT_INPUT
    np.savez(out / "features.npz", **{j: np.concatenate(f) if f else np.empty((0, 0)) for j, f in features.items()})
    with open(out / "index.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["window", "subject", "pose", "file", "offset"])
        for i, row in enumerate(index):
            w.writerow([i, *row])
    write_manifest(out, "ingest", {"size": args.size, "stride": args.stride, "layout": layout.to_dict(),
                                   "joint_map": joint_map, "skipped": [n for n, _ in failures]})
    return EXIT_OK


def _read_store(store: Path):
    try:
        feats = dict(np.load(store / "features.npz"))
        with open(store / "index.csv", newline="") as fh:
            index = list(csv.DictReader(fh))
    except OSError as exc:
        raise InputError(f"{store}: not a feature store ({exc})") from exc
    return feats, index


def cmd_train(args) -> int:
    catalog = _catalog(args)
    store = Path(args.store)
    feats, index = _read_store(store)
    poses = np.array([r["pose"] for r in index])
    keep = ~np.isin(poses, args.exclude or [])
    config = TrainConfig(lr=args.lr, momentum=args.momentum, epochs=args.epochs, batch=args.batch, seed=args.seed)
    estimators = {}
    for j in catalog.space.joints:
        if j.name not in feats:
            raise InputError(f"{store}: no features for joint {j.name!r}")
        targets = [catalog.definition(p).status[j.name] for p in poses[keep]]
        estimators[j.name] = train_reference_estimator(feats[j.name][keep], targets, j, config)
        print(f"{j.name}: final loss {estimators[j.name].loss_history[-1]:.4f}")
    out = _outdir(args)
    save_bundle(EstimatorBundle(estimators), out)
    write_manifest(out, "train", {**vars(config), "exclude": args.exclude or []}, [store / "features.npz"],
                   name="run.json")  # manifest.json belongs to the bundle
    return EXIT_OK


def cmd_estimate(args) -> int:
    catalog = _catalog(args)
    store = Path(args.store)
    feats, index = _read_store(store)
    bundle = load_bundle(args.bundle)
    vectors = estimate_attributes(bundle, catalog.space, feats, features=True)
    write_vectors_csv(vectors, [r["pose"] for r in index], args.out, catalog.space)
    print(f"wrote {len(vectors)} attribute vectors to {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    catalog = _catalog(args)
    spec = default_variation_spec(sigma=args.sigma, seed=args.seed)
    vectors, labels = synth_dataset(catalog, spec, args.n, np.random.default_rng(args.seed))
    write_vectors_csv(vectors, labels, args.out, catalog.space)
    print(f"wrote {len(vectors)} vectors ({args.n} per pose) to {args.out}")
    return EXIT_OK


def _methods(args):
    return [METHOD_FLAGS[m] for m in (args.method or ["nn-ai"])]


def cmd_eval_zsl(args) -> int:
    catalog = _catalog(args)
    vectors, labels = _vectors(args.vectors, catalog)
    params = _params(args)
    out = _outdir(args)
    reports = {}
    for method in _methods(args):
        try:
            rep = run_zsl(vectors, labels, catalog, method, params, RandomAiConfig(args.trials, args.seed))
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        reports[method] = rep
        write_confusion_csv(rep.confusion, out / f"confusion_{method}.csv")
        folds = rep.details.get("fold_rows")
        if folds:
            fdir = out / "folds" / method
            fdir.mkdir(parents=True, exist_ok=True)
            for ci, (pose, row) in enumerate(folds.items()):
                counts = np.zeros_like(rep.confusion.counts)
                counts[ci] = row
                write_confusion_csv(type(rep.confusion)(rep.labels, counts), fdir / f"{pose}.csv")
    table = format_table(reports)
    (out / "report.txt").write_text(table)
    write_per_class_csv(reports, out / "per_class.csv")
    write_manifest(out, "eval-zsl", {"methods": list(reports), "p": params.p, "lambda": params.lam,
                                     "trials": args.trials, "seed": args.seed}, [args.vectors])
    print(table, end="")
    return EXIT_OK


def cmd_eval_fewshot(args) -> int:
    catalog = _catalog(args)
    vectors, labels = _vectors(args.vectors, catalog)
    params = _params(args)
    out = _outdir(args)
    methods = _methods(args)
    curve = []
    tables = []
    for k in args.k:
        reports = {}
        for method in methods:
            try:
                rep = run_kshot(vectors, labels, catalog, k, method, args.seed, params)
            except ValueError as exc:
                raise InputError(str(exc)) from exc
            reports[method] = rep
            curve.append((k, method, rep.macro_f))
            write_confusion_csv(rep.confusion, out / f"confusion_{method}_k{k}.csv")
        write_per_class_csv(reports, out / f"per_class_k{k}.csv")
        tables.append(f"k = {k}\n" + format_table(reports))
    if args.with_zsl:
        for method in methods:
            curve.append((0, method, run_zsl(vectors, labels, catalog, method, params).macro_f))
    with open(out / "curve.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "method", "macro_f"])
        for k, m, f in sorted(curve, key=lambda r: (r[1], r[0])):
            w.writerow([k, m, repr(f)])
    text = "\n".join(tables)
    (out / "report.txt").write_text(text)
    write_manifest(out, "eval-fewshot", {"methods": methods, "k": args.k, "seed": args.seed, "p": params.p,
                                         "lambda": params.lam, "with_zsl": args.with_zsl}, [args.vectors])
    print(text, end="")
    return EXIT_OK


def cmd_check_fixtures(args) -> int:
    results = check_fixtures(args.fixtures)
    all_ok = True
    for res in results:
        status = "PASS" if res.ok else "FAIL"
        all_ok &= res.ok
        worst = max(res.deltas.items(), key=lambda kv: abs(kv[1]), default=(None, float("nan")))
        print(f"{status} {res.name} ({res.method}, tol {res.tolerance:g}): "
              f"max |dF| {abs(worst[1]):.2e} at {worst[0]}, avg dF {res.macro_delta:+.2e}")
        for msg in res.messages:
            print(f"    {msg}")
        if args.verbose or not res.ok:
            for c, d in res.deltas.items():
                flag = "" if abs(d) <= res.tolerance else "  <-- out of tolerance"
                print(f"    {c:20s} {d:+.2e}{flag}")
    return EXIT_OK if all_ok else EXIT_FAIL


def cmd_report(args) -> int:
    if args.dump_space:
        print(json.dumps(build_default_space().to_dict(), indent=2))
        return EXIT_OK
    if args.dump_catalog:
        print(json.dumps(catalog_to_dict(_catalog(args)), indent=2))
        return EXIT_OK
    if args.dump_definitions:
        catalog = _catalog(args)
        vectors = np.stack([encode_definition(catalog.space, d) for d in catalog.definitions])
        write_vectors_csv(vectors, catalog.pose_ids, args.dump_definitions, catalog.space)
        return EXIT_OK
    if args.combine:
        columns = {}
        for path in args.combine:
            try:
                columns.update(read_per_class_csv(path))
            except (OSError, KeyError, ValueError) as exc:
                raise InputError(f"{path}: {exc}") from exc
        print(format_table(columns), end="")
        return EXIT_OK
    raise InputError("report needs one of --dump-space, --dump-catalog, --dump-definitions, --combine")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zsl-pose", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--catalog", help="catalog JSON (default: built-in HDPoseDS catalog)")
        if out:
            p.add_argument("--out", required=True, help="output path")

    def metric(p):
        p.add_argument("--method", action="append", choices=sorted(METHOD_FLAGS),
                       help="classifier; repeat for several (default: nn-ai)")
        p.add_argument("--p", type=float, default=1.0, help="Minkowski exponent")
        p.add_argument("--lambda", dest="lam", type=float, default=0.1, help="penalty coefficient")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ingest", help="window raw IMU recordings into a feature store")
    p.add_argument("raw_dir")
    p.add_argument("--layout", help="raw CSV layout JSON")
    p.add_argument("--joint-map", help="joint -> IMU list JSON")
    p.add_argument("--size", type=int, default=60)
    p.add_argument("--stride", type=int, default=30)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train reference per-joint estimators on a feature store")
    p.add_argument("store")
    common(p)
    p.add_argument("--exclude", action="append", help="pose to leave out of training")
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("estimate", help="map a feature store to attribute vectors")
    p.add_argument("store")
    p.add_argument("--bundle", required=True)
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("synth", help="generate synthetic attribute vectors")
    common(p)
    p.add_argument("--n", type=int, default=590, help="vectors per pose")
    p.add_argument("--sigma", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval-zsl", help="zero-shot protocol over all poses")
    p.add_argument("vectors")
    common(p)
    metric(p)
    p.add_argument("--trials", type=int, default=1000, help="random-importance trials")
    p.set_defaults(func=cmd_eval_zsl)

    p = sub.add_parser("eval-fewshot", help="k-shot protocol")
    p.add_argument("vectors")
    common(p)
    metric(p)
    p.add_argument("--k", type=int, nargs="+", default=[1], help="shots; several values give a curve")
    p.add_argument("--with-zsl", action="store_true", help="add the zero-shot result as k=0 to curve.csv")
    p.set_defaults(func=cmd_eval_fewshot)

    p = sub.add_parser("check-fixtures", help="recompute reference F-measures from reference confusion matrices")
    p.add_argument("fixtures", nargs="?", default=str(FIXTURE_DIR))
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_check_fixtures)

    p = sub.add_parser("report", help="dump built-in data or combine per-class CSVs")
    common(p, out=False)
    p.add_argument("--dump-space", action="store_true")
    p.add_argument("--dump-catalog", action="store_true")
    p.add_argument("--dump-definitions", metavar="CSV", help="write encoded pose definitions")
    p.add_argument("--combine", nargs="+", metavar="CSV", help="per-class CSVs to tabulate")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
