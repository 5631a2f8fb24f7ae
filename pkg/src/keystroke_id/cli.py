"""Pipeline orchestrator: config + subcommands over the library modules.

Every stage reads/writes files under --out-dir with fixed names, so the
subcommands chain without repeating paths. A single global seed fans out
to per-component seeds (sha256 of "<seed>:<component>") unless a component
seed is set explicitly, which keeps any stage independently reproducible.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import dataset as ds
from . import errors, evaluation, forest, ingest, kdi, sequencing, synth, tensorfile

EXIT_CODES: dict[type, int] = {
    errors.ConfigError: 2,
    errors.MalformedLine: 3,
    errors.NonMonotonicTimestamps: 4,
    errors.SubsequenceTooShort: 5,
    errors.EmptyTrainingSet: 6,
    errors.BadMagic: 7,
    errors.TruncatedFile: 8,
    errors.DimensionMismatch: 9,
    errors.ManifestMismatch: 10,
    errors.EmptyNode: 11,
    errors.FeatureLengthMismatch: 12,
    errors.ModelVersionMismatch: 13,
    errors.ClassTooSmall: 14,
    errors.LabelOutOfRange: 15,
    errors.EmptyMatrix: 16,
}
EXIT_IO_ERROR = 17
EXIT_OTHER_ERROR = 18

SESSIONS_FILE = "sessions.json"
DATASET_FILE = "dataset.npz"
SPLIT_FILE = "split.json"
TENSORS_FILE = "tensors.kdt"
TENSORS_MANIFEST_FILE = "tensors_manifest.json"
PARTITION_FILE = "partition.json"


def derive_seed(global_seed: int, component: str) -> int:
    """Stable per-component seed: first 8 sha256 bytes of '<seed>:<component>'."""
    digest = hashlib.sha256(f"{global_seed}:{component}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**31)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        config = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise errors.ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(config, dict):
        raise errors.ConfigError(f"{path}: config must be a JSON object")
    return config


def _component_seed(config: dict, explicit: int | None, section: str, name: str) -> int:
    if explicit is not None:
        return explicit
    section_seed = config.get(section, {}).get("seed")
    if section_seed is not None:
        return int(section_seed)
    return derive_seed(int(config.get("seed", 0)), name)


def _out_dir(args: argparse.Namespace, config: dict) -> Path:
    out = args.out_dir or config.get("out_dir")
    if out is None:
        raise errors.ConfigError("--out-dir (or config out_dir) is required")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(document: dict, path: Path) -> None:
    path.write_text(json.dumps(document, sort_keys=True) + "\n")


# ---------------------------------------------------------------- subcommands


def _cmd_synth(args: argparse.Namespace, config: dict) -> int:
    source = dict(config.get("source", {}))
    source.pop("kind", None)
    overrides = {
        "num_users": args.num_users,
        "sessions_per_user": args.sessions_per_user,
        "keystrokes_per_session": args.keystrokes_per_session,
        "separation_factor": args.separation_factor,
    }
    source.update({k: v for k, v in overrides.items() if v is not None})
    vocab_size = source.pop("vocabulary_size", None)
    if args.vocabulary_size is not None:
        vocab_size = args.vocabulary_size
    if vocab_size is not None:
        source["vocabulary"] = tuple(range(int(vocab_size)))
    source["seed"] = _component_seed(config, args.seed, "source", "synth")
    cfg = synth.GenConfig(**source)

    out = _out_dir(args, config)
    sessions = synth.generate_corpus(cfg)
    synth.write_corpus_logs(sessions, out / "logs")
    ingest.save_session_store(sessions, out / SESSIONS_FILE)
    print(
        f"generated {len(sessions)} sessions for {cfg.num_users} users "
        f"(separation_factor={cfg.separation_factor}) -> {out / SESSIONS_FILE}"
    )
    return 0


def _cmd_ingest(args: argparse.Namespace, config: dict) -> int:
    source = config.get("source", {})
    logs = args.logs or source.get("root")
    if logs is None:
        raise errors.ConfigError("--logs (or config source.root) is required")
    manifest = None
    manifest_path = args.manifest or source.get("manifest")
    if manifest_path:
        manifest = json.loads(Path(manifest_path).read_text())
    tolerance = args.tolerance_ms
    if tolerance is None:
        tolerance = int(source.get("tolerance_ms", 0))

    out = _out_dir(args, config)
    sessions = ingest.load_log_dir(Path(logs), manifest, tolerance_ms=tolerance)
    ingest.save_session_store(sessions, out / SESSIONS_FILE)
    total = sum(len(s.keystrokes) for s in sessions)
    print(f"ingested {len(sessions)} sessions, {total} keystrokes -> {out / SESSIONS_FILE}")
    return 0


def _window_config(args: argparse.Namespace, config: dict) -> sequencing.WindowConfig:
    length = args.window_length or config.get("window", {}).get("length", 100)
    return sequencing.WindowConfig(length=int(length))


def _cmd_featurize(args: argparse.Namespace, config: dict) -> int:
    out = _out_dir(args, config)
    sessions_path = Path(args.sessions or out / SESSIONS_FILE)
    sessions = ingest.load_session_store(sessions_path)
    window_cfg = _window_config(args, config)
    dataset = ds.featurize_sessions(sessions, window_cfg)
    ds.save_dataset(dataset, out / DATASET_FILE)
    print(
        f"featurized {len(dataset.y)} windows (L={window_cfg.length}, "
        f"{dataset.num_classes} users) -> {out / DATASET_FILE}"
    )
    if args.export_tensors:
        _export_tensors(args, config, sessions, window_cfg, out)
    return 0


def _export_split_spec(args: argparse.Namespace, config: dict) -> evaluation.SplitSpec:
    section = dict(config.get("export_split", {}))
    section.setdefault("train", 0.8)
    section.setdefault("validation", 0.1)
    section.setdefault("test", 0.1)
    section["seed"] = _component_seed(config, args.seed, "export_split", "export-split")
    return evaluation.SplitSpec(**section)


def _export_tensors(
    args: argparse.Namespace,
    config: dict,
    sessions: list[ingest.UserSession],
    window_cfg: sequencing.WindowConfig,
    out: Path,
) -> None:
    subsequences = sequencing.window_all(sessions, window_cfg)
    if not subsequences:
        raise errors.ConfigError(f"no full windows of length {window_cfg.length}")
    users = sorted({sub.user_id for sub in subsequences})
    label_map = {user: index for index, user in enumerate(users)}
    labels = [label_map[sub.user_id] for sub in subsequences]
    tensors = [kdi.build_kdi(sub) for sub in subsequences]

    spec = _export_split_spec(args, config)
    train_idx, val_idx, test_idx = evaluation.stratified_split(
        np.asarray(labels), spec
    )
    standardized = not args.raw
    if standardized:
        stats = kdi.fit_standardizer([tensors[i] for i in train_idx])
        tensors = [kdi.apply_standardizer(t, stats) for t in tensors]

    tensorfile.write_tensor_file(list(zip(labels, tensors)), out / TENSORS_FILE)
    tensorfile.write_manifest(
        out / TENSORS_MANIFEST_FILE,
        labels=label_map,
        split={
            "train": train_idx.tolist(),
            "val": val_idx.tolist(),
            "test": test_idx.tolist(),
        },
        window_length=window_cfg.length,
        standardized=standardized,
    )
    print(
        f"exported {len(tensors)} tensors (standardized={standardized}) "
        f"-> {out / TENSORS_FILE}"
    )


def _cmd_export_tensors(args: argparse.Namespace, config: dict) -> int:
    out = _out_dir(args, config)
    sessions_path = Path(args.sessions or out / SESSIONS_FILE)
    sessions = ingest.load_session_store(sessions_path)
    window_cfg = _window_config(args, config)
    _export_tensors(args, config, sessions, window_cfg, out)
    return 0


def _split_spec(args: argparse.Namespace, config: dict) -> evaluation.SplitSpec:
    section = dict(config.get("split", {}))
    for name in ("train", "validation", "test"):
        value = getattr(args, name, None)
        if value is not None:
            section[name] = value
    section.setdefault("train", 0.8)
    section.setdefault("validation", 0.0)
    section.setdefault("test", 0.2)
    section["seed"] = _component_seed(config, args.seed, "split", "split")
    return evaluation.SplitSpec(**section)


def _save_split(spec: evaluation.SplitSpec, dataset: ds.Dataset, path: Path) -> None:
    train_idx, val_idx, test_idx = evaluation.stratified_split(dataset.y, spec)
    _write_json(
        {
            "fractions": {
                "train": spec.train,
                "validation": spec.validation,
                "test": spec.test,
            },
            "seed": spec.seed,
            "stratified": spec.stratified,
            "train": train_idx.tolist(),
            "validation": val_idx.tolist(),
            "test": test_idx.tolist(),
        },
        path,
    )


def _cmd_split(args: argparse.Namespace, config: dict) -> int:
    out = _out_dir(args, config)
    dataset = ds.load_dataset(Path(args.dataset or out / DATASET_FILE))
    spec = _split_spec(args, config)
    _save_split(spec, dataset, out / SPLIT_FILE)
    print(f"split written -> {out / SPLIT_FILE}")
    return 0


def _load_split(args: argparse.Namespace, config: dict, dataset: ds.Dataset, out: Path) -> dict:
    path = Path(args.split) if args.split else out / SPLIT_FILE
    if not path.exists():
        # default split so synth -> featurize -> train works without an
        # explicit split step; deterministic via the derived seed
        _save_split(_split_spec(args, config), dataset, path)
    return json.loads(path.read_text())


def _forest_config(args: argparse.Namespace, config: dict) -> forest.ForestConfig:
    section = dict(config.get("forest", {}))
    if args.n_estimators is not None:
        section["n_estimators"] = args.n_estimators
    section["seed"] = _component_seed(config, args.seed, "forest", "forest")
    return forest.ForestConfig(**section)


def _cmd_train(args: argparse.Namespace, config: dict, kind: str) -> int:
    out = _out_dir(args, config)
    dataset = ds.load_dataset(Path(args.dataset or out / DATASET_FILE))
    split = _load_split(args, config, dataset, out)
    train_idx = np.asarray(split["train"], dtype=np.int64)
    cfg = _forest_config(args, config)
    X, y = dataset.X[train_idx], dataset.y[train_idx]
    if kind == "random_forest":
        model = forest.fit_forest(
            X, y, cfg, num_classes=dataset.num_classes, n_jobs=args.jobs
        )
        model_path = out / "model_rf.json"
    else:
        model = forest.fit_decision_tree(X, y, cfg, num_classes=dataset.num_classes)
        model_path = out / "model_dt.json"
    forest.save_model(model, model_path)
    print(f"trained {kind} on {len(train_idx)} samples -> {model_path}")
    return 0


def _partition_thresholds(args: argparse.Namespace, config: dict) -> tuple[float, float]:
    section = config.get("partition", {})
    hi = args.hi if args.hi is not None else section.get("hi", evaluation.EASY_THRESHOLD)
    lo = args.lo if args.lo is not None else section.get("lo", evaluation.DIFFICULT_THRESHOLD)
    return float(hi), float(lo)


def _cmd_evaluate(args: argparse.Namespace, config: dict) -> int:
    out = _out_dir(args, config)
    dataset = ds.load_dataset(Path(args.dataset or out / DATASET_FILE))
    model_path = Path(args.model) if args.model else out / "model_rf.json"
    model = forest.load_model(model_path)
    split = _load_split(args, config, dataset, out)
    test_idx = np.asarray(split["test"], dtype=np.int64)
    if len(test_idx) == 0:
        raise errors.ConfigError("test split is empty; nothing to evaluate")

    predicted = forest.predict(model, dataset.X[test_idx])
    hi, lo = _partition_thresholds(args, config)
    report = evaluation.build_report(
        model.kind,
        dataset.y[test_idx],
        predicted,
        dataset.label_map(),
        config_echo={
            "model_file": model_path.name,
            "window_length": dataset.window_length,
            "split": {k: split[k] for k in ("fractions", "seed")},
            "forest": {
                "n_estimators": model.config.n_estimators,
                "max_features": model.config.max_features,
                "min_samples_split": model.config.min_samples_split,
                "min_samples_leaf": model.config.min_samples_leaf,
                "bootstrap": model.config.bootstrap,
                "seed": model.config.seed,
            },
        },
        hi=hi,
        lo=lo,
    )
    suffix = "rf" if model.kind == "random_forest" else "dt"
    report_path = out / f"report_{suffix}.json"
    evaluation.save_report(report, report_path)
    evaluation.write_per_user_csv(report, out / f"per_user_accuracy_{suffix}.csv")
    print(
        f"accuracy={report['accuracy']:.4f} on {len(test_idx)} test samples "
        f"({model.kind}) -> {report_path}"
    )
    return 0


def _cmd_partition(args: argparse.Namespace, config: dict) -> int:
    out = _out_dir(args, config)
    report_path = Path(args.report) if args.report else out / "report_rf.json"
    report = evaluation.load_report(report_path)
    hi, lo = _partition_thresholds(args, config)
    defined = {
        user: acc
        for user, acc in report["per_user_accuracy"].items()
        if acc is not None
    }
    result = evaluation.partition_users(defined, hi, lo)
    document = {
        "thresholds": {"hi": hi, "lo": lo},
        "easy": sorted(result.easy),
        "moderate": sorted(result.moderate),
        "difficult": sorted(result.difficult),
        "sizes": {
            "easy": len(result.easy),
            "moderate": len(result.moderate),
            "difficult": len(result.difficult),
        },
    }
    _write_json(document, out / PARTITION_FILE)
    print(
        f"easy={len(result.easy)} moderate={len(result.moderate)} "
        f"difficult={len(result.difficult)} -> {out / PARTITION_FILE}"
    )
    if args.difficult_only:
        if not result.difficult:
            print("no difficult users; skipping filtered dataset")
            return 0
        dataset = ds.load_dataset(Path(args.dataset or out / DATASET_FILE))
        filtered = ds.filter_users(dataset, sorted(result.difficult))
        ds.save_dataset(filtered, out / "dataset_difficult.npz")
        print(
            f"difficult-user dataset: {len(filtered.y)} samples, "
            f"{filtered.num_classes} users -> {out / 'dataset_difficult.npz'}"
        )
    return 0


# -------------------------------------------------------------------- parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="keystroke-id",
        description="Keystroke-dynamics user identification pipeline",
    )
    parser.add_argument("--config", help="JSON pipeline config; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out-dir", help="artifact directory")
        p.add_argument("--seed", type=int, help="component seed override")
        return p

    p = add("synth", "generate a synthetic labelled corpus")
    p.add_argument("--num-users", type=int)
    p.add_argument("--sessions-per-user", type=int)
    p.add_argument("--keystrokes-per-session", type=int)
    p.add_argument("--separation-factor", type=float)
    p.add_argument("--vocabulary-size", type=int)

    p = add("ingest", "parse raw key-event logs into a session store")
    p.add_argument("--logs", help="directory of <user>/<session>.txt logs")
    p.add_argument("--manifest", help="JSON overriding user/session per file")
    p.add_argument("--tolerance-ms", type=int)

    p = add("featurize", "sessions -> windows -> flattened KDI dataset")
    p.add_argument("--sessions")
    p.add_argument("--window-length", type=int)
    p.add_argument("--export-tensors", action="store_true")
    p.add_argument("--raw", action="store_true", help="skip standardization on export")

    p = add("split", "stratified train/validation/test index split")
    p.add_argument("--dataset")
    p.add_argument("--train", type=float)
    p.add_argument("--validation", type=float)
    p.add_argument("--test", type=float)

    p = add("train-dt", "train the single decision tree")
    p.add_argument("--dataset")
    p.add_argument("--split")
    p.add_argument("--n-estimators", type=int, help=argparse.SUPPRESS)
    p.add_argument("--jobs", type=int, default=1, help=argparse.SUPPRESS)

    p = add("train-rf", "train the random forest")
    p.add_argument("--dataset")
    p.add_argument("--split")
    p.add_argument("--n-estimators", type=int)
    p.add_argument("--jobs", type=int, default=1)

    p = add("evaluate", "predict on the test split and write the report")
    p.add_argument("--model")
    p.add_argument("--dataset")
    p.add_argument("--split")
    p.add_argument("--hi", type=float)
    p.add_argument("--lo", type=float)

    p = add("partition", "difficulty partition from a report")
    p.add_argument("--report")
    p.add_argument("--hi", type=float)
    p.add_argument("--lo", type=float)
    p.add_argument("--difficult-only", action="store_true")
    p.add_argument("--dataset")

    p = add("export-tensors", "write the KDT1 tensor export + manifest")
    p.add_argument("--sessions")
    p.add_argument("--window-length", type=int)
    p.add_argument("--raw", action="store_true", help="skip standardization")

    return parser


_COMMANDS = {
    "synth": _cmd_synth,
    "ingest": _cmd_ingest,
    "featurize": _cmd_featurize,
    "split": _cmd_split,
    "train-dt": lambda a, c: _cmd_train(a, c, "decision_tree"),
    "train-rf": lambda a, c: _cmd_train(a, c, "random_forest"),
    "evaluate": _cmd_evaluate,
    "partition": _cmd_partition,
    "export-tensors": _cmd_export_tensors,
}


def _diagnostic(exc: Exception) -> str:
    origin = getattr(exc, "source_path", None)
    prefix = f"{origin}: " if origin else ""
    return f"error ({type(exc).__name__}): {prefix}{exc}"


def run(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return _COMMANDS[args.command](args, config)
    except errors.KeystrokeIdError as exc:
        print(_diagnostic(exc), file=sys.stderr)
        return EXIT_CODES.get(type(exc), EXIT_OTHER_ERROR)
    except jsonschema.ValidationError as exc:
        print(f"error (ValidationError): {exc.message}", file=sys.stderr)
        return EXIT_OTHER_ERROR
    except (OSError, json.JSONDecodeError) as exc:
        print(_diagnostic(exc), file=sys.stderr)
        return EXIT_IO_ERROR
    except ValueError as exc:
        print(_diagnostic(exc), file=sys.stderr)
        return EXIT_OTHER_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
