"""Command-line surface: data prep, training, filtering, evaluation, sweeps, theory.

Exit codes: 0 success, 2 validation error, 3 artifact format error,
4 report contains undefined-metric markers.
"""

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import theory
from .bottleneck import VibClassifier, load_model, save_model, train_model, TrainConfig, init_model
from .config import DEFAULTS, Settings, find_config
from .features import (
    SyntheticSpec,
    SyntheticWindowSource,
    build_training_sets,
    generate_synthetic,
    read_feature_file,
)
from .fileio import atomic_write_text, read_json, sha256_file, write_json, write_jsonl
from .filtering import (
    FALLBACK_POLICIES,
    LayerEnsemble,
    decisions_to_records,
    filter_context,
)
from .metrics import compute_report, read_answer_records
from .sweeps import make_eval_contexts, run_sweep
from .validation import FormatError, ValidationError
from .windows import TokenSequence, read_corpus, tokenize

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_FORMAT = 3
EXIT_UNDEFINED_METRIC = 4


def _write_csv(path, fieldnames, rows) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def _parse_values(spec: str) -> list[float]:
    """Parse '0.1:0.9:0.1' (inclusive range) or '1e-5,1e-3' (list)."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValidationError(f"range spec must be start:stop:step, got {spec!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValidationError("range step must be positive")
        values = []
        k = 0
        while True:
            value = start + k * step
            if value > stop + 1e-12:
                break
            values.append(round(value, 12))
            k += 1
        return values
    return [float(p) for p in spec.split(",") if p.strip()]


def _parse_grid(specs) -> dict[str, list[float]]:
    grid = {}
    for item in specs or []:
        if "=" not in item:
            raise ValidationError(f"grid spec must look like name=values, got {item!r}")
        name, values = item.split("=", 1)
        grid[name.strip()] = _parse_values(values)
    return grid


def _load_models_manifest(path):
    manifest = read_json(path)
    base = Path(path).parent
    paths = [base / entry["path"] for entry in manifest["checkpoints"]]
    return manifest, paths


def _read_context_json(path) -> TokenSequence:
    data = read_json(path)
    missing = {"tokens", "tags"} - data.keys()
    if missing:
        raise ValidationError(f"context JSON is missing fields {sorted(missing)}")
    return TokenSequence(tuple(data["tokens"]), tuple(data["tags"]))


class PrecomputedSource:
    """Feature source backed by per-layer inference feature files."""

    def __init__(self, directory, n_windows_expected=None):
        files = sorted(Path(directory).glob("*.svq"))
        if not files:
            raise ValidationError(f"no .svq feature files found in {directory}")
        loaded = sorted((read_feature_file(f) for f in files), key=lambda f: f.layer_index)
        counts = {f.features.shape[0] for f in loaded}
        if len(counts) != 1:
            raise ValidationError(f"inference files disagree on window count: {sorted(counts)}")
        self.n_layers = len(loaded)
        self.feature_dim = loaded[0].feature_dim
        self._stack = np.stack([f.features.astype(np.float64) for f in loaded], axis=1)
        if n_windows_expected is not None and self._stack.shape[0] != n_windows_expected:
            raise ValidationError(
                f"feature files hold {self._stack.shape[0]} windows, "
                f"context partitions into {n_windows_expected}"
            )

    def window_features(self, seq, window):
        return self._stack[window.window_index]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_gen_synth(args) -> int:
    settings = Settings(args, find_config(args.config))
    spec = SyntheticSpec(
        n_layers=settings.get("layers", 4, int),
        feature_dim=settings.get("dim", 49, int),
        cluster_separation=settings.get("separation", 6.0, float),
        noise_scale=settings.get("noise", 1.0, float),
        mixed_fraction=settings.get("mixed_fraction", 0.5, float),
        seed=settings.get("seed", DEFAULTS.seed, int),
    )
    out = settings.get("out", None, str)
    if out is None:
        raise ValidationError("--out (or config key 'out') is required")
    manifest = generate_synthetic(
        spec, out,
        n_train=settings.get("samples", 2000, int),
        n_eval=settings.get("eval_samples", 500, int),
        window_len=settings.get("window_len", DEFAULTS.window_len, int),
    )
    print(manifest)
    return EXIT_OK


def cmd_prepare(args) -> int:
    settings = Settings(args, find_config(args.config))
    seed = settings.get("seed", DEFAULTS.seed, int)
    mixed_fraction = settings.get("mixed_fraction", 0.5, float)
    spec = SyntheticSpec(
        n_layers=settings.get("layers", 4, int),
        feature_dim=settings.get("dim", 49, int),
        cluster_separation=settings.get("separation", 6.0, float),
        noise_scale=settings.get("noise", 1.0, float),
        mixed_fraction=mixed_fraction,
        seed=seed,
    )
    corpus = settings.get("corpus", None, str)
    out = settings.get("out", None, str)
    if corpus is None or out is None:
        raise ValidationError("--corpus and --out (or config keys) are required")
    source = SyntheticWindowSource(spec)
    manifest_path, report = build_training_sets(
        read_corpus(corpus),
        source,
        out,
        window_len=settings.get("window_len", DEFAULTS.window_len, int),
        block=settings.get("block", DEFAULTS.block, int),
        mixed_fraction=mixed_fraction,
        seed=seed,
        model_name=args.model_name,
    )
    report_path = Path(out) / "build_report.json"
    write_json(report_path, report.as_dict())
    print(manifest_path)
    print(json.dumps(report.as_dict(), sort_keys=True))
    return EXIT_OK


def _train_one_layer(entry, base_dir, out_dir, clf_kwargs):
    loaded = read_feature_file(base_dir / entry["path"])
    if not loaded.has_labels:
        raise ValidationError(f"{entry['path']} holds no labels; cannot train on it")
    clf = VibClassifier(**clf_kwargs)
    clf.fit(loaded.features.astype(np.float64), loaded.labels)
    ckpt_path = out_dir / f"model_layer{loaded.layer_index:02d}.svm"
    save_model(clf.model_, ckpt_path)
    _write_loss_csv(out_dir / f"loss_layer{loaded.layer_index:02d}.csv", clf)
    return loaded.layer_index, ckpt_path, clf.fold_aucs_


def _write_loss_csv(path, clf) -> None:
    rows = []
    for fold_idx, fold in enumerate(clf.fold_traces_):
        auc_by_epoch = {v["epoch"]: v["auc"] for v in fold["val"]}
        for rec in fold["loss"]:
            rows.append({
                "epoch": rec["epoch"], "fold": fold_idx,
                "bce": rec["bce"], "kl": rec["kl"], "total": rec["total"],
                "fold_auc": auc_by_epoch.get(rec["epoch"], ""),
            })
    if getattr(clf, "refit_full", False):
        for rec in clf.loss_trace_:
            rows.append({
                "epoch": rec["epoch"], "fold": "final",
                "bce": rec["bce"], "kl": rec["kl"], "total": rec["total"],
                "fold_auc": "",
            })
    _write_csv(path, ["epoch", "fold", "bce", "kl", "total", "fold_auc"], rows)


def cmd_train(args) -> int:
    settings = Settings(args, find_config(args.config))
    manifest_path = settings.get("manifest", None, str)
    out = settings.get("out", None, str)
    if manifest_path is None or out is None:
        raise ValidationError("--manifest and --out (or config keys) are required")
    manifest = read_json(manifest_path)
    base_dir = Path(manifest_path).parent
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = settings.get("seed", DEFAULTS.seed, int)
    clf_kwargs = dict(
        beta=settings.get("beta", DEFAULTS.beta, float),
        learning_rate=settings.get("learning_rate", 1e-3, float),
        epochs=settings.get("epochs", 200, int),
        batch_size=settings.get("batch_size", 64, int),
        seed=seed,
        folds=settings.get("folds", 2, int),
        eval_every=settings.get("eval_every", 10, int),
        refit_full=bool(args.refit_full),
    )
    threads = settings.get("threads", DEFAULTS.threads, int)
    entries = manifest["files"]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda e: _train_one_layer(e, base_dir, out_dir, clf_kwargs), entries))
    else:
        results = [_train_one_layer(e, base_dir, out_dir, clf_kwargs) for e in entries]
    results.sort(key=lambda r: r[0])

    checkpoints = []
    for layer, path, fold_aucs in results:
        checkpoints.append({
            "layer": layer,
            "path": str(path.relative_to(out_dir)),
            "sha256": sha256_file(path),
            "fold_aucs": fold_aucs,
        })
        print(f"layer {layer}: fold AUCs {[round(a, 4) for a in fold_aucs]}")
    models_manifest = {
        "model_name": manifest.get("model_name", "unknown"),
        "n_layers": manifest["n_layers"],
        "feature_dim": manifest["feature_dim"],
        "window_len": manifest.get("window_len"),
        "training": clf_kwargs,
        "checkpoints": checkpoints,
    }
    out_path = out_dir / "models.json"
    write_json(out_path, models_manifest)
    print(out_path)
    return EXIT_OK


def cmd_filter(args) -> int:
    settings = Settings(args, find_config(args.config))
    models_path = settings.get("models", None, str)
    if models_path is None:
        raise ValidationError("--models (or config key 'models') is required")
    _, ckpt_paths = _load_models_manifest(models_path)
    xi = settings.get("xi", DEFAULTS.xi, float)
    window_len = settings.get("window_len", DEFAULTS.window_len, int)
    stride = settings.get("stride", DEFAULTS.stride, int)
    ensemble = LayerEnsemble.from_checkpoints(ckpt_paths, xi=xi)

    if args.context_json:
        context = _read_context_json(args.context_json)
    elif args.context:
        tokens = tokenize(Path(args.context).read_text(encoding="utf-8"))
        # untagged plain text: tags are unknown, mark everything supplementary
        context = TokenSequence.from_source(tokens, "supplementary")
    else:
        raise ValidationError("provide --context or --context-json")

    if args.features:
        from .windows import partition_windows

        expected = len(partition_windows(context, length=window_len, stride=stride))
        source = PrecomputedSource(args.features, n_windows_expected=expected)
    elif args.synthetic_manifest:
        feat_manifest = read_json(args.synthetic_manifest)
        if "synthetic" not in feat_manifest:
            raise ValidationError("manifest has no synthetic geometry; cannot featurize")
        spec = SyntheticSpec(
            n_layers=feat_manifest["n_layers"],
            feature_dim=feat_manifest["feature_dim"],
            cluster_separation=feat_manifest["synthetic"]["cluster_separation"],
            noise_scale=feat_manifest["synthetic"]["noise_scale"],
            mixed_fraction=feat_manifest["synthetic"]["mixed_fraction"],
            seed=feat_manifest["synthetic"]["seed"],
        )
        source = SyntheticWindowSource(spec, noise_seed=args.noise_seed)
    else:
        raise ValidationError("provide --features or --synthetic-manifest")

    result = filter_context(
        ensemble, args.query, context, source,
        window_len=window_len,
        stride=stride,
        fallback=settings.get("fallback_policy", DEFAULTS.fallback_policy, str),
        separator=settings.get("separator", DEFAULTS.separator, str),
    )
    records = decisions_to_records(result.decisions)
    if args.out_decisions:
        write_jsonl(args.out_decisions, records)
    else:
        for record in records:
            print(json.dumps(record, sort_keys=True))
    if args.out_prompt:
        atomic_write_text(args.out_prompt, result.prompt + "\n")
    else:
        print(result.prompt)
    return EXIT_OK


def cmd_eval_mc(args) -> int:
    report = compute_report(read_answer_records(args.answers))
    payload = report.as_dict()
    if args.out:
        write_json(args.out, payload)
    if args.csv:
        _write_csv(args.csv, list(payload.keys()), [payload])
    print(json.dumps(payload, sort_keys=True))
    return EXIT_UNDEFINED_METRIC if report.has_undefined else EXIT_OK


def cmd_sweep(args) -> int:
    settings = Settings(args, find_config(args.config))
    grid = _parse_grid(args.grid)
    if not grid:
        raise ValidationError("provide at least one --grid name=values")
    seed = settings.get("seed", DEFAULTS.seed, int)
    window_len = settings.get("window_len", DEFAULTS.window_len, int)
    feat_manifest = read_json(args.manifest)
    if "synthetic" not in feat_manifest:
        raise ValidationError("sweep needs a synthetic features manifest (geometry)")
    spec = SyntheticSpec(
        n_layers=feat_manifest["n_layers"],
        feature_dim=feat_manifest["feature_dim"],
        cluster_separation=feat_manifest["synthetic"]["cluster_separation"],
        noise_scale=feat_manifest["synthetic"]["noise_scale"],
        mixed_fraction=feat_manifest["synthetic"]["mixed_fraction"],
        seed=feat_manifest["synthetic"]["seed"],
    )
    contexts = make_eval_contexts(
        settings.get("eval_contexts", 8, int),
        settings.get("windows_per_context", 25, int),
        window_len=window_len,
        mixed_fraction=settings.get("mixed_fraction", 0.5, float),
        seed=seed + 7,
    )
    models_manifest, ckpt_paths = _load_models_manifest(args.models)
    trained_beta = float(models_manifest.get("training", {}).get("beta", DEFAULTS.beta))
    base_dir = Path(args.manifest).parent

    ensemble_cache: dict[float, LayerEnsemble] = {}

    def ensemble_factory(beta: float) -> LayerEnsemble:
        beta = float(beta)
        if beta in ensemble_cache:
            return ensemble_cache[beta]
        if beta == trained_beta:
            ensemble = LayerEnsemble.from_checkpoints(ckpt_paths, xi=DEFAULTS.xi)
        else:
            # quick single-split retrain per sweep point
            models = []
            for entry in feat_manifest["files"]:
                loaded = read_feature_file(base_dir / entry["path"])
                model = init_model(loaded.feature_dim, seed=seed + 11 + loaded.layer_index)
                model, _, _ = train_model(
                    model, loaded.features.astype(np.float64), loaded.labels,
                    TrainConfig(beta=beta,
                                epochs=settings.get("retrain_epochs", 40, int),
                                batch_size=settings.get("batch_size", 128, int),
                                seed=seed),
                    rng_seed=seed + 13 + loaded.layer_index,
                )
                models.append(model)
            ensemble = LayerEnsemble.from_models(models, xi=DEFAULTS.xi)
        ensemble_cache[beta] = ensemble
        return ensemble

    def source_factory(_window_len: int):
        return SyntheticWindowSource(spec, noise_seed=seed + 23)

    rows = run_sweep(
        grid,
        contexts=contexts,
        source_factory=source_factory,
        ensemble_factory=ensemble_factory,
        defaults={"xi": settings.get("xi", DEFAULTS.xi, float),
                  "beta": trained_beta, "window_len": window_len},
        uncertainty_band=settings.get("band", 0.02, float),
    )
    fieldnames = ["xi", "beta", "window_len", "acc", "uar", "tre", "mean_psi",
                  "n_windows", "scoring_seconds", "per_window_ms"]
    if args.out:
        _write_csv(args.out, fieldnames, rows)
    writer = csv.DictWriter(sys.stdout, fieldnames=fieldnames)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return EXIT_OK


def cmd_correlate(args) -> int:
    from .metrics import psi_tre_correlation

    with open(args.runs, "r", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    missing = {"run_id", "mean_psi", "tre"} - set(rows[0].keys() if rows else ())
    if missing:
        raise ValidationError(f"correlation CSV is missing columns {sorted(missing)}")
    points = [(float(r["mean_psi"]), float(r["tre"])) for r in rows]
    r = psi_tre_correlation(points)
    payload = {"n_runs": len(points),
               "pearson_r": "undefined" if r is None else r}
    if args.out:
        write_json(args.out, payload)
    print(json.dumps(payload, sort_keys=True))
    return EXIT_UNDEFINED_METRIC if r is None else EXIT_OK


def cmd_theory(args) -> int:
    if args.curve == "psi-vs-delta":
        grid = _parse_values(args.grid) if args.grid else list(np.linspace(-5.0, 5.0, 41))
        rows = [{"delta_i": d, "psi": psi}
                for d, psi in theory.psi_vs_delta_i_curve(grid, alpha=args.alpha)]
        fieldnames = ["delta_i", "psi"]
    else:
        scenario_specs = args.scenarios.split(",")
        scenarios = []
        for item in scenario_specs:
            c, _, s = item.partition(":")
            scenarios.append(theory.MixRatioScenario(
                int(c), int(s), per_context_evidence_strength=args.strength))
        rows = [{"ratio": label, "uncertainty": u}
                for label, u in theory.mix_ratio_uncertainty(scenarios)]
        fieldnames = ["ratio", "uncertainty"]
    if args.out:
        _write_csv(args.out, fieldnames, rows)
    writer = csv.DictWriter(sys.stdout, fieldnames=fieldnames)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return EXIT_OK


def cmd_validate(args) -> int:
    path = Path(args.path)
    if path.suffix == ".json":
        manifest = read_json(path)
        checked = 0
        for key in ("files", "eval_files", "checkpoints"):
            for entry in manifest.get(key) or []:
                sub = path.parent / entry["path"]
                actual = sha256_file(sub)
                if "sha256" in entry and actual != entry["sha256"]:
                    raise FormatError("sha256", f"{sub} digest mismatch")
                if sub.suffix == ".svm":
                    load_model(sub)
                else:
                    loaded = read_feature_file(sub)
                    if "records" in entry and loaded.features.shape[0] != entry["records"]:
                        raise FormatError(
                            "record_count",
                            f"{sub}: manifest says {entry['records']} records, "
                            f"file holds {loaded.features.shape[0]}",
                        )
                checked += 1
        print(f"ok: manifest with {checked} artifacts")
        return EXIT_OK
    if path.suffix == ".svm":
        model = load_model(path)
        print(f"ok: checkpoint D={model.feature_dim} L={model.latent_dim} "
              f"hidden={model.hidden}")
        return EXIT_OK
    loaded = read_feature_file(path)
    kind = "training" if loaded.has_labels else "inference"
    print(f"ok: {kind} features layer={loaded.layer_index} D={loaded.feature_dim} "
          f"records={loaded.features.shape[0]}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swinvib",
        description="Sliding-window bottleneck filtering of retrieved context.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value config file (or set SVIB_CONFIG)")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("gen-synth", help="generate synthetic feature files + manifest")
    common(p)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--eval-samples", dest="eval_samples", type=int, default=None)
    p.add_argument("--separation", type=float, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--mixed-fraction", dest="mixed_fraction", type=float, default=None)
    p.add_argument("--window-len", dest="window_len", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen_synth)

    p = sub.add_parser("prepare", help="build per-layer training files from a corpus")
    common(p)
    p.add_argument("--corpus", default=None, help="JSON-lines corpus")
    p.add_argument("--out", default=None)
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--separation", type=float, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--mixed-fraction", dest="mixed_fraction", type=float, default=None)
    p.add_argument("--window-len", dest="window_len", type=int, default=None)
    p.add_argument("--block", type=int, default=None)
    p.add_argument("--model-name", default="synthetic")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train one bottleneck per layer")
    common(p)
    p.add_argument("--manifest", default=None, help="features manifest JSON")
    p.add_argument("--out", default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--eval-every", dest="eval_every", type=int, default=None)
    p.add_argument("--refit-full", action="store_true")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("filter", help="score windows and assemble the prompt")
    common(p)
    p.add_argument("--models", default=None, help="models manifest JSON")
    p.add_argument("--query", required=True)
    p.add_argument("--context", help="plain-text context file")
    p.add_argument("--context-json", help="context JSON with tokens and source tags")
    p.add_argument("--features", help="directory of per-layer .svq inference files")
    p.add_argument("--synthetic-manifest", help="features manifest with geometry")
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--xi", type=float, default=None)
    p.add_argument("--window-len", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--fallback", dest="fallback_policy", choices=FALLBACK_POLICIES,
                   default=None)
    p.add_argument("--separator", default=None)
    p.add_argument("--out-prompt")
    p.add_argument("--out-decisions")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("eval-mc", help="compute the multiple-choice metrics report")
    common(p)
    p.add_argument("--answers", required=True, help="JSON-lines answer records")
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--csv", help="write a one-row CSV here")
    p.set_defaults(func=cmd_eval_mc)

    p = sub.add_parser("sweep", help="grid sweep over xi / beta / window_len")
    common(p)
    p.add_argument("--manifest", required=True, help="synthetic features manifest")
    p.add_argument("--models", required=True, help="models manifest JSON")
    p.add_argument("--grid", action="append",
                   help="name=start:stop:step or name=v1,v2 (repeatable)")
    p.add_argument("--eval-contexts", dest="eval_contexts", type=int, default=None)
    p.add_argument("--windows-per-context", dest="windows_per_context", type=int,
                   default=None)
    p.add_argument("--mixed-fraction", dest="mixed_fraction", type=float, default=None)
    p.add_argument("--band", type=float, default=None)
    p.add_argument("--retrain-epochs", dest="retrain_epochs", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--xi", type=float, default=None)
    p.add_argument("--window-len", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("correlate",
                       help="Pearson correlation of per-run (mean_psi, tre) pairs")
    p.add_argument("--runs", required=True,
                   help="CSV with columns run_id, mean_psi, tre")
    p.add_argument("--out", help="write the JSON result here")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("theory", help="emit theory curves as CSV")
    common(p)
    p.add_argument("--curve", choices=("psi-vs-delta", "mix-ratio"), required=True)
    p.add_argument("--grid", help="contrast grid start:stop:step (psi-vs-delta)")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--scenarios", default="4:0,3:1,2:2,1:3,0:4")
    p.add_argument("--strength", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("validate", help="validate a feature file, checkpoint or manifest")
    p.add_argument("--path", required=True)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
