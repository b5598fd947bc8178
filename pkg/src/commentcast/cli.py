"""Command-line surface for the comment-volume pipeline.

Every successful run writes a JSON manifest (resolved flags, seed, input
hashes, outputs, wall time) next to its primary output. Outputs are byte
reproducible given the same inputs and seed.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .corpus import CorpusError, OutletClocks, load_corpus, load_outlet_clocks, save_corpus
from .evaluation import (
    MetricError,
    ablation_suite,
    cross_validate,
    reports_to_csv,
    reports_to_json,
    stepwise_forward_select,
)
from .features import FeatureError, assemble_matrix, schema_manifest
from .learn import ModelSpec, TrainingError, load_model, save_model
from .ratemodel import (
    GROUPINGS,
    RateFit,
    RateModelError,
    analyses_to_csv,
    compare_lines,
    qq_normal,
    qq_pairs_to_csv,
    rate_analysis,
)
from .synth import SynthError, clamp_fraction, config_to_json, default_paper_config, generate_corpus, load_config
from .taxonomy import assignments_to_csv, categorize_topics, propagate_categories

SEED_ENV = "COMMENTCAST_SEED"
THREADS_ENV = "COMMENTCAST_THREADS"

_ERRORS = (CorpusError, FeatureError, TrainingError, MetricError, RateModelError, SynthError)


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


class _Run:
    """Collects inputs/outputs and writes the manifest on success."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.flags = {
            k: v for k, v in sorted(vars(args).items()) if k not in ("func", "seed_given")
        }
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []
        self.started = time.monotonic()

    def read(self, path: str | Path) -> Path:
        p = Path(path)
        self.inputs.append(p)
        return p

    def emit(self, path: str | Path, text: str) -> Path:
        p = Path(path)
        _write_text(p, text)
        self.outputs.append(p)
        return p

    def finish(self, manifest_path: Path | None = None) -> None:
        if manifest_path is None:
            base = self.outputs[0] if self.outputs else Path("run")
            manifest_path = base.with_name(base.name + ".manifest.json")
        manifest = {
            "command": self.command,
            "flags": {k: (str(v) if isinstance(v, Path) else v) for k, v in self.flags.items()},
            "seed": self.flags.get("seed"),
            "inputs": {str(p): _sha256(p) for p in self.inputs if p.exists()},
            "outputs": [str(p) for p in self.outputs],
            "wall_time_s": round(time.monotonic() - self.started, 3),
            "version": __version__,
        }
        _write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _int_env(name: str, fallback: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"{name} must be an integer, got '{raw}'")


def _resolve_seed(args: argparse.Namespace) -> None:
    args.seed_given = args.seed is not None or SEED_ENV in os.environ
    if args.seed is None:
        args.seed = _int_env(SEED_ENV, 0)


def _resolve_threads(args: argparse.Namespace) -> None:
    if getattr(args, "threads", None) is None:
        args.threads = _int_env(THREADS_ENV, os.cpu_count() or 1)


def _parse_feature_set(raw: str):
    if "," in raw:
        return [name.strip() for name in raw.split(",") if name.strip()]
    return raw


def _clocks(args: argparse.Namespace, run: _Run) -> OutletClocks:
    if getattr(args, "clocks", None):
        return load_outlet_clocks(run.read(args.clocks))
    return OutletClocks()


def _matrix_to_csv(matrix) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["article_id", "target", *matrix.columns])
    for i, ident in enumerate(matrix.article_ids):
        writer.writerow([ident, repr(float(matrix.y[i])), *[repr(float(v)) for v in matrix.X[i]]])
    return buf.getvalue()


def _alpha_list(raw: str) -> list[int]:
    try:
        alphas = [int(a) for a in raw.split(",") if a.strip()]
    except ValueError:
        raise SystemExit(f"invalid alpha list '{raw}'")
    if not alphas or any(a < 2 for a in alphas):
        raise SystemExit("alpha must be >= 2")
    return alphas


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(args: argparse.Namespace) -> None:
    run = _Run("synth", args)
    if args.config:
        config = load_config(run.read(args.config))
        if args.seed_given:
            config = dataclasses.replace(config, seed=args.seed)
    else:
        config = default_paper_config(seed=args.seed, alpha=args.alpha)
    if args.scale is not None:
        config = config.scaled(args.scale)
    corpus, provenance = generate_corpus(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpus_path = out / "corpus.jsonl"
    save_corpus(corpus, corpus_path)
    run.outputs.append(corpus_path)
    from .synth import provenance_to_csv

    run.emit(out / "provenance.csv", provenance_to_csv(provenance))
    run.emit(out / "config.json", config_to_json(config))
    print(
        f"generated {len(corpus)} articles, "
        f"{sum(len(a.comments) for a in corpus.articles)} comments "
        f"(volume floor hit on {clamp_fraction(provenance):.2%} of articles)"
    )
    run.finish(out / "manifest.json")


def cmd_features(args: argparse.Namespace) -> None:
    run = _Run("features", args)
    corpus = load_corpus(run.read(args.corpus))
    clocks = _clocks(args, run)
    matrix = assemble_matrix(corpus, args.alpha, _parse_feature_set(args.set), clocks=clocks)
    run.emit(args.out, _matrix_to_csv(matrix))
    run.emit(Path(args.out).with_suffix(".schema.txt"), schema_manifest())
    print(f"wrote {matrix.n_rows} rows x {len(matrix.columns)} columns ({matrix.feature_set})")
    run.finish()


def _model_spec(args: argparse.Namespace) -> ModelSpec:
    if args.model == "rf":
        return ModelSpec("rf", {"ntrees": args.ntrees})
    if args.model == "lr":
        return ModelSpec("lr", {})
    if args.model == "svr":
        return ModelSpec("svr", {"c": args.svr_c, "epsilon": args.svr_epsilon})
    if args.model == "mlp":
        return ModelSpec("mlp", {"hsize": args.hsize, "lr": args.learning_rate})
    raise SystemExit(f"unknown model '{args.model}'")


def cmd_train(args: argparse.Namespace) -> None:
    run = _Run("train", args)
    corpus = load_corpus(run.read(args.corpus))
    clocks = _clocks(args, run)
    matrix = assemble_matrix(corpus, args.alpha, _parse_feature_set(args.set), clocks=clocks)
    spec = _model_spec(args)
    model = spec.fit(matrix.X, matrix.y, seed=args.seed, threads=args.threads)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_model(
        model,
        args.out,
        metadata={
            "spec_name": spec.name,
            "spec_params": dict(spec.params),
            "feature_set": args.set,
            "alpha": args.alpha,
            "seed": args.seed,
        },
    )
    run.outputs.append(Path(args.out))
    print(f"trained {model.descriptor} on {matrix.n_rows} articles -> {args.out}")
    run.finish()


def cmd_eval(args: argparse.Namespace) -> None:
    run = _Run("eval", args)
    corpus = load_corpus(run.read(args.corpus))
    _, metadata = load_model(run.read(args.model_file))
    clocks = _clocks(args, run)
    spec = ModelSpec(metadata["spec_name"], metadata["spec_params"])
    matrix = assemble_matrix(
        corpus,
        int(metadata["alpha"]),
        _parse_feature_set(metadata["feature_set"]),
        clocks=clocks,
    )
    report = cross_validate(matrix, spec, k=args.folds, seed=args.seed, threads=args.threads)
    run.emit(args.out, reports_to_json([report]))
    print(f"{report.model} {report.feature_set}: r2={report.r2:.4f} mae={report.mae:.4f}")
    run.finish()


def cmd_ablate(args: argparse.Namespace) -> None:
    run = _Run("ablate", args)
    corpus = load_corpus(run.read(args.corpus))
    clocks = _clocks(args, run)
    models = []
    for name in args.models.split(","):
        name = name.strip()
        if not name:
            continue
        sub = argparse.Namespace(**{**vars(args), "model": name})
        models.append(_model_spec(sub))
    reports = ablation_suite(
        corpus,
        args.alpha,
        models,
        seed=args.seed,
        k=args.folds,
        threads=args.threads,
        clocks=clocks,
        include_local=not args.global_only,
    )
    run.emit(args.out, reports_to_csv(reports))
    run.emit(Path(args.out).with_suffix(".json"), reports_to_json(reports))
    print(f"wrote {len(reports)} reports to {args.out}")
    run.finish()


def cmd_select(args: argparse.Namespace) -> None:
    run = _Run("select", args)
    corpus = load_corpus(run.read(args.corpus))
    clocks = _clocks(args, run)
    matrix = assemble_matrix(corpus, args.alpha, "ALL", clocks=clocks)
    spec = _model_spec(args)
    trace = stepwise_forward_select(
        matrix, spec, k=args.folds, seed=args.seed, threads=args.threads,
        max_features=args.max_features,
    )
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["step", "feature", "cv_r2"], lineterminator="\n")
    writer.writeheader()
    writer.writerows(trace.as_rows())
    run.emit(args.out, buf.getvalue())
    print(f"selected: {', '.join(trace.chosen)} (stop: {trace.stop_reason})")
    run.finish()


def cmd_rate_fit(args: argparse.Namespace) -> None:
    run = _Run("rate-fit", args)
    corpus = load_corpus(run.read(args.corpus))
    alphas = _alpha_list(args.alpha)
    analyses = [rate_analysis(corpus, a, args.group, args.min_n) for a in alphas]
    run.emit(args.out, analyses_to_csv(analyses))
    fitted = sum(len(a.fits) for a in analyses)
    skipped = sum(len(a.skipped) for a in analyses)
    print(f"fitted {fitted} group lines ({skipped} skipped below min-n) -> {args.out}")
    run.finish()


def _fits_from_csv(path: Path) -> dict[str, RateFit]:
    fits: dict[str, RateFit] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row.get("status") != "fitted":
                continue
            key = row["group"]
            fits[key] = RateFit(
                slope=float(row["slope"]),
                intercept=float(row["intercept"]),
                slope_ci=(float(row["slope_lo"]), float(row["slope_hi"])),
                intercept_ci=(float(row["intercept_lo"]), float(row["intercept_hi"])),
                n=int(row["n"]),
                mopv=float(row["mopv"]),
                residual_std=float(row["residual_std"]),
            )
    return fits


def cmd_rate_compare(args: argparse.Namespace) -> None:
    run = _Run("rate-compare", args)
    fits = _fits_from_csv(run.read(args.fits))
    for label in (args.a, args.b):
        if label not in fits:
            raise SystemExit(f"group '{label}' not found in {args.fits}")
    comparison = compare_lines(fits[args.a], fits[args.b], args.tol, args.a, args.b)
    obj = {
        "a": args.a,
        "b": args.b,
        "relation": comparison.relation,
        "crossing_log_rate": comparison.crossing_log_rate,
        "crossing_rate": comparison.crossing_rate,
        "dominant_above": comparison.dominant_above,
        "dominant_below": comparison.dominant_below,
        "higher": comparison.higher,
    }
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if args.out:
        run.emit(args.out, text)
    print(text, end="")
    run.finish(Path(args.out).with_name(Path(args.out).name + ".manifest.json") if args.out else Path("rate-compare.manifest.json"))


def cmd_qq(args: argparse.Namespace) -> None:
    run = _Run("qq", args)
    corpus = load_corpus(run.read(args.corpus))
    scope = corpus.by_outlet(args.outlet) if args.outlet else corpus
    from .corpus import compute_target, weekly_volume

    values = [compute_target(a) for a in scope.articles if weekly_volume(a) > 0]
    pairs, corr = qq_normal(values)
    run.emit(args.out, qq_pairs_to_csv(pairs))
    print(f"qq correlation: {corr:.6f} over {len(values)} articles")
    run.finish()


def cmd_categorize(args: argparse.Namespace) -> None:
    run = _Run("categorize", args)
    corpus = load_corpus(run.read(args.corpus))
    assignments = categorize_topics(corpus)
    run.emit(args.out_assignments, assignments_to_csv(assignments))
    propagated = propagate_categories(corpus, assignments)
    out_corpus = Path(args.out_corpus)
    out_corpus.parent.mkdir(parents=True, exist_ok=True)
    save_corpus(propagated, out_corpus)
    run.outputs.append(out_corpus)
    assigned = sum(1 for a in assignments.values() if not a.unassigned)
    print(f"categorized {assigned}/{len(assignments)} topics")
    run.finish(Path(args.out_assignments).with_name("categorize.manifest.json"))


# ---------------------------------------------------------------------------
# Parser


def _add_common(p: argparse.ArgumentParser, threads: bool = True) -> None:
    p.add_argument("--seed", type=int, default=None, help=f"RNG seed (env {SEED_ENV}, default 0)")
    if threads:
        p.add_argument(
            "--threads", type=int, default=None,
            help=f"worker threads (env {THREADS_ENV}, default all cores)",
        )


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ntrees", type=int, default=100, help="random-forest tree count")
    p.add_argument("--svr-c", type=float, default=1.0)
    p.add_argument("--svr-epsilon", type=float, default=0.1)
    p.add_argument("--hsize", type=int, default=50, help="MLP hidden layer size")
    p.add_argument("--learning-rate", type=float, default=0.001, help="MLP learning rate")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commentcast",
        description="Comment-volume prediction pipeline: synthesis, features, "
        "regression, ablation, and log-log rate analysis.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a calibrated synthetic corpus")
    p.add_argument("--config", help="SynthConfig JSON (default: published calibration)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--alpha", type=int, default=10)
    p.add_argument("--scale", type=float, default=None, help="scale per-outlet article counts")
    _add_common(p, threads=False)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="emit a design-matrix CSV")
    p.add_argument("--corpus", required=True)
    p.add_argument("--alpha", type=int, default=10)
    p.add_argument("--set", default="ALL", help="ALL|UC|ART|RATE or comma-separated names")
    p.add_argument("--out", required=True)
    p.add_argument("--clocks", help="outlet timezone sidecar file")
    _add_common(p, threads=False)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="fit and serialize a model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True, choices=("lr", "rf", "svr", "mlp"))
    p.add_argument("--set", default="ALL")
    p.add_argument("--alpha", type=int, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("--clocks")
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="cross-validate a serialized model spec")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model-file", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True)
    p.add_argument("--clocks")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="feature-set x model x setting report")
    p.add_argument("--corpus", required=True)
    p.add_argument("--models", default="rf,lr", help="comma list of lr,rf,svr,mlp")
    p.add_argument("--alpha", type=int, default=10)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True)
    p.add_argument("--clocks")
    p.add_argument("--global-only", action="store_true", help="skip per-outlet reports")
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("select", help="stepwise forward feature selection")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", default="rf", choices=("lr", "rf", "svr", "mlp"))
    p.add_argument("--alpha", type=int, default=10)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--max-features", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--clocks")
    _add_model_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("rate-fit", help="per-group log-log rate lines")
    p.add_argument("--corpus", required=True)
    p.add_argument("--group", default="outlet", choices=GROUPINGS)
    p.add_argument("--alpha", default="10", help="alpha, or comma list for a sweep")
    p.add_argument("--min-n", type=int, default=3)
    p.add_argument("--out", required=True)
    _add_common(p, threads=False)
    p.set_defaults(func=cmd_rate_fit)

    p = sub.add_parser("rate-compare", help="classify two fitted rate lines")
    p.add_argument("--fits", required=True, help="CSV from rate-fit")
    p.add_argument("--a", required=True, help="first group name")
    p.add_argument("--b", required=True, help="second group name")
    p.add_argument("--tol", type=float, default=0.02, help="parallel slope tolerance")
    p.add_argument("--out")
    _add_common(p, threads=False)
    p.set_defaults(func=cmd_rate_compare)

    p = sub.add_parser("qq", help="normal Q-Q pairs of log-volumes")
    p.add_argument("--corpus", required=True)
    p.add_argument("--outlet", help="restrict to one outlet")
    p.add_argument("--out", required=True)
    _add_common(p, threads=False)
    p.set_defaults(func=cmd_qq)

    p = sub.add_parser("categorize", help="assign topic categories and propagate")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out-assignments", required=True)
    p.add_argument("--out-corpus", required=True)
    _add_common(p, threads=False)
    p.set_defaults(func=cmd_categorize)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _resolve_seed(args)
    _resolve_threads(args)
    try:
        args.func(args)
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
