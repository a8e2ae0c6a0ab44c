"""Command-line interface wiring the whole pipeline.

Subcommands: ingest | crossval | train | predict | evaluate | hypothesis.
Options may also come from a JSON config file (--config); explicit flags win.
All randomness flows from the three named seeds (--model-seed, --fold-seed,
--pair-seed), so equal inputs produce byte-identical outputs. Exit code is 0
iff no stage errored.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline, qa_model
from .corpus import DatasetError
from .diffsum import DiffParseError
from .embed import prepare, tokenize
from .pipeline import EmbeddingSpec, PipelineError, RunConfig


def _add_embedding_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--embeddings", help="path to a token vector file")
    sp.add_argument("--hash-seed", type=int,
                    help="seed for hashed token vectors (default 0)")
    sp.add_argument("--hash-dim", type=int,
                    help="dimension of hashed token vectors (default 32)")


def _add_model_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--epochs", type=int, help="training epochs (default 10)")
    sp.add_argument("--lr", type=float, help="learning rate (default 0.01)")
    sp.add_argument("--hidden", type=int, help="hidden size per direction (default 16)")
    sp.add_argument("--max-len", type=int, help="max sequence length (default 64)")
    sp.add_argument("--batch", type=int, help="batch size (default 128)")
    sp.add_argument("--model-seed", type=int, help="model init/shuffle seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patchqa",
        description="Predict patch correctness by matching bug reports to "
                    "patch descriptions.",
    )
    parser.add_argument("--config", help="JSON file with default option values; "
                                         "explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="load a dataset, deduplicate, print counts")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", help="also write the summary JSON here")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("crossval", help="grouped k-fold cross-validation")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--k", type=int, help="number of groups (default 10)")
    sp.add_argument("--fold-seed", type=int, help="fold assignment seed (default 0)")
    sp.add_argument("--pair-seed", type=int, help="mismatch pairing seed (default 0)")
    sp.add_argument("--threshold", type=float,
                    help="operating threshold for per-fold metrics (default 0.5)")
    sp.add_argument("--thresholds",
                    help="comma-separated sweep thresholds (default 0.1..0.9)")
    _add_embedding_flags(sp)
    _add_model_flags(sp)
    sp.set_defaults(func=cmd_crossval)

    sp = sub.add_parser("train", help="train one model on every labeled example")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--model-out", required=True, help="checkpoint path to write")
    sp.add_argument("--pair-seed", type=int)
    _add_embedding_flags(sp)
    _add_model_flags(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("predict", help="score one bug/patch pair with a checkpoint")
    sp.add_argument("--model", required=True, help="model checkpoint path")
    sp.add_argument("--bug-text", help="bug report text (title and body)")
    sp.add_argument("--bug-file", help="file holding the bug report text")
    sp.add_argument("--description", help="patch description text")
    sp.add_argument("--diff-file", help="unified diff file; summarized when no "
                                        "description is given")
    sp.add_argument("--threshold", type=float,
                    help="decision threshold (default 0.5)")
    _add_embedding_flags(sp)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="score a dataset with a checkpoint and "
                                         "write a metrics report")
    sp.add_argument("--model", required=True)
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--pair-seed", type=int)
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--thresholds")
    _add_embedding_flags(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("hypothesis", help="matched vs random pair distance study")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--pair-seed", type=int, help="random re-pairing seed (default 0)")
    sp.add_argument("--out", help="also write the study JSON here")
    _add_embedding_flags(sp)
    sp.set_defaults(func=cmd_hypothesis)

    return parser


def _option(args, name: str, default):
    """Flag value if given, else the config-file value, else the default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    return getattr(args, "_config_values", {}).get(name, default)


def _embedding_spec(args) -> EmbeddingSpec:
    path = _option(args, "embeddings", None)
    seed = _option(args, "hash_seed", 0)
    dim = _option(args, "hash_dim", 32)
    if path:
        return EmbeddingSpec(kind="file", path=str(path), seed=seed, dim=dim)
    return EmbeddingSpec(kind="hash", dim=dim, seed=seed)


def _model_config(args) -> qa_model.ModelConfig:
    return qa_model.ModelConfig(
        max_seq_len=_option(args, "max_len", 64),
        hidden_size=_option(args, "hidden", 16),
        learning_rate=_option(args, "lr", 0.01),
        epochs=_option(args, "epochs", 10),
        batch_size=_option(args, "batch", 128),
        seed=_option(args, "model_seed", 0),
    )


def _sweep_thresholds(args) -> tuple[float, ...]:
    raw = _option(args, "thresholds", None)
    if raw is None:
        return pipeline.DEFAULT_SWEEP
    if isinstance(raw, (list, tuple)):
        return tuple(float(t) for t in raw)
    return tuple(float(t) for t in str(raw).split(",") if t.strip())


def _run_config(args) -> RunConfig:
    return RunConfig(
        dataset=args.dataset,
        embedding=_embedding_spec(args),
        model=_model_config(args),
        k=_option(args, "k", 10),
        fold_seed=_option(args, "fold_seed", 0),
        pair_seed=_option(args, "pair_seed", 0),
        threshold=_option(args, "threshold", 0.5),
        thresholds=_sweep_thresholds(args),
    )


def cmd_ingest(args) -> int:
    ds, removed = pipeline.load_deduped(args.dataset)
    summary = pipeline.dataset_summary(ds, removed)
    text = json.dumps(summary, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def cmd_crossval(args) -> int:
    config = _run_config(args)

    def progress(fold, k):
        print(f"fold {fold + 1}/{k}", file=sys.stderr)

    result = pipeline.run_crossval(config, progress=progress)
    pipeline.write_crossval_outputs(result, args.out)
    print(json.dumps({"mean": result.report["mean"],
                      "statistics": result.report["statistics"]},
                     indent=2, sort_keys=True))
    return 0


def cmd_train(args) -> int:
    config = _run_config(args)
    model, history, info = pipeline.run_train(config)
    qa_model.save_model(model, args.model_out)
    print(json.dumps({"examples": info["examples"], "positives": info["positives"],
                      "final_loss": history[-1]}, indent=2, sort_keys=True))
    return 0


def _predict_provider(args, model: qa_model.QaModel):
    if getattr(args, "embeddings", None) or getattr(args, "hash_seed", None) is not None \
            or getattr(args, "hash_dim", None) is not None:
        spec = _embedding_spec(args)
    elif "embedding" in model.metadata:
        spec = EmbeddingSpec.from_dict(model.metadata["embedding"])
    else:
        spec = EmbeddingSpec()
    provider = spec.build()
    if provider.dim != model.input_dim:
        raise ValueError(
            f"embedding dim {provider.dim} does not match model input dim "
            f"{model.input_dim}"
        )
    return provider


def cmd_predict(args) -> int:
    model = qa_model.load_model(args.model)
    provider = _predict_provider(args, model)
    if args.bug_text is not None:
        bug_text = args.bug_text
    elif args.bug_file:
        bug_text = Path(args.bug_file).read_text(encoding="utf-8")
    else:
        raise ValueError("predict needs --bug-text or --bug-file")
    if args.description is not None:
        description = args.description
    elif args.diff_file:
        from .diffsum import describe_diff
        description = describe_diff(Path(args.diff_file).read_text(encoding="utf-8"))
    else:
        raise ValueError("predict needs --description or --diff-file")
    threshold = _option(args, "threshold", 0.5)
    max_len = model.config.max_seq_len
    example = qa_model.BatchExample(
        bug=prepare(tokenize(bug_text), provider, max_len),
        description=prepare(tokenize(description), provider, max_len),
        label=0,
    )
    result = qa_model.predict(model, example, threshold)
    print(json.dumps({
        "score": result.score,
        "label": result.label,
        "verdict": "correct" if result.label == 1 else "incorrect",
        "threshold": threshold,
    }, indent=2, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    from . import metrics, pairing

    model = qa_model.load_model(args.model)
    provider = _predict_provider(args, model)
    ds, removed = pipeline.load_deduped(args.dataset)
    examples = pairing.build_examples(ds, _option(args, "pair_seed", 0))
    if not examples:
        raise ValueError("dataset yields no labeled examples")
    scores = pipeline.score_examples(model, examples, provider)
    rows = [(ex.patch_id, ex.bug_id, ex.label, float(s))
            for ex, s in zip(examples, scores)]
    scored = [(row[3], row[2]) for row in rows]
    sweep = metrics.threshold_sweep(scored, _sweep_thresholds(args))
    threshold = _option(args, "threshold", 0.5)
    cm = metrics.confusion_at(scored, threshold)
    report = {
        "config": {
            "dataset": str(args.dataset),
            "model": str(args.model),
            "pair_seed": _option(args, "pair_seed", 0),
            "threshold": threshold,
        },
        "at_threshold": {
            "tp": cm.tp, "tn": cm.tn, "fp": cm.fp, "fn": cm.fn,
            "plus_recall": pipeline._metric_or_none(metrics.plus_recall, cm),
            "minus_recall": pipeline._metric_or_none(metrics.minus_recall, cm),
            "f1": pipeline._metric_or_none(metrics.f1, cm),
        },
        "sweep": sweep.rows(),
        "statistics": {
            "auc": sweep.auc,
            "examples": len(examples),
            "duplicates_removed": removed,
        },
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pipeline.write_json(report, out / "report.json")
    pipeline.write_scores_csv(rows, out / "scores.csv")
    print(json.dumps(report["at_threshold"], indent=2, sort_keys=True))
    return 0


def cmd_hypothesis(args) -> int:
    ds, _ = pipeline.load_deduped(args.dataset)
    spec = _embedding_spec(args)
    provider = spec.build()
    report = pipeline.run_hypothesis(ds, provider, _option(args, "pair_seed", 0))
    report["embedding"] = spec.describe()
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: config: {exc}", file=sys.stderr)
            return 1
        if not isinstance(values, dict):
            print("error: config: expected a JSON object", file=sys.stderr)
            return 1
        args._config_values = {k.replace("-", "_"): v for k, v in values.items()}
    try:
        return args.func(args)
    except (DatasetError, DiffParseError, PipelineError, qa_model.TrainingError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
