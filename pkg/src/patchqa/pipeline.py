"""End-to-end orchestration: ingestion, cross-validation, the distance
hypothesis study and report writing, with seed-controlled reproducibility.

Every run is a pure function of its inputs and the three named seeds (model,
fold, pairing): reports and score dumps are byte-identical across repeated
runs. Written outputs never embed timestamps or output paths.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import corpus, embed, metrics, pairing, qa_model

__all__ = [
    "CrossvalResult",
    "DEFAULT_SWEEP",
    "EmbeddingSpec",
    "FoldOutcome",
    "PipelineError",
    "RunConfig",
    "dataset_summary",
    "load_deduped",
    "mismatch_ablation",
    "run_crossval",
    "run_hypothesis",
    "run_train",
    "score_examples",
    "vectorize_examples",
    "write_crossval_outputs",
    "write_json",
    "write_scores_csv",
]

DEFAULT_SWEEP = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


class PipelineError(Exception):
    """A stage failure; the message is prefixed with the stage name."""


@dataclass
class EmbeddingSpec:
    """Where token vectors come from: a hashed generator or a vector file."""

    kind: str = "hash"  # "hash" | "file"
    dim: int = 32
    seed: int = 0
    path: str | None = None

    def build(self):
        if self.kind == "hash":
            return embed.HashSeededEmbedding(self.dim, self.seed)
        if self.kind == "file":
            if not self.path:
                raise ValueError("file-backed embedding needs a path")
            provider = embed.FileBackedEmbedding.load(self.path, fallback_seed=self.seed)
            self.dim = provider.dim
            return provider
        raise ValueError(f"unknown embedding kind {self.kind!r}")

    def describe(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim, "seed": self.seed}
        if self.path:
            out["path"] = str(self.path)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "EmbeddingSpec":
        return cls(kind=obj.get("kind", "hash"), dim=int(obj.get("dim", 32)),
                   seed=int(obj.get("seed", 0)), path=obj.get("path"))


@dataclass
class RunConfig:
    """Everything a run needs; all seeds land in the emitted report."""

    dataset: str
    embedding: EmbeddingSpec = field(default_factory=EmbeddingSpec)
    model: qa_model.ModelConfig = field(default_factory=qa_model.ModelConfig)
    k: int = 10
    fold_seed: int = 0
    pair_seed: int = 0
    threshold: float = 0.5
    thresholds: tuple[float, ...] = DEFAULT_SWEEP

    def describe(self) -> dict:
        return {
            "dataset": str(self.dataset),
            "embedding": self.embedding.describe(),
            "model": asdict(self.model),
            "k": self.k,
            "fold_seed": self.fold_seed,
            "pair_seed": self.pair_seed,
            "threshold": self.threshold,
            "thresholds": list(self.thresholds),
        }


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(f"{name}: {exc}") from exc


def load_deduped(path) -> tuple[corpus.Dataset, int]:
    """Load a dataset file and deduplicate patches; returns (dataset, removed)."""
    ds = corpus.load_dataset(path)
    deduped = corpus.dedup_patches(ds)
    return deduped, len(ds.patches) - len(deduped.patches)


def dataset_summary(ds: corpus.Dataset, duplicates_removed: int) -> dict:
    by_label: dict[str, int] = {}
    by_origin: dict[str, int] = {}
    by_source: dict[str, int] = {}
    for patch in ds.patches.values():
        by_label[patch.label.value] = by_label.get(patch.label.value, 0) + 1
        by_origin[patch.origin.wire()] = by_origin.get(patch.origin.wire(), 0) + 1
    for desc in ds.descriptions.values():
        by_source[desc.source.value] = by_source.get(desc.source.value, 0) + 1
    return {
        "bugs": len(ds.bugs),
        "patches": {"total": len(ds.patches), "by_label": by_label, "by_origin": by_origin},
        "descriptions": {"total": len(ds.descriptions), "by_source": by_source},
        "duplicates_removed": duplicates_removed,
    }


def vectorize_examples(examples, provider, max_seq_len: int) -> list[qa_model.BatchExample]:
    out = []
    for ex in examples:
        bug_matrix = embed.prepare(embed.tokenize(ex.bug_text), provider, max_seq_len)
        desc_matrix = embed.prepare(embed.tokenize(ex.description_text), provider, max_seq_len)
        out.append(qa_model.BatchExample(bug=bug_matrix, description=desc_matrix,
                                         label=ex.label))
    return out


def score_examples(model: qa_model.QaModel, examples, provider) -> np.ndarray:
    batch = vectorize_examples(examples, provider, model.config.max_seq_len)
    return qa_model.score_many(model, batch)


@dataclass
class FoldOutcome:
    fold: int
    model: qa_model.QaModel
    test_examples: list  # pairing.QaExample, aligned with scores
    test_batch: list     # qa_model.BatchExample, aligned with scores
    scores: np.ndarray
    history: list[float]


@dataclass
class CrossvalResult:
    report: dict
    plan: pairing.FoldPlan
    score_rows: list[tuple[str, str, int, float]]  # (patch_id, bug_id, label, score)
    folds: list[FoldOutcome]


def _metric_or_none(fn, *args):
    try:
        return fn(*args)
    except ValueError:
        return None


def _fold_metrics(fold: int, scored, threshold: float, n_train: int) -> dict:
    cm = metrics.confusion_at(scored, threshold)
    return {
        "fold": fold,
        "train_examples": n_train,
        "test_examples": len(scored),
        "auc": _metric_or_none(metrics.auc, scored),
        "f1": _metric_or_none(metrics.f1, cm),
        "plus_recall": _metric_or_none(metrics.plus_recall, cm),
        "minus_recall": _metric_or_none(metrics.minus_recall, cm),
    }


def _mean_over_folds(per_fold: list[dict]) -> dict:
    out = {}
    for key in ("auc", "f1", "plus_recall", "minus_recall"):
        values = [m[key] for m in per_fold if m[key] is not None]
        out[key] = float(np.mean(values)) if values else None
    return out


def run_crossval(config: RunConfig, progress=None) -> CrossvalResult:
    """Grouped k-fold cross-validation over the dataset.

    Trains one model per fold on the other k-1 groups, scores the held-out
    group, and assembles the report: per-fold metrics at the operating
    threshold, their mean, a pooled threshold sweep and pooled statistics.
    """
    ds, removed = _stage("ingest", load_deduped, config.dataset)
    examples = _stage("pairing", pairing.build_examples, ds, config.pair_seed)
    if not examples:
        raise PipelineError("pairing: dataset yields no labeled examples")
    bug_ids = {ex.bug_id for ex in examples}
    plan = _stage("fold planning", pairing.make_fold_plan, bug_ids, config.k,
                  config.fold_seed)
    provider = _stage("embedding", config.embedding.build)
    batch = _stage("embedding", vectorize_examples, examples, provider,
                   config.model.max_seq_len)
    metadata = {"embedding": config.embedding.describe()}
    per_fold = []
    folds = []
    rows: list[tuple[str, str, int, float]] = []
    for group in range(config.k):
        if progress is not None:
            progress(group, config.k)
        train_idx = [i for i, ex in enumerate(examples)
                     if plan.assignments[ex.bug_id] != group]
        test_idx = [i for i, ex in enumerate(examples)
                    if plan.assignments[ex.bug_id] == group]
        fold_model = qa_model.QaModel.create(config.model, provider.dim, metadata)
        history: list[float] = []
        if train_idx:
            _, history = _stage(f"training fold {group}", qa_model.train,
                                fold_model, [batch[i] for i in train_idx])
        test_batch = [batch[i] for i in test_idx]
        scores = qa_model.score_many(fold_model, test_batch)
        scored = [(float(s), examples[i].label) for s, i in zip(scores, test_idx)]
        per_fold.append(_fold_metrics(group, scored, config.threshold, len(train_idx)))
        rows.extend(
            (examples[i].patch_id, examples[i].bug_id, examples[i].label, float(s))
            for s, i in zip(scores, test_idx)
        )
        folds.append(FoldOutcome(
            fold=group,
            model=fold_model,
            test_examples=[examples[i] for i in test_idx],
            test_batch=test_batch,
            scores=scores,
            history=history,
        ))
    pooled = [(row[3], row[2]) for row in rows]
    sweep = _stage("evaluation", metrics.threshold_sweep, pooled, config.thresholds)
    positives = sum(1 for ex in examples if ex.label == 1)
    report = {
        "config": config.describe(),
        "per_fold": per_fold,
        "mean": _mean_over_folds(per_fold),
        "sweep": sweep.rows(),
        "statistics": {
            "pooled_auc": sweep.auc,
            "examples": len(examples),
            "positives": positives,
            "negatives": len(examples) - positives,
            "bugs": len(bug_ids),
            "duplicates_removed": removed,
        },
    }
    return CrossvalResult(report=report, plan=plan, score_rows=rows, folds=folds)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def write_scores_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["patch_id", "bug_id", "label", "score"])
        for patch_id, bug_id, label, score_value in rows:
            writer.writerow([patch_id, bug_id, label, format(score_value, ".17g")])


def write_crossval_outputs(result: CrossvalResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.json",
        "scores": out / "scores.csv",
        "foldplan": out / "foldplan.json",
    }
    write_json(result.report, paths["report"])
    write_scores_csv(result.score_rows, paths["scores"])
    paths["foldplan"].write_text(result.plan.to_json(), encoding="utf-8")
    for fold in result.folds:
        ckpt = out / f"model_fold{fold.fold}.ckpt"
        qa_model.save_model(fold.model, ckpt)
        paths[f"model_fold{fold.fold}"] = ckpt
    return paths


def run_train(config: RunConfig):
    """Train one model on every labeled example; returns (model, history, info)."""
    ds, removed = _stage("ingest", load_deduped, config.dataset)
    examples = _stage("pairing", pairing.build_examples, ds, config.pair_seed)
    if not examples:
        raise PipelineError("pairing: dataset yields no labeled examples")
    provider = _stage("embedding", config.embedding.build)
    batch = _stage("embedding", vectorize_examples, examples, provider,
                   config.model.max_seq_len)
    model = qa_model.QaModel.create(config.model, provider.dim,
                                    {"embedding": config.embedding.describe()})
    _, history = _stage("training", qa_model.train, model, batch)
    info = {
        "examples": len(examples),
        "positives": sum(1 for ex in examples if ex.label == 1),
        "duplicates_removed": removed,
        "loss_history": history,
    }
    return model, history, info


def run_hypothesis(ds: corpus.Dataset, provider, seed: int) -> dict:
    """Distance study: matched (bug report, developer description) pairs vs
    seeded random re-pairings, on jointly standardized mean-token vectors."""
    by_bug: dict[str, list] = {}
    for patch in ds.patches.values():
        by_bug.setdefault(patch.bug_id, []).append(patch)
    pairs = []  # (bug_id, bug_text, description_text)
    for bug_id, bug in ds.bugs.items():
        text = None
        for patch in by_bug.get(bug_id, []):
            if patch.origin.is_developer:
                text = pairing.resolve_description(ds, patch)
                if text is not None:
                    break
        if text is not None:
            pairs.append((bug_id, bug.text, text))
    if len(pairs) < 2:
        raise ValueError("hypothesis study needs at least 2 bugs with developer "
                         "patch descriptions")
    bug_vectors = np.stack([embed.text_vector(t, provider) for _, t, _ in pairs])
    desc_vectors = np.stack([embed.text_vector(d, provider) for _, _, d in pairs])
    standardized = embed.standardize(np.vstack([bug_vectors, desc_vectors]))
    n = len(pairs)
    bug_std = standardized[:n]
    desc_std = standardized[n:]
    rng = np.random.default_rng(seed)
    original = [(bug_std[i], desc_std[i]) for i in range(n)]
    randomized = []
    for i in range(n):
        j = int(rng.integers(n - 1))
        if j >= i:
            j += 1
        randomized.append((bug_std[i], desc_std[j]))
    study = metrics.euclidean_distance_study(original, randomized)
    return {
        "pairs": n,
        "seed": seed,
        "u_statistic": study.u_statistic,
        "p_value": study.p_value,
        "original": {
            "median": study.original_median,
            "mean": float(study.original_distances.mean()),
            "distances": [float(x) for x in study.original_distances],
        },
        "random": {
            "median": study.random_median,
            "mean": float(study.random_distances.mean()),
            "distances": [float(x) for x in study.random_distances],
        },
        "original_stochastically_smaller":
            bool(study.original_median < study.random_median),
    }


def mismatch_ablation(result: CrossvalResult, provider, threshold: float,
                      seed: int) -> dict:
    """Re-pair recalled test positives with random other test bugs and rescore.

    For each fold, takes the label-1 test examples scoring at or above the
    threshold, swaps their bug report for a random different bug's report
    drawn from the same fold's test data, and rescores with the fold model.
    """
    rng = np.random.default_rng(seed)
    before: list[float] = []
    after: list[float] = []
    for fold in result.folds:
        bug_texts: dict[str, str] = {}
        for ex in fold.test_examples:
            bug_texts.setdefault(ex.bug_id, ex.bug_text)
        if len(bug_texts) < 2:
            continue
        bug_ids = list(bug_texts)
        max_len = fold.model.config.max_seq_len
        for idx, ex in enumerate(fold.test_examples):
            if ex.label != 1 or fold.scores[idx] < threshold:
                continue
            others = [b for b in bug_ids if b != ex.bug_id]
            wrong = others[int(rng.integers(len(others)))]
            wrong_matrix = embed.prepare(embed.tokenize(bug_texts[wrong]), provider,
                                         max_len)
            swapped = qa_model.BatchExample(bug=wrong_matrix,
                                            description=fold.test_batch[idx].description,
                                            label=1)
            before.append(float(fold.scores[idx]))
            after.append(qa_model.score(fold.model, swapped))
    if not before:
        raise ValueError("no recalled positives available to ablate")
    before_arr = np.asarray(before)
    after_arr = np.asarray(after)
    lost = int((after_arr < threshold).sum())
    return {
        "threshold": threshold,
        "recalled": len(before),
        "mean_original": float(before_arr.mean()),
        "mean_ablated": float(after_arr.mean()),
        "lost": lost,
        "lost_fraction": lost / len(before),
    }
