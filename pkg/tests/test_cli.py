import json

import pytest

from patchqa import pipeline, qa_model, synth
from patchqa.cli import main
from patchqa.corpus import load_dataset
from patchqa.pairing import FoldPlan

from conftest import bug, description, patch, write_jsonl

FAST_MODEL = ["--epochs", "2", "--hidden", "4", "--max-len", "16",
              "--batch", "32", "--hash-dim", "8"]


@pytest.fixture
def small_corpus(tmp_path):
    path = tmp_path / "corpus.jsonl"
    synth.write_keyword_corpus(path, n_bugs=30, seed=1, patches_per_bug=1)
    return path


def run_cli(capsys, argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --- ingest ------------------------------------------------------------------


def test_ingest_summary_counts(tmp_path, capsys):
    path = write_jsonl(tmp_path / "d.jsonl", [
        bug("B-1"),
        patch("P-1", "B-1"),
        description("P-1"),
    ])
    code, out, _ = run_cli(capsys, ["ingest", "--dataset", path])
    assert code == 0
    summary = json.loads(out)
    assert summary["bugs"] == 1
    assert summary["patches"]["total"] == 1
    assert summary["patches"]["by_label"] == {"correct": 1}
    assert summary["patches"]["by_origin"] == {"developer": 1}
    assert summary["descriptions"]["by_source"] == {"human": 1}
    assert summary["duplicates_removed"] == 0


def test_ingest_reports_duplicates_removed(tmp_path, capsys):
    d = "--- a/F\n+++ b/F\n@@ -1,1 +1,1 @@\n-a\n+b\n"
    path = write_jsonl(tmp_path / "d.jsonl", [
        bug("B-1"),
        patch("P-1", "B-1", diff=d),
        patch("P-2", "B-1", diff=d),
    ])
    code, out, _ = run_cli(capsys, ["ingest", "--dataset", path])
    assert code == 0
    assert json.loads(out)["duplicates_removed"] == 1


def test_ingest_dangling_reference_fails_with_id(tmp_path, capsys):
    path = write_jsonl(tmp_path / "d.jsonl", [patch("P-1", "X-99")])
    code, _, err = run_cli(capsys, ["ingest", "--dataset", path])
    assert code != 0
    assert "X-99" in err


def test_ingest_missing_file_fails(tmp_path, capsys):
    code, _, err = run_cli(capsys, ["ingest", "--dataset", tmp_path / "nope.jsonl"])
    assert code != 0
    assert err.startswith("error:")


# --- crossval ------------------------------------------------------------------


def test_crossval_outputs_and_fold_audit(small_corpus, tmp_path, capsys):
    out_dir = tmp_path / "run"
    code, out, _ = run_cli(capsys, [
        "crossval", "--dataset", small_corpus, "--out", out_dir,
        "--k", "10", "--fold-seed", "2", "--pair-seed", "3", "--model-seed", "1",
        *FAST_MODEL,
    ])
    assert code == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert len(report["per_fold"]) == 10
    assert report["config"]["fold_seed"] == 2
    assert report["config"]["pair_seed"] == 3
    assert report["config"]["model"]["seed"] == 1
    plan = FoldPlan.from_json((out_dir / "foldplan.json").read_text())
    assert plan.k == 10
    # every bug appears in exactly one group; counts differ by at most one
    assert sorted(plan.assignments) == sorted(f"bug-{i:04d}" for i in range(30))
    sizes = [0] * 10
    for group in plan.assignments.values():
        sizes[group] += 1
    assert max(sizes) - min(sizes) <= 1
    # each example scored exactly once across folds
    lines = (out_dir / "scores.csv").read_text().strip().split("\n")
    assert lines[0] == "patch_id,bug_id,label,score"
    ids = [line.split(",")[0] for line in lines[1:]]
    assert len(ids) == len(set(ids))
    report_examples = report["statistics"]["examples"]
    assert len(ids) == report_examples
    for fold in range(10):
        assert (out_dir / f"model_fold{fold}.ckpt").exists()


def test_crossval_k_larger_than_bug_count_fails(small_corpus, tmp_path, capsys):
    code, _, err = run_cli(capsys, [
        "crossval", "--dataset", small_corpus, "--out", tmp_path / "x",
        "--k", "500", *FAST_MODEL,
    ])
    assert code != 0
    assert "exceeds" in err


def test_crossval_byte_identical_reruns(small_corpus, tmp_path, capsys):
    args = ["crossval", "--dataset", small_corpus,
            "--k", "5", "--fold-seed", "7", "--pair-seed", "8", "--model-seed", "9",
            *FAST_MODEL]
    code1, _, _ = run_cli(capsys, args + ["--out", tmp_path / "a"])
    code2, _, _ = run_cli(capsys, args + ["--out", tmp_path / "b"])
    assert code1 == 0 and code2 == 0
    for name in ("report.json", "scores.csv", "foldplan.json", "model_fold0.ckpt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


# --- train / predict / evaluate ---------------------------------------------------


@pytest.fixture
def trained_checkpoint(small_corpus, tmp_path, capsys):
    ckpt = tmp_path / "model.ckpt"
    code, _, _ = run_cli(capsys, [
        "train", "--dataset", small_corpus, "--model-out", ckpt,
        "--pair-seed", "3", "--model-seed", "1", *FAST_MODEL,
    ])
    assert code == 0
    return ckpt


def test_train_writes_loadable_checkpoint(trained_checkpoint):
    model = qa_model.load_model(trained_checkpoint)
    assert model.config.epochs == 2
    assert model.metadata["embedding"]["kind"] == "hash"


def test_predict_verdicts_and_determinism(trained_checkpoint, capsys):
    args = ["predict", "--model", trained_checkpoint,
            "--bug-text", "alpha0001 beta0001 gamma0001 failure observed",
            "--description", "alpha0001 beta0001 gamma0001 fix"]
    code, out1, _ = run_cli(capsys, args + ["--threshold", "0.4"])
    assert code == 0
    result = json.loads(out1)
    assert result["verdict"] in ("correct", "incorrect")
    assert result["label"] == (1 if result["score"] >= 0.4 else 0)
    # the score band caps below 0.9: always incorrect there
    code, out2, _ = run_cli(capsys, args + ["--threshold", "0.9"])
    assert json.loads(out2)["verdict"] == "incorrect"
    code, out3, _ = run_cli(capsys, args + ["--threshold", "0.4"])
    assert out3 == out1


def test_predict_with_diff_fallback(trained_checkpoint, tmp_path, capsys):
    diff_path = tmp_path / "patch.diff"
    diff_path.write_text(
        "--- a/src/Widget.java\n+++ b/src/Widget.java\n"
        "@@ -1,1 +1,1 @@\n-return compute(alpha0001);\n+return computeSafely(alpha0001);\n",
        encoding="utf-8")
    code, out, _ = run_cli(capsys, [
        "predict", "--model", trained_checkpoint,
        "--bug-text", "alpha0001 beta0001 gamma0001 failure", "--diff-file", diff_path,
    ])
    assert code == 0
    assert "score" in json.loads(out)


def test_predict_requires_inputs(trained_checkpoint, capsys):
    code, _, err = run_cli(capsys, ["predict", "--model", trained_checkpoint,
                                    "--description", "something"])
    assert code != 0
    assert "bug" in err


def test_evaluate_writes_report(trained_checkpoint, small_corpus, tmp_path, capsys):
    out_dir = tmp_path / "eval"
    code, out, _ = run_cli(capsys, [
        "evaluate", "--model", trained_checkpoint, "--dataset", small_corpus,
        "--out", out_dir, "--pair-seed", "3", "--threshold", "0.5",
    ])
    assert code == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert {"tp", "tn", "fp", "fn"} <= set(report["at_threshold"])
    assert len(report["sweep"]) == 9
    assert (out_dir / "scores.csv").exists()


# --- hypothesis ------------------------------------------------------------------


def test_hypothesis_direction_on_matched_corpus(small_corpus, tmp_path, capsys):
    out_path = tmp_path / "study.json"
    code, out, _ = run_cli(capsys, [
        "hypothesis", "--dataset", small_corpus, "--pair-seed", "3",
        "--hash-dim", "16", "--out", out_path,
    ])
    assert code == 0
    study = json.loads(out)
    assert study["p_value"] < 0.01
    assert study["original"]["median"] < study["random"]["median"]
    assert study["original_stochastically_smaller"] is True
    assert json.loads(out_path.read_text()) == study


def test_hypothesis_repeat_is_identical(small_corpus, capsys):
    args = ["hypothesis", "--dataset", small_corpus, "--pair-seed", "5",
            "--hash-dim", "16"]
    _, out1, _ = run_cli(capsys, args)
    _, out2, _ = run_cli(capsys, args)
    assert out1 == out2


def test_hypothesis_degenerate_corpus_fails_cleanly(tmp_path, capsys):
    records = []
    for i in range(5):
        records.append(bug(f"B-{i}", title="same text", body="same body"))
        records.append(patch(f"P-{i}", f"B-{i}"))
        records.append(description(f"P-{i}", text="same description"))
    path = write_jsonl(tmp_path / "d.jsonl", records)
    code, _, err = run_cli(capsys, ["hypothesis", "--dataset", path])
    assert code != 0
    assert "variance" in err


def test_hypothesis_needs_two_eligible_bugs(tmp_path, capsys):
    path = write_jsonl(tmp_path / "d.jsonl",
                       [bug("B-1"), patch("P-1", "B-1"), description("P-1")])
    code, _, err = run_cli(capsys, ["hypothesis", "--dataset", path])
    assert code != 0
    assert "2 bugs" in err


# --- config file -------------------------------------------------------------------


def test_config_file_supplies_defaults_and_flags_win(small_corpus, tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({
        "epochs": 1, "hidden": 4, "max-len": 16, "batch": 32, "hash-dim": 8,
        "k": 5, "fold-seed": 11, "pair-seed": 12, "model-seed": 13,
    }), encoding="utf-8")
    out_dir = tmp_path / "cfg_run"
    code, _, _ = run_cli(capsys, [
        "--config", config_path, "crossval", "--dataset", small_corpus,
        "--out", out_dir, "--k", "4",
    ])
    assert code == 0
    report = json.loads((out_dir / "report.json").read_text())
    assert report["config"]["k"] == 4  # flag beats config file
    assert report["config"]["fold_seed"] == 11
    assert report["config"]["model"]["epochs"] == 1


def test_stage_tagged_error_from_pairing(tmp_path, capsys):
    # correct patch with an empty bug report text fails inside pairing
    path = write_jsonl(tmp_path / "d.jsonl", [
        bug("B-1", title="", body=""),
        patch("P-1", "B-1"),
        description("P-1"),
    ])
    code, _, err = run_cli(capsys, [
        "crossval", "--dataset", path, "--out", tmp_path / "x", "--k", "1",
        *FAST_MODEL,
    ])
    assert code != 0
    assert "pairing:" in err
