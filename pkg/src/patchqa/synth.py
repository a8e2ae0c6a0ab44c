"""Synthetic keyword-planted corpora for end-to-end pipeline experiments.

Every bug gets a unique keyword triple placed at the front of its report
title; the matched patch description repeats exactly those keywords. The
filler vocabularies for report and description sides are disjoint, so token
overlap between a report and a description occurs if and only if the pair is
matched. The corpora therefore carry a known, learnable signal with no
external data.
"""

from __future__ import annotations

import numpy as np

from .corpus import (
    BugReport,
    Dataset,
    DescriptionSource,
    Label,
    Origin,
    PatchDescription,
    PatchRecord,
    save_dataset,
)

__all__ = ["BUG_FILLER", "DESC_FILLER", "build_keyword_corpus", "write_keyword_corpus"]

BUG_FILLER = (
    "observed", "failure", "when", "calling", "method", "unexpected",
    "result", "version", "trace", "thrown", "reproduce", "environment",
)

DESC_FILLER = (
    "fix", "handle", "guard", "update", "return", "check",
    "branch", "input", "case", "change", "adjust", "validate",
)


def _keywords(index: int) -> list[str]:
    return [f"alpha{index:04d}", f"beta{index:04d}", f"gamma{index:04d}"]


def _diff_for(index: int, keyword: str, variant: int) -> str:
    return (
        f"--- a/src/Widget{index:04d}.java\n"
        f"+++ b/src/Widget{index:04d}.java\n"
        "@@ -10,3 +10,3 @@\n"
        "     int value = base;\n"
        f"-    return compute({keyword});\n"
        f"+    return computeSafely({keyword}, {variant});\n"
    )


def build_keyword_corpus(n_bugs: int = 200, seed: int = 0,
                         patches_per_bug: int = 3) -> Dataset:
    """Build a corpus of bugs with matched developer patches and descriptions.

    Every patch of a bug carries its own description that repeats the bug's
    keyword triple with fresh filler, mirroring real corpora where one bug
    attracts several equivalent fixes.
    """
    if n_bugs < 2:
        raise ValueError("need at least 2 bugs")
    if patches_per_bug < 1:
        raise ValueError("need at least 1 patch per bug")
    rng = np.random.default_rng(seed)
    ds = Dataset()
    for i in range(n_bugs):
        kws = _keywords(i)
        title_filler = list(rng.choice(BUG_FILLER, size=2, replace=True))
        body_filler = list(rng.choice(BUG_FILLER, size=5, replace=True))
        bug_id = f"bug-{i:04d}"
        ds.bugs[bug_id] = BugReport(
            bug_id=bug_id,
            title=" ".join(kws + title_filler),
            body=" ".join(body_filler),
        )
        for p in range(patches_per_bug):
            desc_filler = list(rng.choice(DESC_FILLER, size=3, replace=True))
            patch_id = f"patch-{i:04d}-{p}"
            ds.patches[patch_id] = PatchRecord(
                patch_id=patch_id,
                bug_id=bug_id,
                diff=_diff_for(i, kws[0], p),
                origin=Origin("developer"),
                label=Label.CORRECT,
            )
            ds.descriptions[patch_id] = PatchDescription(
                patch_id=patch_id,
                text=" ".join(kws + desc_filler),
                source=DescriptionSource.HUMAN,
            )
    return ds


def write_keyword_corpus(path, n_bugs: int = 200, seed: int = 0,
                         patches_per_bug: int = 3) -> Dataset:
    """Build a keyword corpus and write it as a dataset file."""
    ds = build_keyword_corpus(n_bugs=n_bugs, seed=seed,
                              patches_per_bug=patches_per_bug)
    save_dataset(ds, path)
    return ds
