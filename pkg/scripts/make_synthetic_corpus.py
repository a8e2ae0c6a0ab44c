#!/usr/bin/env python3
"""Generate a synthetic keyword-planted dataset file.

Every bug carries a unique keyword triple; its patch descriptions repeat the
triple, so matched pairs share exactly those keywords and mismatched pairs
share none. Useful as pipeline input with a known learnable signal.
"""

import argparse

from patchqa.synth import write_keyword_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="dataset file to write")
    parser.add_argument("--bugs", type=int, default=200)
    parser.add_argument("--patches-per-bug", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    ds = write_keyword_corpus(args.out, n_bugs=args.bugs, seed=args.seed,
                              patches_per_bug=args.patches_per_bug)
    print(f"wrote {len(ds.bugs)} bugs, {len(ds.patches)} patches, "
          f"{len(ds.descriptions)} descriptions to {args.out}")


if __name__ == "__main__":
    main()
