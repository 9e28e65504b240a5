#!/usr/bin/env python3
"""Run the desk-scale experiment end to end and print the summary.

Trains from data/desk_eval.cfg (skipped if the model file already exists),
then evaluates on held-out warps. Outputs land in runs/desk by default.
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from fernmatch.cli import main as fernmatch_main

ROOT = os.path.normpath(os.path.join(os.path.dirname(__file__), ".."))


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=os.path.join(ROOT, "data", "desk_eval.cfg"))
    parser.add_argument("--test-warps", type=int, default=100)
    parser.add_argument("--out", default=os.path.join(ROOT, "runs", "desk", "eval"))
    args = parser.parse_args()

    start = time.perf_counter()
    code = fernmatch_main(["train", "--config", args.config])
    if code != 0:
        return code
    print(f"training took {time.perf_counter() - start:.1f} s")

    start = time.perf_counter()
    code = fernmatch_main([
        "eval", "--config", args.config,
        "--test-warps", str(args.test_warps),
        "--out", args.out,
    ])
    print(f"evaluation took {time.perf_counter() - start:.1f} s")
    return code


if __name__ == "__main__":
    sys.exit(main())
