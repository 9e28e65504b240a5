#!/usr/bin/env python3
"""Regenerate the bundled model image (data/model_512.pgm).

Deterministic: the same seed always reproduces the committed file byte for
byte.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from fernmatch import save_pgm
from fernmatch.texture import synthetic_texture


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=os.path.join(
        os.path.dirname(__file__), "..", "data", "model_512.pgm"))
    parser.add_argument("--size", type=int, default=512)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--shapes", type=int, default=400)
    args = parser.parse_args()

    image = synthetic_texture(args.size, args.size, seed=args.seed,
                              num_shapes=args.shapes)
    save_pgm(image, args.out)
    print(f"wrote {args.size}x{args.size} texture to {args.out}")


if __name__ == "__main__":
    main()
