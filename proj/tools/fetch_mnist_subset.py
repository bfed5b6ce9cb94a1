#!/usr/bin/env python3
"""Rebuild data/mnist10k-*-idx*-ubyte.gz from the `mnist` npm package.

The package ships 10,000 grayscale MNIST digits (1,000 per class) as JSON
arrays of intensities rounded to three decimals. They are converted back to
8-bit IDX files and shuffled with a fixed seed so any prefix is class-balanced.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 tools/fetch_mnist_subset.py package/src/digits data/
"""
import gzip
import json
import struct
import sys
from pathlib import Path

import numpy as np


def main(src: Path, dst: Path) -> None:
    images, labels = [], []
    for digit in range(10):
        with open(src / f"{digit}.json") as f:
            x = np.asarray(json.load(f)["data"], dtype=np.float64).reshape(-1, 784)
        images.append(x)
        labels += [digit] * len(x)
    pixels = np.clip(np.rint(np.concatenate(images) * 255), 0, 255).astype(np.uint8)
    perm = np.random.default_rng(20180515).permutation(len(pixels))
    pixels, labels = pixels[perm], np.asarray(labels, dtype=np.uint8)[perm]
    dst.mkdir(parents=True, exist_ok=True)
    with gzip.open(dst / "mnist10k-images-idx3-ubyte.gz", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(pixels), 28, 28))
        f.write(pixels.tobytes())
    with gzip.open(dst / "mnist10k-labels-idx1-ubyte.gz", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(labels.tobytes())


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
