#!/usr/bin/env python3
"""Build the small MNIST subset shipped in data/mnist-subset/.

Source: the `mnist` npm package (MIT, https://github.com/cazala/mnist), whose
src/digits/<d>.json files hold MNIST digits as 784-float rows in [0, 1].

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist-subset

Writes standard IDX files (train: 500 images, t10k: 100 images), 50 + 10 per
class, interleaved by a fixed permutation.
"""
import json
import random
import struct
import sys
from pathlib import Path

TRAIN_PER_CLASS = 50
VALID_PER_CLASS = 10


def write_images(path, rows):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", 2051, len(rows), 28, 28))
        for row in rows:
            fh.write(bytes(min(255, max(0, round(v * 255))) for v in row))


def write_labels(path, labels):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", 2049, len(labels)))
        fh.write(bytes(labels))


def main(src, dst):
    src, dst = Path(src), Path(dst)
    train, valid = [], []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        rows = [data[i * 784:(i + 1) * 784] for i in range(len(data) // 784)]
        train += [(r, digit) for r in rows[:TRAIN_PER_CLASS]]
        valid += [(r, digit) for r in rows[TRAIN_PER_CLASS:TRAIN_PER_CLASS + VALID_PER_CLASS]]
    rng = random.Random(2049)
    rng.shuffle(train)
    rng.shuffle(valid)
    dst.mkdir(parents=True, exist_ok=True)
    write_images(dst / "train-images-idx3-ubyte", [r for r, _ in train])
    write_labels(dst / "train-labels-idx1-ubyte", [d for _, d in train])
    write_images(dst / "t10k-images-idx3-ubyte", [r for r, _ in valid])
    write_labels(dst / "t10k-labels-idx1-ubyte", [d for _, d in valid])


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
