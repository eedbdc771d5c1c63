#!/usr/bin/env python3
"""Convert the 10,000 MNIST digits bundled in the `mnist` npm package into
gzipped IDX files (8,000 train / 2,000 test) plus a dataset manifest.

Usage: npm pack mnist && tar xzf mnist-1.1.0.tgz
       python3 scripts/mnist_npm_to_idx.py package/src/digits data/mnist-10k
"""
import gzip
import json
import os
import random
import struct
import sys


def write_images(path, images):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main(src, dst, n_train=8000, seed=0):
    samples = []
    for digit in range(10):
        with open(os.path.join(src, f"{digit}.json")) as f:
            flat = json.load(f)["data"]
        assert len(flat) % 784 == 0
        for k in range(len(flat) // 784):
            px = [int(round(v * 255)) for v in flat[k * 784:(k + 1) * 784]]
            assert all(0 <= p <= 255 for p in px)
            samples.append((px, digit))
    random.Random(seed).shuffle(samples)
    train, test = samples[:n_train], samples[n_train:]
    os.makedirs(dst, exist_ok=True)
    write_images(os.path.join(dst, "train-images-idx3-ubyte.gz"), [s[0] for s in train])
    write_labels(os.path.join(dst, "train-labels-idx1-ubyte.gz"), [s[1] for s in train])
    write_images(os.path.join(dst, "t10k-images-idx3-ubyte.gz"), [s[0] for s in test])
    write_labels(os.path.join(dst, "t10k-labels-idx1-ubyte.gz"), [s[1] for s in test])
    manifest = {
        "mnist": {
            "format": "idx",
            "train_images": "train-images-idx3-ubyte.gz",
            "train_labels": "train-labels-idx1-ubyte.gz",
            "test_images": "t10k-images-idx3-ubyte.gz",
            "test_labels": "t10k-labels-idx1-ubyte.gz",
        }
    }
    with open(os.path.join(dst, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    print(f"{len(train)} train / {len(test)} test samples written to {dst}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
