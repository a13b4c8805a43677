#!/usr/bin/env python3
"""Build the IDX files under data/mnist/ from the 10,000 MNIST digits bundled
in the `mnist` npm package (https://www.npmjs.com/package/mnist, v1.1.0).

    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python3 scripts/make_mnist_subset.py package/src/digits data/mnist

The package stores pixels as round(byte/255, 3); bytes are recovered with
round(v * 255). Samples are shuffled with a fixed seed and split 8000/2000.
"""
import json
import struct
import sys
from pathlib import Path

import numpy as np


def write_idx_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main(src, dst, n_train=8000):
    images, labels = [], []
    for digit in range(10):
        data = json.loads((Path(src) / f"{digit}.json").read_text())["data"]
        px = np.rint(np.asarray(data, dtype=np.float64) * 255).astype(np.uint8)
        px = px.reshape(-1, 784)
        images.append(px)
        labels.extend([digit] * len(px))
    images = np.concatenate(images)
    labels = np.asarray(labels, dtype=np.uint8)
    perm = np.random.RandomState(0).permutation(len(labels))
    images, labels = images[perm], labels[perm]

    dst = Path(dst)
    dst.mkdir(parents=True, exist_ok=True)
    write_idx_images(dst / "train-images-idx3-ubyte", images[:n_train])
    write_idx_labels(dst / "train-labels-idx1-ubyte", labels[:n_train])
    write_idx_images(dst / "t10k-images-idx3-ubyte", images[n_train:])
    write_idx_labels(dst / "t10k-labels-idx1-ubyte", labels[n_train:])
    print(f"train {n_train}, test {len(labels) - n_train}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
