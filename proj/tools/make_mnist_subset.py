#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes a small MNIST subset as gzipped IDX files.

Source: the 5000-sample MNIST excerpt shipped inside the `mlxtend` wheel
(500 images per digit). Per class, the first 300 images go to the train
files and the remaining 200 to the t10k files; each split is shuffled with
a fixed seed so labels are interleaved.

    pip download --no-deps mlxtend==0.24.0
    python3 tools/make_mnist_subset.py mlxtend-0.24.0-py3-none-any.whl data/mnist
"""
import gzip
import io
import struct
import sys
import zipfile

import numpy as np

TRAIN_PER_CLASS = 300


def write_idx(path, magic, array):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in array.shape)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header)
        f.write(array.astype(np.uint8).tobytes())


def main(wheel, out_dir):
    with zipfile.ZipFile(wheel) as z:
        raw = z.read("mlxtend/data/data/mnist_5k.csv.gz")
    table = np.genfromtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",")
    images = table[:, :-1].reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.int64)

    train_idx, test_idx = [], []
    for k in range(10):
        idx = np.flatnonzero(labels == k)
        train_idx.extend(idx[:TRAIN_PER_CLASS])
        test_idx.extend(idx[TRAIN_PER_CLASS:])
    rng = np.random.RandomState(0)
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(test_idx)

    for prefix, idx in (("train", train_idx), ("t10k", test_idx)):
        write_idx(f"{out_dir}/{prefix}-images-idx3-ubyte.gz", 0x00000803, images[idx])
        write_idx(f"{out_dir}/{prefix}-labels-idx1-ubyte.gz", 0x00000801, labels[idx])
        print(prefix, len(idx))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
