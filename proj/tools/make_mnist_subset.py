#!/usr/bin/env python3
"""Build the bundled 10k MNIST subset as gzip IDX files.

Source: the `mnist` npm package (v1.1.0), which ships the first 10000 MNIST
training digits as JSON arrays of pixel/255 rounded to three decimals. Three
decimals is finer than half a grey level, so round(x * 255) restores the
original bytes exactly.

    npm pack mnist@1.1.0 && tar xzf mnist-1.1.0.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/

Digits are stored grouped by class in the package; the output keeps a fixed
interleaving (seeded shuffle) so the files look like an ordinary IDX split.
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def main() -> int:
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    samples = []
    for digit in range(10):
        flat = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(flat) % 784 == 0
        for k in range(len(flat) // 784):
            px = flat[k * 784:(k + 1) * 784]
            samples.append((bytes(round(v * 255) for v in px), digit))
    random.Random(20221017).shuffle(samples)

    n = len(samples)
    dst.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(dst / "mnist10k-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        for img, _ in samples:
            f.write(img)
    with gzip.GzipFile(dst / "mnist10k-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(lbl for _, lbl in samples))
    print(f"wrote {n} samples to {dst}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
