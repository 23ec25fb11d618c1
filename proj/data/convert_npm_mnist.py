#!/usr/bin/env python3
"""Build the IDX fixtures in this directory from the `mnist` npm package.

The npm package (MIT, J. Cazala) ships 10000 MNIST digits as JSON arrays of
pixel intensities in [0, 1] rounded to three decimals. They are mapped back to
bytes with round(v * 255), interleaved across classes with a fixed seed, and
split into a training and a test file.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 convert_npm_mnist.py package/src/digits .
"""
import json
import random
import struct
import sys
from pathlib import Path

TRAIN_COUNT = 3000
TEST_COUNT = 500


def write_idx(prefix: Path, samples):
    with open(f"{prefix}-images.idx", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(samples), 28, 28))
        for pixels, _ in samples:
            f.write(bytes(pixels))
    with open(f"{prefix}-labels.idx", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    samples = []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        for k in range(len(data) // 784):
            chunk = data[k * 784:(k + 1) * 784]
            samples.append(([min(255, round(v * 255)) for v in chunk], digit))
    random.Random(20211206).shuffle(samples)
    write_idx(dst / "mnist-train", samples[:TRAIN_COUNT])
    write_idx(dst / "mnist-test", samples[TRAIN_COUNT:TRAIN_COUNT + TEST_COUNT])


if __name__ == "__main__":
    main()
