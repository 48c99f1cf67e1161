#!/usr/bin/env python3
"""Convert the digits bundled in the npm `mnist` package into gzipped IDX files.

Usage: npm pack mnist && tar xzf mnist-*.tgz
       python3 scripts/mnist_from_npm.py package/src/digits data/mnist

The package ships 10000 MNIST digits as per-class JSON arrays of intensities
scaled to [0, 1]. They are shuffled with a fixed seed and split into a
9000-digit train file and a 1000-digit test file.
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def main(src: Path, dst: Path) -> None:
    samples = []
    for label in range(10):
        data = json.loads((src / f"{label}.json").read_text())["data"]
        for i in range(0, len(data), 784):
            pixels = bytes(round(v * 255) for v in data[i : i + 784])
            samples.append((pixels, label))
    random.Random(20170601).shuffle(samples)
    dst.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", samples[:9000]), ("t10k", samples[9000:])):
        with gzip.GzipFile(dst / f"{name}-images-idx3-ubyte.gz", "wb", mtime=0) as f:
            f.write(struct.pack(">IIII", 0x803, len(part), 28, 28))
            for pixels, _ in part:
                f.write(pixels)
        with gzip.GzipFile(dst / f"{name}-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
            f.write(struct.pack(">II", 0x801, len(part)))
            f.write(bytes(label for _, label in part))


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
