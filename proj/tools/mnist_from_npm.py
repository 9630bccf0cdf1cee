#!/usr/bin/env python3
"""Convert the digit samples bundled with the npm `mnist` package to IDX files.

The npm package ships 10,000 MNIST digits as per-class JSON arrays of
intensities already divided by 255 and rounded to three decimals. Multiplying
by 255 and rounding recovers the original bytes exactly. Samples are written
class-interleaved (0,1,...,9,0,1,...) so prefixes stay roughly balanced.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_from_npm.py package/src/digits data/mnist
"""
import argparse
import gzip
import json
import pathlib
import struct


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("digits_dir", type=pathlib.Path)
    parser.add_argument("out_dir", type=pathlib.Path)
    args = parser.parse_args()

    per_digit = []
    for digit in range(10):
        flat = json.loads((args.digits_dir / f"{digit}.json").read_text())["data"]
        if len(flat) % 784:
            raise SystemExit(f"{digit}.json: length {len(flat)} is not a multiple of 784")
        per_digit.append([flat[i:i + 784] for i in range(0, len(flat), 784)])

    images = bytearray()
    labels = bytearray()
    longest = max(len(samples) for samples in per_digit)
    for i in range(longest):
        for digit, samples in enumerate(per_digit):
            if i < len(samples):
                images.extend(int(round(v * 255.0)) for v in samples[i])
                labels.append(digit)

    count = len(labels)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(args.out_dir / "train-images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, count, 28, 28))
        f.write(bytes(images))
    with gzip.GzipFile(args.out_dir / "train-labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, count))
        f.write(bytes(labels))
    print(f"wrote {count} images to {args.out_dir}")


if __name__ == "__main__":
    main()
