#!/usr/bin/env python3
"""Convert the per-class JSON dumps of the `fashion-mnist` npm package to IDX.

The package ships clothes/<label>.json with {"data": [[784 ints], ...]}.
Empty entries are skipped. The first 6000 samples of every class go to the training split and the next
1000 to the test split; classes are interleaved in the output.

    npm pack fashion-mnist && tar xzf fashion-mnist-*.tgz
    python3 tools/fashion_mnist_to_idx.py package/src/clothes $PSN_DATA_DIR/fashion_mnist
"""
import argparse
import json
import pathlib
import struct

TRAIN_PER_CLASS = 6000
TEST_PER_CLASS = 1000


def write_idx(out_dir, prefix, images, labels):
    with open(out_dir / f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))
    with open(out_dir / f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("clothes_dir", type=pathlib.Path)
    ap.add_argument("out_dir", type=pathlib.Path)
    args = ap.parse_args()

    per_class = []
    for label in range(10):
        data = json.loads((args.clothes_dir / f"{label}.json").read_text())["data"]
        # Class 0 carries two empty placeholder entries.
        data = [img for img in data if img]
        if len(data) < TRAIN_PER_CLASS + TEST_PER_CLASS:
            raise SystemExit(f"class {label}: only {len(data)} samples")
        for img in data:
            if len(img) != 784 or min(img) < 0 or max(img) > 255:
                raise SystemExit(f"class {label}: malformed sample")
        per_class.append(data)

    splits = {"train": (0, TRAIN_PER_CLASS), "t10k": (TRAIN_PER_CLASS, TRAIN_PER_CLASS + TEST_PER_CLASS)}
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for prefix, (lo, hi) in splits.items():
        images, labels = [], []
        for i in range(lo, hi):
            for label in range(10):
                images.append(per_class[label][i])
                labels.append(label)
        write_idx(args.out_dir, prefix, images, labels)
        print(f"{prefix}: {len(labels)} samples")


if __name__ == "__main__":
    main()
