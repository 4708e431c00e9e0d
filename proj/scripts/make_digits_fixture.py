#!/usr/bin/env python3
"""Build a small offline IDX dataset from sklearn's bundled digits.

The 1797 8x8 digit images are bilinearly upscaled to 28x28, rescaled to
0..255, shuffled with a fixed seed and split 1000 train / 797 test. Output
files use the classic IDX names under data/digits/ so they drop into the
same manifests as a real MNIST download (see scripts/fetch_mnist.py for
that). Requires numpy and scikit-learn.
"""

import hashlib
import pathlib
import struct

import numpy as np
from sklearn.datasets import load_digits

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "digits"
SEED = 7
TRAIN = 1000


def upscale28(img8: np.ndarray) -> np.ndarray:
    """Bilinear 8x8 -> 28x28 with edge clamping, pixel centers aligned."""
    pos = (np.arange(28) + 0.5) * (8.0 / 28.0) - 0.5
    lo = np.clip(np.floor(pos).astype(int), 0, 7)
    hi = np.clip(lo + 1, 0, 7)
    frac = np.clip(pos - np.floor(pos), 0.0, 1.0)
    frac[pos < 0] = 0.0

    rows = img8[lo, :] * (1.0 - frac)[:, None] + img8[hi, :] * frac[:, None]
    out = rows[:, lo] * (1.0 - frac)[None, :] + rows[:, hi] * frac[None, :]
    return out


def to_bytes(images: np.ndarray) -> bytes:
    n = images.shape[0]
    header = struct.pack(">IIII", 0x00000803, n, 28, 28)
    return header + images.astype(np.uint8).tobytes()


def labels_to_bytes(labels: np.ndarray) -> bytes:
    return struct.pack(">II", 0x00000801, labels.shape[0]) + labels.astype(np.uint8).tobytes()


def main() -> None:
    ds = load_digits()
    imgs8 = ds.images  # (1797, 8, 8), float 0..16
    labels = ds.target.astype(np.uint8)

    big = np.empty((imgs8.shape[0], 28, 28), dtype=np.uint8)
    for i, im in enumerate(imgs8):
        up = upscale28(im) * (255.0 / 16.0)
        big[i] = np.clip(np.rint(up), 0, 255).astype(np.uint8)

    rng = np.random.RandomState(SEED)
    perm = rng.permutation(big.shape[0])
    big, labels = big[perm], labels[perm]

    OUT.mkdir(parents=True, exist_ok=True)
    parts = {
        "train-images-idx3-ubyte": to_bytes(big[:TRAIN]),
        "train-labels-idx1-ubyte": labels_to_bytes(labels[:TRAIN]),
        "t10k-images-idx3-ubyte": to_bytes(big[TRAIN:]),
        "t10k-labels-idx1-ubyte": labels_to_bytes(labels[TRAIN:]),
    }
    for name, blob in parts.items():
        path = OUT / name
        path.write_bytes(blob)
        digest = hashlib.md5(blob).hexdigest()
        print(f"{name}: {len(blob)} bytes md5 {digest}")
    print(f"wrote {big.shape[0]} images ({TRAIN} train, {big.shape[0] - TRAIN} test) to {OUT}")


if __name__ == "__main__":
    main()
