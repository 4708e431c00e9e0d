#!/usr/bin/env python3
"""Download the real MNIST IDX files into data/mnist/.

Needs network access. When that is unavailable, run
scripts/make_digits_fixture.py instead; it builds a smaller offline stand-in
under data/digits/ and every tool accepts either directory.
"""

import gzip
import pathlib
import urllib.request

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "mnist"
BASE = "https://ossci-datasets.s3.amazonaws.com/mnist/"
FILES = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    for name in FILES:
        dest = OUT / name
        if dest.exists():
            print(f"{name}: already present")
            continue
        url = BASE + name + ".gz"
        print(f"fetching {url}")
        with urllib.request.urlopen(url, timeout=60) as resp:
            blob = gzip.decompress(resp.read())
        dest.write_bytes(blob)
        print(f"{name}: {len(blob)} bytes")


if __name__ == "__main__":
    main()
