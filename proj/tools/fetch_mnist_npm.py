#!/usr/bin/env python3
"""Fill the MNIST cache from the npm package mnist-data when the default
HTTP mirror is unreachable. The raw IDX files are checked against the same
sha256 digests the C++ loader uses.

    python3 tools/fetch_mnist_npm.py [--cache DIR] [--tarball PATH]
"""

import argparse
import hashlib
import os
import shutil
import subprocess
import sys
import tarfile
import tempfile
from pathlib import Path

DIGESTS = {
    "train-images-idx3-ubyte": "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db",
    "train-labels-idx1-ubyte": "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5",
    "t10k-images-idx3-ubyte": "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7",
    "t10k-labels-idx1-ubyte": "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2",
}
PACKAGE = "mnist-data@1.2.6"


def default_cache() -> Path:
    # same lookup order as the C++ side
    if os.environ.get("KOOPNET_CACHE_DIR"):
        return Path(os.environ["KOOPNET_CACHE_DIR"])
    if os.environ.get("XDG_CACHE_HOME"):
        return Path(os.environ["XDG_CACHE_HOME"]) / "koopnet"
    return Path.home() / ".cache" / "koopnet"


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cache", type=Path, default=default_cache())
    ap.add_argument("--tarball", type=Path, help="an already downloaded npm tarball")
    args = ap.parse_args()

    target = args.cache / "mnist"
    if all((target / n).exists() and sha256(target / n) == d for n, d in DIGESTS.items()):
        print(f"cache already complete: {target}")
        return 0

    with tempfile.TemporaryDirectory() as tmp:
        tarball = args.tarball
        if tarball is None:
            if shutil.which("npm") is None:
                print("npm not found; pass --tarball", file=sys.stderr)
                return 1
            out = subprocess.run(["npm", "pack", PACKAGE, "--silent"], cwd=tmp, check=True,
                                 capture_output=True, text=True).stdout.strip().splitlines()[-1]
            tarball = Path(tmp) / out
        with tarfile.open(tarball) as tar:
            tar.extractall(tmp, members=[m for m in tar.getmembers() if m.name.startswith("package/data/")])
        target.mkdir(parents=True, exist_ok=True)
        for name, digest in DIGESTS.items():
            src = Path(tmp) / "package" / "data" / name
            if not src.exists() or sha256(src) != digest:
                print(f"{name}: missing or digest mismatch in {tarball}", file=sys.stderr)
                return 1
            shutil.copyfile(src, target / name)
    print(f"wrote {len(DIGESTS)} files to {target}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
