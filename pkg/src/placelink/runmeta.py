"""Run-metadata sidecar files for pipeline commands.

Every command writes `<output>.meta.json` (or `<dir>/<command>.meta.json`)
recording the resolved config, seed, input/output digests, and versions, so
any artifact can be reproduced from its metadata. The `ts` field is the only
non-deterministic entry.
"""

import hashlib
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _rel(p, base: Path) -> str:
    try:
        return str(Path(p).resolve().relative_to(base))
    except ValueError:
        return Path(p).name


def write_meta(meta_path, command: str, config: dict, seed, inputs: list, outputs: list) -> None:
    # paths are recorded relative to the meta file so reruns in different
    # directories produce comparable metadata
    base = Path(meta_path).resolve().parent
    doc = {
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "seed": seed,
        "inputs": {_rel(p, base): sha256_file(p) for p in inputs},
        "outputs": {_rel(p, base): sha256_file(p) for p in outputs},
        "versions": {
            "placelink": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "kernel_backend": kernels.backend_name(),
        "argv": sys.argv[1:],
        "ts": time.time(),
    }
    Path(meta_path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
