"""Run manifests and staged output directories."""

from __future__ import annotations

import hashlib
import json
import shutil
import tempfile
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Mapping

# Keys that legitimately differ between otherwise identical runs.
VOLATILE_KEYS = ("created_at",)


def tool_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def hash_tree(root) -> dict[str, str]:
    """sha256 of every regular file under ``root``, keyed by POSIX relative path."""
    root = Path(root)
    return {
        p.relative_to(root).as_posix(): sha256_file(p)
        for p in sorted(root.rglob("*")) if p.is_file()
    }


def build_manifest(
    command: str,
    config: Mapping,
    inputs: Mapping[str, str],
    outputs: Mapping[str, str],
    seeds: Mapping[str, int],
) -> dict:
    return {
        "command": command,
        "tool_version": tool_version(),
        "config": dict(config),
        "seeds": dict(seeds),
        "inputs": dict(sorted(inputs.items())),
        "outputs": dict(sorted(outputs.items())),
        "created_at": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
    }


def write_manifest(manifest: Mapping, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def stable_view(manifest: Mapping) -> dict:
    """The manifest without volatile keys, for comparisons between runs."""
    return {k: v for k, v in manifest.items() if k not in VOLATILE_KEYS}


class Staging:
    """Write outputs into a scratch directory and publish them only on success.

    On failure the scratch directory is removed, and so is the output
    directory if this run created it and it is still empty.
    """

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.created = not self.out_dir.exists()
        self.path: Path | None = None

    def __enter__(self) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.path = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir))
        return self.path

    def __exit__(self, exc_type, exc, tb):
        assert self.path is not None
        if exc_type is None:
            for item in sorted(self.path.rglob("*"), key=lambda p: len(p.parts)):
                if item.is_file():
                    dest = self.out_dir / item.relative_to(self.path)
                    dest.parent.mkdir(parents=True, exist_ok=True)
                    item.replace(dest)
            shutil.rmtree(self.path, ignore_errors=True)
            return False
        shutil.rmtree(self.path, ignore_errors=True)
        if self.created and self.out_dir.exists() and not any(self.out_dir.iterdir()):
            self.out_dir.rmdir()
        return False
