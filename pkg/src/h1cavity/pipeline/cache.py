"""Content-addressed store of ring-down results."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from h1cavity import ENGINE_VERSION
from h1cavity.fdtd.io import load_ringdown, save_ringdown

CACHE_ENV = "H1CAVITY_CACHE"


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "h1cavity"


def cache_key(design, resolution, orientation, params=None) -> str:
    """sha256 of the canonical JSON of everything that determines a ring-down."""
    doc = {
        "design": design.to_dict(),
        "resolution": int(resolution),
        "orientation": orientation,
        "engine": ENGINE_VERSION,
        "params": params or {},
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode()).hexdigest()


class ResultCache:
    """Directory of ``<key>.npz`` ring-down archives plus ``<key>.json`` descriptors."""

    def __init__(self, root=None):
        self.root = Path(root) if root is not None else default_cache_dir()
        self.root.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def path(self, key) -> Path:
        return self.root / f"{key}.npz"

    def __contains__(self, key) -> bool:
        return self.path(key).exists()

    def get(self, key):
        p = self.path(key)
        if not p.exists():
            self.misses += 1
            return None
        self.hits += 1
        return load_ringdown(p)

    def put(self, key, result, descriptor=None) -> None:
        save_ringdown(result, self.path(key))
        if descriptor is not None:
            (self.root / f"{key}.json").write_text(json.dumps(descriptor, sort_keys=True, indent=1, default=float))

    def get_or_run(self, design, resolution, orientation, runner, params=None):
        key = cache_key(design, resolution, orientation, params)
        hit = self.get(key)
        if hit is not None:
            return hit
        result = runner(design, resolution, orientation, **(params or {}))
        self.put(key, result, {"design": design.to_dict(), "resolution": resolution,
                               "orientation": orientation, "params": params or {}})
        # hand back what a later hit would return
        return load_ringdown(self.path(key))
