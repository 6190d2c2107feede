"""
Hierarchical seeding: every consumer derives its seed from the run's root seed and
a stable tuple of names.
"""

import zlib

import numpy as np


def derive_seed(root: int, *names: str | int) -> int:
    key = tuple(zlib.crc32(str(name).encode("utf-8")) for name in names)
    return int(np.random.SeedSequence(entropy=root, spawn_key=key).generate_state(1)[0])


def module_seeds(root: int, modules: list[str]) -> dict[str, int]:
    return {name: derive_seed(root, name) for name in modules}
