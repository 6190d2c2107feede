"""
Single-file binary container for checkpoints and float image stacks.

Layout: 4-byte magic, little-endian uint32 header length, UTF-8 JSON header, then
little-endian float32 blocks in header order.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from src.errors import ViewfixError

MAGIC = b"DFX1"
_FLOAT = np.dtype("<f4")


class ContainerError(ViewfixError):
    """Container file is malformed or of an unexpected kind."""

    pass


@dataclass
class Container:
    """Decoded container: kind tag, free-form metadata and named float32 blocks."""

    kind: str
    metadata: dict[str, Any] = field(default_factory=dict)
    blocks: dict[str, np.ndarray] = field(default_factory=dict)


def write_container(path: str | Path, kind: str, metadata: dict[str, Any], blocks: dict[str, np.ndarray]) -> Path:
    """Write named arrays as float32 blocks behind a JSON header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    table = []
    payload = []
    offset = 0
    for name, array in blocks.items():
        data = np.ascontiguousarray(np.asarray(array, dtype=_FLOAT))
        table.append({"name": name, "shape": list(data.shape), "offset": offset, "count": int(data.size)})
        payload.append(data.tobytes())
        offset += data.nbytes

    header = json.dumps({"kind": kind, "metadata": metadata, "blocks": table}, sort_keys=True).encode("utf-8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for chunk in payload:
            f.write(chunk)
    tmp.replace(path)
    return path


def read_container(path: str | Path, expected_kind: str | None = None) -> Container:
    """Read a container, optionally checking its kind tag."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ContainerError(f"Not a container file: {path}")
    (header_len,) = struct.unpack("<I", raw[4:8])
    header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    if expected_kind is not None and header["kind"] != expected_kind:
        raise ContainerError(f"Expected container kind '{expected_kind}', found '{header['kind']}'", {"path": str(path)})

    base = 8 + header_len
    blocks = {}
    for entry in header["blocks"]:
        start = base + entry["offset"]
        data = np.frombuffer(raw, dtype=_FLOAT, count=entry["count"], offset=start)
        blocks[entry["name"]] = data.reshape(entry["shape"]).copy()
    return Container(kind=header["kind"], metadata=header.get("metadata", {}), blocks=blocks)
