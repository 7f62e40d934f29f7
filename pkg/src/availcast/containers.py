"""Self-describing binary container for trained artifacts.

Layout (little-endian):
  magic (8 bytes) | version u32 | header length u64 | header JSON (UTF-8)
  | tensor payload (float64, row-major, header order) | sha256 (32 bytes)

The header names the artifact type ("cluster" | "stage1" | "stage2"), a
JSON config snapshot, the optional service vocabulary, and the tensor
directory (name + shape). The trailing checksum covers every preceding
byte, so saves are byte-reproducible and loads detect corruption.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"AVCMODL1"
VERSION = 1

ARTIFACT_TYPES = ("cluster", "stage1", "stage2")


class ContainerError(ValueError):
    """Malformed container file."""


class ChecksumError(ContainerError):
    """Stored checksum does not match the content."""


class VersionError(ContainerError):
    """Container written by an unsupported format version."""


class ArtifactTypeError(ContainerError):
    """Container holds a different artifact than the caller expects."""


@dataclass
class ModelContainer:
    artifact_type: str
    config: dict
    tensors: dict[str, np.ndarray] = field(default_factory=dict)
    vocabulary: list[str] | None = None

    def __post_init__(self):
        if self.artifact_type not in ARTIFACT_TYPES:
            raise ContainerError(f"unknown artifact type {self.artifact_type!r}")
        self.tensors = {k: np.asarray(v, dtype=np.float64) for k, v in self.tensors.items()}


def save_model(container: ModelContainer, path) -> None:
    names = sorted(container.tensors)
    header = {
        "artifact_type": container.artifact_type,
        "config": container.config,
        "vocabulary": container.vocabulary,
        "tensors": [
            {"name": n, "shape": list(container.tensors[n].shape)} for n in names
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = bytearray()
    body += MAGIC
    body += struct.pack("<I", VERSION)
    body += struct.pack("<Q", len(header_bytes))
    body += header_bytes
    for n in names:
        body += np.ascontiguousarray(container.tensors[n], dtype="<f8").tobytes()
    digest = hashlib.sha256(bytes(body)).digest()
    with open(path, "wb") as f:
        f.write(bytes(body))
        f.write(digest)


def load_model(path) -> ModelContainer:
    raw = open(path, "rb").read()
    if len(raw) < len(MAGIC) + 4 + 8 + 32:
        raise ContainerError(f"{path}: truncated container")
    if raw[: len(MAGIC)] != MAGIC:
        raise ContainerError(f"{path}: bad magic {raw[:8]!r}")
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch, file is corrupt")
    off = len(MAGIC)
    (version,) = struct.unpack_from("<I", body, off)
    off += 4
    if version != VERSION:
        raise VersionError(f"{path}: unsupported container version {version}")
    (hlen,) = struct.unpack_from("<Q", body, off)
    off += 8
    header = json.loads(body[off : off + hlen].decode())
    off += hlen
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(body, dtype="<f8", count=count, offset=off)
        tensors[entry["name"]] = arr.reshape(shape).astype(np.float64)
        off += 8 * count
    if off != len(body):
        raise ContainerError(f"{path}: {len(body) - off} trailing payload bytes")
    return ModelContainer(
        artifact_type=header["artifact_type"],
        config=header["config"],
        tensors=tensors,
        vocabulary=header["vocabulary"],
    )


def expect_type(container: ModelContainer, artifact_type: str) -> ModelContainer:
    if container.artifact_type != artifact_type:
        raise ArtifactTypeError(
            f"expected a {artifact_type!r} container, got {container.artifact_type!r}"
        )
    return container
