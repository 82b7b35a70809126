"""Strict NPY v1.0 tensor interchange and corpus manifests.

The on-disk tensor format is a deliberately narrow subset of NPY v1.0:
little-endian f32/f64, C order, 1-3 axes. Anything else is rejected at
read time rather than converted, so a file that parses here is guaranteed
to round-trip bit-identically.
"""

import ast
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"\x93NUMPY\x01\x00"
_DESCRS = {"<f4": np.float32, "<f8": np.float64}

DEFAULT_FRAME_SHIFT_MS = 10.0
DEFAULT_FRAME_OFFSET_MS = 12.5


def _check_tensor(arr):
    if arr.dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported dtype {arr.dtype}: only f32/f64 tensors are written")
    if not 1 <= arr.ndim <= 3:
        raise ValueError(f"tensor must have 1-3 axes, got {arr.ndim}")
    if any(n < 1 for n in arr.shape):
        raise ValueError(f"every axis must be >= 1, got shape {arr.shape}")


def write_tensor(path, tensor):
    """Write ``tensor`` (f32/f64 array-like, 1-3 axes) as strict NPY v1.0."""
    arr = np.ascontiguousarray(tensor)
    _check_tensor(arr)
    descr = "<f4" if arr.dtype == np.float32 else "<f8"
    if arr.ndim == 1:
        shape_txt = f"({arr.shape[0]},)"
    else:
        shape_txt = "(" + ", ".join(str(n) for n in arr.shape) + ")"
    header = f"{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape_txt}, }}"
    # magic(8) + hlen(2) + header + '\n' padded so the payload starts on a
    # 64-byte boundary
    total = len(MAGIC) + 2 + len(header) + 1
    pad = (64 - total % 64) % 64
    header = header + " " * pad + "\n"
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", len(header)))
        f.write(header.encode("latin1"))
        f.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes(order="C"))


def read_tensor(path):
    """Read a strict-subset NPY file; rejects anything outside the subset."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < len(MAGIC) + 2 or blob[:6] != MAGIC[:6]:
        raise ValueError(f"{path}: not an NPY file (bad magic)")
    if blob[6:8] != MAGIC[6:8]:
        raise ValueError(f"{path}: unsupported NPY version {blob[6]}.{blob[7]} (only 1.0)")
    (hlen,) = struct.unpack("<H", blob[8:10])
    if len(blob) < 10 + hlen:
        raise ValueError(f"{path}: truncated header")
    try:
        header = ast.literal_eval(blob[10 : 10 + hlen].decode("latin1"))
    except (ValueError, SyntaxError) as exc:
        raise ValueError(f"{path}: malformed header: {exc}") from None
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise ValueError(f"{path}: malformed header dict")
    if header["fortran_order"] is not False:
        raise ValueError(f"{path}: unsupported layout (fortran_order must be False)")
    descr = header["descr"]
    if descr not in _DESCRS:
        raise ValueError(f"{path}: unsupported dtype descr {descr!r} (only '<f4'/'<f8')")
    shape = header["shape"]
    if (
        not isinstance(shape, tuple)
        or not 1 <= len(shape) <= 3
        or any(not isinstance(n, int) or n < 1 for n in shape)
    ):
        raise ValueError(f"{path}: unsupported shape {shape!r} (1-3 axes, each >= 1)")
    dtype = np.dtype(_DESCRS[descr]).newbyteorder("<")
    count = int(np.prod(shape))
    payload = blob[10 + hlen :]
    if len(payload) != count * dtype.itemsize:
        raise ValueError(
            f"{path}: payload is {len(payload)} bytes, expected {count * dtype.itemsize}"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
    return arr.astype(arr.dtype.newbyteorder("="), copy=True)


@dataclass
class ManifestEntry:
    utterance_id: str
    activations: str
    phn: str | None = None
    wav: str | None = None


@dataclass
class CorpusManifest:
    entries: list = field(default_factory=list)
    frame_shift_ms: float = DEFAULT_FRAME_SHIFT_MS
    frame_offset_ms: float = DEFAULT_FRAME_OFFSET_MS
    root: Path = field(default_factory=Path)

    def __post_init__(self):
        if self.frame_shift_ms <= 0:
            raise ValueError(f"frame_shift_ms must be > 0, got {self.frame_shift_ms}")
        seen = set()
        for e in self.entries:
            if e.utterance_id in seen:
                raise ValueError(f"duplicate utterance id {e.utterance_id!r}")
            seen.add(e.utterance_id)

    def ids(self):
        return [e.utterance_id for e in self.entries]

    def path(self, relative):
        return self.root / relative


def read_manifest(path):
    """Parse a corpus manifest JSON file; relative paths resolve against its directory."""
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if "utterances" not in doc:
        raise ValueError(f"{path}: manifest missing 'utterances'")
    entries = []
    for i, rec in enumerate(doc["utterances"]):
        for key in ("id", "activations"):
            if key not in rec:
                raise ValueError(f"{path}: utterance #{i} missing required field {key!r}")
        entries.append(
            ManifestEntry(
                utterance_id=rec["id"],
                activations=rec["activations"],
                phn=rec.get("phn"),
                wav=rec.get("wav"),
            )
        )
    return CorpusManifest(
        entries=entries,
        frame_shift_ms=float(doc.get("frame_shift_ms", DEFAULT_FRAME_SHIFT_MS)),
        frame_offset_ms=float(doc.get("frame_offset_ms", DEFAULT_FRAME_OFFSET_MS)),
        root=path.parent,
    )


def write_manifest(path, manifest):
    doc = {
        "frame_shift_ms": manifest.frame_shift_ms,
        "frame_offset_ms": manifest.frame_offset_ms,
        "utterances": [
            {
                "id": e.utterance_id,
                "activations": e.activations,
                **({"phn": e.phn} if e.phn else {}),
                **({"wav": e.wav} if e.wav else {}),
            }
            for e in manifest.entries
        ],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
