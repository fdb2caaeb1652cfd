"""Raster grids and file formats.

In-memory conventions (all grids are 2-D row-major numpy arrays):

- gray image: float64, values in [0, 255] (8-bit files load losslessly)
- binary mask: uint8, values in {0, 1}
- probability map: float64, values in [0, 1]

On disk everything is binary PGM (P5): magic ``P5``, ASCII width, height
and maxval separated by whitespace (``#`` comments allowed before the
maxval), one whitespace byte, then width*height raw bytes. maxval must
be 255. Probability maps are stored as PGM and divided by 255 on load.

Dataset manifests are UTF-8 CSV files with the header
``image_path,mask_path,split`` (LF or CRLF); relative paths resolve
against the manifest's directory.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError

_SPLITS = ("train", "test")
_MANIFEST_HEADER = ["image_path", "mask_path", "split"]


@dataclass(frozen=True)
class ManifestEntry:
    image_path: str
    mask_path: str
    split: str


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]
    base_dir: Path

    def image_file(self, entry: ManifestEntry) -> Path:
        return self.base_dir / entry.image_path

    def mask_file(self, entry: ManifestEntry) -> Path:
        return self.base_dir / entry.mask_path

    def split_entries(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]


def _read_pgm_header(data: bytes, path: Path) -> tuple[int, int, int]:
    """Parse the P5 header; returns (width, height, payload offset)."""
    pos = 0
    n = len(data)

    def next_token() -> bytes:
        nonlocal pos
        while pos < n:
            c = data[pos : pos + 1]
            if c == b"#":
                while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        return data[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {magic!r})")
    try:
        width = int(next_token())
        height = int(next_token())
        maxval = int(next_token())
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric PGM header field") from exc
    if width < 1 or height < 1:
        raise FormatError(f"{path}: bad dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"{path}: unsupported maxval {maxval} (need 255)")
    if pos >= n or not data[pos : pos + 1].isspace():
        raise FormatError(f"{path}: missing whitespace after maxval")
    pos += 1
    return width, height, pos


def _load_pgm_bytes(path: str | Path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if not data:
        raise FormatError(f"{path}: empty file")
    width, height, offset = _read_pgm_header(data, path)
    need = width * height
    payload = data[offset : offset + need]
    if len(payload) < need:
        raise FormatError(f"{path}: truncated payload "
                          f"({len(payload)} of {need} bytes)")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width)


def load_gray(path: str | Path) -> np.ndarray:
    """Load a P5 PGM as a float64 grid with values in [0, 255]."""
    return _load_pgm_bytes(path).astype(np.float64)


def load_mask(path: str | Path) -> np.ndarray:
    """Load a P5 PGM restricted to {0, 255} as a uint8 {0, 1} mask."""
    raw = _load_pgm_bytes(path)
    bad = (raw != 0) & (raw != 255)
    if bad.any():
        value = int(raw[bad][0])
        raise FormatError(f"{path}: mask pixel value {value} not in {{0, 255}}")
    return (raw == 255).astype(np.uint8)


def load_prob(path: str | Path) -> np.ndarray:
    """Load a P5 PGM as probabilities in [0, 1] (values divided by 255)."""
    return _load_pgm_bytes(path).astype(np.float64) / 255.0


def _save_pgm(path: str | Path, data: np.ndarray) -> None:
    height, width = data.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.astype(np.uint8).tobytes())


def save_gray(path: str | Path, image: np.ndarray) -> None:
    """Write a gray grid as P5, rounding and clipping to [0, 255]."""
    _save_pgm(path, np.clip(np.rint(image), 0, 255))


def save_mask(path: str | Path, mask: np.ndarray) -> None:
    _save_pgm(path, np.asarray(mask, dtype=np.uint8) * 255)


def save_prob(path: str | Path, prob: np.ndarray) -> None:
    """Write probabilities as P5 (scaled by 255; quantizes to 8 bits)."""
    _save_pgm(path, np.clip(np.rint(np.asarray(prob) * 255.0), 0, 255))


def validate_mask(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise FormatError("mask must be a 2-D grid")
    if not np.isin(mask, (0, 1)).all():
        raise FormatError("mask values must be 0 or 1")
    return mask.astype(np.uint8)


def clamp_prob(prob: np.ndarray) -> np.ndarray:
    """Clamp a probability grid into [0, 1] (predictions arrive from
    external models and may carry rounding spill)."""
    return np.clip(np.asarray(prob, dtype=np.float64), 0.0, 1.0)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Parse a dataset manifest CSV; entries keep file order."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: missing manifest header") from None
        if header != _MANIFEST_HEADER:
            raise FormatError(f"{path}: bad manifest header {header!r}")
        entries = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise FormatError(f"{path}:{lineno}: expected 3 fields")
            image_path, mask_path, split = (field.strip() for field in row)
            if not image_path or not mask_path:
                raise FormatError(f"{path}:{lineno}: empty path")
            if split not in _SPLITS:
                raise FormatError(f"{path}:{lineno}: unknown split {split!r}")
            entries.append(ManifestEntry(image_path, mask_path, split))
    return DatasetManifest(tuple(entries), path.parent)


def save_manifest(path: str | Path, manifest: DatasetManifest) -> None:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_MANIFEST_HEADER)
        for e in manifest.entries:
            writer.writerow([e.image_path, e.mask_path, e.split])
