"""Portable bitmap format for masks plus a PBM/PGM dump for eyeballing.

File layout: the 8-byte magic ``CLRMASK1``, a 4-byte little-endian header
length, a UTF-8 JSON header (``n``, ``n_text``, ``height``, ``width``,
``builder``, ``params``) and finally the row-major packed rows, each padded
to whole bytes, most significant bit first.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from core.errors import MaskError
from core.geometry.grid import TokenGrid
from core.masks.mask import AttentionMask

MAGIC = b"CLRMASK1"


def save_mask(path: Path, mask: AttentionMask) -> None:
    header = json.dumps(
        {
            "n": mask.n,
            "n_text": mask.grid.n_text,
            "height": mask.grid.height,
            "width": mask.grid.width,
            "builder": mask.builder,
            "params": mask.params,
        },
        sort_keys=True,
    ).encode("utf-8")
    with Path(path).open("wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        f.write(np.ascontiguousarray(mask.bits).tobytes())


def load_mask(path: Path) -> AttentionMask:
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise MaskError(f"{path} is not a mask bitmap")
    offset = len(MAGIC)
    try:
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        header = json.loads(data[offset : offset + length].decode("utf-8"))
        offset += length
        grid = TokenGrid(header["n_text"], header["height"], header["width"])
        n = int(header["n"])
    except (struct.error, KeyError, ValueError) as exc:
        raise MaskError(f"{path} has a malformed header: {exc}") from exc
    row_bytes = (n + 7) // 8
    payload = np.frombuffer(data, dtype=np.uint8, offset=offset)
    if payload.size != n * row_bytes:
        raise MaskError(
            f"{path} payload holds {payload.size} bytes, expected {n * row_bytes}"
        )
    return AttentionMask(
        n,
        payload.reshape(n, row_bytes).copy(),
        grid,
        header.get("builder", "custom"),
        header.get("params", {}),
    )


def write_pbm(path: Path, mask: AttentionMask) -> None:
    """Binary PBM where black pixels mark attended pairs."""

    with Path(path).open("wb") as f:
        f.write(f"P4\n{mask.n} {mask.n}\n".encode("ascii"))
        f.write(np.ascontiguousarray(mask.bits).tobytes())


def write_pgm(path: Path, weights: np.ndarray) -> None:
    """8-bit PGM of a non-negative map, scaled so the maximum is white."""

    weights = np.asarray(weights, dtype=np.float64)
    top = weights.max() if weights.size else 0.0
    scaled = np.zeros_like(weights) if top <= 0 else weights / top
    pixels = np.clip(np.round(scaled * 255.0), 0, 255).astype(np.uint8)
    rows, cols = pixels.shape
    with Path(path).open("wb") as f:
        f.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())
