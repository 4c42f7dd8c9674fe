"""Versioned checkpoint files for toy models.

Layout: the 8-byte magic ``CLRCKPT1``, a 4-byte little-endian header length,
a UTF-8 JSON header (``version``, ``config``, ``mask_method``,
``mask_params`` and the ordered ``tensors`` list of ``{name, shape}``) and
the tensors themselves, row-major little-endian float64, in header order.
"""

from __future__ import annotations

import json
import logging
import struct
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from core.errors import ConfigError
from core.toy_dit.config import ToyDitConfig
from core.toy_dit.model import ToyDit

logger = logging.getLogger(__name__)

MAGIC = b"CLRCKPT1"
VERSION = 1


def save_checkpoint(path: Path, model: ToyDit) -> None:
    names = sorted(model.params)
    header = json.dumps(
        {
            "version": VERSION,
            "config": model.config.model_dump(mode="json"),
            "mask_method": model.mask_method,
            "mask_params": model.mask_params,
            "tensors": [
                {"name": name, "shape": list(model.params[name].shape)} for name in names
            ],
        },
        sort_keys=True,
    ).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for name in names:
            f.write(np.ascontiguousarray(model.params[name], dtype="<f8").tobytes())
    logger.info("saved %d tensors to %s", len(names), path)


def load_checkpoint(path: Path) -> ToyDit:
    data = Path(path).read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise ConfigError(f"{path} is not a toy model checkpoint")
    offset = len(MAGIC)
    try:
        (length,) = struct.unpack_from("<I", data, offset)
        offset += 4
        header = json.loads(data[offset : offset + length].decode("utf-8"))
        offset += length
        if header["version"] != VERSION:
            raise ConfigError(f"{path} has checkpoint version {header['version']}")
        config = ToyDitConfig(**header["config"])
        params = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape))
            tensor = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
            params[entry["name"]] = tensor.reshape(shape).astype(np.float64)
            offset += 8 * count
    except (struct.error, KeyError, ValueError, ValidationError) as exc:
        raise ConfigError(f"{path} is malformed: {exc}") from exc
    if offset != len(data):
        raise ConfigError(f"{path} has {len(data) - offset} trailing bytes")
    return ToyDit(config, params, header["mask_method"], header["mask_params"])
