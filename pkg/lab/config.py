"""Run configuration of the command line.

Values are resolved in four layers, later ones winning: built-in defaults,
``LAB_*`` environment variables, a JSON or TOML ``--config`` file and the
command-line flags.  The resolved model is echoed into every report.
"""

from __future__ import annotations

import json
import logging
import tomllib
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, ValidationError

from core.errors import ConfigError
from core.flops.cost import FluxConfig
from core.settings import default_seed
from core.toy_dit.config import DistillConfig, ToyDitConfig

logger = logging.getLogger(__name__)

COMMANDS = ("mask", "flops", "rank", "attn-bench", "distill", "parallel", "data-gen")


class RunConfig(BaseModel):
    """Everything one command run depends on."""

    model_config = ConfigDict(extra="forbid")

    command: Literal["mask", "flops", "rank", "attn-bench", "distill", "parallel", "data-gen"]
    seed: int = 0
    out: Path | None = None
    format: Literal["csv", "json"] | None = None

    # token grid
    height: int = Field(default=8, ge=1)
    width: int = Field(default=8, ge=1)
    n_text: int = Field(default=4, ge=0)

    # attention pattern and method parameters
    method: str = "clear"
    r: float = Field(default=3.0, gt=0)
    half_width: int | None = Field(default=None, ge=0)
    window: int | None = Field(default=None, ge=1)
    shift: int = Field(default=0, ge=0)
    stride: int | None = Field(default=None, ge=1)
    layer: int = Field(default=0, ge=0)
    down_factor: int = Field(default=2, ge=1)
    n_slots: int = Field(default=8, ge=1)
    bias: float | None = None
    channels: int = Field(default=16, gt=0)
    methods: list[str] | None = None
    stats: bool = False
    save_mask: Path | None = None
    pbm: Path | None = None

    # cost tables
    preset: Literal["flux"] | None = None
    flux: FluxConfig = FluxConfig()
    resolutions: list[int] = [1024, 2048, 4096, 8192]
    radii: list[float] = [8.0, 16.0, 32.0]
    neighborhood: list[int] = []
    swin: list[int] = []
    strided: list[int] = []

    # toy model, teacher and distillation
    model: ToyDitConfig = ToyDitConfig()
    distill: DistillConfig = DistillConfig()
    teacher_steps: int = Field(default=300, ge=0)
    teacher_ckpt: Path | None = None
    out_ckpt: Path | None = None
    dataset_size: int = Field(default=64, gt=0)
    sampler_steps: int = Field(default=20, ge=1)
    data: Literal["teacher", "external"] = "teacher"
    compare: bool = False
    curves: Path | None = None
    clip_radii: list[PositiveFloat] = [2.0, 4.0, 8.0]

    # patch-parallel runs
    workers: int = Field(default=2, ge=1)
    steps: int = Field(default=4, ge=1)
    text_mode: Literal["exact", "average"] = "exact"
    inference: bool = False
    ledger: Path | None = None
    divergence: Path | None = None
    jitter: float = Field(default=0.0, ge=0)

    def method_params(self, method: str | None = None) -> dict[str, Any]:
        """Parameters of an attention method, mask builders included.

        Unset pattern parameters fall back to values derived from ``r``.
        """

        method = method or self.method
        if method == "strided":
            return {"r": self.stride if self.stride is not None else int(self.r)}
        if method == "neighborhood":
            return {"half_width": self.half_width if self.half_width is not None else int(self.r)}
        if method == "swin":
            return {"window": self.window if self.window is not None else 4, "shift": self.shift}
        if method == "clear":
            return {"r": self.r}
        if method == "sigmoid":
            return {"bias": self.bias}
        if method == "agent":
            return {"down_factor": self.down_factor}
        if method == "slot":
            return {"n_slots": self.n_slots}
        return {}

    def header(self) -> dict[str, Any]:
        return self.model_dump(mode="json", exclude_none=True)


def read_config_file(path: Path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config file {path} is not valid: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a table of settings")
    return data


def _merge(base: dict[str, Any], updates: dict[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _nested(flat: dict[str, Any]) -> dict[str, Any]:
    """Turn ``{"model.dim": 32}`` into ``{"model": {"dim": 32}}``."""

    out: dict[str, Any] = {}
    for key, value in flat.items():
        node = out
        *parents, leaf = key.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    return out


def resolve_config(
    command: str, flags: dict[str, Any], config_file: Path | None = None
) -> RunConfig:
    """Merge defaults, environment, config file and explicitly given flags."""

    layers: dict[str, Any] = {"seed": default_seed()}
    if config_file is not None:
        file_values = read_config_file(config_file)
        file_values.pop("command", None)
        layers = _merge(layers, file_values)
    given = _nested({k: v for k, v in flags.items() if v is not None})
    if given.get("preset", layers.get("preset")) == "flux":
        # the preset replaces file values; explicit flags still apply
        layers["flux"] = FluxConfig().model_dump()
    layers = _merge(layers, given)
    layers["command"] = command
    try:
        config = RunConfig(**layers)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"invalid setting {where}: {first['msg']}") from exc
    logger.debug("resolved config: %s", config.header())
    return config
