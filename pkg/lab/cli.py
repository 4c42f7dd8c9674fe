"""Command line of the lab: ``python -m lab <command> [flags]``.

Every flag writes into a dotted destination (``model.dim``,
``distill.steps``) that mirrors :class:`~lab.config.RunConfig`; flags left
unset stay ``None`` so that config-file values and defaults show through.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

from core.attention import METHOD_NAMES
from core.errors import ConfigError, GeometryError, LabError, PlanError
from core.settings import load_env, log_level
from lab.commands import COMMAND_TABLE
from lab.config import resolve_config

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(message)s"
USAGE_ERRORS = (ConfigError, GeometryError, PlanError)


class LabArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as :class:`ConfigError`."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def _list_of(kind: Callable[[str], Any]) -> Callable[[str], list[Any]]:
    def parse(text: str) -> list[Any]:
        try:
            return [kind(part) for part in text.split(",") if part.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"not a comma-separated list: {text!r}") from exc

    parse.__name__ = f"{kind.__name__}_list"
    return parse


int_list = _list_of(int)
float_list = _list_of(float)
str_list = _list_of(str)


def _common(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run")
    group.add_argument("--config", type=Path, help="JSON or TOML file with settings")
    group.add_argument("--seed", type=int, help="seed of every random draw (env: LAB_SEED)")
    group.add_argument("--out", type=Path, help="report path; the suffix picks the format")
    group.add_argument("--format", choices=("csv", "json"), help="report format for --out")
    group.add_argument(
        "-v", "--verbose", action="store_true", default=None, help="log at DEBUG level"
    )
    group.add_argument(
        "-q", "--quiet", action="store_true", default=None, help="log warnings only"
    )


def _grid(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("token grid")
    group.add_argument("--H", "--height", dest="height", type=int, help="image rows")
    group.add_argument("--W", "--width", dest="width", type=int, help="image columns")
    group.add_argument("--n-text", dest="n_text", type=int, help="number of text tokens")


def _method(parser: argparse.ArgumentParser, *aliases: str) -> None:
    group = parser.add_argument_group("attention pattern")
    group.add_argument("--method", *aliases, dest="method", help="attention method or mask")
    group.add_argument("--r", type=float, help="CLEAR radius (also the default stride)")
    group.add_argument("--half-width", dest="half_width", type=int, help="neighborhood half width")
    group.add_argument("--window", type=int, help="Swin window side")
    group.add_argument("--shift", type=int, help="Swin shift of odd layers")
    group.add_argument("--stride", type=int, help="strided pattern period")
    group.add_argument("--layer", type=int, help="layer index for layer-dependent patterns")
    group.add_argument("--down-factor", dest="down_factor", type=int, help="agent pooling factor")
    group.add_argument("--n-slots", dest="n_slots", type=int, help="number of slots")
    group.add_argument("--bias", type=float, help="sigmoid attention bias (default -ln n)")
    group.add_argument("--channels", type=int, help="head width of random inputs")


def _model(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("toy model")
    group.add_argument("--dim", dest="model.dim", type=int, help="hidden width")
    group.add_argument("--heads", dest="model.n_heads", type=int, help="attention heads")
    group.add_argument("--blocks", dest="model.n_blocks", type=int, help="transformer blocks")
    group.add_argument("--rope-base", dest="model.rope_base", type=float, help="RoPE base")
    group.add_argument("--ntk-factor", dest="model.ntk_factor", type=float, help="NTK scaling")
    group.add_argument(
        "--logit-scale", dest="model.logit_scale", type=float, help="attention logit factor"
    )


def _teacher(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("teacher and data")
    group.add_argument("--teacher-ckpt", dest="teacher_ckpt", type=Path, help="teacher checkpoint")
    group.add_argument(
        "--teacher-steps", dest="teacher_steps", type=int, help="pretraining steps of a new teacher"
    )
    group.add_argument("--out-ckpt", dest="out_ckpt", type=Path, help="checkpoint to write")
    group.add_argument("--dataset-size", dest="dataset_size", type=int, help="training samples")
    group.add_argument(
        "--sampler-steps", dest="sampler_steps", type=int, help="Euler steps per teacher sample"
    )


def _distill(parser: argparse.ArgumentParser, steps_flag: str = "--steps") -> None:
    group = parser.add_argument_group("distillation")
    group.add_argument(steps_flag, dest="distill.steps", type=int, help="optimisation steps")
    group.add_argument("--batch-size", dest="distill.batch_size", type=int, help="batch size")
    group.add_argument("--lr", dest="distill.learning_rate", type=float, help="Adam step size")
    group.add_argument("--alpha", dest="distill.alpha", type=float, help="L_pred weight")
    group.add_argument("--beta", dest="distill.beta", type=float, help="L_attn weight")
    group.add_argument(
        "--attn-layers", dest="distill.attn_loss_layers", type=int_list, help="L_attn layers"
    )
    group.add_argument("--log-every", dest="distill.log_every", type=int, help="logging period")


def build_parser() -> LabArgumentParser:
    parser = LabArgumentParser(
        prog="lab", description="Local attention masks, cost tables and toy experiments"
    )
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("mask", help="build a mask and print its statistics")
    _common(p)
    _grid(p)
    _method(p)
    p.add_argument("--stats", action="store_true", default=None, help="also compute the image rank")
    p.add_argument("--save-mask", dest="save_mask", type=Path, help="write the packed bitmap")
    p.add_argument("--pbm", type=Path, help="write a PBM image of the mask")

    p = sub.add_parser("flops", help="attention cost table")
    _common(p)
    p.add_argument("--preset", choices=("flux",), help="use the FLUX constants")
    p.add_argument("--resolutions", type=int_list, help="pixel resolutions, e.g. 1024,2048")
    p.add_argument("--radii", type=float_list, help="CLEAR radii, e.g. 8,16,32")
    p.add_argument("--neighborhood", type=int_list, help="neighborhood half widths")
    p.add_argument("--swin", type=int_list, help="Swin window sides")
    p.add_argument("--strided", type=int_list, help="strided periods")
    p.add_argument("--c", dest="flux.c", type=int, help="attention width")
    p.add_argument("--text-tokens", dest="flux.n_text", type=int, help="text tokens")
    p.add_argument("--patch", dest="flux.patch", type=int, help="pixels per token side")

    p = sub.add_parser("rank", help="attention-map rank under RoPE clipping")
    _common(p)
    _grid(p)
    _model(p)
    _teacher(p)
    p.add_argument("--r", type=float, help="radius of the locality share")
    p.add_argument("--clip-radii", dest="clip_radii", type=float_list, help="clip radii")

    p = sub.add_parser("attn-bench", help="compare every attention method with full attention")
    _common(p)
    _grid(p)
    _method(p)
    p.add_argument(
        "--methods", type=str_list, help=f"subset of {','.join(METHOD_NAMES)}"
    )

    p = sub.add_parser("distill", help="distil a sparse student from the toy teacher")
    _common(p)
    _grid(p)
    _method(p, "--mask-method")
    _model(p)
    _distill(p)
    _teacher(p)
    p.add_argument("--data", choices=("teacher", "external"), help="training data source")

    p = sub.add_parser("parallel", help="simulate patch-parallel CLEAR attention")
    _common(p)
    _grid(p)
    _model(p)
    _teacher(p)
    p.add_argument("--N", "--workers", dest="workers", type=int, help="simulated workers")
    p.add_argument("--r", type=float, help="CLEAR radius")
    p.add_argument("--channels", type=int, help="head width of random inputs")
    p.add_argument("--steps", type=int, help="Euler steps of an --inference run")
    p.add_argument("--text-mode", dest="text_mode", choices=("exact", "average"))
    p.add_argument(
        "--inference", action="store_true", default=None, help="run the toy model end to end"
    )
    p.add_argument("--ledger", type=Path, help="message ledger CSV")
    p.add_argument("--divergence", type=Path, help="per-step divergence CSV")
    p.add_argument("--jitter", type=float, help="max random delay before each send (s)")

    p = sub.add_parser("data-gen", help="sample a training set from the teacher")
    _common(p)
    _grid(p)
    _method(p, "--mask-method")
    _model(p)
    _distill(p, "--distill-steps")
    _teacher(p)
    p.add_argument(
        "--compare", action="store_true", default=None, help="distil on teacher and external data"
    )
    p.add_argument("--curves", type=Path, help="loss-curve CSV of --compare")

    return parser


def configure_logging(verbose: bool | None, quiet: bool | None) -> None:
    if verbose:
        level = "DEBUG"
    elif quiet:
        level = "WARNING"
    else:
        level = log_level()
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.getLogger().setLevel(level)


def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, run the command and return the process exit code."""

    try:
        args = vars(build_parser().parse_args(argv))
        command = args.pop("command")
        config_file = args.pop("config")
        configure_logging(args.pop("verbose"), args.pop("quiet"))
        cfg = resolve_config(command, args, config_file)
        logger.info("running %s (seed %d)", command, cfg.seed)
        COMMAND_TABLE[command](cfg)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (LabError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


def main() -> None:  # pragma: no cover - CLI entry point
    load_env()
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover - script behaviour
    main()
